"""Build the MinHash value index for a catalog"""
import logging
from typing import List

import numpy as np

from querybot.catalog.models import DatabaseCatalog
from querybot.retrieval.minhash import IndexEntry, MinHashIndex, SIGNATURE_DTYPE, get_hasher

logger = logging.getLogger(__name__)


def build_value_index(catalog: DatabaseCatalog, num_permutations: int = 128, seed: int = 42) -> MinHashIndex:
    """
    One signature per (table, column, value), in catalog order.

    Values whose shingle set is empty are left out; everything else is a pure
    function of (catalog, num_permutations, seed).
    """
    hasher = get_hasher(num_permutations, seed)
    entries: List[IndexEntry] = []
    rows: List[np.ndarray] = []

    for table in catalog.tables:
        for column in table.columns:
            for value in column.sample_values:
                signature = hasher.signature(value)
                if signature is None:
                    continue
                entries.append(IndexEntry(table.name, column.name, value))
                rows.append(signature)

    matrix = np.vstack(rows) if rows else np.empty((0, num_permutations), dtype=SIGNATURE_DTYPE)
    index = MinHashIndex(entries, matrix, num_permutations, seed)
    logger.info(f"[Catalog] '{catalog.db_id}': value index with {len(index)} signatures x {num_permutations}")
    return index
