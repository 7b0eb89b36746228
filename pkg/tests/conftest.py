"""Shared fixtures: toy SQLite databases in BIRD layout, configs, transcripts."""
import json
import sqlite3
from pathlib import Path
from typing import Any, Dict, List, Optional

import pytest

from querybot.catalog.indexer import build_value_index
from querybot.catalog.loader import load_database
from querybot.config import PipelineConfig, RetryPolicy

SCHOOLS_SQL = """
CREATE TABLE schools (
    CDSCode TEXT PRIMARY KEY,
    School TEXT,
    County TEXT,
    City TEXT,
    OpenDate TEXT,
    Zip INTEGER
);
CREATE TABLE frpm (
    CDSCode TEXT PRIMARY KEY REFERENCES schools(CDSCode),
    "Enrollment (K-12)" REAL,
    "Free Meal Count (K-12)" REAL,
    "Charter School (Y/N)" INTEGER
);
INSERT INTO schools VALUES
    ('S001', 'Alameda High', 'Alameda', 'Alameda', '1980-09-01', 94501),
    ('S002', 'Berkeley High', 'Alameda', 'Berkeley', '1975-08-15', 94704),
    ('S003', 'Fremont Elementary', 'Alameda', 'Fremont', '2001-09-05', 94536),
    ('S004', 'Lincoln Middle', 'Fresno', 'Fresno', '1990-01-10', 93701),
    ('S005', 'Roosevelt High', 'Fresno', 'Fresno', '2005-08-20', 93702),
    ('S006', 'Mission Charter', 'San Francisco', 'San Francisco', NULL, 94110);
INSERT INTO frpm VALUES
    ('S001', 1200.0, 300.0, 0),
    ('S002', 3000.0, 900.0, 0),
    ('S003', 450.0, 225.0, 0),
    ('S004', 800.0, 560.0, 0),
    ('S005', 1500.0, 150.0, 1),
    ('S006', 500.0, NULL, 1);
"""

SHOP_SQL = """
CREATE TABLE products (id INTEGER PRIMARY KEY, name TEXT, price REAL, category TEXT);
CREATE TABLE orders (
    id INTEGER PRIMARY KEY,
    product_id INTEGER REFERENCES products(id),
    quantity INTEGER,
    order_date TEXT
);
INSERT INTO products VALUES
    (1, 'Red Kettle', 25.5, 'kitchen'),
    (2, 'Blue Mug', 7.25, 'kitchen'),
    (3, 'Desk Lamp', 40.0, 'office'),
    (4, 'Stapler', 12.0, 'office');
INSERT INTO orders VALUES
    (1, 1, 2, '2023-01-05'),
    (2, 2, 10, '2023-01-06'),
    (3, 3, 1, '2023-02-11'),
    (4, 2, 500, '2023-03-01');
"""

SCHOOLS_DESCRIPTIONS = {
    "schools.csv": [
        ["original_column_name", "column_name", "column_description", "data_format", "value_description"],
        ["CDSCode", "CDSCode", "California school identifier", "text", ""],
        ["County", "County", "county name", "text", ""],
        ["OpenDate", "open date", "the date the school opened", "date", "YYYY-MM-DD"],
        ["Zip", "zip", "postal code of the school address", "integer", ""],
    ],
    "frpm.csv": [
        ["original_column_name", "column_name", "column_description", "data_format", "value_description"],
        ["Enrollment (K-12)", "Enrollment (K-12)", "number of enrolled students in grades K to 12", "real", ""],
        ["Free Meal Count (K-12)", "Free Meal Count (K-12)", "students eligible for free meals", "real", ""],
        ["Charter School (Y/N)", "Charter School (Y/N)", "whether the school is a charter", "integer",
         "0: not a charter school; 1: charter school"],
        ["NoSuchColumn", "", "dangling row", "", ""],
    ],
}


def build_sqlite(path: Path, script: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    conn = sqlite3.connect(path)
    try:
        conn.executescript(script)
        conn.commit()
    finally:
        conn.close()
    return path


def write_descriptions(db_dir: Path, files: Dict[str, List[List[str]]]) -> None:
    out = db_dir / "database_description"
    out.mkdir(parents=True, exist_ok=True)
    for name, rows in files.items():
        text = "\n".join(",".join(f'"{c}"' if "," in c else c for c in row) for row in rows) + "\n"
        (out / name).write_text(text, encoding="utf-8")


@pytest.fixture
def db_root(tmp_path: Path) -> Path:
    """Two databases in BIRD layout: california_schools (with descriptions) and toy_shop."""
    root = tmp_path / "databases"
    schools = root / "california_schools"
    build_sqlite(schools / "california_schools.sqlite", SCHOOLS_SQL)
    write_descriptions(schools, SCHOOLS_DESCRIPTIONS)
    build_sqlite(root / "toy_shop" / "toy_shop.sqlite", SHOP_SQL)
    return root


@pytest.fixture
def schools_dir(db_root: Path) -> Path:
    return db_root / "california_schools"


@pytest.fixture
def schools_db(schools_dir: Path) -> Path:
    return schools_dir / "california_schools.sqlite"


@pytest.fixture
def shop_db(db_root: Path) -> Path:
    return db_root / "toy_shop" / "toy_shop.sqlite"


@pytest.fixture
def schools_catalog(schools_dir: Path):
    catalog = load_database(schools_dir)
    return catalog.with_index(build_value_index(catalog, 128, 42))


@pytest.fixture
def shop_catalog(shop_db: Path):
    catalog = load_database(shop_db)
    return catalog.with_index(build_value_index(catalog, 128, 42))


@pytest.fixture
def config(tmp_path: Path) -> PipelineConfig:
    return PipelineConfig(
        cache_dir=str(tmp_path / "cache"),
        retry=RetryPolicy(max_attempts=3, base_delay_s=0.0, max_delay_s=0.0),
        workers=1,
    )


# ── Transcript helpers ────────────────────────────────────────────────────────

def uqu_reply(
    main: List[str],
    sub: Optional[List[str]] = None,
    objects: Optional[List[str]] = None,
    implementation: Optional[Dict[str, Any]] = None,
) -> str:
    return json.dumps({
        "main_task": main,
        "sub_task": sub or [],
        "object": objects or [],
        "implementation": implementation or {},
    })


def sql_reply(sql: str) -> str:
    return f"Here is the query.\n```sql\n{sql}\n```"


def write_transcript(path: Path, rules: List[Dict[str, Any]]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps({"rules": rules}, indent=2), encoding="utf-8")
    return path
