"""
querybot command line.

Usage:
  # Build catalogs + value indexes for every database under a root
  python main.py index --db-root data/dev_databases

  # Ask one question (scripted responses, no network)
  python main.py ask --db-id california_schools "How many schools are in Alameda?" --mock transcript.json

  # Show the prompts a question would start with, calling nothing
  python main.py ask --db-id california_schools "How many schools are in Alameda?" --dry-run

  # Execution accuracy on BIRD dev, then a revision-threshold sweep
  python main.py eval data/dev.json --db-root data/dev_databases --out runs/dev
  python main.py eval data/dev.json --db-root data/dev_databases --out runs/sweep --sweep-thresholds 1-5

  # Question-understanding benchmark on the DeKeyNLU test split
  python main.py bench-nlu data/dekeynlu.json --out runs/nlu

Settings come from --config (JSON, ${VAR} interpolation) and .env; flags win.
"""
import argparse
import logging
import sys
from typing import Any, Dict, List, Optional

from querybot import __version__
from querybot.commands import (
    EXIT_FAILURE,
    cmd_ask,
    cmd_bench_nlu,
    cmd_eval,
    cmd_export_finetune,
    cmd_index,
)
from querybot.config import PipelineConfig, load_config, settings
from querybot.errors import ConfigError

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="JSON run configuration (default: $QUERYBOT_CONFIG)")
    common.add_argument("--db-root", default=None, help="Directory of BIRD/Spider database folders")
    common.add_argument("--scorer", choices=["minhash", "bm25"], default=None, help="First-stage retrieval scorer")
    common.add_argument("--revision-threshold", type=int, default=None, help="Max revision rounds, 1-5")
    common.add_argument("--mock", default=None, metavar="TRANSCRIPT", help="Serve every model call from a transcript")
    common.add_argument("--seed", type=int, default=None, help="MinHash seed")
    common.add_argument("--cache-dir", default=None, help="Catalogs, responses and eval results (default: .querybot_cache)")
    common.add_argument("--workers", type=int, default=None, help="Concurrent items during eval")
    common.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING (default: $QUERYBOT_LOG_LEVEL)")
    common.add_argument("--dry-run", action="store_true", help="ask: print the prompts and call nothing")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = argparse.ArgumentParser(
        prog="querybot",
        description="Retrieval-augmented text-to-SQL with question understanding and revision.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=__doc__,
    )
    parser.add_argument("--version", action="version", version=f"querybot {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    index = sub.add_parser("index", parents=[common], help="Ingest databases and build value indexes")
    index.add_argument("--out", default=None, help="Artifact directory (default: the cache dir)")

    ask = sub.add_parser("ask", parents=[common], help="Answer one question against one database")
    ask.add_argument("question")
    ask.add_argument("--db-id", required=True)
    ask.add_argument("--hint", default="", help="Evidence / external knowledge")
    ask.add_argument("--trace", default=None, help="Where to write the trace JSON")
    _ablation_flags(ask)

    ev = sub.add_parser("eval", parents=[common], help="Execution accuracy over a BIRD or Spider benchmark")
    ev.add_argument("benchmark", help="Benchmark JSON file or directory")
    ev.add_argument("--split", default="dev")
    ev.add_argument("--out", required=True, help="Report directory")
    ev.add_argument("--limit", type=int, default=None, help="Only the first N items")
    ev.add_argument("--tags", default=None, help="item_id,category CSV of error-analysis tags")
    ev.add_argument("--sweep-thresholds", default=None, metavar="LOW-HIGH", help="Run once per revision threshold")
    _ablation_flags(ev)

    nlu = sub.add_parser("bench-nlu", parents=[common], help="Decomposition + keyword benchmark on DeKeyNLU")
    nlu.add_argument("dekeynlu", help="DeKeyNLU JSON file")
    nlu.add_argument("--split", default="test")
    nlu.add_argument("--out", required=True, help="Report directory")
    nlu.add_argument("--limit", type=int, default=None)
    nlu.add_argument("--no-judge", action="store_true", help="Skip the LLM judge; its columns are omitted")

    ft = sub.add_parser("export-finetune", parents=[common], help="Write DeKeyNLU records as fine-tuning JSONL")
    ft.add_argument("dekeynlu", help="DeKeyNLU JSON file")
    ft.add_argument("--out", required=True, help="Output .jsonl path")
    ft.add_argument("--style", default="chat", help="chat or alpaca")
    ft.add_argument("--split", default="train")
    return parser


def _ablation_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--no-uqu", action="store_true", help="Skip question understanding")
    parser.add_argument("--no-retrieval", action="store_true", help="Give the generator the full schema")
    parser.add_argument("--no-revision", action="store_true", help="Never revise failing SQL")


def config_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """Dotted config keys set by flags; unset flags map to None and are ignored."""
    overrides: Dict[str, Any] = {
        "scorer": args.scorer,
        "revision_threshold": args.revision_threshold,
        "mock_transcript": args.mock,
        "seed": args.seed,
        "cache_dir": args.cache_dir,
        "workers": args.workers,
    }
    if getattr(args, "no_uqu", False):
        overrides["use_uqu"] = False
    if getattr(args, "no_retrieval", False):
        overrides["use_retrieval"] = False
    if getattr(args, "no_revision", False):
        overrides["use_revision"] = False
    if getattr(args, "no_judge", False):
        overrides["judge_enabled"] = False
    return overrides


def configure_logging(level: Optional[str]) -> None:
    name = (level or settings.QUERYBOT_LOG_LEVEL or "INFO").upper()
    logging.basicConfig(level=getattr(logging, name, logging.INFO), format=LOG_FORMAT, stream=sys.stderr)
    logging.getLogger("httpx").setLevel(logging.WARNING)


def dispatch(args: argparse.Namespace, config: PipelineConfig) -> int:
    if args.command == "index":
        if not args.db_root:
            print("error: index needs --db-root")
            return EXIT_FAILURE
        return cmd_index(args.db_root, config, args.out)
    if args.command == "ask":
        return cmd_ask(args.question, args.db_id, config, args.hint, args.db_root, args.dry_run, args.trace)
    if args.command == "eval":
        if not args.db_root:
            print("error: eval needs --db-root")
            return EXIT_FAILURE
        return cmd_eval(args.benchmark, config, args.db_root, args.out, args.split, args.limit, args.tags, args.sweep_thresholds)
    if args.command == "bench-nlu":
        return cmd_bench_nlu(args.dekeynlu, config, args.out, args.split, args.limit)
    return cmd_export_finetune(args.dekeynlu, args.out, args.style, args.split)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        config = load_config(args.config, config_overrides(args))
    except ConfigError as exc:
        print(f"error: {exc}")
        return EXIT_FAILURE
    logger.debug(f"Running '{args.command}' with config {config.model_dump_json()}")
    return dispatch(args, config)


if __name__ == "__main__":
    sys.exit(main())
