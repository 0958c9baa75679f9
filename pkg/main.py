"""lookalike command line: ingest, analyze, embed, cluster, query, compare, report, eval-pairs."""
import argparse
import importlib
import logging
import os
import sys

# Add the project root to the Python path BEFORE imports
project_root = os.path.dirname(os.path.abspath(__file__))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from common import config
from common.errors import LookalikeError
from common.utils import setup_logging

logger = logging.getLogger("lookalike")

COMMANDS = {
    "ingest": {"module": "store.ui", "func": "run_ingest"},
    "analyze": {"module": "store.ui", "func": "run_analyze"},
    "embed": {"module": "store.ui", "func": "run_embed"},
    "cluster": {"module": "clustering.ui", "func": "run_cluster"},
    "query": {"module": "clustering.ui", "func": "run_query"},
    "compare": {"module": "clustering.ui", "func": "run_compare"},
    "eval-pairs": {"module": "clustering.ui", "func": "run_eval_pairs"},
    "report": {"module": "vetting.ui", "func": "run_report"},
}


def load_command(name):
    """Resolve a command to its function, importing the module on demand."""
    entry = COMMANDS[name]
    module = importlib.import_module(entry["module"])
    return getattr(module, entry["func"])


def build_parser():
    parser = argparse.ArgumentParser(prog="lookalike", description="Find similarly behaving browser extensions.")
    parser.add_argument("--store", default=config.STORE_DIR, help="store directory")
    parser.add_argument("--params", default=None, help="JSON file overriding pipeline parameters")
    parser.add_argument("--log-level", default=config.LOG_LEVEL, help="DEBUG, INFO, WARNING, ERROR")
    parser.add_argument("--quiet", action="store_true", help="no progress bars, warnings only")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("ingest", help="index packages and metadata")
    p.add_argument("--corpus", required=True)
    p.add_argument("--metadata", required=True)
    p.add_argument("--all-versions", action="store_true", help="keep every metadata row for survival")

    p = sub.add_parser("analyze", help="extract manifest features and API calls")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--static-only", action="store_true")
    mode.add_argument("--dynamic-only", action="store_true")
    p.add_argument("--jobs", type=int, default=None)

    p = sub.add_parser("embed", help="embed feature documents")
    p.add_argument("--external-adapter", default=None, metavar="CMD")
    p.add_argument("--dim", type=int, default=None)

    p = sub.add_parser("cluster", help="PCA + HDBSCAN over the embeddings")
    p.add_argument("--variance", type=float, default=None)
    p.add_argument("--min-cluster-size", type=int, default=None)
    p.add_argument("--min-samples", type=int, default=None)

    p = sub.add_parser("query", help="cluster and nearest neighbours of one extension")
    p.add_argument("id")
    p.add_argument("--top", type=int, default=10)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("compare", help="ground-truth similarity report for two extensions")
    p.add_argument("id_a")
    p.add_argument("id_b")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("report", help="vetting analytics tables and plots")
    p.add_argument("kind", choices=["infringing", "survival", "labels", "triage"])
    p.add_argument("--detections", default=None)
    p.add_argument("--crawl-end", default=None, metavar="DATE")
    p.add_argument("--sample-size", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--top", type=int, default=None)
    p.add_argument("--xlsx", action="store_true")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("eval-pairs", help="accuracy/precision/recall on ground-truth pairs")
    p.add_argument("--pairs", required=True)
    p.add_argument("--json", action="store_true")
    return parser


def dispatch(argv=None):
    """Run one command; returns the exit code (0 ok, 1 pipeline error, 2 usage)."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    setup_logging("WARNING" if args.quiet else args.log_level)
    try:
        params = config.load_params(args.params)
        return int(load_command(args.command)(args, params) or 0)
    except LookalikeError as e:
        print(f"error: {e.describe()}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as e:
        logger.debug("command failed", exc_info=True)
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(dispatch())
