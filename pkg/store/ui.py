import logging

from common import config
from jsengine.mock_tracer import Budget
from store.corpus_store import EMBED, EXTRACT, FEATURIZE, CorpusIndex, ingest, run_stage
from store.extractor import ExtractOptions

logger = logging.getLogger(__name__)


def print_stage_report(report):
    line = f"{report.stage}: {report.processed} processed, {report.skipped} skipped, {len(report.failed)} failed"
    print(line)
    for ext_id, reason in report.failed:
        print(f"  failed {ext_id}: {reason}")


def run_ingest(args, params):
    """ingest --corpus DIR --metadata FILE"""
    index = ingest(args.corpus, args.metadata, store_dir=args.store, all_versions=args.all_versions,
                   quiet=args.quiet)
    present = len(index.records) - len(index.missing_packages())
    print(f"ingested {len(index.records)} extensions into {args.store} ({present} packages, "
          f"{len(index.missing_packages())} missing)")
    for ext_id in index.missing_packages():
        print(f"  missing package: {ext_id}")
    return 0


def run_analyze(args, params):
    """analyze: extract then featurize every extension with a package."""
    index = CorpusIndex.load(args.store)
    budget = Budget.from_params(params)
    options = ExtractOptions(static=not args.dynamic_only, dynamic=not args.static_only, budget=budget)
    jobs = args.jobs or config.DEFAULT_JOBS
    index, report = run_stage(index, EXTRACT, jobs=jobs, params=params, options=options, quiet=args.quiet)
    print_stage_report(report)
    index, report = run_stage(index, FEATURIZE, jobs=jobs, params=params, options=options, quiet=args.quiet)
    print_stage_report(report)
    return 0


def run_embed(args, params):
    """embed [--external-adapter CMD] [--dim D]"""
    index = CorpusIndex.load(args.store)
    adapter = args.external_adapter or config.EMBED_ADAPTER or None
    dim = args.dim or params.get("embedding_dim", config.EMBEDDING_DIM)
    index, report = run_stage(index, EMBED, params=params, adapter=adapter, dim=dim, quiet=args.quiet)
    print_stage_report(report)
    return 0
