import json
import logging
import os

import pandas as pd

from clustering.cluster_engine import load_assignments, load_projection
from common import config
from common.chart_utils import ChartManager
from common.utils import atomic_write_bytes, atomic_write_json, export_to_excel, parse_day, write_frame_csv
from store.corpus_store import EXTRACT, CorpusIndex, StageOrderError, load_features
from store.extractor import vocabulary_from_features
from vetting.analytics import (
    detection_rate_summary, find_infringing_clusters, find_repeat_offenders, impact_summary,
    label_feature_frame, label_feature_table, malicious_cluster_summary, repeat_offender_summary,
    republished_summary, top_infringing_clusters,
)
from vetting.records import VettingLabel
from vetting.survival import stratified_survival
from vetting.triage import load_detection_reports, triage_detection_reports

logger = logging.getLogger(__name__)


def _reports_dir(index):
    path = index.path("reports")
    os.makedirs(path, exist_ok=True)
    return path


def _assignment(index):
    path = index.path("assignments.csv")
    if not os.path.exists(path):
        raise StageOrderError("no assignments.csv; run cluster first")
    return load_assignments(path)


def _emit(out_dir, frames, summaries, xlsx_name=None, xlsx=False):
    for name, df in frames.items():
        write_frame_csv(os.path.join(out_dir, f"{name}.csv"), df)
    for name, payload in summaries.items():
        atomic_write_json(os.path.join(out_dir, f"{name}.json"), payload)
    if xlsx and xlsx_name:
        atomic_write_bytes(os.path.join(out_dir, xlsx_name), export_to_excel(frames).getvalue())


def _print_summary(title, payload):
    print(title)
    for key, value in payload.items():
        text = f"{value:.4f}" if isinstance(value, float) else value
        print(f"  {key}: {text}")


def report_infringing(index, args, params, out_dir):
    assignment = _assignment(index)
    records = index.records
    stats = find_infringing_clusters(assignment, records)
    offenders = find_repeat_offenders(records, stats)
    top = args.top or params.get("top_clusters", 30)

    frames = {
        "infringing_clusters": pd.DataFrame([s.to_dict() for s in stats]),
        "top_clusters": top_infringing_clusters(stats, records, top=top,
                                                nte_keywords=params.get("nte_keywords", config.NTE_KEYWORDS),
                                                crawl_end=args.crawl_end),
        "impact": impact_summary(stats, records),
        "repeat_offenders": pd.DataFrame([vars(o) for o in offenders.values()],
                                         columns=["publisher", "vetted_count", "published_infringing_count"]),
    }
    summaries = {
        "detection_rate": detection_rate_summary(stats),
        "republished": republished_summary(stats),
        "repeat_offenders": repeat_offender_summary(offenders, stats, records),
    }
    _emit(out_dir, frames, summaries, "infringing.xlsx", args.xlsx)

    projection = load_projection(index.store_dir)
    if projection is not None:
        ChartManager().plot_clusters(projection, title="Infringing clusters",
                                     highlight={s.cluster for s in stats},
                                     save_path=os.path.join(out_dir, "infringing_clusters.png"))
    print(f"{len(stats)} infringing clusters")
    for name, payload in summaries.items():
        _print_summary(name, payload)
    return 0


def report_survival(index, args, params, out_dir):
    sample_size = args.sample_size if args.sample_size is not None else params.get("km_sample_size")
    seed = args.seed if args.seed is not None else params.get("km_sample_seed", config.KM_SAMPLE_SEED)
    report = stratified_survival(index.survival_records(), args.crawl_end, sample_size, seed)

    frames = {}
    for name, curve in report.curves.items():
        frames[f"km_{name}"] = curve.to_frame()
    frames["logrank"] = report.tests_frame()
    _emit(out_dir, frames, {"lifetimes": report.thresholds}, "survival.xlsx", args.xlsx)
    plotted = {name: frames[f"km_{name}"] for name in report.curves}
    ChartManager().plot_survival(plotted, save_path=os.path.join(out_dir, "km.png"))

    for name, curve in report.curves.items():
        median = "undefined" if curve.median is None else f"{curve.median:g} days"
        print(f"{name}: n={curve.n}, median survival {median}")
    for (a, b), result in report.tests.items():
        print(f"log-rank {a} vs {b}: chi2={result.chi_square:.3f} p={result.p_value:.3g}")
    return 0


def report_labels(index, args, params, out_dir):
    features = {i: vocabulary_from_features(load_features(index, i)) for i in index.done_ids(EXTRACT)}
    table = label_feature_table(index.records, features, params.get("nte_keywords", config.NTE_KEYWORDS))
    frame = label_feature_frame(table, top=args.top or 20)
    payload = {group: [{"feature": f, "fraction": frac, "rank": rank} for f, frac, rank in rows]
               for group, rows in table.items()}
    _emit(out_dir, {"labels": frame}, {"labels": payload}, "labels.xlsx", args.xlsx)
    print(frame.head(args.top or 20).to_string(index=False))
    return 0


def report_triage(index, args, params, out_dir):
    if not args.detections:
        raise StageOrderError("report triage needs --detections FILE")
    reports = load_detection_reports(args.detections)
    malware = [r for r in index.records.values() if r.vetting_label is VettingLabel.MALWARE]
    result = triage_detection_reports(malware, reports)
    categories = pd.DataFrame(sorted(result.categories.items()), columns=["id", "category"])
    summaries = {"triage": result.counts()}
    if os.path.exists(index.path("assignments.csv")):
        summaries["malicious_clusters"] = malicious_cluster_summary(result.categories, _assignment(index))
    _emit(out_dir, {"triage": categories, "families": result.families}, summaries, "triage.xlsx", args.xlsx)
    for name, payload in summaries.items():
        _print_summary(name, payload)
    if not result.families.empty:
        print(result.families.to_string(index=False))
    return 0


REPORTS = {
    "infringing": report_infringing,
    "survival": report_survival,
    "labels": report_labels,
    "triage": report_triage,
}


def run_report(args, params):
    """report infringing|survival|labels|triage"""
    index = CorpusIndex.load(args.store)
    if args.crawl_end:
        args.crawl_end = parse_day(args.crawl_end)
    out_dir = _reports_dir(index)
    status = REPORTS[args.kind](index, args, params, out_dir)
    logger.info("report %s written to %s", args.kind, out_dir)
    if args.json:
        listing = sorted(f for f in os.listdir(out_dir))
        print(json.dumps({"report": args.kind, "directory": out_dir, "files": listing}, indent=2))
    return status
