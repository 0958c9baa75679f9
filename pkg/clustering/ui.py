import json
import logging
import os

from clustering.cluster_engine import (
    OUTLIER, UnknownId, evaluate_pairs, hdbscan, load_assignments, load_pairs_csv, pca_fit_transform, project_2d,
    save_assignments, save_projection,
)
from clustering.similarity_report import DEFAULT_THIRD_PARTY, compare_pair
from common import config
from common.utils import atomic_write_json
from crx.crx_reader import MissingManifest, load_package
from features.embedder import nearest
from store.corpus_store import CorpusIndex, StageOrderError, load_corpus_matrix

logger = logging.getLogger(__name__)


def _pick(flag, params, key, default):
    return flag if flag is not None else params.get(key, default)


def run_cluster(args, params):
    """cluster [--variance R] [--min-cluster-size N] [--min-samples N]"""
    index = CorpusIndex.load(args.store)
    ids, matrix = load_corpus_matrix(index)
    variance = float(_pick(args.variance, params, "variance_target", config.VARIANCE_TARGET))
    min_cluster_size = int(_pick(args.min_cluster_size, params, "min_cluster_size", config.MIN_CLUSTER_SIZE))
    min_samples = int(_pick(args.min_samples, params, "min_samples", config.MIN_SAMPLES))
    standardize = bool(params.get("standardize", False))

    model, scores = pca_fit_transform(matrix, variance, standardize)
    assignment = hdbscan(scores, ids, min_cluster_size, min_samples)
    save_assignments(index.path("assignments.csv"), assignment)
    atomic_write_json(index.path("pca.json"), model.summary(variance))
    save_projection(index.store_dir, assignment, project_2d(scores))

    print(f"PCA: {model.n_components} components retain {sum(model.explained_variance_ratio):.4f} "
          f"of variance (target {variance})")
    sizes = sorted((len(m) for m in assignment.clusters().values()), reverse=True)
    print(f"HDBSCAN: {assignment.n_clusters} clusters, {assignment.n_outliers} outliers, {len(assignment)} points")
    if sizes:
        print(f"cluster sizes: {', '.join(str(s) for s in sizes[:20])}{' ...' if len(sizes) > 20 else ''}")
    return 0


def _assignment_or_none(index):
    path = index.path("assignments.csv")
    return load_assignments(path) if os.path.exists(path) else None


def run_query(args, params):
    """query ID [--top K]: the cluster of ID and its nearest neighbours by cosine."""
    index = CorpusIndex.load(args.store)
    ids, matrix = load_corpus_matrix(index)
    if args.id not in ids:
        raise UnknownId(f"{args.id} has no embedding", args.id)
    row = ids.index(args.id)
    hits = [(ids[i], score) for i, score in nearest(matrix, row, args.top)]
    assignment = _assignment_or_none(index)
    label = assignment.label_of(args.id) if assignment and args.id in assignment else None
    siblings = []
    if label is not None and label != OUTLIER:
        siblings = [i for i in assignment.members(label) if i != args.id]

    result = {
        "id": args.id,
        "cluster": label,
        "siblings": siblings,
        "neighbours": [
            {"id": i, "similarity": round(score, 6),
             "cluster": assignment.label_of(i) if assignment and i in assignment else None}
            for i, score in hits
        ],
    }
    if args.json:
        print(json.dumps(result, indent=2))
        return 0
    cluster_text = "unclustered" if label is None else ("outlier" if label == OUTLIER else f"cluster {label}")
    print(f"{args.id}: {cluster_text}, {len(siblings)} siblings")
    for hit in result["neighbours"]:
        mark = "*" if hit["id"] in siblings else " "
        print(f" {mark} {hit['id']}  {hit['similarity']:.4f}  cluster={hit['cluster']}")
    return 0


def render_pair_report(report):
    lines = [f"{report.id_a} vs {report.id_b}: {report.verdict}"]
    checks = [
        ("manifest_keys", f"manifest key overlap {report.manifest_key_overlap:.3f} (>= 0.90)"),
        ("unique_values", f"shared unique values: {len(report.shared_unique_values)}"),
        ("file_tree", f"file tree overlap {report.file_tree_overlap:.3f} (>= 0.50)"),
        ("identical_sources", f"identical sources after beautification: {len(report.identical_source_files)}"),
    ]
    for key, text in checks:
        lines.append(f"  [{'pass' if report.evidence.get(key) else 'FAIL'}] {text}")
    for value in report.shared_unique_values[:10]:
        lines.append(f"      value: {value}")
    for path in report.identical_source_files[:10]:
        lines.append(f"      file:  {path}")
    return "\n".join(lines)


def _package(index, ext_id):
    path = index.package_path.get(ext_id)
    if ext_id not in index.records:
        raise UnknownId(f"{ext_id} is not in the corpus", ext_id)
    if not path:
        raise MissingManifest("package is missing from the corpus", ext_id)
    with open(path, "rb") as f:
        return load_package(f.read())


def run_compare(args, params):
    """compare ID_A ID_B [--json]"""
    index = CorpusIndex.load(args.store)
    patterns = tuple(params.get("third_party_patterns", DEFAULT_THIRD_PARTY))
    report = compare_pair(_package(index, args.id_a), _package(index, args.id_b), args.id_a, args.id_b, patterns)
    if args.json:
        print(json.dumps(report.to_dict(), indent=2))
    else:
        print(render_pair_report(report))
    return 0


def run_eval_pairs(args, params):
    """eval-pairs --pairs FILE [--json]"""
    index = CorpusIndex.load(args.store)
    assignment = _assignment_or_none(index)
    if assignment is None:
        raise StageOrderError("no assignments.csv; run cluster first")
    metrics = evaluate_pairs(assignment, load_pairs_csv(args.pairs))
    if args.json:
        print(json.dumps(metrics.to_dict(), indent=2))
        return 0
    print(f"pairs: {len(metrics.verdicts)}  tp={metrics.tp} fp={metrics.fp} fn={metrics.fn} tn={metrics.tn}")
    print(f"accuracy  {metrics.accuracy:.4f}")
    print(f"precision {metrics.precision:.4f}")
    print(f"recall    {metrics.recall:.4f}")
    return 0
