# extractor.py
"""Per-extension pipeline: package -> manifest -> entrypoints -> static and dynamic API calls."""
import dataclasses
import logging
from dataclasses import dataclass

from crx.crx_reader import load_package
from crx.manifest_analyzer import (
    FlatManifest, ManifestError, enumerate_entrypoints, flatten_manifest_lenient, parse_manifest_text,
)
from features.featurizer import feature_set, serialize_features
from jsengine.mock_tracer import Budget, NoExecutableEntrypoint, dump_trace, trace_execution
from jsengine.static_tracer import (
    ApiCall, execution_order, extract_api_calls_static, extract_property_reads_static, node_source, parse_node,
    resolve_modules,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExtractOptions:
    static: bool = True
    dynamic: bool = True
    budget: Budget = Budget()

    def to_dict(self):
        return {"static": self.static, "dynamic": self.dynamic, "budget": dataclasses.asdict(self.budget)}

    @classmethod
    def from_params(cls, params, static=True, dynamic=True):
        return cls(static=static, dynamic=dynamic, budget=Budget.from_params(params))


def _call_rows(calls):
    return [{"path": c.path, "origin": c.origin, "count": c.count} for c in calls]


def _calls_from_rows(rows):
    return [ApiCall(r["path"], r.get("origin", "static"), int(r.get("count", 1))) for r in rows]


def extract_package(data, options=ExtractOptions(), ext_id=None, trace_path=None):
    """
    Run manifest analysis and API call extraction over one package.

    Parameters:
        data: raw CRX or ZIP bytes.
        options: static/dynamic toggles and tracer budget.
        ext_id: id used in log lines and errors.
        trace_path: when given, the mock trace is dumped there as JSON Lines.

    Returns:
        JSON-ready dict stored as <id>/features.json.
    """
    package = load_package(data)
    tree = package.tree
    raw_manifest = tree.manifest_bytes(ext_id)
    flat = flatten_manifest_lenient(raw_manifest)
    try:
        manifest = parse_manifest_text(raw_manifest)
    except ManifestError:
        manifest = None
    entrypoints = enumerate_entrypoints(manifest, tree) if isinstance(manifest, dict) else []

    parse_cache = {}
    graph = resolve_modules(entrypoints, tree, parse_cache)
    coverage = {path: round(parse_node(graph, tree, path, parse_cache).coverage, 6) for path in graph.nodes}

    calls, reads = [], []
    if options.static:
        calls.extend(extract_api_calls_static(graph, tree, parse_cache))
        reads.extend(extract_property_reads_static(graph, tree, parse_cache))

    budget_exhausted, trace_errors = False, []
    if options.dynamic and graph.nodes:
        sources = [(path, parse_cache[path], node_source(graph, tree, path))
                   for path in execution_order(graph, entrypoints)]
        try:
            trace = trace_execution(sources, options.budget)
        except NoExecutableEntrypoint as e:
            logger.warning("%s: %s", ext_id or "package", e)
        else:
            calls.extend(trace.calls)
            reads.extend(trace.reads)
            budget_exhausted, trace_errors = trace.budget_exhausted, list(trace.errors)
            if budget_exhausted:
                logger.warning("%s: trace budget exhausted", ext_id or "package")
            if trace_path:
                dump_trace(trace, trace_path)

    return {
        "id": ext_id,
        "sha256": package.sha256,
        "manifest": flat.to_dict(),
        "entrypoints": [
            {"kind": e.kind, "path": e.path, "missing_file": e.missing_file, "module": e.module}
            for e in entrypoints
        ],
        "modules": {"nodes": list(graph.nodes), "edges": [list(e) for e in graph.edges],
                    "unresolved": list(graph.unresolved)},
        "coverage": coverage,
        "calls": _call_rows(calls),
        "reads": _call_rows(reads),
        "budget_exhausted": budget_exhausted,
        "trace_errors": trace_errors[:50],
        "options": options.to_dict(),
    }


def document_from_features(features, value_cap):
    """FeatureDocument for a stored features.json payload."""
    flat = FlatManifest.from_dict(features["manifest"])
    return serialize_features(flat, _calls_from_rows(features["calls"]), _calls_from_rows(features["reads"]),
                              value_cap=value_cap)


def vocabulary_from_features(features):
    flat = FlatManifest.from_dict(features["manifest"])
    return feature_set(flat, _calls_from_rows(features["calls"]), _calls_from_rows(features["reads"]))
