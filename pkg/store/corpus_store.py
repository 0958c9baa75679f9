# corpus_store.py
"""
On-disk corpus store: ingestion of packages and metadata, and the
extract -> featurize -> embed stages with content-addressed skipping.

Layout:
    <store>/index.json
    <store>/<id>/features.json, document.txt, embedding.f32
    <store>/embeddings.f32 + embeddings.json
    <store>/assignments.csv, projection.csv, pca.json, reports/
"""
import dataclasses
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from clustering.cluster_engine import save_matrix, load_matrix
from common import config
from common.errors import LookalikeError
from common.utils import atomic_write_bytes, atomic_write_json, atomic_write_text, sha256_bytes, sha256_text
from features.embedder import Embedding, embed_external, embed_hashed, embedder_tag
from features.featurizer import FeatureDocument
from store.extractor import ExtractOptions, document_from_features, extract_package
from vetting.records import ExtensionRecord, InvariantViolation, RecordFormatError, latest_versions

logger = logging.getLogger(__name__)

EXTRACT, FEATURIZE, EMBED = "extract", "featurize", "embed"
STAGES = (EXTRACT, FEATURIZE, EMBED)
PREREQUISITE = {FEATURIZE: EXTRACT, EMBED: FEATURIZE}
ARTIFACT = {EXTRACT: "features.json", FEATURIZE: "document.txt", EMBED: "embedding.f32"}
DONE = "done"
PACKAGE_SUFFIXES = (".crx", ".zip")


class StoreError(LookalikeError):
    pass


class MetadataParseError(StoreError):
    def __init__(self, message="", ext_id=None, line=None):
        super().__init__(message, ext_id)
        self.line = line


class MissingPackage(StoreError):
    pass


class StageOrderError(StoreError):
    pass


class StoreNotFound(StoreError):
    pass


@dataclass
class StageReport:
    stage: str
    processed: int = 0
    skipped: int = 0
    failed: List[Tuple[str, str]] = field(default_factory=list)

    def to_dict(self):
        return {"stage": self.stage, "processed": self.processed, "skipped": self.skipped,
                "failed": [list(f) for f in self.failed]}


@dataclass
class CorpusIndex:
    store_dir: str
    records: Dict[str, ExtensionRecord] = field(default_factory=dict)
    versions: List[ExtensionRecord] = field(default_factory=list)
    package_path: Dict[str, Optional[str]] = field(default_factory=dict)
    stage_status: Dict[str, Dict[str, str]] = field(default_factory=dict)
    stage_hash: Dict[str, Dict[str, str]] = field(default_factory=dict)
    all_versions: bool = False

    @property
    def index_path(self):
        return os.path.join(self.store_dir, "index.json")

    def path(self, *parts):
        return os.path.join(self.store_dir, *parts)

    def ids(self):
        return sorted(self.records)

    def missing_packages(self):
        return sorted(i for i, p in self.package_path.items() if p is None)

    def status(self, ext_id, stage):
        return self.stage_status.get(ext_id, {}).get(stage)

    def done_ids(self, stage):
        return [i for i in self.ids() if self.status(i, stage) == DONE]

    def mark(self, ext_id, stage, status, input_hash=None):
        self.stage_status.setdefault(ext_id, {})[stage] = status
        if input_hash is not None:
            self.stage_hash.setdefault(ext_id, {})[stage] = input_hash
        else:
            self.stage_hash.get(ext_id, {}).pop(stage, None)

    def invalidate_after(self, ext_id, stage):
        for later in STAGES[STAGES.index(stage) + 1:]:
            self.stage_status.get(ext_id, {}).pop(later, None)
            self.stage_hash.get(ext_id, {}).pop(later, None)

    def save(self):
        payload = {
            "records": [r.to_dict() for r in self.records.values()],
            "versions": [r.to_dict() for r in self.versions] if self.all_versions else [],
            "package_path": self.package_path,
            "stage_status": self.stage_status,
            "stage_hash": self.stage_hash,
            "all_versions": self.all_versions,
        }
        atomic_write_json(self.index_path, payload)

    @classmethod
    def load(cls, store_dir):
        path = os.path.join(store_dir, "index.json")
        if not os.path.exists(path):
            raise StoreNotFound(f"no corpus index at {path}; run ingest first")
        with open(path, "r", encoding="utf-8") as f:
            payload = json.load(f)
        records = {r["id"]: ExtensionRecord.from_dict(r) for r in payload["records"]}
        return cls(
            store_dir=store_dir,
            records=dict(sorted(records.items())),
            versions=[ExtensionRecord.from_dict(r) for r in payload.get("versions", [])],
            package_path=payload.get("package_path", {}),
            stage_status=payload.get("stage_status", {}),
            stage_hash=payload.get("stage_hash", {}),
            all_versions=bool(payload.get("all_versions", False)),
        )

    def survival_records(self):
        """Every metadata row when ingested with all versions, else the newest per id."""
        return list(self.versions) if self.all_versions and self.versions else list(self.records.values())


# ---------------------------------------------------------------- ingest

def read_metadata(metadata_file):
    rows = []
    with open(metadata_file, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                record = ExtensionRecord.from_dict(row)
            except ValueError as e:
                raise MetadataParseError(f"line {line_no}: not JSON ({e})", line=line_no) from e
            except RecordFormatError as e:
                raise MetadataParseError(f"line {line_no}: {e}", e.ext_id, line=line_no) from e
            rows.append(record.validate())
    return rows


def _find_package(corpus_dir, ext_id):
    for suffix in PACKAGE_SUFFIXES:
        candidate = os.path.join(corpus_dir, ext_id + suffix)
        if os.path.isfile(candidate):
            return os.path.abspath(candidate)
    return None


def ingest(corpus_dir, metadata_file, store_dir=config.STORE_DIR, all_versions=False, quiet=False):
    """
    Build (or refresh) the corpus index.

    Parameters:
        corpus_dir: directory holding <id>.crx or <id>.zip packages.
        metadata_file: JSON Lines of extension records.
        store_dir: store root; an existing index keeps the stage state of unchanged ids.
        all_versions: keep every metadata row for survival analysis.

    Returns:
        CorpusIndex (saved). Missing packages are recorded, not raised.
    """
    versions = read_metadata(metadata_file)
    records = latest_versions(versions)
    previous = None
    if os.path.exists(os.path.join(store_dir, "index.json")):
        previous = CorpusIndex.load(store_dir)

    index = CorpusIndex(store_dir=store_dir, records=records, versions=versions if all_versions else [],
                        all_versions=all_versions)
    for ext_id in tqdm(index.ids(), desc="ingest", unit="ext", disable=quiet or None):
        path = _find_package(corpus_dir, ext_id)
        index.package_path[ext_id] = path
        if path is None:
            logger.warning("%s", MissingPackage(f"no package in {corpus_dir}", ext_id).describe())
            continue
        with open(path, "rb") as f:
            actual = sha256_bytes(f.read())
        expected = records[ext_id].sha256
        if expected and actual != expected:
            raise InvariantViolation(f"package sha256 {actual[:12]}.. does not match metadata", ext_id, "sha256")
        index.records[ext_id] = dataclasses.replace(records[ext_id], sha256=actual)
        if previous and ext_id in previous.stage_status:
            index.stage_status[ext_id] = dict(previous.stage_status[ext_id])
            index.stage_hash[ext_id] = dict(previous.stage_hash.get(ext_id, {}))

    index.save()
    logger.info("ingested %d records, %d packages missing", len(records), len(index.missing_packages()))
    return index


# ---------------------------------------------------------------- stages

def _extract_worker(job):
    ext_id, package_path, options = job
    try:
        with open(package_path, "rb") as f:
            data = f.read()
        return ext_id, extract_package(data, options, ext_id=ext_id), None
    except LookalikeError as e:
        return ext_id, None, f"{e.name}: {e}"
    except Exception as e:  # isolate per-extension failures
        return ext_id, None, f"{type(e).__name__}: {e}"


def _read_bytes(path):
    with open(path, "rb") as f:
        return f.read()


def _package_hash(index, ext_id):
    return sha256_bytes(_read_bytes(index.package_path[ext_id]))


def _input_hash(index, ext_id, stage, settings):
    if stage == EXTRACT:
        source = _package_hash(index, ext_id)
    else:
        source = sha256_bytes(_read_bytes(index.path(ext_id, ARTIFACT[PREREQUISITE[stage]])))
    return sha256_text(source + json.dumps(settings, sort_keys=True))


def _targets(index, stage):
    with_package = [i for i in index.ids() if index.package_path.get(i)]
    if stage == EXTRACT:
        return with_package
    prerequisite = PREREQUISITE[stage]
    never_run = [i for i in with_package if index.status(i, prerequisite) is None]
    if never_run:
        raise StageOrderError(f"{stage} needs {prerequisite} first", never_run[0])
    return [i for i in with_package if index.status(i, prerequisite) == DONE]


def _settings(stage, params, options, adapter, dim):
    if stage == EXTRACT:
        return options.to_dict()
    if stage == FEATURIZE:
        return {"value_cap": int(params.get("value_cap", config.VALUE_CAP))}
    return {"embedder": f"external:{adapter}" if adapter else embedder_tag(dim), "dim": dim}


def run_stage(index, stage, jobs=1, params=None, options=None, adapter=None, dim=None, quiet=False):
    """
    Run one pipeline stage over every eligible extension.

    Ids whose stored input hash matches are skipped; per-extension failures
    are recorded as failed(<ErrorName>: <message>) and do not stop the stage.

    Returns:
        (CorpusIndex, StageReport)
    """
    if stage not in STAGES:
        raise ValueError(f"unknown stage {stage!r}")
    params = params or config.load_params()
    options = options or ExtractOptions.from_params(params)
    dim = int(dim or params.get("embedding_dim", config.EMBEDDING_DIM))
    settings = _settings(stage, params, options, adapter, dim)

    report = StageReport(stage)
    pending = {}
    for ext_id in _targets(index, stage):
        digest = _input_hash(index, ext_id, stage, settings)
        artifact_present = os.path.exists(index.path(ext_id, ARTIFACT[stage]))
        if (index.status(ext_id, stage) == DONE and artifact_present
                and index.stage_hash.get(ext_id, {}).get(stage) == digest):
            report.skipped += 1
            continue
        pending[ext_id] = digest

    if stage == EXTRACT:
        results = _run_extract(index, pending, options, jobs, quiet)
    elif stage == FEATURIZE:
        results = _run_featurize(index, pending, settings["value_cap"], quiet)
    else:
        results = _run_embed(index, pending, adapter, dim, quiet)

    # single writer, sorted id order
    for ext_id in sorted(results):
        artifact, error = results[ext_id]
        if error is not None:
            index.mark(ext_id, stage, f"failed({error})")
            index.invalidate_after(ext_id, stage)
            report.failed.append((ext_id, error))
            logger.warning("%s failed for %s: %s", stage, ext_id, error)
            continue
        target = index.path(ext_id, ARTIFACT[stage])
        if isinstance(artifact, bytes):
            atomic_write_bytes(target, artifact)
        else:
            atomic_write_text(target, artifact)
        index.mark(ext_id, stage, DONE, pending[ext_id])
        index.invalidate_after(ext_id, stage)
        report.processed += 1

    if stage == EMBED:
        write_corpus_matrix(index, settings["embedder"])
    index.save()
    logger.info("%s: %d processed, %d skipped, %d failed", stage, report.processed, report.skipped,
                len(report.failed))
    return index, report


def _run_extract(index, pending, options, jobs, quiet):
    jobs_list = [(i, index.package_path[i], options) for i in sorted(pending)]
    results = {}
    progress = tqdm(total=len(jobs_list), desc="extract", unit="ext", disable=quiet or None)
    if jobs <= 1 or len(jobs_list) <= 1:
        outputs = map(_extract_worker, jobs_list)
        for ext_id, payload, error in outputs:
            results[ext_id] = _extract_result(payload, error)
            progress.update(1)
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for ext_id, payload, error in pool.map(_extract_worker, jobs_list, chunksize=4):
                results[ext_id] = _extract_result(payload, error)
                progress.update(1)
    progress.close()
    return results


def _extract_result(payload, error):
    if error is not None:
        return None, error
    text = json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    return text, None


def load_features(index, ext_id):
    with open(index.path(ext_id, ARTIFACT[EXTRACT]), "r", encoding="utf-8") as f:
        return json.load(f)


def load_document(index, ext_id):
    with open(index.path(ext_id, ARTIFACT[FEATURIZE]), "r", encoding="utf-8") as f:
        return FeatureDocument.from_text(f.read().rstrip("\n"))


def _run_featurize(index, pending, value_cap, quiet):
    results = {}
    for ext_id in tqdm(sorted(pending), desc="featurize", unit="ext", disable=quiet or None):
        try:
            document = document_from_features(load_features(index, ext_id), value_cap)
            results[ext_id] = (document.text + "\n", None)
        except (LookalikeError, KeyError, ValueError) as e:
            results[ext_id] = (None, f"{type(e).__name__}: {e}")
    return results


def _run_embed(index, pending, adapter, dim, quiet):
    results = {}
    if not pending:
        return results
    documents = {i: load_document(index, i) for i in sorted(pending)}
    if adapter:
        # one adapter process for the whole batch; a failure fails every id in it
        try:
            embeddings = embed_external(documents, adapter, dim)
        except LookalikeError as e:
            reason = f"{e.name}: {e}"
            return {i: (None, reason) for i in documents}
        return {i: (embeddings[i].to_bytes(), None) for i in documents}
    for ext_id in tqdm(sorted(documents), desc="embed", unit="ext", disable=quiet or None):
        results[ext_id] = (embed_hashed(documents[ext_id], dim, ext_id).to_bytes(), None)
    return results


def load_embedding(index, ext_id, tag=""):
    return Embedding.from_bytes(ext_id, _read_bytes(index.path(ext_id, ARTIFACT[EMBED])), tag)


def write_corpus_matrix(index, tag):
    """Stack every embedded id (sorted) into embeddings.f32 with its sidecar."""
    ids = index.done_ids(EMBED)
    if not ids:
        return None
    matrix = np.vstack([load_embedding(index, i).vector for i in ids])
    save_matrix(index.path("embeddings.f32"), ids, matrix, embedder=tag)
    return matrix


def load_corpus_matrix(index):
    path = index.path("embeddings.f32")
    if not os.path.exists(path):
        raise StageOrderError("no embeddings; run embed first")
    ids, matrix, _ = load_matrix(path)
    return ids, matrix
