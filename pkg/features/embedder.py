# embedder.py
"""Feature documents -> unit vectors (built-in hashed embedder or external adapter)."""
import json
import logging
import shlex
import subprocess
from dataclasses import dataclass

import numpy as np

from common import config
from common.errors import LookalikeError
from features.featurizer import SEPARATOR

logger = logging.getLogger(__name__)

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
MASK64 = 0xFFFFFFFFFFFFFFFF
NORM_TOLERANCE = 1e-3


class EmbedderError(LookalikeError):
    pass


class AdapterFailure(EmbedderError):
    pass


class DimensionMismatch(EmbedderError):
    pass


class MissingId(EmbedderError):
    pass


def embedder_tag(dim=config.EMBEDDING_DIM):
    return f"fnv1a-hash-{dim}"


def fnv1a_64(text):
    h = FNV_OFFSET
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * FNV_PRIME) & MASK64
    return h


@dataclass
class Embedding:
    ext_id: str
    vector: np.ndarray
    tag: str

    def to_bytes(self):
        return np.asarray(self.vector, dtype="<f4").tobytes()

    @classmethod
    def from_bytes(cls, ext_id, data, tag):
        return cls(ext_id, np.frombuffer(data, dtype="<f4").astype(np.float64), tag)


def _features(text):
    for sentence in text.split(SEPARATOR):
        tokens = sentence.split()
        yield from tokens
        for a, b in zip(tokens, tokens[1:]):
            yield f"{a} {b}"


def hashed_vector(text, dim=config.EMBEDDING_DIM):
    """Signed feature hashing of unigrams and in-sentence bigrams, L2-normalized."""
    if dim < 8:
        raise ValueError("dim must be at least 8")
    vector = np.zeros(dim, dtype=np.float64)
    for feature in _features(text):
        h = fnv1a_64(feature)
        vector[h % dim] += -1.0 if h >> 63 else 1.0
    norm = np.linalg.norm(vector)
    if norm == 0:
        vector[0] = 1.0
        return vector
    return vector / norm


def embed_hashed(document, dim=config.EMBEDDING_DIM, ext_id=""):
    return Embedding(ext_id, hashed_vector(document.text, dim), embedder_tag(dim))


def _normalize_rows(matrix):
    norms = np.linalg.norm(matrix, axis=1)
    if np.any(np.abs(norms - 1.0) > NORM_TOLERANCE):
        logger.info("re-normalizing adapter vectors")
        safe = np.where(norms == 0, 1.0, norms)
        matrix = matrix / safe[:, None]
    return matrix


def embed_external(documents, command, dim=config.EMBEDDING_DIM, timeout=None):
    """
    Embed a batch through an external adapter process.

    Parameters:
        documents: dict of id -> FeatureDocument.
        command: adapter command line (string or argv list).
        dim: expected vector dimension.

    Returns:
        dict of id -> Embedding tagged "external:<command>".
    """
    argv = shlex.split(command) if isinstance(command, str) else list(command)
    tag = "external:" + (command if isinstance(command, str) else " ".join(command))
    payload = "".join(json.dumps({"id": ext_id, "text": doc.text}, ensure_ascii=False) + "\n"
                      for ext_id, doc in sorted(documents.items()))
    try:
        proc = subprocess.run(argv, input=payload, capture_output=True, text=True,
                              encoding="utf-8", timeout=timeout, check=False)
    except (OSError, subprocess.TimeoutExpired) as e:
        raise AdapterFailure(f"adapter could not run: {e}") from e
    if proc.returncode != 0:
        raise AdapterFailure(f"adapter exited with {proc.returncode}: {proc.stderr.strip()[:200]}")

    vectors = {}
    for line_no, line in enumerate(proc.stdout.splitlines(), 1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
            ext_id, vector = row["id"], row["vector"]
            vector = np.asarray(vector, dtype=np.float64)
        except (ValueError, KeyError, TypeError) as e:
            raise AdapterFailure(f"malformed adapter line {line_no}: {e}") from e
        if vector.ndim != 1:
            raise AdapterFailure(f"malformed adapter line {line_no}: vector is not flat")
        if vector.shape[0] != dim:
            raise DimensionMismatch(f"adapter returned {vector.shape[0]} dimensions, expected {dim}", ext_id)
        vectors[ext_id] = vector

    missing = sorted(set(documents) - set(vectors))
    if missing:
        raise MissingId(f"adapter returned no vector for {missing[0]}", missing[0])
    ids = sorted(documents)
    matrix = _normalize_rows(np.vstack([vectors[i] for i in ids]))
    return {ext_id: Embedding(ext_id, matrix[n], tag) for n, ext_id in enumerate(ids)}


def cosine_similarity(a, b):
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    denom = np.linalg.norm(a) * np.linalg.norm(b)
    if denom == 0:
        return 0.0
    return float(np.clip(np.dot(a, b) / denom, -1.0, 1.0))


def nearest(matrix, row, k=10):
    """Indices and cosine scores of the k rows most similar to matrix[row], itself excluded."""
    matrix = np.asarray(matrix, dtype=np.float64)
    norms = np.linalg.norm(matrix, axis=1)
    norms[norms == 0] = 1.0
    unit = matrix / norms[:, None]
    scores = unit @ unit[row]
    scores[row] = -np.inf
    order = np.lexsort((np.arange(len(scores)), -scores))[:k]
    order = [i for i in order if np.isfinite(scores[i])]
    return [(int(i), float(np.clip(scores[i], -1.0, 1.0))) for i in order]
