# featurizer.py
"""Manifest pairs and API calls -> canonical feature documents."""
import re
from dataclasses import dataclass, field
from typing import List

import numpy as np

from common import config
from common.errors import LookalikeError

SEPARATOR = "; "
PERMISSION_KEYS = ("permissions", "optional_permissions", "host_permissions", "optional_host_permissions")

_NON_ALNUM = re.compile(r"[^a-z0-9]+")
_LAX = re.compile(r"[^a-z0-9 ._/\-]+")
_SPACES = re.compile(r"\s+")


class EmptyInput(LookalikeError):
    pass


@dataclass
class FeatureDocument:
    sentences: List[str] = field(default_factory=list)

    @property
    def text(self):
        return SEPARATOR.join(self.sentences)

    @classmethod
    def from_sentences(cls, sentences):
        return cls(sorted(set(sentences)))

    @classmethod
    def from_text(cls, text):
        return cls([s for s in text.split(SEPARATOR) if s])

    def token_count(self):
        return len(self.text.split())


def key_group(key_path):
    """Strip the trailing numeric segments: permissions.3 -> permissions."""
    segments = key_path.split(".")
    while len(segments) > 1 and segments[-1].isdigit():
        segments.pop()
    return ".".join(segments)


def key_words(key_path):
    return _NON_ALNUM.sub(" ", key_path.lower()).strip()


def lax_normalize(value):
    text = _LAX.sub(" ", str(value).lower())
    return _SPACES.sub(" ", text).strip()


def path_words(path):
    words = []
    for segment in path.split("."):
        if segment == "*":
            words.append("any")
            continue
        word = key_words(segment)
        if word:
            words.append(word)
    return " ".join(words)


def _grouped_pairs(flat):
    pairs = list(flat.pairs)
    if not any(key == "manifest_version" for key, _ in pairs):
        pairs.append(("manifest_version", str(flat.manifest_version)))
    groups = {}
    for key, value in pairs:
        groups.setdefault(key_group(key), []).append(value)
    return groups


def serialize_features(flat, calls, reads=(), value_cap=config.VALUE_CAP):
    """
    Build the FeatureDocument for one extension.

    Parameters:
        flat: FlatManifest with the excluded keys already removed.
        calls: ApiCall records (static and dynamic); presence only.
        reads: navigator property reads, rendered as "read ..." sentences.
        value_cap: values kept per manifest key group.

    Returns:
        FeatureDocument with deduplicated, sorted sentences.
    """
    sentences = []
    for group, values in _grouped_pairs(flat).items():
        words = key_words(group)
        if not words:
            continue
        normalized = [v for v in (lax_normalize(value) for value in values) if v]
        sentences.append(" ".join(["manifest", words] + normalized[:value_cap]))
    for call in calls:
        words = path_words(call.path)
        if words:
            sentences.append(f"call {words}")
    for read in reads:
        words = path_words(read.path)
        if words:
            sentences.append(f"read {words}")
    return FeatureDocument.from_sentences(sentences)


def feature_set(flat, calls, reads=()):
    """Vocabulary used by the label/feature occurrence table."""
    features = {f"mv{flat.manifest_version}"}
    for key, value in flat.pairs:
        group = key_group(key)
        if group in PERMISSION_KEYS:
            features.add(value)
        elif group != "manifest_version":
            features.add(group)
    features.update(call.path for call in calls)
    features.update(read.path for read in reads)
    return features


@dataclass(frozen=True)
class TokenStats:
    mean: float
    stddev: float
    count: int
    counts: tuple = ()

    def fraction_within(self, limit=config.TOKEN_LIMIT):
        if not self.counts:
            return 0.0
        return float(np.mean(np.asarray(self.counts) <= limit))


def token_stats(documents):
    """Whitespace token counts over documents: mean, sample stddev and fit-within-limit."""
    if not documents:
        raise EmptyInput("token_stats needs at least one document")
    counts = np.array([doc.token_count() for doc in documents], dtype=float)
    stddev = float(np.std(counts, ddof=1)) if len(counts) > 1 else 0.0
    return TokenStats(float(counts.mean()), stddev, len(counts), tuple(int(c) for c in counts))
