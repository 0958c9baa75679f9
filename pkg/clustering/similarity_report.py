# similarity_report.py
"""Ground-truth similarity verdict for a pair of packages, with per-criterion evidence."""
import fnmatch
import logging
import posixpath
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List

from common import config
from crx.crx_reader import resolve_relative
from crx.manifest_analyzer import flatten_manifest_lenient
from jsengine.lexer import EOF, NUM, STRING, TEMPLATE, LexError, tokenize_strict

logger = logging.getLogger(__name__)

KEY_OVERLAP_MIN = 0.90
PATH_OVERLAP_MIN = 0.50
SIMILAR = "similar"
NOT_SIMILAR = "not_similar"
DEFAULT_THIRD_PARTY = tuple(config.load_params().get("third_party_patterns", ()))

_NUMERIC = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")


@dataclass
class PairReport:
    id_a: str
    id_b: str
    manifest_key_overlap: float
    shared_unique_values: List[str]
    file_tree_overlap: float
    identical_source_files: List[str]
    verdict: str
    evidence: Dict[str, bool] = field(default_factory=dict)

    def to_dict(self):
        return {
            "id_a": self.id_a,
            "id_b": self.id_b,
            "manifest_key_overlap": self.manifest_key_overlap,
            "shared_unique_values": list(self.shared_unique_values),
            "file_tree_overlap": self.file_tree_overlap,
            "identical_source_files": list(self.identical_source_files),
            "verdict": self.verdict,
            "evidence": dict(self.evidence),
        }


def _overlap(a, b):
    """|A ∩ B| / max(|A|, |B|); 0 for two empty sets."""
    denominator = max(len(a), len(b))
    return len(a & b) / denominator if denominator else 0.0


def _flat(package, label):
    return flatten_manifest_lenient(package.tree.manifest_bytes(label or None))


def _distinctive(key, value):
    if key == "manifest_version" or value in ("true", "false", "null", ""):
        return False
    return not _NUMERIC.match(value)


def _singular_values(pairs, tree):
    keys_per_value = Counter(v for _, v in set(pairs))
    values = set()
    for _, value in pairs:
        target = resolve_relative("", value)
        if (target and target in tree) or keys_per_value[value] == 1:
            values.add(value)
    return values


def unique_values(flat, tree):
    """
    Manifest values naming a packaged file or occurring under exactly one key path.

    Version numbers, booleans, null and numbers only count when a manifest
    has nothing else to offer.
    """
    values = _singular_values([(k, v) for k, v in flat.pairs if _distinctive(k, v)], tree)
    return values or _singular_values(list(flat.pairs), tree)


def comparable_paths(tree):
    return {p for p in tree.paths() if posixpath.basename(p) != "messages.json"}


def is_third_party(path, patterns=DEFAULT_THIRD_PARTY):
    lowered = "/" + path.lower()
    name = posixpath.basename(lowered)
    for pattern in patterns:
        pattern = pattern.lower()
        if pattern.endswith("/"):
            if "/" + pattern in lowered:
                return True
        elif fnmatch.fnmatchcase(name, pattern):
            return True
    return False


def _raw_quasis(source, token):
    pieces, pos = [], token.start
    for start, end in token.value.expressions:
        pieces.append(source[pos:start])
        pos = end
    pieces.append(source[pos:token.end])
    return tuple(pieces)


def _token_key(source, token):
    if token.type == TEMPLATE:
        bodies = tuple(token_stream(source[start:end]) for start, end in token.value.expressions)
        return (TEMPLATE, _raw_quasis(source, token), bodies)
    if token.type in (STRING, NUM):
        return (token.type, token.raw)
    return (token.type, token.value)


def token_stream(source):
    """Token sequence without whitespace and comments; string/number literals stay verbatim."""
    return tuple(_token_key(source, t) for t in tokenize_strict(source) if t.type != EOF)


def beautified_equal(src_a, src_b):
    """True iff both sources lex to the same token sequence."""
    return token_stream(src_a) == token_stream(src_b)


def identical_sources(tree_a, tree_b, patterns=DEFAULT_THIRD_PARTY):
    shared = sorted(p for p in set(tree_a.paths()) & set(tree_b.paths())
                    if p.lower().endswith((".js", ".mjs")) and not is_third_party(p, patterns))
    identical = []
    for path in shared:
        a, b = tree_a.get(path), tree_b.get(path)
        if a == b:
            identical.append(path)
            continue
        try:
            if beautified_equal(tree_a.read_text(path), tree_b.read_text(path)):
                identical.append(path)
        except LexError as e:
            logger.debug("skipping %s: %s", path, e)
    return identical


def compare_pair(a, b, id_a="", id_b="", third_party_patterns=DEFAULT_THIRD_PARTY):
    """
    Apply the four similarity criteria to two packages.

    Parameters:
        a, b: CrxPackage objects with a manifest.json.
        id_a, id_b: ids used in the report and in errors.
        third_party_patterns: path patterns excluded from the source comparison.

    Returns:
        PairReport; the verdict is similar only when every criterion passes.
    """
    flat_a, flat_b = _flat(a, id_a), _flat(b, id_b)

    key_overlap = _overlap(set(flat_a.keys()), set(flat_b.keys()))
    shared_values = sorted(unique_values(flat_a, a.tree) & unique_values(flat_b, b.tree))
    path_overlap = _overlap(comparable_paths(a.tree), comparable_paths(b.tree))
    identical = identical_sources(a.tree, b.tree, third_party_patterns)

    evidence = {
        "manifest_keys": key_overlap >= KEY_OVERLAP_MIN,
        "unique_values": bool(shared_values),
        "file_tree": path_overlap >= PATH_OVERLAP_MIN,
        "identical_sources": bool(identical),
    }
    verdict = SIMILAR if all(evidence.values()) else NOT_SIMILAR
    logger.info("compare %s %s -> %s", id_a or "a", id_b or "b", verdict)
    return PairReport(id_a, id_b, key_overlap, shared_values, path_overlap, identical, verdict, evidence)
