# manifest_analyzer.py
"""Flatten manifest.json into key/value pairs and enumerate code entrypoints."""
import logging
import math
import posixpath
import re
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import jstyleson
from bs4 import BeautifulSoup

from common import config
from common.errors import LookalikeError
from crx.crx_reader import resolve_relative

logger = logging.getLogger(__name__)

ENTRYPOINT_KINDS = (
    "content_script",
    "background",
    "browser_action_popup",
    "override_page",
    "devtools_page",
    "side_panel",
    "options_page",
)


class ManifestError(LookalikeError):
    pass


class NotAnObject(ManifestError):
    pass


class MissingManifestVersion(ManifestError):
    pass


class ManifestParseError(ManifestError):
    pass


@dataclass
class FlatManifest:
    pairs: List[Tuple[str, str]]
    manifest_version: int
    malformed: bool = False

    def keys(self):
        return [key for key, _ in self.pairs]

    def to_dict(self):
        return {"manifest_version": self.manifest_version,
                "pairs": [list(p) for p in self.pairs],
                "malformed": self.malformed}

    @classmethod
    def from_dict(cls, payload):
        return cls([tuple(p) for p in payload["pairs"]], int(payload["manifest_version"]),
                   bool(payload.get("malformed", False)))


@dataclass
class Entrypoint:
    kind: str
    path: str
    match_patterns: List[str] = field(default_factory=list)
    missing_file: bool = False
    inline_source: Optional[str] = None
    source_page: Optional[str] = None
    module: bool = False


def parse_manifest_text(data):
    """Decode manifest bytes; comments and trailing commas are tolerated."""
    if isinstance(data, bytes):
        data = data.decode("utf-8-sig", errors="replace")
    try:
        return jstyleson.loads(data)
    except (ValueError, TypeError, IndexError) as e:
        raise ManifestParseError(f"manifest.json does not parse: {e}") from e


def render_scalar(value):
    """Canonical text for a manifest scalar."""
    if value is True:
        return "true"
    if value is False:
        return "false"
    if value is None:
        return "null"
    if isinstance(value, float):
        if math.isfinite(value) and value == int(value):
            return str(int(value))
        return repr(value)
    return str(value)


def _segment_key(segment):
    return (0, int(segment), "") if segment.isdigit() else (1, 0, segment)


def path_sort_key(key_path):
    """Segment-wise order; numeric segments compare as integers."""
    return tuple(_segment_key(s) for s in key_path.split("."))


def _flatten(prefix, node, out):
    if isinstance(node, dict):
        for key, value in node.items():
            _flatten(f"{prefix}.{key}" if prefix else str(key), value, out)
    elif isinstance(node, list):
        for index, value in enumerate(node):
            _flatten(f"{prefix}.{index}" if prefix else str(index), value, out)
    else:
        out.append((prefix, render_scalar(node)))


def _coerce_version(value):
    if isinstance(value, bool):
        raise MissingManifestVersion(f"unsupported manifest_version {value!r}")
    try:
        version = int(value)
    except (TypeError, ValueError):
        raise MissingManifestVersion(f"unsupported manifest_version {value!r}")
    if version not in (2, 3):
        raise MissingManifestVersion(f"unsupported manifest_version {value!r}")
    return version


def flatten_manifest(manifest):
    """
    Flatten a parsed manifest.

    Parameters:
        manifest: parsed manifest object (dict)

    Returns:
        FlatManifest with excluded keys dropped and pairs sorted.
    """
    if not isinstance(manifest, dict):
        raise NotAnObject(f"manifest is a {type(manifest).__name__}, not an object")
    if "manifest_version" not in manifest:
        raise MissingManifestVersion("manifest_version field is absent")
    version = _coerce_version(manifest["manifest_version"])
    pairs = []
    for key, value in manifest.items():
        if key in config.EXCLUDED_MANIFEST_KEYS:
            continue
        _flatten(str(key), value, pairs)
    pairs.sort(key=lambda p: path_sort_key(p[0]))
    return FlatManifest(pairs=pairs, manifest_version=version)


_VERSION_PATTERN = re.compile(rb'"manifest_version"\s*:\s*"?([23])\b')


def flatten_manifest_lenient(data):
    """
    Flatten raw manifest bytes; malformed manifests keep only their version.

    Vetted malware is often malformed, so a broken manifest still yields a
    (feature-poor) FlatManifest instead of an exception.
    """
    try:
        return flatten_manifest(parse_manifest_text(data))
    except ManifestError as e:
        match = _VERSION_PATTERN.search(data if isinstance(data, bytes) else data.encode("utf-8"))
        version = int(match.group(1)) if match else 2
        logger.warning("malformed manifest (%s); keeping manifest_version %d", e, version)
        return FlatManifest(pairs=[("manifest_version", str(version))], manifest_version=version, malformed=True)


def unflatten_pairs(pairs):
    """Rebuild a nested document from flattened pairs (values stay text)."""
    root = {}
    for key_path, value in pairs:
        segments = key_path.split(".")
        node = root
        for segment in segments[:-1]:
            node = node.setdefault(segment, {})
        node[segments[-1]] = value

    def _lists(node):
        if not isinstance(node, dict):
            return node
        converted = {k: _lists(v) for k, v in node.items()}
        if converted and all(k.isdigit() for k in converted):
            return [converted[k] for k in sorted(converted, key=int)]
        return converted

    return _lists(root)


def _as_list(value):
    if value is None:
        return []
    if isinstance(value, (list, tuple)):
        return [v for v in value if isinstance(v, str)]
    if isinstance(value, str):
        return [value]
    return []


def _is_remote(src):
    return bool(re.match(r"^[a-z][a-z0-9+.-]*:", src, re.I)) or src.startswith("//")


def _script_entrypoint(kind, reference, tree, base_dir="", patterns=None, source_page=None, module=False):
    path = resolve_relative(base_dir, reference)
    if path is None:
        return Entrypoint(kind, reference, list(patterns or []), missing_file=True, source_page=source_page)
    return Entrypoint(kind, path, list(patterns or []), missing_file=path not in tree,
                      source_page=source_page, module=module)


def resolve_html_scripts(kind, page_reference, tree):
    """Entrypoints for the scripts an HTML page loads (src files and inline bodies)."""
    page = resolve_relative("", page_reference)
    if page is None or page not in tree:
        return [Entrypoint(kind, page or page_reference, missing_file=True)]
    soup = BeautifulSoup(tree.read_text(page), "html.parser")
    base_dir = posixpath.dirname(page)
    found = []
    inline_index = 0
    for script in soup.find_all("script"):
        script_type = (script.get("type") or "").strip().lower()
        if script_type and script_type not in ("text/javascript", "application/javascript", "module"):
            continue
        module = script_type == "module"
        src = script.get("src")
        if src:
            if _is_remote(src):
                logger.debug("skipping remote script %s in %s", src, page)
                continue
            found.append(_script_entrypoint(kind, src, tree, base_dir, source_page=page, module=module))
            continue
        body = script.string or ""
        if body.strip():
            found.append(Entrypoint(kind, f"{page}#inline-{inline_index}", inline_source=body,
                                    source_page=page, module=module))
            inline_index += 1
    return found


def enumerate_entrypoints(manifest, tree):
    """
    Code entrypoints in manifest order.

    HTML pages are resolved to the scripts they reference; files that do not
    exist are flagged with missing_file rather than dropped.
    """
    if not isinstance(manifest, dict):
        return []
    entrypoints = []

    for content_script in manifest.get("content_scripts") or []:
        if not isinstance(content_script, dict):
            continue
        patterns = _as_list(content_script.get("matches"))
        for js in _as_list(content_script.get("js")):
            entrypoints.append(_script_entrypoint("content_script", js, tree, patterns=patterns))

    background = manifest.get("background")
    if isinstance(background, dict):
        module = background.get("type") == "module"
        for script in _as_list(background.get("scripts")):
            entrypoints.append(_script_entrypoint("background", script, tree, module=module))
        if isinstance(background.get("page"), str):
            entrypoints.extend(resolve_html_scripts("background", background["page"], tree))
        if isinstance(background.get("service_worker"), str):
            entrypoints.append(_script_entrypoint("background", background["service_worker"], tree, module=module))

    for action_key in ("action", "browser_action", "page_action"):
        action = manifest.get(action_key)
        if isinstance(action, dict) and isinstance(action.get("default_popup"), str):
            entrypoints.extend(resolve_html_scripts("browser_action_popup", action["default_popup"], tree))

    overrides = manifest.get("chrome_url_overrides")
    if isinstance(overrides, dict):
        for page in overrides.values():
            if isinstance(page, str):
                entrypoints.extend(resolve_html_scripts("override_page", page, tree))

    if isinstance(manifest.get("devtools_page"), str):
        entrypoints.extend(resolve_html_scripts("devtools_page", manifest["devtools_page"], tree))

    side_panel = manifest.get("side_panel")
    if isinstance(side_panel, dict) and isinstance(side_panel.get("default_path"), str):
        entrypoints.extend(resolve_html_scripts("side_panel", side_panel["default_path"], tree))

    if isinstance(manifest.get("options_page"), str):
        entrypoints.extend(resolve_html_scripts("options_page", manifest["options_page"], tree))
    options_ui = manifest.get("options_ui")
    if isinstance(options_ui, dict) and isinstance(options_ui.get("page"), str):
        entrypoints.extend(resolve_html_scripts("options_page", options_ui["page"], tree))

    for entry in entrypoints:
        if entry.missing_file:
            logger.debug("entrypoint %s (%s) is missing from the package", entry.path, entry.kind)
    return entrypoints
