import pytest

from crx.crx_reader import FileTree
from crx.manifest_analyzer import (
    MissingManifestVersion, NotAnObject, enumerate_entrypoints, flatten_manifest, flatten_manifest_lenient,
    parse_manifest_text, path_sort_key, unflatten_pairs,
)


def _tree(files):
    return FileTree({k: v.encode("utf-8") if isinstance(v, str) else v for k, v in files.items()})


def test_flatten_drops_excluded_keys():
    flat = flatten_manifest({"manifest_version": 2, "permissions": ["tabs", "storage"], "name": "X"})
    assert flat.pairs == [("manifest_version", "2"), ("permissions.0", "tabs"), ("permissions.1", "storage")]
    assert flat.manifest_version == 2


def test_key_is_excluded():
    flat = flatten_manifest({"manifest_version": 3, "key": "AAAA"})
    assert flat.pairs == [("manifest_version", "3")]


def test_missing_version():
    with pytest.raises(MissingManifestVersion):
        flatten_manifest({"permissions": []})


def test_not_an_object():
    with pytest.raises(NotAnObject):
        flatten_manifest(["manifest_version", 3])


def test_numeric_segments_sort_as_integers():
    perms = [f"p{i}" for i in range(12)]
    flat = flatten_manifest({"manifest_version": 3, "permissions": perms})
    assert [v for k, v in flat.pairs if k.startswith("permissions")] == perms
    assert path_sort_key("permissions.2") < path_sort_key("permissions.10")


def test_scalar_rendering():
    flat = flatten_manifest({"manifest_version": 3.0, "a": True, "b": None, "c": 1.5, "d": [], "e": {}})
    assert dict(flat.pairs) == {"manifest_version": "3", "a": "true", "b": "null", "c": "1.5"}


def test_comments_and_trailing_commas():
    text = b'\xef\xbb\xbf{\n // comment\n "manifest_version": 3,\n "permissions": ["tabs",],\n}'
    assert parse_manifest_text(text)["permissions"] == ["tabs"]


def test_lenient_recovers_version():
    flat = flatten_manifest_lenient(b'{"manifest_version": 3, "permissions": [tabs')
    assert flat.malformed
    assert flat.pairs == [("manifest_version", "3")]
    assert flatten_manifest_lenient(b"garbage").manifest_version == 2


def test_unflatten_rebuilds_document():
    manifest = {"manifest_version": 3, "permissions": ["tabs", "storage"],
                "background": {"service_worker": "sw.js"}}
    flat = flatten_manifest(manifest)
    rebuilt = unflatten_pairs(flat.pairs)
    assert flatten_manifest(rebuilt).pairs == flat.pairs


def test_service_worker_entrypoint():
    manifest = {"manifest_version": 3, "background": {"service_worker": "sw.js"}}
    entries = enumerate_entrypoints(manifest, _tree({"sw.js": ""}))
    assert [(e.kind, e.path, e.missing_file) for e in entries] == [("background", "sw.js", False)]


def test_override_page_resolves_scripts():
    manifest = {"manifest_version": 3, "chrome_url_overrides": {"newtab": "tab.html"}}
    tree = _tree({"tab.html": '<html><script src="t.js"></script></html>', "t.js": ""})
    entries = enumerate_entrypoints(manifest, tree)
    assert [(e.kind, e.path) for e in entries] == [("override_page", "t.js")]
    assert entries[0].source_page == "tab.html"


def test_inline_and_remote_scripts():
    manifest = {"manifest_version": 2, "browser_action": {"default_popup": "popup/p.html"}}
    html = ('<script src="https://cdn.example/x.js"></script>'
            '<script>chrome.tabs.query({})</script><script src="../lib.js"></script>')
    entries = enumerate_entrypoints(manifest, _tree({"popup/p.html": html, "lib.js": ""}))
    assert [e.path for e in entries] == ["popup/p.html#inline-0", "lib.js"]
    assert entries[0].inline_source == "chrome.tabs.query({})"


def test_theme_has_no_entrypoints():
    assert enumerate_entrypoints({"manifest_version": 3, "theme": {"colors": {}}}, _tree({})) == []


def test_missing_file_flagged():
    manifest = {"manifest_version": 2, "content_scripts": [{"matches": ["<all_urls>"], "js": ["cs.js"]}]}
    entries = enumerate_entrypoints(manifest, _tree({}))
    assert entries[0].missing_file
    assert entries[0].match_patterns == ["<all_urls>"]


def test_module_service_worker():
    manifest = {"manifest_version": 3, "background": {"service_worker": "sw.js", "type": "module"}}
    assert enumerate_entrypoints(manifest, _tree({"sw.js": ""}))[0].module
