from crx.crx_reader import FileTree
from crx.manifest_analyzer import Entrypoint
from jsengine.static_tracer import (
    STATIC, execution_order, extract_api_calls_static, extract_property_reads_static, resolve_modules,
)


def _static(files, entries=("bg.js",), module=False):
    tree = FileTree({k: v.encode("utf-8") for k, v in files.items()})
    entrypoints = [Entrypoint("background", path, module=module) for path in entries]
    graph = resolve_modules(entrypoints, tree)
    return graph, tree, entrypoints


def _paths(files, **kwargs):
    graph, tree, _ = _static(files, **kwargs)
    return [c.path for c in extract_api_calls_static(graph, tree)]


def test_chrome_call_normalizes_to_browser():
    calls = extract_api_calls_static(*_static({"bg.js": "chrome.tabs.create({})"})[:2])
    assert [(c.path, c.origin, c.count) for c in calls] == [("browser.tabs.create", STATIC, 1)]
    assert calls[0].root == "browser"


def test_counts_aggregate():
    source = "chrome.tabs.query({});\nbrowser.tabs.query({});\nchrome.alarms.create('a', {});"
    calls = extract_api_calls_static(*_static({"bg.js": source})[:2])
    assert {c.path: c.count for c in calls} == {"browser.alarms.create": 1, "browser.tabs.query": 2}


def test_shadowed_root_is_ignored():
    assert _paths({"bg.js": "var chrome = {tabs: {create: function () {}}};\nchrome.tabs.create({});"}) == []
    assert _paths({"bg.js": "function f(chrome) { chrome.tabs.create({}); }"}) == []


def test_computed_member_with_folded_key():
    assert _paths({"bg.js": "chrome['sto' + 'rage'].local.get()"}) == ["browser.storage.local.get"]


def test_eval_is_invisible_statically():
    assert _paths({"bg.js": "eval(\"chrome.tabs.create()\")"}) == []


def test_navigator_read_is_not_a_call():
    graph, tree, _ = _static({"bg.js": "var ua = navigator.userAgent;"})
    assert extract_api_calls_static(graph, tree) == []
    assert [r.path for r in extract_property_reads_static(graph, tree)] == ["navigator.userAgent"]


def test_relative_import_followed():
    files = {
        "bg.js": "import { go } from './util.js';\ngo();",
        "util.js": "export function go() { chrome.downloads.download({}); }",
    }
    graph, tree, entrypoints = _static(files, module=True)
    assert graph.edges == [("bg.js", "util.js")]
    assert "util.js" in graph.module_nodes
    assert execution_order(graph, entrypoints) == ["util.js", "bg.js"]
    assert [c.path for c in extract_api_calls_static(graph, tree)] == ["browser.downloads.download"]


def test_bare_require_unresolved():
    graph, _, _ = _static({"bg.js": "var _ = require('lodash');\nvar h = require('./helper');",
                           "helper.js": ""})
    assert graph.unresolved == ["lodash"]
    assert graph.dependencies("bg.js") == ["helper.js"]


def test_import_scripts_resolves_plain_names():
    graph, _, _ = _static({"bg.js": "importScripts('worker-lib.js', 'https://cdn.example/x.js');",
                           "worker-lib.js": ""})
    assert graph.nodes == ["bg.js", "worker-lib.js"]
    assert graph.unresolved == ["https://cdn.example/x.js"]


def test_mutual_imports_terminate():
    files = {
        "bg.js": "import './a.js';",
        "a.js": "import './b.js';\nchrome.tabs.query({});",
        "b.js": "import './a.js';\nchrome.tabs.update({});",
    }
    graph, tree, entrypoints = _static(files, module=True)
    assert sorted(graph.nodes) == ["a.js", "b.js", "bg.js"]
    assert ("b.js", "a.js") in graph.edges
    order = execution_order(graph, entrypoints)
    assert order[-1] == "bg.js" and len(order) == 3
    assert [c.path for c in extract_api_calls_static(graph, tree)] == ["browser.tabs.query", "browser.tabs.update"]


def test_missing_entry_file_skipped():
    tree = FileTree({})
    graph = resolve_modules([Entrypoint("background", "gone.js", missing_file=True)], tree)
    assert graph.nodes == []
