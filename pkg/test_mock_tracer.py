import json

import pytest

from jsengine.mock_tracer import Budget, NoExecutableEntrypoint, dump_trace, trace_execution
from jsengine.parser import parse_program
from jsengine.static_tracer import DYNAMIC


def _trace(*sources, budget=None):
    entries = [(f"s{n}.js", parse_program(src), src) for n, src in enumerate(sources)]
    return trace_execution(entries, budget)


def _paths(trace):
    return [c.path for c in trace.calls]


def test_eval_string_is_executed():
    trace = _trace('eval("chrome.tabs.create()")')
    assert "browser.tabs.create" in _paths(trace)
    assert any(e.kind == "eval" for e in trace.events)
    assert all(c.origin == DYNAMIC for c in trace.calls)


def test_eval_of_folded_concatenation():
    trace = _trace("eval('chrome.' + 'cookies.getAll({})')")
    assert "browser.cookies.getAll" in _paths(trace)


def test_listener_is_force_invoked():
    trace = _trace("chrome.runtime.onMessage.addListener(function (m) { chrome.storage.local.set(m) })")
    assert {"browser.runtime.onMessage.addListener", "browser.storage.local.set"} <= set(_paths(trace))


def test_uncalled_function_is_forced():
    trace = _trace("function later() { chrome.history.search({text: ''}); }")
    assert _paths(trace) == ["browser.history.search"]


NESTED_UNCALLED = (
    "function a() { chrome.alarms.create('1');\n"
    "  function b() { chrome.alarms.clear('2');\n"
    "    function c() { chrome.alarms.getAll();\n"
    "      function d() { chrome.alarms.clearAll(); } } } }"
)


@pytest.mark.parametrize("depth, expected", [
    (1, {"browser.alarms.create"}),
    (2, {"browser.alarms.create", "browser.alarms.clear"}),
    (3, {"browser.alarms.create", "browser.alarms.clear", "browser.alarms.getAll"}),
])
def test_forced_nesting_respects_callback_depth(depth, expected):
    trace = _trace(NESTED_UNCALLED, budget=Budget(max_callback_depth=depth))
    assert set(_paths(trace)) == expected


def test_timer_callback_runs():
    trace = _trace("setTimeout(function () { chrome.notifications.create('n', {}); }, 1000);")
    assert "browser.notifications.create" in _paths(trace)


def test_alias_through_computed_member():
    trace = _trace("var api = chrome['his' + 'tory'];\napi.search({}, function (h) {});")
    assert "browser.history.search" in _paths(trace)


def test_branches_respect_predicates():
    trace = _trace("if (false) { chrome.tabs.remove(1); }\nif (chrome.runtime) { chrome.tabs.query({}); }")
    assert _paths(trace) == ["browser.tabs.query"]


def test_runaway_loop_does_not_starve_later_script():
    trace = _trace("while (true) {}", "chrome.tabs.query({});", budget=Budget(max_loop_iterations=100))
    assert trace.budget_exhausted
    assert "browser.tabs.query" in _paths(trace)
    assert any("budget exhausted" in e for e in trace.errors)


def test_step_budget():
    trace = _trace("var i = 0; for (;;) { i++; }", budget=Budget(max_steps=500, max_loop_iterations=10 ** 9))
    assert trace.budget_exhausted


def test_uncaught_throw_is_recorded():
    trace = _trace("throw new Error('boom');\n", "chrome.alarms.create('a', {});")
    assert any("boom" in e for e in trace.errors)
    assert _paths(trace) == ["browser.alarms.create"]


def test_navigator_reads_kept_apart():
    trace = _trace("var lang = navigator.language;")
    assert trace.calls == []
    assert [r.path for r in trace.reads] == ["navigator.language"]


def test_deterministic(tmp_path):
    source = ("var xs = [3, 1, 2].sort();\nchrome.storage.local.get(null, function (v) {\n"
              "  for (var k in v) { chrome.tabs.create({url: k}); }\n});\nMath.random();")
    first, second = _trace(source), _trace(source)
    assert first.to_jsonl() == second.to_jsonl()
    out = tmp_path / "trace.jsonl"
    dump_trace(first, str(out))
    lines = out.read_text(encoding="utf-8").splitlines()
    assert [json.loads(line)["seq"] for line in lines] == list(range(len(lines)))


def test_nothing_executable():
    with pytest.raises(NoExecutableEntrypoint):
        trace_execution([("a.js", parse_program("class A { m() {} }"))])


def test_budget_from_params():
    budget = Budget.from_params({"budget": {"max_steps": "10", "unknown": 3}})
    assert budget.max_steps == 10
    assert budget.max_loop_iterations == Budget().max_loop_iterations
