# mock_tracer.py
"""
Mock execution of extension code.

Every global the sandbox does not define resolves to a MockValue; calls on
chrome/browser/navigator mocks are logged as dynamic API calls. Callbacks
handed to mocks, timers and promise reactions are queued and drained after
the scripts run, and functions nobody called are invoked with mock arguments.
"""
import json
import logging
import math
import posixpath
import random
import time
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

from common import config
from common.errors import LookalikeError
from crx.crx_reader import resolve_relative
from jsengine import ast_nodes as ast
from jsengine import builtins
from jsengine.parser import parse_program
from jsengine.runtime import (
    INF, NAN, UNDEFINED, BreakSignal, BudgetExhausted, ContinueSignal, JSArray, JSFunction, JSObject, JSThrow,
    MockValue, NativeFunction, ReturnSignal, is_callable, is_object, number_to_string, property_key,
    strict_equals, string_to_number, to_boolean, to_int32, to_uint32, typeof,
)
from jsengine.static_tracer import (
    DYNAMIC, lexical_names, make_calls, member_path, normalize_root, pattern_names, var_names,
)

logger = logging.getLogger(__name__)

MAX_CALL_DEPTH = 64
UNRESOLVED = "<unresolved>"
_SHORT = object()  # optional chain short-circuit
_NO_THIS = object()


class NoExecutableEntrypoint(LookalikeError):
    pass


@dataclass(frozen=True)
class Budget:
    max_steps: int = config.MAX_STEPS
    max_loop_iterations: int = config.MAX_LOOP_ITERATIONS
    max_callback_depth: int = config.MAX_CALLBACK_DEPTH
    wall_clock_ms: int = config.WALL_CLOCK_MS
    max_events: int = config.MAX_EVENTS

    @classmethod
    def from_params(cls, params):
        section = dict(params.get("budget", {}))
        known = {k: int(v) for k, v in section.items() if k in cls.__dataclass_fields__}
        return cls(**known)


@dataclass(frozen=True)
class TraceEvent:
    seq: int
    kind: str  # get | call | construct | eval
    path: str
    args: Tuple[str, ...] = ()


@dataclass
class TraceLog:
    calls: list = field(default_factory=list)
    reads: list = field(default_factory=list)
    events: List[TraceEvent] = field(default_factory=list)
    budget_exhausted: bool = False
    errors: List[str] = field(default_factory=list)

    def to_jsonl(self):
        lines = [json.dumps({"seq": e.seq, "kind": e.kind, "path": e.path, "args": list(e.args)},
                            ensure_ascii=False) for e in self.events]
        return "\n".join(lines) + ("\n" if lines else "")


def dump_trace(trace, path):
    with open(path, "w", encoding="utf-8") as f:
        f.write(trace.to_jsonl())


@dataclass
class QueuedCall:
    fn: object
    args: Optional[list]  # None: fresh mock arguments at invocation time
    depth: int
    on_done: Optional[Callable] = None
    on_error: Optional[Callable] = None
    timer_id: Optional[int] = None
    this: object = UNDEFINED


class Scope:
    __slots__ = ("vars", "parent", "is_function", "this")

    def __init__(self, parent=None, is_function=False, this=_NO_THIS):
        self.vars = {}
        self.parent = parent
        self.is_function = is_function
        self.this = this

    def find(self, name):
        scope = self
        while scope is not None:
            if name in scope.vars:
                return scope
            scope = scope.parent
        return None

    def declare(self, name, value=UNDEFINED):
        self.vars[name] = value

    def var_scope(self):
        scope = self
        while not scope.is_function and scope.parent is not None:
            scope = scope.parent
        return scope

    def this_value(self):
        scope = self
        while scope is not None:
            if scope.this is not _NO_THIS:
                return scope.this
            scope = scope.parent
        return UNDEFINED


def summarize(value):
    """Short text for an event argument."""
    if isinstance(value, str):
        text = value if len(value) <= 80 else value[:77] + "..."
        return json.dumps(text, ensure_ascii=False)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return number_to_string(value)
    if value is None:
        return "null"
    if value is UNDEFINED:
        return "undefined"
    if isinstance(value, MockValue):
        return f"<mock {value.path}>"
    if isinstance(value, (JSFunction, NativeFunction)):
        return f"<function {value.name}>" if value.name else "<function>"
    if isinstance(value, JSArray):
        return f"<array {len(value.items)}>"
    return "<object>"


class Interpreter:
    """Tree-walking interpreter over jsengine.ast_nodes with mock globals."""

    def __init__(self, budget):
        self.budget = budget
        self.random = random.Random(config.RANDOM_SEED)
        self.protos = {}
        self.global_scope = Scope(is_function=True)
        self.global_natives = JSObject(None)
        self.window = MockValue("window", 0, fallthrough=True)
        self.global_scope.this = self.window
        self.mock_roots = {}
        self._uid = 0

        self.events = []
        self.calls = Counter()
        self.reads = Counter()
        self.errors = []
        self.budget_exhausted = False

        self.queue = deque()
        self.callback_depth = 0
        self.cancelled_timers = set()
        self._timer_ids = 0
        self.function_sites = {}  # id(definition node) -> first JSFunction created there
        self.site_depth = {}  # id(definition node) -> callback depth at definition
        self.invoked = set()
        self._retained = []
        self.module_exports = {}

        self.steps = 0
        self.deadline = math.inf
        self.call_depth = 0
        self.current_path = ""
        self.current_text = ""
        self._completion = UNDEFINED

        self._stmt = {kind: getattr(self, "_exec_" + kind) for kind in (
            "VarDecl", "FuncDecl", "ExprStmt", "Block", "Empty", "If", "For", "ForIn", "While", "DoWhile",
            "Return", "Break", "Continue", "Throw", "Try", "Switch", "ImportDecl", "ExportDecl")}
        self._expr = {kind: getattr(self, "_eval_" + kind) for kind in (
            "Identifier", "This", "Literal", "RegexLiteral", "TemplateLiteral", "ObjectLiteral", "ArrayLiteral",
            "FuncExpr", "ArrowFuncExpr", "Assign", "Update", "Call", "New", "Member", "Binary", "Logical",
            "Unary", "Conditional", "Sequence")}

        builtins.install_globals(self)
        for name in ("window", "self", "globalThis"):
            self.global_scope.declare(name, self.window)
        self.eval_native = self.global_scope.vars["eval"]

    # ---- budget and events ----

    def _start_unit(self):
        self.steps = 0
        self.deadline = time.monotonic() + self.budget.wall_clock_ms / 1000.0
        self.callback_depth = 0
        self.call_depth = 0

    def _tick(self):
        self.steps += 1
        if self.steps > self.budget.max_steps:
            raise BudgetExhausted("steps")
        if not self.steps & 1023 and time.monotonic() > self.deadline:
            raise BudgetExhausted("time")

    def _loop_tick(self, count):
        if count > self.budget.max_loop_iterations:
            raise BudgetExhausted("loop", per_loop=True)

    def _exhausted(self, where, error):
        self.budget_exhausted = True
        self.errors.append(f"{where}: budget exhausted ({error.reason})")
        logger.debug("%s: budget exhausted (%s)", where, error.reason)

    def _event(self, kind, path, args=()):
        if len(self.events) < self.budget.max_events:
            self.events.append(TraceEvent(len(self.events), kind, path, tuple(summarize(a) for a in args)))

    def _record_call(self, path):
        segments = path.split(".")
        if segments[0] in config.API_ROOTS and len(segments) >= 2:
            self.calls[".".join(normalize_root(segments))] += 1

    # ---- mocks ----

    def _new_mock(self, path):
        self._uid += 1
        return MockValue(path, self._uid)

    def mock_root(self, name):
        root = self.mock_roots.get(name)
        if root is None:
            root = self.mock_roots[name] = self._new_mock(name)
        if name in config.API_ROOTS:
            self._event("get", name)
        return root

    def _mock_get(self, mock, key, for_call):
        if mock.fallthrough:
            if key in self.global_scope.vars:
                return self.global_scope.vars[key]
            return self.mock_root(key)
        if key in mock.props:
            return mock.props[key]
        child = mock.children.get(key)
        if child is None:
            child = mock.children[key] = self._new_mock(f"{mock.path}.{key}")
        self._event("get", child.path)
        if not for_call and mock.path == "navigator":
            self.reads[child.path] += 1
        return child

    def _mock_call(self, mock, args, kind):
        self._event(kind, mock.path, args)
        if kind == "call":
            self._record_call(mock.path)
        for value in args:
            if isinstance(value, JSFunction):
                self.queue_callback(value, None)
            elif isinstance(value, JSObject) and not isinstance(value, (JSArray, NativeFunction)):
                for key in value.own_keys():
                    member = value.get(key)
                    if isinstance(member, JSFunction):
                        self.queue_callback(member, None)
        return self._new_mock(mock.path)

    def _mock_args(self, fn):
        count = len(fn.node.params) if isinstance(fn, JSFunction) else 0
        return [self._new_mock(f"arg{n}") for n in range(count)]

    # ---- values ----

    def new_object(self, props=None):
        return JSObject(self.protos["Object"], props)

    def new_array(self, items):
        return JSArray(self.protos["Array"], items)

    def make_error(self, name, message):
        return builtins.make_error(self, name, message)

    def throw_error(self, name, message):
        raise JSThrow(self.make_error(name, message))

    def next_timer_id(self):
        self._timer_ids += 1
        return self._timer_ids

    def to_display(self, value):
        if isinstance(value, str):
            return json.dumps(value if len(value) <= 40 else value[:37] + "...", ensure_ascii=False)
        if isinstance(value, MockValue):
            return value.path
        if isinstance(value, (JSFunction, NativeFunction)):
            return f"function {value.name}"
        if isinstance(value, JSObject):
            return f"[object {value.class_name}]"
        return self.to_string(value)

    def describe_thrown(self, value):
        if isinstance(value, JSObject) and value.has_property("message"):
            name, message = value.get("name"), value.get("message")
            name = name if isinstance(name, str) else "Error"
            return f"{name}: {message}" if isinstance(message, str) and message else name
        return self.to_display(value)

    def typeof_class(self, value):
        return {"string": "String", "number": "Number", "boolean": "Boolean"}.get(typeof(value), "Object")

    def to_primitive(self, value, hint="default"):
        if not is_object(value):
            return value
        if isinstance(value, MockValue):
            return value.path
        order = ("toString", "valueOf") if hint == "string" else ("valueOf", "toString")
        for name in order:
            method = value.get(name)
            if is_callable(method):
                result = self.call(method, value, [])
                if not is_object(result):
                    return result
        self.throw_error("TypeError", "Cannot convert object to primitive value")

    def to_number(self, value):
        if isinstance(value, bool):
            return 1.0 if value else 0.0
        if isinstance(value, float):
            return value
        if value is None:
            return 0.0
        if value is UNDEFINED:
            return NAN
        if isinstance(value, str):
            return string_to_number(value)
        if isinstance(value, MockValue):
            return 1.0
        return self.to_number(self.to_primitive(value, "number"))

    def to_string(self, value):
        if isinstance(value, str):
            return value
        if isinstance(value, MockValue):
            return value.path
        if is_object(value):
            return self.to_string(self.to_primitive(value, "string"))
        return property_key(value)

    def to_property_key(self, value):
        if is_object(value):
            value = self.to_primitive(value, "string")
        return property_key(value)

    def function_source(self, fn):
        text = getattr(fn, "source_text", "")
        if text:
            start, end = fn.node.span
            return text[start:end]
        return f"function {fn.name}() {{ [code] }}"

    def get(self, obj, key, for_call=False):
        if isinstance(obj, MockValue):
            return self._mock_get(obj, key, for_call)
        if isinstance(obj, JSObject):
            return obj.get(key)
        if isinstance(obj, str):
            if key == "length":
                return float(len(obj))
            if key.isdigit() and int(key) < len(obj):
                return obj[int(key)]
            return self.protos["String"].get(key)
        if isinstance(obj, bool):
            return self.protos["Boolean"].get(key)
        if isinstance(obj, float):
            return self.protos["Number"].get(key)
        self.throw_error("TypeError", f"Cannot read properties of {self.to_string(obj)} (reading '{key}')")

    def put(self, obj, key, value):
        if isinstance(obj, MockValue):
            if obj.fallthrough:
                self.global_scope.vars[key] = value
            else:
                obj.props[key] = value
        elif isinstance(obj, JSObject):
            obj.put(key, value)
        elif obj is UNDEFINED or obj is None:
            self.throw_error("TypeError", f"Cannot set properties of {self.to_string(obj)} (setting '{key}')")

    def iterate(self, value):
        if isinstance(value, JSArray):
            return list(value.items)
        if isinstance(value, str):
            return list(value)
        if isinstance(value, MockValue):
            return []
        if isinstance(value, JSObject) and value.has_property("length"):
            return list(builtins._items(self, value))
        self.throw_error("TypeError", f"{self.to_display(value)} is not iterable")

    # ---- operators ----

    def loose_equals(self, a, b):
        if (a is None or a is UNDEFINED) and (b is None or b is UNDEFINED):
            return True
        if a is None or a is UNDEFINED or b is None or b is UNDEFINED:
            return False
        if is_object(a) and is_object(b):
            return a is b
        if is_object(a):
            a = self.to_primitive(a)
        if is_object(b):
            b = self.to_primitive(b)
        if type(a) is type(b):
            return strict_equals(a, b)
        return self.to_number(a) == self.to_number(b)

    def _compare(self, op, a, b):
        a, b = self.to_primitive(a, "number"), self.to_primitive(b, "number")
        if not (isinstance(a, str) and isinstance(b, str)):
            a, b = self.to_number(a), self.to_number(b)
            if a != a or b != b:
                return False
        return {"<": a < b, ">": a > b, "<=": a <= b, ">=": a >= b}[op]

    def binary_op(self, op, a, b):
        if op == "+":
            a, b = self.to_primitive(a), self.to_primitive(b)
            if isinstance(a, str) or isinstance(b, str):
                return self.to_string(a) + self.to_string(b)
            return self.to_number(a) + self.to_number(b)
        if op in ("==", "!="):
            return self.loose_equals(a, b) == (op == "==")
        if op in ("===", "!=="):
            return strict_equals(a, b) == (op == "===")
        if op in ("<", ">", "<=", ">="):
            return self._compare(op, a, b)
        if op == "in":
            if isinstance(b, MockValue):
                return True
            if not isinstance(b, JSObject):
                self.throw_error("TypeError", "Cannot use 'in' operator to search for a key in a primitive")
            return b.has_property(self.to_property_key(a))
        if op == "instanceof":
            return self._instance_of(a, b)
        x, y = self.to_number(a), self.to_number(b)
        if op == "-":
            return x - y
        if op == "*":
            return x * y
        if op == "/":
            if y == 0:
                if x == 0 or x != x:
                    return NAN
                return math.copysign(INF, x) * math.copysign(1.0, y)
            return x / y
        if op == "%":
            if y == 0 or x != x or y != y or x in (INF, -INF):
                return NAN
            if y in (INF, -INF):
                return x
            return math.fmod(x, y)
        if op == "**":
            if y != y or (abs(x) == 1 and y in (INF, -INF)):
                return NAN
            try:
                result = x ** y
            except OverflowError:
                return INF
            except ZeroDivisionError:
                return INF
            return NAN if isinstance(result, complex) else float(result)
        if op == "&":
            return float(to_int32(x) & to_int32(y))
        if op == "|":
            return float(to_int32(x) | to_int32(y))
        if op == "^":
            return float(to_int32(x) ^ to_int32(y))
        if op == "<<":
            return float(to_int32(to_int32(x) << (to_uint32(y) & 31)))
        if op == ">>":
            return float(to_int32(x) >> (to_uint32(y) & 31))
        if op == ">>>":
            return float(to_uint32(x) >> (to_uint32(y) & 31))
        self.throw_error("SyntaxError", f"unsupported operator {op}")

    def _instance_of(self, value, ctor):
        if not is_callable(ctor):
            self.throw_error("TypeError", "Right-hand side of 'instanceof' is not callable")
        if isinstance(ctor, MockValue) or not isinstance(value, JSObject):
            return False
        proto = ctor.get("prototype")
        parent = value.proto
        while parent is not None:
            if parent is proto:
                return True
            parent = parent.proto
        return False

    # ---- functions ----

    def _make_function(self, node, scope, name=""):
        if not name and getattr(node, "name", None) is not None:
            name = node.name.name
        fn = JSFunction(self.protos["Function"], node, scope, self.protos["Object"], name)
        fn.source_text = self.current_text
        if id(node) not in self.function_sites:
            self.function_sites[id(node)] = fn
            self.site_depth[id(node)] = self.callback_depth
        return fn

    def call(self, fn, this, args):
        if isinstance(fn, JSFunction):
            return self._invoke(fn, this, args)
        if isinstance(fn, NativeFunction):
            return self._call_native(fn, this, args)
        if isinstance(fn, MockValue):
            return self._mock_call(fn, args, "call")
        self.throw_error("TypeError", f"{self.to_display(fn)} is not a function")

    def construct(self, fn, args):
        if isinstance(fn, MockValue):
            return self._mock_call(fn, args, "construct")
        if isinstance(fn, NativeFunction):
            if fn.ctor is None:
                self.throw_error("TypeError", f"{fn.name or 'anonymous'} is not a constructor")
            return self._call_native(fn, UNDEFINED, args, construct=True)
        if isinstance(fn, JSFunction) and not fn.is_arrow:
            proto = fn.get("prototype")
            obj = JSObject(proto if isinstance(proto, JSObject) else self.protos["Object"])
            result = self._invoke(fn, obj, args)
            return result if is_object(result) else obj
        self.throw_error("TypeError", f"{self.to_display(fn)} is not a constructor")

    def _call_native(self, fn, this, args, construct=False):
        try:
            if construct:
                return fn.ctor(self, list(args))
            return fn.fn(self, this, list(args))
        except (JSThrow, BudgetExhausted, ReturnSignal, BreakSignal, ContinueSignal):
            raise
        except RecursionError:
            self.throw_error("RangeError", "Maximum call stack size exceeded")
        except Exception as e:
            self.throw_error("Error", f"{fn.name}: {type(e).__name__}: {e}")

    def _invoke(self, fn, this, args):
        node = fn.node
        self.invoked.add(id(node))
        if self.call_depth >= MAX_CALL_DEPTH:
            self.throw_error("RangeError", "Maximum call stack size exceeded")
        if fn.is_arrow:
            scope = Scope(fn.closure, is_function=True)
        else:
            scope = Scope(fn.closure, is_function=True, this=self.window if this is UNDEFINED else this)
            if isinstance(node, ast.FuncExpr) and node.name is not None:
                scope.declare(node.name.name, fn)
            scope.declare("arguments", self.new_array(list(args)))
        self.call_depth += 1
        try:
            for n, param in enumerate(node.params):
                if param.rest:
                    value = self.new_array(list(args[n:]))
                else:
                    value = args[n] if n < len(args) else UNDEFINED
                    if value is UNDEFINED and param.default is not None:
                        value = self.evaluate(param.default, scope)
                self._bind(param.target, value, scope, declare=True)
            if isinstance(node, ast.ArrowFuncExpr) and node.expression:
                return self.evaluate(node.body, scope)
            body = node.body.body
            self._hoist(body, scope, scope)
            try:
                self._exec_statements(body, scope)
            except ReturnSignal as signal:
                return signal.value
            return UNDEFINED
        except RecursionError:
            self.throw_error("RangeError", "Maximum call stack size exceeded")
        finally:
            self.call_depth -= 1

    def queue_callback(self, fn, args, on_done=None, on_error=None, timer_id=None, this=UNDEFINED):
        depth = self.callback_depth + 1
        if depth > self.budget.max_callback_depth:
            return
        self.queue.append(QueuedCall(fn, args, depth, on_done, on_error, timer_id, this))

    def compile_function(self, params, body):
        """Function(...) and string timer bodies: compile in the global scope."""
        self._event("eval", "Function", (body,))
        text = f"(function anonymous({','.join(params)}\n) {{\n{body}\n}})"
        outcome = parse_program(text)
        if outcome.errors or outcome.ast is None or len(outcome.ast.body) != 1:
            self.throw_error("SyntaxError", "Function body could not be parsed")
        self._retained.append(outcome.ast)
        saved, self.current_text = self.current_text, text
        try:
            return self._make_function(outcome.ast.body[0].expression, self.global_scope, "anonymous")
        finally:
            self.current_text = saved

    def run_eval(self, value, scope):
        """Run eval(value) in the given scope; non-strings are returned as they are."""
        if not isinstance(value, str):
            self._event("eval", "eval", (UNRESOLVED,))
            return value
        self._event("eval", "eval", (value,))
        outcome = parse_program(value)
        if outcome.ast is None:
            message = outcome.errors[0][1] if outcome.errors else "invalid code"
            self.throw_error("SyntaxError", message)
        self._retained.append(outcome.ast)
        saved_text, self.current_text = self.current_text, value
        saved_completion, self._completion = self._completion, UNDEFINED
        try:
            body = outcome.ast.body
            self._hoist(body, scope, scope.var_scope())
            self._exec_statements(body, scope)
            return self._completion
        finally:
            self.current_text = saved_text
            self._completion = saved_completion

    # ---- scope helpers ----

    def _hoist(self, statements, scope, var_scope=None):
        if var_scope is not None:
            for name in sorted(var_names(statements)):
                if name not in var_scope.vars:
                    if var_scope is self.global_scope and name in config.API_ROOTS:
                        # `var chrome = chrome || {}` keeps the host object
                        var_scope.vars[name] = self.mock_root(name)
                    else:
                        var_scope.vars[name] = UNDEFINED
        for name in sorted(lexical_names(statements)):
            if name not in scope.vars:
                scope.vars[name] = UNDEFINED
        for statement in statements:
            decl = statement.declaration if isinstance(statement, ast.ExportDecl) else statement
            if isinstance(decl, ast.FuncDecl) and decl.name is not None:
                scope.vars[decl.name.name] = self._make_function(decl, scope)

    def _lookup(self, name, scope):
        owner = scope.find(name)
        if owner is not None:
            return owner.vars[name]
        return self.mock_root(name)

    def _assign_name(self, name, value, scope):
        owner = scope.find(name)
        (owner or self.global_scope).vars[name] = value

    def _bind(self, target, value, scope, declare=False):
        if isinstance(target, ast.Identifier):
            if declare:
                scope.vars[target.name] = value
            else:
                self._assign_name(target.name, value, scope)
        elif isinstance(target, ast.ObjectPattern):
            used = set()
            for prop in target.properties:
                key = prop.key.name if isinstance(prop.key, ast.Identifier) else property_key(prop.key.value)
                used.add(key)
                self._bind(prop.value, self.get(value, key), scope, declare)
            if target.rest is not None:
                rest = self.new_object()
                if isinstance(value, JSObject):
                    for key in value.own_keys():
                        if key not in used:
                            rest.put(key, value.get(key))
                self._bind(target.rest, rest, scope, declare)
        elif isinstance(target, ast.ArrayPattern):
            items = self.iterate(value)
            for n, element in enumerate(target.elements):
                if element is not None:
                    self._bind(element, items[n] if n < len(items) else UNDEFINED, scope, declare)
            if target.rest is not None:
                self._bind(target.rest, self.new_array(items[len(target.elements):]), scope, declare)
        elif isinstance(target, ast.Member):
            obj = self.evaluate(target.object, scope)
            self.put(obj, self._member_key(target, scope), value)
        else:
            self.throw_error("SyntaxError", "invalid assignment target")

    # ---- statements ----

    def _exec(self, node, scope):
        self._tick()
        self._stmt[node.kind](node, scope)

    def _exec_statements(self, statements, scope):
        for statement in statements:
            self._exec(statement, scope)

    def _exec_VarDecl(self, node, scope):
        for declarator in node.declarations:
            if declarator.init is None:
                if node.decl_kind != "var":
                    self._bind(declarator.target, UNDEFINED, scope)
                continue
            value = self.evaluate(declarator.init, scope)
            if isinstance(declarator.target, ast.Identifier) and isinstance(declarator.init, ast.FUNCTION_NODES):
                self._name_function(value, declarator.target.name)
            self._bind(declarator.target, value, scope)

    def _exec_FuncDecl(self, node, scope):
        pass  # hoisted

    def _exec_ExprStmt(self, node, scope):
        self._completion = self.evaluate(node.expression, scope)

    def _exec_Block(self, node, scope):
        inner = Scope(scope)
        self._hoist(node.body, inner)
        self._exec_statements(node.body, inner)

    def _exec_Empty(self, node, scope):
        pass

    def _exec_If(self, node, scope):
        if to_boolean(self.evaluate(node.test, scope)):
            self._exec(node.consequent, scope)
        elif node.alternate is not None:
            self._exec(node.alternate, scope)

    def _run_body(self, body, scope):
        """Loop body; returns False when the loop must stop."""
        try:
            self._exec(body, scope)
        except BreakSignal:
            return False
        except ContinueSignal:
            pass
        return True

    def _exec_For(self, node, scope):
        loop_scope = Scope(scope)
        if isinstance(node.init, ast.VarDecl):
            if node.init.decl_kind != "var":
                self._hoist([node.init], loop_scope)
            self._exec(node.init, loop_scope)
        elif node.init is not None:
            self.evaluate(node.init, loop_scope)
        count = 0
        while node.test is None or to_boolean(self.evaluate(node.test, loop_scope)):
            count += 1
            self._loop_tick(count)
            if not self._run_body(node.body, loop_scope):
                break
            if node.update is not None:
                self.evaluate(node.update, loop_scope)

    def _exec_ForIn(self, node, scope):
        right = self.evaluate(node.right, scope)
        if node.of:
            values = self.iterate(right)
        elif isinstance(right, JSObject):
            values = right.own_keys()
        elif isinstance(right, str):
            values = [str(n) for n in range(len(right))]
        else:
            values = []
        loop_scope = Scope(scope)
        declare = False
        if isinstance(node.left, ast.VarDecl):
            target = node.left.declarations[0].target
            declare = node.left.decl_kind != "var"
        else:
            target = node.left
        for count, value in enumerate(values, 1):
            self._loop_tick(count)
            self._tick()
            self._bind(target, value, loop_scope, declare=declare)
            if not self._run_body(node.body, loop_scope):
                break

    def _exec_While(self, node, scope):
        count = 0
        while to_boolean(self.evaluate(node.test, scope)):
            count += 1
            self._loop_tick(count)
            if not self._run_body(node.body, scope):
                break

    def _exec_DoWhile(self, node, scope):
        count = 0
        while True:
            count += 1
            self._loop_tick(count)
            if not self._run_body(node.body, scope):
                break
            if not to_boolean(self.evaluate(node.test, scope)):
                break

    def _exec_Return(self, node, scope):
        value = UNDEFINED if node.argument is None else self.evaluate(node.argument, scope)
        raise ReturnSignal(value)

    def _exec_Break(self, node, scope):
        raise BreakSignal()

    def _exec_Continue(self, node, scope):
        raise ContinueSignal()

    def _exec_Throw(self, node, scope):
        raise JSThrow(self.evaluate(node.argument, scope))

    def _exec_Try(self, node, scope):
        try:
            try:
                self._exec_Block(node.block, scope)
            except JSThrow as thrown:
                if node.handler is None:
                    raise
                catch_scope = Scope(scope)
                if node.param is not None:
                    self._bind(node.param, thrown.value, catch_scope, declare=True)
                self._exec_Block(node.handler, catch_scope)
        except BudgetExhausted:
            raise
        except (JSThrow, BreakSignal, ContinueSignal, ReturnSignal):
            if node.finalizer is not None:
                self._exec_Block(node.finalizer, scope)
            raise
        if node.finalizer is not None:
            self._exec_Block(node.finalizer, scope)

    def _exec_Switch(self, node, scope):
        value = self.evaluate(node.discriminant, scope)
        inner = Scope(scope)
        self._hoist([s for case in node.cases for s in case.body], inner)
        start = None
        for n, case in enumerate(node.cases):
            if case.test is not None and strict_equals(value, self.evaluate(case.test, inner)):
                start = n
                break
        if start is None:
            start = next((n for n, case in enumerate(node.cases) if case.test is None), None)
        if start is None:
            return
        try:
            for case in node.cases[start:]:
                self._exec_statements(case.body, inner)
        except BreakSignal:
            pass

    # ---- modules ----

    def _module_exports(self, specifier):
        base = posixpath.dirname(self.current_path.split("#", 1)[0])
        if specifier.startswith("/"):
            base = ""
        for candidate in (specifier, specifier + ".js", specifier.rstrip("/") + "/index.js"):
            path = resolve_relative(base, candidate)
            if path is not None and path in self.module_exports:
                return self.module_exports[path]
        return None

    def _exec_ImportDecl(self, node, scope):
        exports = self._module_exports(node.source)
        for spec in node.specifiers:
            name = spec.local.name
            if exports is None:
                value = self.mock_root(name)
            elif spec.imported == "*":
                value = exports
            else:
                value = exports.get(spec.imported)
            scope.vars[name] = value

    def _exec_ExportDecl(self, node, scope):
        exports = self.module_exports.setdefault(self.current_path, self.new_object())
        decl = node.declaration
        if node.default:
            if isinstance(decl, ast.FuncDecl):
                value = self._lookup(decl.name.name, scope) if decl.name else self._make_function(decl, scope)
            else:
                value = self.evaluate(decl, scope)
            exports.put("default", value)
        elif isinstance(decl, ast.VarDecl):
            self._exec(decl, scope)
            for declarator in decl.declarations:
                for name in pattern_names(declarator.target):
                    exports.put(name, self._lookup(name, scope))
        elif isinstance(decl, ast.FuncDecl):
            exports.put(decl.name.name, self._lookup(decl.name.name, scope))
        elif node.source is not None:
            source = self._module_exports(node.source)
            for local, exported in node.names:
                if local == "*" and exported == "*":
                    if source is not None:
                        for key in source.own_keys():
                            if key != "default":
                                exports.put(key, source.get(key))
                elif local == "*":
                    exports.put(exported, source if source is not None else self.mock_root(exported))
                else:
                    exports.put(exported, source.get(local) if source is not None else self.mock_root(local))
        else:
            for local, exported in node.names:
                exports.put(exported, self._lookup(local, scope))

    # ---- expressions ----

    def evaluate(self, node, scope):
        self._tick()
        return self._expr[node.kind](node, scope)

    def _eval_Identifier(self, node, scope):
        return self._lookup(node.name, scope)

    def _eval_This(self, node, scope):
        return scope.this_value()

    def _eval_Literal(self, node, scope):
        return node.value

    def _eval_RegexLiteral(self, node, scope):
        return builtins.compile_regexp(self, node.pattern, node.flags)

    def _eval_TemplateLiteral(self, node, scope):
        parts = [node.quasis[0]]
        for n, expression in enumerate(node.expressions):
            parts.append(self.to_string(self.evaluate(expression, scope)))
            parts.append(node.quasis[n + 1] if n + 1 < len(node.quasis) else "")
        return "".join(parts)

    def _property_name(self, key, computed, scope):
        if computed:
            return self.to_property_key(self.evaluate(key, scope))
        if isinstance(key, ast.Identifier):
            return key.name
        return property_key(key.value)

    def _eval_ObjectLiteral(self, node, scope):
        obj = self.new_object()
        for prop in node.properties:
            if isinstance(prop, ast.Spread):
                source = self.evaluate(prop.argument, scope)
                if isinstance(source, JSObject):
                    for key in source.own_keys():
                        obj.put(key, source.get(key))
                elif isinstance(source, str):
                    for n, ch in enumerate(source):
                        obj.put(str(n), ch)
                continue
            key = self._property_name(prop.key, prop.computed, scope)
            value = self.evaluate(prop.value, scope)
            if isinstance(prop.value, ast.FUNCTION_NODES):
                self._name_function(value, key)
            obj.put(key, value)
        return obj

    def _eval_ArrayLiteral(self, node, scope):
        items = []
        for element in node.elements:
            if element is None:
                items.append(UNDEFINED)
            elif isinstance(element, ast.Spread):
                items.extend(self.iterate(self.evaluate(element.argument, scope)))
            else:
                items.append(self.evaluate(element, scope))
        return self.new_array(items)

    def _eval_FuncExpr(self, node, scope):
        return self._make_function(node, scope)

    def _eval_ArrowFuncExpr(self, node, scope):
        return self._make_function(node, scope)

    @staticmethod
    def _name_function(value, name):
        if isinstance(value, JSFunction) and not value.name:
            value.name = name

    def _member_key(self, node, scope):
        if node.computed:
            return self.to_property_key(self.evaluate(node.property, scope))
        return node.property.name

    def _eval_Assign(self, node, scope):
        target, op = node.target, node.op
        if isinstance(target, ast.Member):
            obj = self.evaluate(target.object, scope)
            key = self._member_key(target, scope)

            def read():
                return self.get(obj, key)

            def write(value):
                self.put(obj, key, value)
        else:
            def read():
                return self._lookup(target.name, scope)

            def write(value):
                self._assign_name(target.name, value, scope)

        if op == "=":
            value = self.evaluate(node.value, scope)
            if isinstance(target, ast.Identifier) and isinstance(node.value, ast.FUNCTION_NODES):
                self._name_function(value, target.name)
        elif op in ("&&=", "||=", "??="):
            current = read()
            if op == "&&=" and not to_boolean(current):
                return current
            if op == "||=" and to_boolean(current):
                return current
            if op == "??=" and current is not None and current is not UNDEFINED:
                return current
            value = self.evaluate(node.value, scope)
        else:
            value = self.binary_op(op[:-1], read(), self.evaluate(node.value, scope))
        write(value)
        return value

    def _eval_Update(self, node, scope):
        target = node.argument
        if isinstance(target, ast.Member):
            obj = self.evaluate(target.object, scope)
            key = self._member_key(target, scope)
            old = self.to_number(self.get(obj, key))
        else:
            old = self.to_number(self._lookup(target.name, scope))
        new = old + 1 if node.op == "++" else old - 1
        if isinstance(target, ast.Member):
            self.put(obj, key, new)
        else:
            self._assign_name(target.name, new, scope)
        return new if node.prefix else old

    def _chain(self, node, scope):
        """Evaluate a chain part; may return the optional short-circuit marker."""
        if isinstance(node, ast.Member):
            self._tick()
            return self._member(node, scope)
        if isinstance(node, ast.Call):
            self._tick()
            return self._call(node, scope)
        return self.evaluate(node, scope)

    def _member(self, node, scope, for_call=False):
        obj = self._chain(node.object, scope)
        if obj is _SHORT:
            return _SHORT
        if node.optional and (obj is UNDEFINED or obj is None):
            return _SHORT
        return self.get(obj, self._member_key(node, scope), for_call)

    def _eval_Member(self, node, scope):
        value = self._member(node, scope)
        return UNDEFINED if value is _SHORT else value

    def _arguments(self, nodes, scope):
        args = []
        for node in nodes:
            if isinstance(node, ast.Spread):
                args.extend(self.iterate(self.evaluate(node.argument, scope)))
            else:
                args.append(self.evaluate(node, scope))
        return args

    def _callee_text(self, callee):
        segments = member_path(callee)
        return ".".join(segments) if segments else "expression"

    def _call(self, node, scope):
        callee = node.callee
        this = UNDEFINED
        if isinstance(callee, ast.Member):
            obj = self._chain(callee.object, scope)
            if obj is _SHORT:
                return _SHORT
            if callee.optional and (obj is UNDEFINED or obj is None):
                return _SHORT
            fn = self.get(obj, self._member_key(callee, scope), for_call=True)
            this = obj
        else:
            fn = self._chain(callee, scope)
            if fn is _SHORT:
                return _SHORT
        if node.optional and (fn is UNDEFINED or fn is None):
            return _SHORT
        args = self._arguments(node.arguments, scope)
        if fn is self.eval_native and isinstance(callee, ast.Identifier):
            return self.run_eval(args[0] if args else UNDEFINED, scope)
        if not is_callable(fn):
            self.throw_error("TypeError", f"{self._callee_text(callee)} is not a function")
        return self.call(fn, this, args)

    def _eval_Call(self, node, scope):
        value = self._call(node, scope)
        return UNDEFINED if value is _SHORT else value

    def _eval_New(self, node, scope):
        fn = self.evaluate(node.callee, scope)
        return self.construct(fn, self._arguments(node.arguments, scope))

    def _eval_Binary(self, node, scope):
        left = self.evaluate(node.left, scope)
        return self.binary_op(node.op, left, self.evaluate(node.right, scope))

    def _eval_Logical(self, node, scope):
        left = self.evaluate(node.left, scope)
        if node.op == "&&":
            return self.evaluate(node.right, scope) if to_boolean(left) else left
        if node.op == "||":
            return left if to_boolean(left) else self.evaluate(node.right, scope)
        return self.evaluate(node.right, scope) if left is None or left is UNDEFINED else left

    def _eval_Unary(self, node, scope):
        op = node.op
        if op == "delete":
            target = node.argument
            if isinstance(target, ast.Member):
                obj = self.evaluate(target.object, scope)
                key = self._member_key(target, scope)
                if isinstance(obj, JSObject):
                    return obj.delete(key)
                if isinstance(obj, MockValue):
                    obj.props.pop(key, None)
            return True
        value = self.evaluate(node.argument, scope)
        if op == "typeof":
            return typeof(value)
        if op == "void":
            return UNDEFINED
        if op == "!":
            return not to_boolean(value)
        if op == "-":
            return -self.to_number(value)
        if op == "+":
            return self.to_number(value)
        if op == "~":
            return float(~to_int32(self.to_number(value)))
        self.throw_error("SyntaxError", f"unsupported operator {op}")

    def _eval_Conditional(self, node, scope):
        if to_boolean(self.evaluate(node.test, scope)):
            return self.evaluate(node.consequent, scope)
        return self.evaluate(node.alternate, scope)

    def _eval_Sequence(self, node, scope):
        value = UNDEFINED
        for expression in node.expressions:
            value = self.evaluate(expression, scope)
        return value

    # ---- driver ----

    def run_source(self, path, program, text=""):
        """Run one entry script (or module) with a fresh step and time budget."""
        self._start_unit()
        self.current_path, self.current_text = path, text
        self._retained.append(program)
        if program.module:
            scope = Scope(self.global_scope, is_function=True, this=UNDEFINED)
            self.module_exports.setdefault(path, self.new_object())
        else:
            scope = self.global_scope
        try:
            self._hoist(program.body, scope, scope)
            self._exec_statements(program.body, scope)
        except BudgetExhausted as e:
            self._exhausted(path, e)
        except JSThrow as thrown:
            self.errors.append(f"{path}: Uncaught {self.describe_thrown(thrown.value)}")
        except (ReturnSignal, BreakSignal, ContinueSignal):
            self.errors.append(f"{path}: illegal control flow at top level")
        except RecursionError:
            self.errors.append(f"{path}: RangeError: Maximum call stack size exceeded")
        except Exception as e:
            logger.warning("%s: interpreter failure %s: %s", path, type(e).__name__, e)
            self.errors.append(f"{path}: internal error {type(e).__name__}: {e}")

    def _run_callback(self, item, where):
        self.callback_depth = item.depth
        try:
            args = item.args if item.args is not None else self._mock_args(item.fn)
            result = self.call(item.fn, item.this, args)
            if item.on_done is not None:
                item.on_done(result)
        except JSThrow as thrown:
            if item.on_error is not None:
                item.on_error(thrown.value)
            else:
                self.errors.append(f"{where}: Uncaught {self.describe_thrown(thrown.value)}")
        except BudgetExhausted as e:
            if not e.per_loop:
                raise
            self._exhausted(where, e)
        except (ReturnSignal, BreakSignal, ContinueSignal, RecursionError) as e:
            self.errors.append(f"{where}: {type(e).__name__}")
        finally:
            self.callback_depth = 0

    def _drain_queue(self):
        while self.queue:
            item = self.queue.popleft()
            if item.timer_id is not None and item.timer_id in self.cancelled_timers:
                continue
            self._run_callback(item, "callback")

    def _force_uninvoked(self):
        forced = set()
        for _ in range(self.budget.max_callback_depth):
            pending = [fn for key, fn in self.function_sites.items() if key not in self.invoked and key not in forced]
            if not pending:
                break
            for fn in pending:
                forced.add(id(fn.node))
                depth = self.site_depth.get(id(fn.node), 0) + 1
                if depth > self.budget.max_callback_depth:
                    continue
                self._run_callback(QueuedCall(fn, None, depth, this=self.window), "forced")
                self._drain_queue()

    def run_callbacks(self):
        """Drain queued callbacks, then force never-invoked functions; one shared budget."""
        self._start_unit()
        try:
            self._drain_queue()
            self._force_uninvoked()
        except BudgetExhausted as e:
            self._exhausted("callbacks", e)
        except Exception as e:
            logger.warning("callback phase failed %s: %s", type(e).__name__, e)
            self.errors.append(f"callbacks: internal error {type(e).__name__}: {e}")

    def trace_log(self):
        return TraceLog(
            calls=make_calls(self.calls, DYNAMIC),
            reads=make_calls(self.reads, DYNAMIC),
            events=list(self.events),
            budget_exhausted=self.budget_exhausted,
            errors=list(self.errors),
        )


def trace_execution(entry_sources, budget=None):
    """
    Mock-execute entry scripts in order and collect the API calls they reach.

    Parameters:
        entry_sources: ordered (path, ParseOutcome) or (path, ParseOutcome, text) items.
        budget: Budget limits; each script and the callback phase get their own.

    Returns:
        TraceLog with dynamic ApiCall records, navigator reads and the event list.
    """
    budget = budget or Budget()
    runnable = []
    for item in entry_sources:
        path, outcome = item[0], item[1]
        text = item[2] if len(item) > 2 else ""
        if outcome is not None and outcome.ast is not None:
            runnable.append((path, outcome.ast, text))
    if not runnable:
        raise NoExecutableEntrypoint("no entrypoint could be parsed")
    interp = Interpreter(budget)
    for path, program, text in runnable:
        interp.run_source(path, program, text)
    interp.run_callbacks()
    trace = interp.trace_log()
    logger.debug("trace: %d call path(s), %d event(s), exhausted=%s",
                 len(trace.calls), len(trace.events), trace.budget_exhausted)
    return trace
