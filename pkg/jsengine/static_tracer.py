# static_tracer.py
"""Module resolution and AST-based extraction of extension API calls."""
import logging
import posixpath
import re
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Dict, List, Set, Tuple

from common import config
from crx.crx_reader import resolve_relative
from jsengine import ast_nodes as ast
from jsengine.ast_nodes import string_value
from jsengine.parser import is_module_source, parse_program

logger = logging.getLogger(__name__)

STATIC = "static"
DYNAMIC = "dynamic"

_URL = re.compile(r"^[a-z][a-z0-9+.-]*:|^//", re.I)


@dataclass(frozen=True)
class ApiCall:
    path: str
    origin: str = STATIC
    count: int = 1

    @property
    def root(self):
        return self.path.split(".", 1)[0]


@dataclass
class ModuleGraph:
    nodes: List[str] = field(default_factory=list)
    edges: List[Tuple[str, str]] = field(default_factory=list)
    unresolved: List[str] = field(default_factory=list)
    inline_sources: Dict[str, str] = field(default_factory=dict)
    module_nodes: Set[str] = field(default_factory=set)

    def dependencies(self, path):
        return [b for a, b in self.edges if a == path]


def normalize_root(segments):
    """chrome.* and browser.* are the same namespace; store browser.*"""
    if segments and segments[0] == "chrome":
        return ["browser"] + list(segments[1:])
    return list(segments)


def make_calls(counter, origin):
    """Aggregate a path Counter into ApiCall records sorted by path."""
    return [ApiCall(path, origin, count) for path, count in sorted(counter.items()) if count > 0]


# ---- sources ----

def node_source(graph, tree, path):
    if path in graph.inline_sources:
        return graph.inline_sources[path]
    return tree.read_text(path)


def parse_node(graph, tree, path, parse_cache=None):
    """ParseOutcome for a graph node, memoized in parse_cache when given."""
    if parse_cache is not None and path in parse_cache:
        return parse_cache[path]
    text = node_source(graph, tree, path)
    module = path in graph.module_nodes or is_module_source(text)
    outcome = parse_program(text, module_mode=module)
    if outcome.errors:
        logger.debug("%s: %d statement(s) skipped, coverage %.3f", path, len(outcome.errors), outcome.coverage)
    if parse_cache is not None:
        parse_cache[path] = outcome
    return outcome


# ---- module resolution ----

def _specifiers(program):
    """(specifier, kind) pairs for import/export-from, require and importScripts."""
    found = []
    for node in program.walk():
        if isinstance(node, ast.ImportDecl):
            found.append((node.source, "import"))
        elif isinstance(node, ast.ExportDecl) and node.source:
            found.append((node.source, "import"))
        elif isinstance(node, ast.Call) and isinstance(node.callee, ast.Identifier):
            if node.callee.name == "require" and node.arguments:
                value = string_value(node.arguments[0])
                if value is not None:
                    found.append((value, "require"))
            elif node.callee.name == "importScripts":
                for argument in node.arguments:
                    value = string_value(argument)
                    if value is not None:
                        found.append((value, "script"))
    return found


def _node_dir(path):
    return posixpath.dirname(path.split("#", 1)[0])


def _resolve_specifier(importer, specifier, kind, tree):
    if _URL.match(specifier):
        return None
    relative = specifier.startswith(("./", "../", "/"))
    # classic worker imports resolve plain file names against the script
    if not relative and kind != "script":
        return None
    base = "" if specifier.startswith("/") else _node_dir(importer)
    for candidate in (specifier, specifier + ".js", specifier.rstrip("/") + "/index.js"):
        path = resolve_relative(base, candidate)
        if path is not None and path in tree:
            return path
    return None


def resolve_modules(entrypoints, tree, parse_cache=None):
    """
    Breadth-first module graph from the entrypoints.

    Relative import/require/importScripts specifiers become edges; bare names,
    URLs and missing files are recorded as unresolved.
    """
    graph = ModuleGraph()
    seen = set()
    queue = deque()
    for entry in entrypoints:
        if entry.inline_source is not None:
            graph.inline_sources[entry.path] = entry.inline_source
        elif entry.missing_file or entry.path not in tree:
            continue
        if entry.module:
            graph.module_nodes.add(entry.path)
        if entry.path not in seen:
            seen.add(entry.path)
            graph.nodes.append(entry.path)
            queue.append(entry.path)

    edge_set = set()
    unresolved = []
    while queue:
        path = queue.popleft()
        outcome = parse_node(graph, tree, path, parse_cache)
        if outcome.ast is None:
            continue
        for specifier, kind in _specifiers(outcome.ast):
            target = _resolve_specifier(path, specifier, kind, tree)
            if target is None:
                if specifier not in unresolved:
                    unresolved.append(specifier)
                continue
            if kind == "import":
                graph.module_nodes.add(target)
            if (path, target) not in edge_set:
                edge_set.add((path, target))
                graph.edges.append((path, target))
            if target not in seen:
                seen.add(target)
                graph.nodes.append(target)
                queue.append(target)
    graph.unresolved = unresolved
    return graph


def execution_order(graph, entrypoints):
    """Graph nodes in run order: each entrypoint after its dependencies."""
    adjacency = {node: [] for node in graph.nodes}
    for a, b in graph.edges:
        adjacency[a].append(b)
    order, visited = [], set()
    for entry in entrypoints:
        if entry.path not in adjacency or entry.path in visited:
            continue
        stack = [(entry.path, iter(adjacency[entry.path]))]
        visited.add(entry.path)
        while stack:
            node, children = stack[-1]
            child = next(children, None)
            if child is None:
                stack.pop()
                order.append(node)
            elif child not in visited:
                visited.add(child)
                stack.append((child, iter(adjacency[child])))
    return order


# ---- scope analysis ----

def pattern_names(target):
    """Names bound by a binding target (Identifier, simple pattern or Param)."""
    if target is None:
        return []
    if isinstance(target, ast.Param):
        return pattern_names(target.target)
    if isinstance(target, ast.Identifier):
        return [target.name]
    if isinstance(target, ast.ObjectPattern):
        names = [p.value.name for p in target.properties]
    elif isinstance(target, ast.ArrayPattern):
        names = [e.name for e in target.elements if e is not None]
    else:
        return []
    if target.rest is not None:
        names.append(target.rest.name)
    return names


def var_names(statements):
    """Names hoisted to the enclosing function by var declarations."""
    names = set()
    stack = list(statements)
    while stack:
        node = stack.pop()
        if node is None or isinstance(node, ast.FUNCTION_NODES):
            continue
        if isinstance(node, ast.VarDecl) and node.decl_kind == "var":
            for declarator in node.declarations:
                names.update(pattern_names(declarator.target))
        stack.extend(node.children())
    return names


def lexical_names(statements):
    """Names a statement list binds for its own block (let/const/functions/imports)."""
    names = set()
    for node in statements:
        if isinstance(node, ast.ExportDecl) and node.declaration is not None:
            node = node.declaration
        if isinstance(node, ast.VarDecl) and node.decl_kind != "var":
            for declarator in node.declarations:
                names.update(pattern_names(declarator.target))
        elif isinstance(node, ast.FuncDecl) and node.name is not None:
            names.add(node.name.name)
        elif isinstance(node, ast.ImportDecl):
            names.update(spec.local.name for spec in node.specifiers)
    return names


def member_path(node):
    """
    Dotted segments of a member chain rooted at an Identifier.

    Constant computed keys join the path; a non-constant one truncates the
    chain there and ends it with "*". Returns None for other chains.
    """
    segments = []
    while isinstance(node, ast.Member):
        if node.computed:
            key = string_value(node.property)
            if key is None and isinstance(node.property, ast.Literal) and isinstance(node.property.value, float):
                value = node.property.value
                key = str(int(value)) if value == int(value) else None
            if key is None:
                segments = ["*"]
            else:
                segments.insert(0, key)
        else:
            segments.insert(0, node.property.name)
        node = node.object
    if not isinstance(node, ast.Identifier):
        return None
    return [node.name] + segments


def call_path(segments):
    """Normalized API path for a call chain, or None if it does not qualify."""
    if not segments or segments[0] not in config.API_ROOTS:
        return None
    if "*" in segments:
        if len(segments) - 1 < 2:
            return None
    elif len(segments) < 2:
        return None
    return ".".join(normalize_root(segments))


def _scan_program(program, calls, reads):
    """Walk one program with scope tracking; counts go into the two Counters."""
    root_scope = frozenset(var_names(program.body) | lexical_names(program.body))
    stack = [(program, (root_scope,))]
    callees = set()
    write_targets = set()

    def bound(name, scopes):
        return any(name in scope for scope in scopes)

    while stack:
        node, scopes = stack.pop()
        if node is None:
            continue
        if isinstance(node, ast.FUNCTION_NODES):
            names = set()
            for param in node.params:
                names.update(pattern_names(param))
            if isinstance(node, ast.FuncExpr) and node.name is not None:
                names.add(node.name.name)
            body = node.body.body if isinstance(node.body, ast.Block) else [node.body]
            names |= var_names(body)
            inner = scopes + (frozenset(names),)
            if isinstance(node.body, ast.Block):
                inner = inner + (frozenset(lexical_names(body)),)
            for param in node.params:
                stack.append((param.default, inner))
            for statement in reversed(body):
                stack.append((statement, inner))
            continue
        if isinstance(node, ast.Block):
            inner = scopes + (frozenset(lexical_names(node.body)),)
            for statement in reversed(node.body):
                stack.append((statement, inner))
            continue
        if isinstance(node, ast.Switch):
            statements = [s for case in node.cases for s in case.body]
            inner = scopes + (frozenset(lexical_names(statements)),)
            stack.append((node.discriminant, scopes))
            for case in node.cases:
                stack.append((case.test, inner))
                for statement in case.body:
                    stack.append((statement, inner))
            continue
        if isinstance(node, (ast.For, ast.ForIn)):
            head = node.init if isinstance(node, ast.For) else node.left
            if isinstance(head, ast.VarDecl) and head.decl_kind != "var":
                scopes = scopes + (frozenset(lexical_names([head])),)
        if isinstance(node, ast.Try):
            stack.append((node.block, scopes))
            if node.handler is not None:
                stack.append((node.handler, scopes + (frozenset(pattern_names(node.param)),)))
            stack.append((node.finalizer, scopes))
            continue
        if isinstance(node, ast.Call):
            callees.add(id(node.callee))
            segments = member_path(node.callee)
            if segments and not bound(segments[0], scopes):
                path = call_path(segments)
                if path is not None:
                    calls[path] += 1
        elif isinstance(node, ast.Assign):
            write_targets.add(id(node.target))
        elif isinstance(node, ast.Member) and id(node) not in callees and id(node) not in write_targets:
            obj = node.object
            if isinstance(obj, ast.Identifier) and obj.name == "navigator" and not bound("navigator", scopes):
                segments = member_path(node)
                if segments and "*" not in segments:
                    reads[".".join(segments)] += 1
        for child in reversed(list(node.children())):
            stack.append((child, scopes))


def _scan_graph(graph, tree, parse_cache):
    calls, reads = Counter(), Counter()
    for path in graph.nodes:
        outcome = parse_node(graph, tree, path, parse_cache)
        if outcome.ast is None:
            continue
        _scan_program(outcome.ast, calls, reads)
    return calls, reads


def extract_api_calls_static(graph, tree, parse_cache=None):
    """
    API invocations on unshadowed chrome/browser/navigator roots, aggregated per path.

    Returns ApiCall records (origin "static") sorted by path.
    """
    calls, _ = _scan_graph(graph, tree, parse_cache)
    return make_calls(calls, STATIC)


def extract_property_reads_static(graph, tree, parse_cache=None):
    """Reads of navigator.<name> properties, kept apart from invocations."""
    _, reads = _scan_graph(graph, tree, parse_cache)
    return make_calls(reads, STATIC)
