# ast_nodes.py
"""AST node types shared by the static and the mock tracer."""
import dataclasses
from dataclasses import dataclass, field
from typing import ClassVar, List, Optional, Tuple

Span = Tuple[int, int]


@dataclass
class Node:
    span: Span
    kind: ClassVar[str] = "Node"

    def children(self):
        """Direct child nodes in field order (holes and None skipped)."""
        for f in dataclasses.fields(self):
            if f.name == "span":
                continue
            value = getattr(self, f.name)
            if isinstance(value, Node):
                yield value
            elif isinstance(value, (list, tuple)):
                for item in value:
                    if isinstance(item, Node):
                        yield item

    def walk(self):
        """Pre-order traversal."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(list(node.children())))


def _node(kind):
    def wrap(cls):
        cls.kind = kind
        return dataclass(cls)
    return wrap


# ---- statements ----

@_node("Program")
class Program(Node):
    body: List[Node] = field(default_factory=list)
    module: bool = False


@_node("VarDeclarator")
class VarDeclarator(Node):
    target: Node = None
    init: Optional[Node] = None


@_node("VarDecl")
class VarDecl(Node):
    declarations: List[VarDeclarator] = field(default_factory=list)
    decl_kind: str = "var"


@_node("Param")
class Param(Node):
    target: Node = None
    default: Optional[Node] = None
    rest: bool = False


@_node("FuncDecl")
class FuncDecl(Node):
    name: Optional["Identifier"] = None
    params: List[Param] = field(default_factory=list)
    body: "Block" = None


@_node("FuncExpr")
class FuncExpr(Node):
    name: Optional["Identifier"] = None
    params: List[Param] = field(default_factory=list)
    body: "Block" = None


@_node("ArrowFuncExpr")
class ArrowFuncExpr(Node):
    params: List[Param] = field(default_factory=list)
    body: Node = None
    expression: bool = False


@_node("Block")
class Block(Node):
    body: List[Node] = field(default_factory=list)


@_node("Empty")
class Empty(Node):
    pass


@_node("ExprStmt")
class ExprStmt(Node):
    expression: Node = None


@_node("If")
class If(Node):
    test: Node = None
    consequent: Node = None
    alternate: Optional[Node] = None


@_node("For")
class For(Node):
    init: Optional[Node] = None
    test: Optional[Node] = None
    update: Optional[Node] = None
    body: Node = None


@_node("ForIn")
class ForIn(Node):
    left: Node = None
    right: Node = None
    body: Node = None
    of: bool = False


@_node("While")
class While(Node):
    test: Node = None
    body: Node = None


@_node("DoWhile")
class DoWhile(Node):
    body: Node = None
    test: Node = None


@_node("Return")
class Return(Node):
    argument: Optional[Node] = None


@_node("Break")
class Break(Node):
    pass


@_node("Continue")
class Continue(Node):
    pass


@_node("Throw")
class Throw(Node):
    argument: Node = None


@_node("Try")
class Try(Node):
    block: Block = None
    param: Optional[Node] = None
    handler: Optional[Block] = None
    finalizer: Optional[Block] = None


@_node("SwitchCase")
class SwitchCase(Node):
    test: Optional[Node] = None  # None for default
    body: List[Node] = field(default_factory=list)


@_node("Switch")
class Switch(Node):
    discriminant: Node = None
    cases: List[SwitchCase] = field(default_factory=list)


@_node("ImportSpecifier")
class ImportSpecifier(Node):
    imported: str = ""  # "default", "*" or the exported name
    local: "Identifier" = None


@_node("ImportDecl")
class ImportDecl(Node):
    source: str = ""
    specifiers: List[ImportSpecifier] = field(default_factory=list)


@_node("ExportDecl")
class ExportDecl(Node):
    declaration: Optional[Node] = None
    names: List[Tuple[str, str]] = field(default_factory=list)
    source: Optional[str] = None
    default: bool = False


# ---- expressions ----

@_node("Identifier")
class Identifier(Node):
    name: str = ""


@_node("This")
class This(Node):
    pass


@_node("Literal")
class Literal(Node):
    value: object = None  # str, float, bool or None (null)


@_node("RegexLiteral")
class RegexLiteral(Node):
    pattern: str = ""
    flags: str = ""


@_node("TemplateLiteral")
class TemplateLiteral(Node):
    quasis: List[str] = field(default_factory=list)
    expressions: List[Node] = field(default_factory=list)


@_node("Property")
class Property(Node):
    key: Node = None
    value: Node = None
    computed: bool = False
    shorthand: bool = False
    method: bool = False


@_node("ObjectLiteral")
class ObjectLiteral(Node):
    properties: List[Node] = field(default_factory=list)  # Property or Spread


@_node("ArrayLiteral")
class ArrayLiteral(Node):
    elements: List[Optional[Node]] = field(default_factory=list)


@_node("ObjectPattern")
class ObjectPattern(Node):
    properties: List[Property] = field(default_factory=list)
    rest: Optional["Identifier"] = None


@_node("ArrayPattern")
class ArrayPattern(Node):
    elements: List[Optional["Identifier"]] = field(default_factory=list)
    rest: Optional["Identifier"] = None


@_node("Assign")
class Assign(Node):
    op: str = "="
    target: Node = None
    value: Node = None


@_node("Update")
class Update(Node):
    op: str = "++"
    prefix: bool = False
    argument: Node = None


@_node("Call")
class Call(Node):
    callee: Node = None
    arguments: List[Node] = field(default_factory=list)
    optional: bool = False


@_node("New")
class New(Node):
    callee: Node = None
    arguments: List[Node] = field(default_factory=list)


@_node("Member")
class Member(Node):
    object: Node = None
    property: Node = None  # Identifier when not computed
    computed: bool = False
    optional: bool = False


@_node("Binary")
class Binary(Node):
    op: str = "+"
    left: Node = None
    right: Node = None


@_node("Logical")
class Logical(Node):
    op: str = "&&"
    left: Node = None
    right: Node = None


@_node("Unary")
class Unary(Node):
    op: str = "!"
    argument: Node = None


@_node("Conditional")
class Conditional(Node):
    test: Node = None
    consequent: Node = None
    alternate: Node = None


@_node("Sequence")
class Sequence(Node):
    expressions: List[Node] = field(default_factory=list)


@_node("Spread")
class Spread(Node):
    argument: Node = None


FUNCTION_NODES = (FuncDecl, FuncExpr, ArrowFuncExpr)


# ---- constant folding ----

def _fold_value(value):
    if isinstance(value, Node):
        return fold_constants(value)
    if isinstance(value, list):
        return [_fold_value(v) for v in value]
    return value


def fold_constants(node):
    """
    Fold string concatenation bottom-up.

    Binary "+" over two string literals becomes one string Literal and a
    template without interpolations becomes its text. Other nodes are rebuilt
    with folded children but otherwise left as they are.
    """
    if node is None:
        return None
    changes = {}
    for f in dataclasses.fields(node):
        if f.name == "span":
            continue
        value = getattr(node, f.name)
        folded = _fold_value(value)
        if folded is not value:
            changes[f.name] = folded
    if changes:
        node = dataclasses.replace(node, **changes)
    if isinstance(node, Binary) and node.op == "+":
        left, right = node.left, node.right
        if (isinstance(left, Literal) and isinstance(left.value, str)
                and isinstance(right, Literal) and isinstance(right.value, str)):
            return Literal(node.span, left.value + right.value)
    if isinstance(node, TemplateLiteral) and not node.expressions:
        return Literal(node.span, "".join(node.quasis))
    return node


def string_value(node):
    """The folded string value of an expression, or None when it is not constant."""
    folded = fold_constants(node)
    if isinstance(folded, Literal) and isinstance(folded.value, str):
        return folded.value
    return None
