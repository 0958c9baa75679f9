# parser.py
"""
Recursive descent parser for the subset of JavaScript the tracers execute.

Every statement list recovers on its own: a statement that fails to parse is
skipped and recorded, and parsing resumes with the next statement.
"""
import logging
import re
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from common.errors import LookalikeError
from jsengine import ast_nodes as ast
from jsengine.ast_nodes import fold_constants  # noqa: F401  (re-exported)
from jsengine.lexer import EOF, NAME, NUM, PUNCT, REGEX, STRING, TEMPLATE, tokenize, tokenize_strict  # noqa: F401

logger = logging.getLogger(__name__)

# Operator precedence (higher = binds tighter)
PRECEDENCE = {
    "||": 1, "??": 1,
    "&&": 2,
    "|": 3,
    "^": 4,
    "&": 5,
    "==": 6, "!=": 6, "===": 6, "!==": 6,
    "<": 7, ">": 7, "<=": 7, ">=": 7, "in": 7, "instanceof": 7,
    "<<": 8, ">>": 8, ">>>": 8,
    "+": 9, "-": 9,
    "*": 10, "/": 10, "%": 10,
    "**": 11,
}

LOGICAL_OPS = ("||", "&&", "??")
ASSIGN_OPS = ("=", "+=", "-=", "*=", "/=", "%=", "**=", "<<=", ">>=", ">>>=",
              "&=", "|=", "^=", "&&=", "||=", "??=")
UNARY_OPS = ("!", "~", "+", "-")
UNARY_WORDS = ("typeof", "void", "delete")

RESERVED = frozenset({
    "break", "case", "catch", "class", "const", "continue", "debugger", "default",
    "delete", "do", "else", "enum", "export", "extends", "false", "finally", "for",
    "function", "if", "import", "in", "instanceof", "new", "null", "return", "super",
    "switch", "this", "throw", "true", "try", "typeof", "var", "void", "while", "with",
})

MAX_NESTING = 100

_MODULE_SNIFF = re.compile(r"^\s*(import|export)\b(?!\s*\()", re.M)


class ParseError(LookalikeError):
    def __init__(self, message, span=(0, 0)):
        super().__init__(message)
        self.span = span


@dataclass
class ParseOutcome:
    ast: Optional[ast.Program]
    errors: List[Tuple[Tuple[int, int], str]] = field(default_factory=list)
    coverage: float = 1.0

    @property
    def ok(self):
        return not self.errors


def is_module_source(text):
    """True when the text has top-level-looking import/export statements."""
    return bool(_MODULE_SNIFF.search(text))


class Parser:
    """Recursive descent parser producing jsengine.ast_nodes trees."""

    def __init__(self, source, module_mode=False, start=0, end=None):
        self.src = source
        self.module_mode = module_mode
        self.tokens = tokenize(source, start, end)
        self.pos = 0
        self.last_end = start
        self.depth = 0
        self.errors = []
        self.skipped = []

    # ---- token helpers ----

    @property
    def current(self):
        return self.tokens[self.pos]

    def _peek(self, offset=1):
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def _error(self, message, token=None):
        token = token or self.current
        if token.error:
            message = token.error
        return ParseError(message, (token.start, max(token.end, token.start)))

    def _advance(self):
        token = self.current
        if token.error:
            raise self._error(token.error, token)
        if token.type != EOF:
            self.pos += 1
        self.last_end = token.end
        return token

    def _check(self, *values):
        return self.current.is_punct(*values)

    def _check_name(self, *values):
        return self.current.is_name(*values)

    def _match(self, *values):
        if self._check(*values):
            return self._advance()
        return None

    def _match_name(self, *values):
        if self._check_name(*values):
            return self._advance()
        return None

    def _expect(self, value, message=None):
        if not self._check(value):
            raise self._error(message or f"expected {value!r}")
        return self._advance()

    def _is_at_end(self):
        return self.current.type == EOF

    def _span(self, start):
        return (start, max(self.last_end, start))

    def _consume_semicolon(self):
        if self._match(";"):
            return
        if self._check("}") or self._is_at_end() or self.current.nl_before:
            return
        raise self._error("expected ';'")

    def _enter(self):
        self.depth += 1
        if self.depth > MAX_NESTING:
            raise self._error("nesting too deep")

    # ---- program / statement lists ----

    def parse(self):
        body = self._parse_statement_list(top_level=True)
        program = ast.Program((0, len(self.src)), body, self.module_mode)
        return program

    def _at_list_end(self, enders):
        if self._is_at_end():
            return True
        token = self.current
        if token.type == PUNCT and token.value == "}" and "}" in enders:
            return True
        return token.type == NAME and token.value in enders

    def _parse_statement_list(self, top_level=False, enders=("}",)):
        body = []
        enders = () if top_level else enders
        while not self._at_list_end(enders):
            start_index = self.pos
            saved = (len(self.errors), len(self.skipped), self.depth)
            try:
                body.append(self._parse_statement())
            except (ParseError, RecursionError) as e:
                if isinstance(e, RecursionError):
                    e = self._error("nesting too deep")
                del self.errors[saved[0]:]
                del self.skipped[saved[1]:]
                self.depth = saved[2]
                self._recover(start_index, top_level)
                self.errors.append((e.span, str(e)))
        return body

    def _recover(self, start_index, top_level):
        """Skip the failed statement: to ';' or a line break at depth 0, or the enclosing '}'."""
        self.pos = start_index
        depth = 0
        consumed = False
        while True:
            token = self.tokens[self.pos]
            if token.type == EOF:
                break
            if consumed and depth == 0 and token.nl_before:
                break
            if token.type == PUNCT:
                if token.value in ("{", "(", "["):
                    depth += 1
                elif token.value in ("}", ")", "]"):
                    if depth == 0:
                        if token.value == "}" and not top_level:
                            break
                    else:
                        depth -= 1
                elif token.value == ";" and depth == 0:
                    self.pos += 1
                    break
            self.pos += 1
            consumed = True
        if self.pos > start_index:
            start = self.tokens[start_index].start
            end = self.tokens[self.pos - 1].end
            self.skipped.append((start, end))
            self.last_end = end

    # ---- statements ----

    def _parse_statement(self):
        self._enter()
        try:
            return self._statement()
        finally:
            self.depth -= 1

    def _statement(self):
        token = self.current
        start = token.start
        if token.type == PUNCT:
            if token.value == "{":
                return self._parse_block()
            if token.value == ";":
                self._advance()
                return ast.Empty(self._span(start))
        if token.type == NAME:
            word = token.value
            nxt = self._peek()
            if word in ("var", "const") or (word == "let" and (nxt.type == NAME or nxt.is_punct("[", "{"))):
                decl = self._parse_var_decl()
                self._consume_semicolon()
                decl.span = self._span(start)
                return decl
            if word == "function":
                return self._parse_function(ast.FuncDecl)
            if word == "async" and nxt.is_name("function") and not nxt.nl_before:
                raise self._error("async functions are not supported")
            if word == "class":
                raise self._error("class declarations are not supported")
            if word == "if":
                return self._parse_if()
            if word == "for":
                return self._parse_for()
            if word == "while":
                self._advance()
                test = self._parse_paren_expression()
                body = self._parse_statement()
                return ast.While(self._span(start), test, body)
            if word == "do":
                self._advance()
                body = self._parse_statement()
                if not self._match_name("while"):
                    raise self._error("expected 'while'")
                test = self._parse_paren_expression()
                self._match(";")
                return ast.DoWhile(self._span(start), body, test)
            if word == "return":
                self._advance()
                argument = None
                if not (self._check(";", "}") or self._is_at_end() or self.current.nl_before):
                    argument = self._parse_expression()
                self._consume_semicolon()
                return ast.Return(self._span(start), argument)
            if word in ("break", "continue"):
                self._advance()
                if self.current.type == NAME and not self.current.nl_before:
                    raise self._error("labels are not supported")
                self._consume_semicolon()
                cls = ast.Break if word == "break" else ast.Continue
                return cls(self._span(start))
            if word == "throw":
                self._advance()
                argument = self._parse_expression()
                self._consume_semicolon()
                return ast.Throw(self._span(start), argument)
            if word == "try":
                return self._parse_try()
            if word == "switch":
                return self._parse_switch()
            if word == "with":
                raise self._error("'with' statements are not supported")
            if word == "debugger":
                self._advance()
                self._consume_semicolon()
                return ast.Empty(self._span(start))
            if word == "import" and not nxt.is_punct("(", "."):
                if not self.module_mode:
                    raise self._error("import declaration outside module code")
                return self._parse_import()
            if word == "export":
                if not self.module_mode:
                    raise self._error("export declaration outside module code")
                return self._parse_export()
            if word not in RESERVED and nxt.is_punct(":"):
                raise self._error("labeled statements are not supported")
        expression = self._parse_expression()
        self._consume_semicolon()
        return ast.ExprStmt(self._span(start), expression)

    def _parse_block(self):
        start = self._expect("{").start
        body = self._parse_statement_list()
        self._expect("}")
        return ast.Block(self._span(start), body)

    def _parse_paren_expression(self):
        self._expect("(")
        expression = self._parse_expression()
        self._expect(")")
        return expression

    def _parse_if(self):
        start = self._advance().start
        test = self._parse_paren_expression()
        consequent = self._parse_statement()
        alternate = None
        if self._match_name("else"):
            alternate = self._parse_statement()
        return ast.If(self._span(start), test, consequent, alternate)

    def _parse_var_decl(self, no_in=False):
        start_token = self._advance()
        declarations = []
        while True:
            decl_start = self.current.start
            target = self._parse_binding_target()
            init = None
            if self._match("="):
                init = self._parse_assignment(no_in)
            declarations.append(ast.VarDeclarator(self._span(decl_start), target, init))
            if not self._match(","):
                break
        return ast.VarDecl(self._span(start_token.start), declarations, start_token.value)

    def _parse_for(self):
        start = self._advance().start
        if self._check_name("await"):
            raise self._error("for await is not supported")
        self._expect("(")
        init = None
        if self._check_name("var", "const") or (self._check_name("let") and
                                                  (self._peek().type == NAME or self._peek().is_punct("[", "{"))):
            init = self._parse_var_decl(no_in=True)
            if self._check_name("in", "of") and len(init.declarations) == 1 and init.declarations[0].init is None:
                return self._finish_for_in(start, init)
        elif not self._check(";"):
            init = self._parse_expression(no_in=True)
            if self._check_name("in", "of"):
                if not isinstance(init, (ast.Identifier, ast.Member)):
                    raise self._error("unsupported for-in/of target")
                return self._finish_for_in(start, init)
        self._expect(";")
        test = None if self._check(";") else self._parse_expression()
        self._expect(";")
        update = None if self._check(")") else self._parse_expression()
        self._expect(")")
        body = self._parse_statement()
        return ast.For(self._span(start), init, test, update, body)

    def _finish_for_in(self, start, left):
        of = self._advance().value == "of"
        right = self._parse_assignment() if of else self._parse_expression()
        self._expect(")")
        body = self._parse_statement()
        return ast.ForIn(self._span(start), left, right, body, of)

    def _parse_try(self):
        start = self._advance().start
        block = self._parse_block()
        param = handler = finalizer = None
        if self._match_name("catch"):
            if self._match("("):
                param = self._parse_binding_target()
                self._expect(")")
            handler = self._parse_block()
        if self._match_name("finally"):
            finalizer = self._parse_block()
        if handler is None and finalizer is None:
            raise self._error("try without catch or finally")
        return ast.Try(self._span(start), block, param, handler, finalizer)

    def _parse_switch(self):
        start = self._advance().start
        discriminant = self._parse_paren_expression()
        self._expect("{")
        cases = []
        seen_default = False
        while not self._check("}"):
            case_start = self.current.start
            if self._match_name("case"):
                test = self._parse_expression()
            elif self._match_name("default"):
                if seen_default:
                    raise self._error("duplicate default clause")
                seen_default = True
                test = None
            else:
                raise self._error("expected 'case' or 'default'")
            self._expect(":")
            body = self._parse_statement_list(enders=("}", "case", "default"))
            cases.append(ast.SwitchCase(self._span(case_start), test, body))
        self._expect("}")
        return ast.Switch(self._span(start), discriminant, cases)

    # ---- modules ----

    def _parse_module_string(self):
        if self.current.type != STRING:
            raise self._error("expected module specifier string")
        return self._advance().value

    def _parse_import(self):
        start = self._advance().start
        specifiers = []
        if self.current.type == STRING:
            source = self._parse_module_string()
            self._consume_semicolon()
            return ast.ImportDecl(self._span(start), source, specifiers)
        if self.current.type == NAME:
            local = self._parse_binding_identifier()
            specifiers.append(ast.ImportSpecifier(local.span, "default", local))
            if not self._match(","):
                return self._finish_import(start, specifiers)
        if self._match("*"):
            spec_start = self.last_end - 1
            if not self._match_name("as"):
                raise self._error("expected 'as'")
            local = self._parse_binding_identifier()
            specifiers.append(ast.ImportSpecifier(self._span(spec_start), "*", local))
        elif self._match("{"):
            while not self._check("}"):
                spec_start = self.current.start
                imported = self._parse_property_name_token()
                if self._match_name("as"):
                    local = self._parse_binding_identifier()
                else:
                    if imported in RESERVED:
                        raise self._error(f"unexpected keyword {imported!r}")
                    local = ast.Identifier(self._span(spec_start), imported)
                specifiers.append(ast.ImportSpecifier(self._span(spec_start), imported, local))
                if not self._match(","):
                    break
            self._expect("}")
        else:
            raise self._error("malformed import declaration")
        return self._finish_import(start, specifiers)

    def _finish_import(self, start, specifiers):
        if not self._match_name("from"):
            raise self._error("expected 'from'")
        source = self._parse_module_string()
        self._consume_semicolon()
        return ast.ImportDecl(self._span(start), source, specifiers)

    def _parse_property_name_token(self):
        token = self.current
        if token.type in (NAME, STRING):
            self._advance()
            return token.value
        raise self._error("expected a name")

    def _parse_export(self):
        start = self._advance().start
        if self._match_name("default"):
            if self._check_name("function"):
                function = self._parse_function(ast.FuncDecl, allow_anonymous=True)
                return ast.ExportDecl(self._span(start), function, [], None, True)
            if self._check_name("class"):
                raise self._error("class declarations are not supported")
            value = self._parse_assignment()
            self._consume_semicolon()
            return ast.ExportDecl(self._span(start), value, [], None, True)
        if self._check_name("var", "let", "const"):
            decl = self._parse_var_decl()
            self._consume_semicolon()
            return ast.ExportDecl(self._span(start), decl, [], None, False)
        if self._check_name("function"):
            function = self._parse_function(ast.FuncDecl)
            return ast.ExportDecl(self._span(start), function, [], None, False)
        if self._check_name("class", "async"):
            raise self._error(f"export {self.current.value} is not supported")
        names = []
        if self._match("*"):
            exported = "*"
            if self._match_name("as"):
                exported = self._parse_property_name_token()
            names.append(("*", exported))
            if not self._match_name("from"):
                raise self._error("expected 'from'")
            source = self._parse_module_string()
            self._consume_semicolon()
            return ast.ExportDecl(self._span(start), None, names, source, False)
        self._expect("{")
        while not self._check("}"):
            local = self._parse_property_name_token()
            exported = local
            if self._match_name("as"):
                exported = self._parse_property_name_token()
            names.append((local, exported))
            if not self._match(","):
                break
        self._expect("}")
        source = None
        if self._match_name("from"):
            source = self._parse_module_string()
        self._consume_semicolon()
        return ast.ExportDecl(self._span(start), None, names, source, False)

    # ---- functions and bindings ----

    def _parse_binding_identifier(self):
        token = self.current
        if token.type != NAME or token.value in RESERVED:
            raise self._error("expected an identifier")
        self._advance()
        return ast.Identifier((token.start, token.end), token.value)

    def _parse_binding_target(self):
        if self._check("{"):
            return self._parse_object_pattern()
        if self._check("["):
            return self._parse_array_pattern()
        return self._parse_binding_identifier()

    def _reject_nested_pattern(self):
        if self._check("{", "["):
            raise self._error("nested destructuring is not supported")

    def _parse_object_pattern(self):
        start = self._advance().start
        properties = []
        rest = None
        while not self._check("}"):
            if self._match("..."):
                rest = self._parse_binding_identifier()
                break
            prop_start = self.current.start
            if self.current.type == NAME:
                key_token = self._advance()
                key = ast.Identifier((key_token.start, key_token.end), key_token.value)
            elif self.current.type in (STRING, NUM):
                key_token = self._advance()
                key = ast.Literal((key_token.start, key_token.end), key_token.value)
            else:
                raise self._error("unsupported destructuring key")
            if self._match(":"):
                self._reject_nested_pattern()
                value = self._parse_binding_identifier()
                shorthand = False
            else:
                if not isinstance(key, ast.Identifier) or key.name in RESERVED:
                    raise self._error("expected ':' in object pattern")
                value = ast.Identifier(key.span, key.name)
                shorthand = True
            if self._check("="):
                raise self._error("defaults inside destructuring are not supported")
            properties.append(ast.Property(self._span(prop_start), key, value, False, shorthand))
            if not self._match(","):
                break
        self._expect("}")
        return ast.ObjectPattern(self._span(start), properties, rest)

    def _parse_array_pattern(self):
        start = self._advance().start
        elements = []
        rest = None
        while not self._check("]"):
            if self._match(","):
                elements.append(None)
                continue
            if self._match("..."):
                rest = self._parse_binding_identifier()
                break
            self._reject_nested_pattern()
            elements.append(self._parse_binding_identifier())
            if self._check("="):
                raise self._error("defaults inside destructuring are not supported")
            if not self._match(","):
                break
        self._expect("]")
        return ast.ArrayPattern(self._span(start), elements, rest)

    def _parse_params(self):
        """Parameters after '(' up to and including ')'."""
        params = []
        while not self._check(")"):
            start = self.current.start
            if self._match("..."):
                target = self._parse_binding_target()
                params.append(ast.Param(self._span(start), target, None, True))
                break
            target = self._parse_binding_target()
            default = self._parse_assignment() if self._match("=") else None
            params.append(ast.Param(self._span(start), target, default, False))
            if not self._match(","):
                break
        self._expect(")")
        return params

    def _parse_function_body(self):
        return self._parse_block()

    def _parse_function(self, cls, allow_anonymous=False):
        start = self._advance().start  # 'function'
        if self._check("*"):
            raise self._error("generators are not supported")
        name = None
        if self.current.type == NAME and not self._check_name("function"):
            name = self._parse_binding_identifier()
        elif cls is ast.FuncDecl and not allow_anonymous:
            raise self._error("function declaration needs a name")
        self._expect("(")
        params = self._parse_params()
        body = self._parse_function_body()
        if cls is ast.FuncDecl and name is None:
            cls = ast.FuncExpr
        return cls(self._span(start), name, params, body)

    def _arrow_ahead(self):
        """True when the current token starts an arrow function."""
        token = self.current
        if token.type == NAME:
            nxt = self._peek()
            return token.value not in RESERVED and nxt.is_punct("=>") and not nxt.nl_before
        if not token.is_punct("("):
            return False
        depth = 0
        index = self.pos
        while index < len(self.tokens):
            tok = self.tokens[index]
            if tok.type == EOF:
                return False
            if tok.type == PUNCT:
                if tok.value in ("(", "[", "{"):
                    depth += 1
                elif tok.value in (")", "]", "}"):
                    depth -= 1
                    if depth == 0:
                        after = self.tokens[min(index + 1, len(self.tokens) - 1)]
                        return after.is_punct("=>") and not after.nl_before
            index += 1
        return False

    def _parse_arrow(self, no_in=False):
        start = self.current.start
        if self.current.type == NAME:
            ident = self._parse_binding_identifier()
            params = [ast.Param(ident.span, ident, None, False)]
        else:
            self._advance()
            params = self._parse_params()
        self._expect("=>")
        if self._check("{"):
            body = self._parse_function_body()
            return ast.ArrowFuncExpr(self._span(start), params, body, False)
        body = self._parse_assignment(no_in)
        return ast.ArrowFuncExpr(self._span(start), params, body, True)

    # ---- expressions ----

    def _parse_expression(self, no_in=False):
        start = self.current.start
        first = self._parse_assignment(no_in)
        if not self._check(","):
            return first
        expressions = [first]
        while self._match(","):
            expressions.append(self._parse_assignment(no_in))
        return ast.Sequence(self._span(start), expressions)

    def _parse_assignment(self, no_in=False):
        self._enter()
        try:
            return self._assignment(no_in)
        finally:
            self.depth -= 1

    def _assignment(self, no_in):
        token = self.current
        if token.is_name("async"):
            nxt = self._peek()
            if not nxt.nl_before and (nxt.is_name("function") or nxt.is_punct("(") and self._async_arrow()
                                      or nxt.type == NAME and self._peek(2).is_punct("=>")):
                raise self._error("async functions are not supported")
        if token.is_name("yield", "await") and self._looks_like_operand(self._peek()):
            raise self._error(f"'{token.value}' expressions are not supported")
        if self._arrow_ahead():
            return self._parse_arrow(no_in)
        start = token.start
        left = self._parse_conditional(no_in)
        if self.current.type == PUNCT and self.current.value in ASSIGN_OPS:
            op = self.current.value
            if isinstance(left, (ast.ObjectLiteral, ast.ArrayLiteral)):
                raise self._error("destructuring assignment is not supported")
            if not isinstance(left, (ast.Identifier, ast.Member)):
                raise self._error("invalid assignment target")
            self._advance()
            value = self._parse_assignment(no_in)
            return ast.Assign(self._span(start), op, left, value)
        return left

    def _async_arrow(self):
        saved = self.pos
        self.pos += 1
        try:
            return self._arrow_ahead()
        finally:
            self.pos = saved

    @staticmethod
    def _looks_like_operand(token):
        if token.nl_before:
            return False
        return token.type in (NAME, NUM, STRING, TEMPLATE, REGEX) or token.is_punct("(", "[", "{", "!", "-", "+")

    def _parse_conditional(self, no_in):
        start = self.current.start
        test = self._parse_binary(0, no_in)
        if not self._match("?"):
            return test
        consequent = self._parse_assignment()
        self._expect(":")
        alternate = self._parse_assignment(no_in)
        return ast.Conditional(self._span(start), test, consequent, alternate)

    def _binary_operator(self, no_in):
        token = self.current
        if token.type == PUNCT and token.value in PRECEDENCE:
            return token.value
        if token.type == NAME and token.value == "instanceof":
            return token.value
        if token.type == NAME and token.value == "in" and not no_in:
            return token.value
        return None

    def _parse_binary(self, min_prec, no_in):
        start = self.current.start
        left = self._parse_unary()
        while True:
            op = self._binary_operator(no_in)
            if op is None or PRECEDENCE[op] < min_prec:
                return left
            self._advance()
            prec = PRECEDENCE[op]
            right = self._parse_binary(prec if op == "**" else prec + 1, no_in)
            cls = ast.Logical if op in LOGICAL_OPS else ast.Binary
            left = cls(self._span(start), op, left, right)

    def _parse_unary(self):
        token = self.current
        start = token.start
        if token.type == PUNCT and token.value in UNARY_OPS or token.type == NAME and token.value in UNARY_WORDS:
            self._advance()
            self._enter()
            try:
                argument = self._parse_unary()
            finally:
                self.depth -= 1
            return ast.Unary(self._span(start), token.value, argument)
        if token.is_punct("++", "--"):
            self._advance()
            argument = self._parse_unary()
            if not isinstance(argument, (ast.Identifier, ast.Member)):
                raise self._error("invalid update target")
            return ast.Update(self._span(start), token.value, True, argument)
        expression = self._parse_call_member()
        if self._check("++", "--") and not self.current.nl_before:
            if not isinstance(expression, (ast.Identifier, ast.Member)):
                raise self._error("invalid update target")
            op = self._advance().value
            return ast.Update(self._span(start), op, False, expression)
        return expression

    def _parse_member_name(self, start, obj, optional):
        token = self.current
        if token.type != NAME:
            raise self._error("expected a property name")
        self._advance()
        prop = ast.Identifier((token.start, token.end), token.value)
        return ast.Member(self._span(start), obj, prop, False, optional)

    def _parse_call_member(self):
        start = self.current.start
        if self._check_name("new"):
            expression = self._parse_new()
        else:
            expression = self._parse_primary()
        while True:
            if self._match("."):
                expression = self._parse_member_name(start, expression, False)
            elif self._match("?."):
                if self._check("("):
                    arguments = self._parse_arguments()
                    expression = ast.Call(self._span(start), expression, arguments, True)
                elif self._match("["):
                    prop = self._parse_expression()
                    self._expect("]")
                    expression = ast.Member(self._span(start), expression, prop, True, True)
                else:
                    expression = self._parse_member_name(start, expression, True)
            elif self._match("["):
                prop = self._parse_expression()
                self._expect("]")
                expression = ast.Member(self._span(start), expression, prop, True, False)
            elif self._check("("):
                arguments = self._parse_arguments()
                expression = ast.Call(self._span(start), expression, arguments, False)
            elif self.current.type == TEMPLATE:
                raise self._error("tagged templates are not supported")
            else:
                return expression

    def _parse_new(self):
        start = self._advance().start
        if self._check("."):
            raise self._error("new.target is not supported")
        self._enter()
        try:
            callee = self._parse_new() if self._check_name("new") else self._parse_primary()
        finally:
            self.depth -= 1
        while True:
            if self._match("."):
                callee = self._parse_member_name(start, callee, False)
            elif self._match("["):
                prop = self._parse_expression()
                self._expect("]")
                callee = ast.Member(self._span(start), callee, prop, True, False)
            else:
                break
        arguments = self._parse_arguments() if self._check("(") else []
        return ast.New(self._span(start), callee, arguments)

    def _parse_arguments(self):
        self._expect("(")
        arguments = []
        while not self._check(")"):
            start = self.current.start
            if self._match("..."):
                arguments.append(ast.Spread(self._span(start), self._parse_assignment()))
            else:
                arguments.append(self._parse_assignment())
            if not self._match(","):
                break
        self._expect(")")
        return arguments

    def _parse_primary(self):
        token = self.current
        start = token.start
        if token.type == NUM or token.type == STRING:
            self._advance()
            return ast.Literal((token.start, token.end), token.value)
        if token.type == TEMPLATE:
            return self._parse_template()
        if token.type == REGEX:
            self._advance()
            pattern, flags = token.value
            return ast.RegexLiteral((token.start, token.end), pattern, flags)
        if token.type == NAME:
            word = token.value
            if word in ("true", "false"):
                self._advance()
                return ast.Literal((token.start, token.end), word == "true")
            if word == "null":
                self._advance()
                return ast.Literal((token.start, token.end), None)
            if word == "this":
                self._advance()
                return ast.This((token.start, token.end))
            if word == "function":
                return self._parse_function(ast.FuncExpr)
            if word == "class":
                raise self._error("class expressions are not supported")
            if word == "import":
                raise self._error("dynamic import is not supported")
            if word == "super":
                raise self._error("'super' is not supported")
            if word in RESERVED:
                raise self._error(f"unexpected keyword {word!r}")
            self._advance()
            return ast.Identifier((token.start, token.end), word)
        if token.is_punct("("):
            self._advance()
            expression = self._parse_expression()
            self._expect(")")
            return expression
        if token.is_punct("["):
            return self._parse_array_literal()
        if token.is_punct("{"):
            return self._parse_object_literal()
        if token.type == EOF:
            raise self._error("unexpected end of input")
        raise self._error(f"unexpected token {token.raw or token.value!r}")

    def _parse_template(self):
        token = self._advance()
        value = token.value
        expressions = []
        for body_start, body_end in value.expressions:
            sub = Parser(self.src, self.module_mode, body_start, body_end)
            sub.depth = self.depth
            expression = sub._parse_expression()
            if not sub._is_at_end():
                raise sub._error("unexpected token in template expression")
            expressions.append(expression)
        return ast.TemplateLiteral((token.start, token.end), list(value.quasis), expressions)

    def _parse_array_literal(self):
        start = self._advance().start
        elements = []
        while not self._check("]"):
            if self._match(","):
                elements.append(None)
                continue
            element_start = self.current.start
            if self._match("..."):
                elements.append(ast.Spread(self._span(element_start), self._parse_assignment()))
            else:
                elements.append(self._parse_assignment())
            if not self._match(","):
                break
        self._expect("]")
        return ast.ArrayLiteral(self._span(start), elements)

    def _parse_property_key(self):
        token = self.current
        if self._match("["):
            key = self._parse_assignment()
            self._expect("]")
            return key, True
        if token.type == NAME:
            self._advance()
            return ast.Identifier((token.start, token.end), token.value), False
        if token.type in (STRING, NUM):
            self._advance()
            return ast.Literal((token.start, token.end), token.value), False
        raise self._error("expected a property key")

    def _parse_object_literal(self):
        start = self._advance().start
        properties = []
        while not self._check("}"):
            prop_start = self.current.start
            if self._match("..."):
                properties.append(ast.Spread(self._span(prop_start), self._parse_assignment()))
            else:
                properties.append(self._parse_property(prop_start))
            if not self._match(","):
                break
        self._expect("}")
        return ast.ObjectLiteral(self._span(start), properties)

    def _parse_property(self, prop_start):
        token = self.current
        nxt = self._peek()
        if token.is_name("get", "set", "async") and not nxt.is_punct(",", ":", "(", "}", "="):
            raise self._error(f"'{token.value}' properties are not supported")
        if token.is_punct("*"):
            raise self._error("generator methods are not supported")
        key, computed = self._parse_property_key()
        if self._match(":"):
            value = self._parse_assignment()
            return ast.Property(self._span(prop_start), key, value, computed, False, False)
        if self._check("("):
            fn_start = self.current.start
            self._advance()
            params = self._parse_params()
            body = self._parse_function_body()
            value = ast.FuncExpr(self._span(fn_start), None, params, body)
            return ast.Property(self._span(prop_start), key, value, computed, False, True)
        if not computed and isinstance(key, ast.Identifier) and key.name not in RESERVED \
                and self._check(",", "}"):
            value = ast.Identifier(key.span, key.name)
            return ast.Property(self._span(prop_start), key, value, False, True, False)
        raise self._error("expected ':' after property key")


def _merge(intervals):
    merged = []
    for start, end in sorted(intervals):
        if merged and start <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], end))
        else:
            merged.append((start, end))
    return merged


def _utf8_len(text):
    return len(text.encode("utf-8", errors="surrogatepass"))


def parse_program(source, module_mode=False):
    """
    Parse JavaScript source into a ParseOutcome.

    Statements that use unsupported syntax are skipped with an error;
    coverage is the share of UTF-8 bytes outside skipped regions.
    """
    if isinstance(source, bytes):
        source = source.decode("utf-8", errors="replace")
    parser = Parser(source, module_mode)
    program = parser.parse()
    total = _utf8_len(source)
    skipped = sum(_utf8_len(source[a:b]) for a, b in _merge(parser.skipped))
    coverage = 1.0 if total == 0 else max(0.0, 1.0 - skipped / total)
    errors = list(parser.errors)
    if errors:
        logger.debug("parse skipped %d statement(s), coverage %.3f", len(errors), coverage)
    if errors and not program.body:
        return ParseOutcome(None, errors, min(coverage, 1.0 - 1e-9))
    return ParseOutcome(program, errors, coverage)
