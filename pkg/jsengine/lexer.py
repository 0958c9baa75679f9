# lexer.py
"""Lenient JavaScript tokenizer.

Malformed input never raises here: bad tokens come back with ``error`` set
so the parser can skip the statement that contains them.
"""
from dataclasses import dataclass
from typing import List, Optional

from common.errors import LookalikeError

NAME = "name"
NUM = "num"
STRING = "string"
TEMPLATE = "template"
REGEX = "regex"
PUNCT = "punct"
INVALID = "invalid"
EOF = "eof"

PUNCTUATORS = sorted([
    ">>>=", "...", "===", "!==", "**=", "<<=", ">>=", ">>>", "&&=", "||=", "??=",
    "=>", "==", "!=", "<=", ">=", "&&", "||", "??", "?.", "++", "--",
    "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "**", "<<", ">>",
    "{", "}", "(", ")", "[", "]", ";", ",", "<", ">", "+", "-", "*", "/",
    "%", "&", "|", "^", "!", "~", "?", ":", "=", ".", "@", "#",
], key=len, reverse=True)

REGEX_FLAGS = set("gimsy")
LINE_TERMINATORS = "\n\r  "

# Keywords after which a "/" starts a regular expression
_REGEX_AFTER_WORDS = {
    "return", "typeof", "instanceof", "in", "of", "new", "delete", "void",
    "throw", "case", "do", "else", "yield", "await",
}

_SIMPLE_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", "b": "\b", "f": "\f", "v": "\v", "0": "\0"}


class LexError(LookalikeError):
    pass


@dataclass(frozen=True)
class Token:
    type: str
    value: object
    start: int
    end: int
    nl_before: bool = False
    error: Optional[str] = None
    raw: str = ""

    def is_punct(self, *values):
        return self.type == PUNCT and self.value in values

    def is_name(self, *values):
        return self.type == NAME and (not values or self.value in values)


@dataclass(frozen=True)
class TemplateValue:
    quasis: tuple
    expressions: tuple  # (start, end) offsets of each ${...} body


def _is_id_start(ch):
    return ch.isalpha() or ch in "$_" or (ord(ch) > 127 and ch.isidentifier())


def _is_id_part(ch):
    return ch.isalnum() or ch in "$_‌‍" or (ord(ch) > 127 and ("a" + ch).isidentifier())


class Lexer:
    def __init__(self, source, start=0, end=None):
        self.src = source
        self.pos = start
        self.end = len(source) if end is None else end
        self.tokens: List[Token] = []
        self.error_start = start

    # ---- helpers ----

    def _peek(self, offset=0):
        i = self.pos + offset
        return self.src[i] if i < self.end else ""

    def _regex_allowed(self):
        if not self.tokens:
            return True
        prev = self.tokens[-1]
        if prev.type in (NUM, STRING, TEMPLATE, REGEX):
            return False
        if prev.type == NAME:
            return prev.value in _REGEX_AFTER_WORDS
        if prev.type == PUNCT:
            return prev.value not in (")", "]", "}")
        return True

    def _skip_trivia(self):
        """Skip whitespace and comments; returns (saw_newline, error)."""
        newline = False
        while self.pos < self.end:
            ch = self.src[self.pos]
            if ch in LINE_TERMINATORS:
                newline = True
                self.pos += 1
            elif ch.isspace() or ch == "﻿":
                self.pos += 1
            elif ch == "/" and self._peek(1) == "/":
                while self.pos < self.end and self.src[self.pos] not in LINE_TERMINATORS:
                    self.pos += 1
            elif ch == "/" and self._peek(1) == "*":
                close = self.src.find("*/", self.pos + 2, self.end)
                if close < 0:
                    self.error_start = self.pos
                    self.pos = self.end
                    return newline, "unterminated comment"
                if any(c in LINE_TERMINATORS for c in self.src[self.pos:close]):
                    newline = True
                self.pos = close + 2
            else:
                break
        return newline, None

    # ---- scanners ----

    def _scan_string(self, quote):
        start = self.pos
        self.pos += 1
        out = []
        while self.pos < self.end:
            ch = self.src[self.pos]
            if ch == quote:
                self.pos += 1
                return "".join(out), None
            if ch in "\n\r":
                return "".join(out), "unterminated string"
            if ch == "\\":
                decoded, error = self._scan_escape()
                if error:
                    return "".join(out), error
                out.append(decoded)
                continue
            out.append(ch)
            self.pos += 1
        self.pos = max(self.pos, start + 1)
        return "".join(out), "unterminated string"

    def _scan_escape(self):
        """At a backslash; returns (decoded text, error)."""
        self.pos += 1
        if self.pos >= self.end:
            return "", "bad escape"
        ch = self.src[self.pos]
        self.pos += 1
        if ch in _SIMPLE_ESCAPES and not (ch == "0" and self._peek().isdigit()):
            return _SIMPLE_ESCAPES[ch], None
        if ch == "\r":
            if self._peek() == "\n":
                self.pos += 1
            return "", None
        if ch in LINE_TERMINATORS:
            return "", None
        if ch == "x":
            digits = self.src[self.pos:self.pos + 2]
            if len(digits) == 2 and all(c in "0123456789abcdefABCDEF" for c in digits):
                self.pos += 2
                return chr(int(digits, 16)), None
            return "", "bad hex escape"
        if ch == "u":
            if self._peek() == "{":
                close = self.src.find("}", self.pos, self.end)
                digits = self.src[self.pos + 1:close] if close > 0 else ""
                if digits and all(c in "0123456789abcdefABCDEF" for c in digits) and int(digits, 16) <= 0x10FFFF:
                    self.pos = close + 1
                    return chr(int(digits, 16)), None
                return "", "bad unicode escape"
            digits = self.src[self.pos:self.pos + 4]
            if len(digits) == 4 and all(c in "0123456789abcdefABCDEF" for c in digits):
                self.pos += 4
                return chr(int(digits, 16)), None
            return "", "bad unicode escape"
        return ch, None

    def _scan_template(self):
        """At a backtick; returns (TemplateValue, error)."""
        self.pos += 1
        quasis, expressions, current = [], [], []
        while self.pos < self.end:
            ch = self.src[self.pos]
            if ch == "`":
                self.pos += 1
                quasis.append("".join(current))
                return TemplateValue(tuple(quasis), tuple(expressions)), None
            if ch == "\\":
                decoded, error = self._scan_escape()
                if error:
                    return None, error
                current.append(decoded)
                continue
            if ch == "$" and self._peek(1) == "{":
                quasis.append("".join(current))
                current = []
                self.pos += 2
                body_start = self.pos
                body_end, error = self._skip_balanced_braces()
                if error:
                    return None, error
                expressions.append((body_start, body_end))
                continue
            current.append(ch)
            self.pos += 1
        return None, "unterminated template"

    def _skip_balanced_braces(self):
        """Inside ${...}; advance past the closing brace. Returns (body end, error)."""
        depth = 0
        while self.pos < self.end:
            ch = self.src[self.pos]
            if ch in "'\"":
                _, error = self._scan_string(ch)
                if error:
                    return self.pos, error
                continue
            if ch == "`":
                _, error = self._scan_template()
                if error:
                    return self.pos, error
                continue
            if ch == "/" and self._peek(1) in "/*":
                _, error = self._skip_trivia()
                if error:
                    return self.pos, error
                continue
            if ch == "{":
                depth += 1
            elif ch == "}":
                if depth == 0:
                    self.pos += 1
                    return self.pos - 1, None
                depth -= 1
            self.pos += 1
        return self.pos, "unterminated template expression"

    def _scan_regex(self):
        start = self.pos
        self.pos += 1
        in_class = False
        while self.pos < self.end:
            ch = self.src[self.pos]
            if ch in LINE_TERMINATORS:
                return None, "unterminated regex"
            if ch == "\\":
                self.pos += 2
                continue
            if ch == "[":
                in_class = True
            elif ch == "]":
                in_class = False
            elif ch == "/" and not in_class:
                pattern = self.src[start + 1:self.pos]
                self.pos += 1
                flags_start = self.pos
                while self.pos < self.end and _is_id_part(self.src[self.pos]):
                    self.pos += 1
                flags = self.src[flags_start:self.pos]
                if set(flags) - REGEX_FLAGS or len(set(flags)) != len(flags):
                    return (pattern, flags), f"unsupported regex flags {flags!r}"
                return (pattern, flags), None
            self.pos += 1
        return None, "unterminated regex"

    def _scan_number(self):
        start = self.pos
        src = self.src
        if src[self.pos] == "0" and self._peek(1) in ("x", "X", "o", "O", "b", "B"):
            base = {"x": 16, "o": 8, "b": 2}[self._peek(1).lower()]
            self.pos += 2
            digits_start = self.pos
            while self.pos < self.end and (src[self.pos].isalnum() or src[self.pos] == "_"):
                self.pos += 1
            digits = src[digits_start:self.pos].replace("_", "")
            try:
                return float(int(digits, base)), None
            except ValueError:
                return 0.0, "bad number"
        while self.pos < self.end and (src[self.pos].isdigit() or src[self.pos] == "_"):
            self.pos += 1
        if self._peek() == ".":
            self.pos += 1
            while self.pos < self.end and (src[self.pos].isdigit() or src[self.pos] == "_"):
                self.pos += 1
        if self._peek() in ("e", "E"):
            look = 1
            if self._peek(1) in ("+", "-"):
                look = 2
            if self._peek(look).isdigit():
                self.pos += look
                while self.pos < self.end and src[self.pos].isdigit():
                    self.pos += 1
        text = src[start:self.pos].replace("_", "")
        if self._peek() == "n":
            self.pos += 1
            return 0.0, "BigInt literals are not supported"
        if self.pos < self.end and _is_id_start(src[self.pos]):
            return 0.0, "identifier directly after number"
        try:
            return float(text), None
        except ValueError:
            return 0.0, "bad number"

    # ---- driver ----

    def _push(self, type_, value, start, newline, error=None):
        self.tokens.append(Token(type_, value, start, self.pos, newline, error, self.src[start:self.pos]))

    def tokenize(self):
        pending_newline = False
        while True:
            newline, trivia_error = self._skip_trivia()
            newline = newline or pending_newline
            pending_newline = False
            if trivia_error:
                self._push(INVALID, None, self.error_start, newline, trivia_error)
            if self.pos >= self.end:
                self.tokens.append(Token(EOF, None, self.end, self.end, newline))
                return self.tokens
            start = self.pos
            ch = self.src[start]
            if _is_id_start(ch):
                while self.pos < self.end and _is_id_part(self.src[self.pos]):
                    self.pos += 1
                self._push(NAME, self.src[start:self.pos], start, newline)
            elif ch.isdigit() or (ch == "." and self._peek(1).isdigit()):
                value, error = self._scan_number()
                self._push(NUM, value, start, newline, error)
            elif ch in "'\"":
                value, error = self._scan_string(ch)
                self._push(STRING, value, start, newline, error)
            elif ch == "`":
                value, error = self._scan_template()
                if error:
                    self.pos = max(self.pos, start + 1)
                self._push(TEMPLATE, value, start, newline, error)
            elif ch == "/" and self._regex_allowed():
                value, error = self._scan_regex()
                if value is None:
                    self.pos = start + 1
                self._push(REGEX, value, start, newline, error)
            else:
                for punct in PUNCTUATORS:
                    if self.src.startswith(punct, start) and start + len(punct) <= self.end:
                        if punct == "?." and self._peek(2).isdigit():
                            continue
                        self.pos = start + len(punct)
                        self._push(PUNCT, punct, start, newline)
                        break
                else:
                    self.pos = start + 1
                    self._push(INVALID, ch, start, newline, f"unexpected character {ch!r}")


def tokenize(source, start=0, end=None):
    """Tokenize leniently; the list always ends with an EOF token."""
    return Lexer(source, start, end).tokenize()


def tokenize_strict(source):
    """Tokenize, raising LexError on the first malformed token."""
    tokens = tokenize(source)
    for token in tokens:
        if token.error:
            raise LexError(f"{token.error} at offset {token.start}")
    return tokens
