"""Recursive-descent parser for the generating-function language.

Precedence (tightest first): ``^``, unary minus, ``* /``, ``+ -``.  Product and
sum indices are ordinary identifiers bound by ``prod(k, lo, hi|inf, body)`` and
``sum(k, lo, hi|inf, body)``; they may appear anywhere in the body, e.g.
``prod(k,1,inf,1/(1-z^k))`` or ``sum(k,1,inf,z^(2^k))``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from .ast import D, BinOp, Builtin, Func, Idx, Neg, Node, Num, Pow, Prod, Sum, Var, contains_z

CANON_RULES = ("list", "geometric", "power", "factorial", "expsq", "dexp")
_FUNCS = ("exp", "log")
_BUILTINS = ("partition", "bell", "geom", "canon")
_RESERVED = set(_FUNCS) | set(_BUILTINS) | {"prod", "sum", "D", "z", "inf"}


class DslError(ValueError):
    """Syntax or name error, with a 1-based source position."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} at line {line}, column {col}")
        self.message = message
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Token:
    kind: str  # num | ident | op | end
    text: str
    pos: int


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))"
)


def _position(src: str, pos: int) -> tuple[int, int]:
    line = src.count("\n", 0, pos) + 1
    start = src.rfind("\n", 0, pos) + 1
    return line, pos - start + 1


def tokenize(src: str) -> list[Token]:
    out: list[Token] = []
    pos = 0
    while True:
        m = _TOKEN_RE.match(src, pos)
        if m is None or m.end() == pos:
            rest = src[pos:]
            if rest.strip() == "":
                out.append(Token("end", "", len(src)))
                return out
            bad = pos + (len(rest) - len(rest.lstrip()))
            raise DslError(f"unexpected character {src[bad]!r}", *_position(src, bad))
        kind = m.lastgroup
        out.append(Token(kind, m.group(kind), m.start(kind)))
        pos = m.end()


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.toks = tokenize(src)
        self.i = 0
        self.scopes: list[str] = []

    # helpers ------------------------------------------------------------
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def error(self, msg: str, tok: Token | None = None) -> DslError:
        tok = tok or self.tok
        return DslError(msg, *_position(self.src, tok.pos))

    def accept(self, text: str) -> bool:
        if self.tok.kind == "op" and self.tok.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> None:
        if not self.accept(text):
            found = "end of input" if self.tok.kind == "end" else repr(self.tok.text)
            raise self.error(f"expected {text!r}, found {found}")

    # grammar ------------------------------------------------------------
    def parse(self) -> Node:
        node = self.expr()
        if self.tok.kind != "end":
            raise self.error(f"unexpected {self.tok.text!r}")
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.tok.text
            self.i += 1
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.tok.text
            self.i += 1
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.accept("-"):
            return Neg(self.unary())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.accept("^"):
            start = self.tok
            exp = self.exponent()
            if contains_z(exp):
                raise self.error("exponent must not depend on z", start)
            return Pow(base, exp)
        return base

    def exponent(self) -> Node:
        if self.accept("-"):
            return Neg(self.exponent())
        tok = self.tok
        if tok.kind == "num":
            self.i += 1
            return Num(Fraction(tok.text))
        if tok.kind == "ident":
            if tok.text in self.scopes:
                self.i += 1
                return Idx(tok.text)
            raise self.error(f"unknown identifier {tok.text!r} in exponent")
        if self.accept("("):
            node = self.expr()
            self.expect(")")
            return node
        raise self.error("expected exponent")

    def atom(self) -> Node:
        tok = self.tok
        if tok.kind == "num":
            self.i += 1
            return Num(Fraction(tok.text))
        if self.accept("("):
            node = self.expr()
            self.expect(")")
            return node
        if tok.kind == "ident":
            name = tok.text
            self.i += 1
            if name == "z":
                return Var()
            if name in self.scopes:
                return Idx(name)
            if name in _FUNCS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Func(name, arg)
            if name in ("prod", "sum"):
                return self.bigop(name, tok)
            if name == "D":
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return D(arg)
            if name in _BUILTINS:
                return self.builtin(name, tok)
            if name == "inf":
                raise self.error("'inf' is only allowed as an upper product/sum bound", tok)
            raise self.error(f"unknown identifier {name!r}", tok)
        if tok.kind == "end":
            raise self.error("unexpected end of input")
        raise self.error(f"unexpected {tok.text!r}")

    def bigop(self, name: str, tok: Token) -> Node:
        self.expect("(")
        var_tok = self.tok
        if var_tok.kind != "ident" or var_tok.text in _RESERVED:
            raise self.error(f"{name}: expected an index name", var_tok)
        self.i += 1
        self.expect(",")
        lo_tok = self.tok
        lo = self.expr()
        if contains_z(lo):
            raise self.error(f"{name}: malformed bounds (lower bound depends on z)", lo_tok)
        self.expect(",")
        hi_tok = self.tok
        if hi_tok.kind == "ident" and hi_tok.text == "inf":
            self.i += 1
            hi = None
        else:
            hi = self.expr()
            if contains_z(hi):
                raise self.error(f"{name}: malformed bounds (upper bound depends on z)", hi_tok)
        self.expect(",")
        self.scopes.append(var_tok.text)
        try:
            body = self.expr()
        finally:
            self.scopes.pop()
        self.expect(")")
        cls = Prod if name == "prod" else Sum
        return cls(var_tok.text, lo, hi, body)

    def builtin(self, name: str, tok: Token) -> Node:
        self.expect("(")
        args: list = []
        if name == "canon":
            rule_tok = self.tok
            if rule_tok.kind != "ident" or rule_tok.text not in CANON_RULES:
                raise self.error(f"canon: expected a rule name ({', '.join(CANON_RULES)})", rule_tok)
            self.i += 1
            args.append(rule_tok.text)
            while self.accept(","):
                args.append(self._number_arg())
        elif not (self.tok.kind == "op" and self.tok.text == ")"):
            args.append(self._number_arg())
            while self.accept(","):
                args.append(self._number_arg())
        self.expect(")")
        if name in ("partition", "bell") and args:
            raise self.error(f"{name}() takes no arguments", tok)
        if name == "geom" and len(args) > 1:
            raise self.error("geom() takes at most one argument", tok)
        return Builtin(name, tuple(args))

    def _number_arg(self) -> Num:
        tok = self.tok
        if tok.kind != "num":
            raise self.error("expected a number", tok)
        self.i += 1
        return Num(Fraction(tok.text))


def parse(src: str) -> Node:
    """Parse ``src`` into an AST; raises DslError with line/column on failure."""
    return _Parser(src).parse()
