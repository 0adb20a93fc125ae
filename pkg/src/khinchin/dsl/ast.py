"""AST for the generating-function language, with a canonical pretty-printer.

The printer parenthesizes conservatively so that ``parse(pretty(a)) == a``.
"""

from __future__ import annotations

import decimal
from dataclasses import dataclass
from fractions import Fraction
from typing import Union


class Node:
    __slots__ = ()


@dataclass(frozen=True)
class Num(Node):
    value: Fraction


@dataclass(frozen=True)
class Var(Node):
    """The variable ``z``."""


@dataclass(frozen=True)
class Idx(Node):
    """A product/sum index (bound by an enclosing ``prod`` or ``sum``)."""

    name: str


@dataclass(frozen=True)
class Neg(Node):
    arg: Node


@dataclass(frozen=True)
class BinOp(Node):
    op: str  # + - * /
    left: Node
    right: Node


@dataclass(frozen=True)
class Pow(Node):
    base: Node
    exponent: Node  # z-free: a number, an index or an index expression


@dataclass(frozen=True)
class Func(Node):
    name: str  # exp | log
    arg: Node


@dataclass(frozen=True)
class Prod(Node):
    var: str
    lo: Node
    hi: Node | None  # None = infinity
    body: Node


@dataclass(frozen=True)
class Sum(Node):
    var: str
    lo: Node
    hi: Node | None
    body: Node


@dataclass(frozen=True)
class Builtin(Node):
    """``partition()``, ``bell()``, ``geom(N?)`` or ``canon(rule, ...)``."""

    name: str
    args: tuple = ()


@dataclass(frozen=True)
class D(Node):
    """The transform ``z f'(z)``."""

    arg: Node


Ast = Union[Num, Var, Idx, Neg, BinOp, Pow, Func, Prod, Sum, Builtin, D]

ZERO = Num(Fraction(0))
ONE = Num(Fraction(1))
Z = Var()


def num(x) -> Num:
    return Num(Fraction(x))


# --- queries ------------------------------------------------------------


def children(node: Node) -> tuple:
    if isinstance(node, (Neg, Func, D)):
        return (node.arg,)
    if isinstance(node, BinOp):
        return (node.left, node.right)
    if isinstance(node, Pow):
        return (node.base, node.exponent)
    if isinstance(node, (Prod, Sum)):
        return (node.lo,) + ((node.hi,) if node.hi is not None else ()) + (node.body,)
    return ()


def contains_z(node: Node) -> bool:
    if isinstance(node, (Var, Builtin)):
        return True
    return any(contains_z(c) for c in children(node))


def free_indices(node: Node, bound: frozenset = frozenset()) -> set:
    if isinstance(node, Idx):
        return set() if node.name in bound else {node.name}
    if isinstance(node, (Prod, Sum)):
        out = free_indices(node.lo, bound)
        if node.hi is not None:
            out |= free_indices(node.hi, bound)
        return out | free_indices(node.body, bound | {node.var})
    out: set = set()
    for c in children(node):
        out |= free_indices(c, bound)
    return out


def substitute_index(node: Node, name: str, value: Fraction) -> Node:
    """Replace the free index ``name`` by a number."""
    if isinstance(node, Idx):
        return Num(Fraction(value)) if node.name == name else node
    if isinstance(node, (Num, Var, Builtin)):
        return node
    if isinstance(node, Neg):
        return Neg(substitute_index(node.arg, name, value))
    if isinstance(node, BinOp):
        return BinOp(node.op, substitute_index(node.left, name, value), substitute_index(node.right, name, value))
    if isinstance(node, Pow):
        return Pow(substitute_index(node.base, name, value), substitute_index(node.exponent, name, value))
    if isinstance(node, Func):
        return Func(node.name, substitute_index(node.arg, name, value))
    if isinstance(node, D):
        return D(substitute_index(node.arg, name, value))
    if isinstance(node, (Prod, Sum)):
        lo = substitute_index(node.lo, name, value)
        hi = None if node.hi is None else substitute_index(node.hi, name, value)
        body = node.body if node.var == name else substitute_index(node.body, name, value)
        return type(node)(node.var, lo, hi, body)
    raise TypeError(f"unknown node {node!r}")


# --- pretty printing -------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}
_P_UNARY = 3
_P_POW = 4
_P_ATOM = 5


def _terminating(den: int) -> bool:
    for p in (2, 5):
        while den % p == 0:
            den //= p
    return den == 1


def _fmt_num(q: Fraction) -> str:
    if q < 0:
        return f"(-{_fmt_num(-q)})"
    if q.denominator == 1:
        return str(q.numerator)
    if _terminating(q.denominator):
        digits = max(len(str(q.denominator)), 1) * 2
        with decimal.localcontext() as ctx:
            ctx.prec = len(str(q.numerator)) + digits + 5
            d = decimal.Decimal(q.numerator) / decimal.Decimal(q.denominator)
        return format(d.normalize(), "f")
    return f"({q.numerator}/{q.denominator})"


def _prec(node: Node) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return _P_UNARY
    if isinstance(node, Pow):
        return _P_POW
    return _P_ATOM


def _arg(a) -> str:
    return a if isinstance(a, str) else pretty(a)


def pretty(node: Node) -> str:
    if isinstance(node, Num):
        return _fmt_num(node.value)
    if isinstance(node, Var):
        return "z"
    if isinstance(node, Idx):
        return node.name
    if isinstance(node, Neg):
        inner = pretty(node.arg)
        if _prec(node.arg) <= _P_UNARY:
            inner = f"({inner})"
        return "-" + inner
    if isinstance(node, BinOp):
        p = _PREC[node.op]
        left = pretty(node.left)
        if _prec(node.left) < p:
            left = f"({left})"
        right = pretty(node.right)
        # left-associative: the right operand needs parentheses at equal precedence
        if _prec(node.right) <= p:
            right = f"({right})"
        return f"{left}{node.op}{right}"
    if isinstance(node, Pow):
        base = pretty(node.base)
        if _prec(node.base) <= _P_POW:
            base = f"({base})"
        e = node.exponent
        if isinstance(e, (Idx,)) or (isinstance(e, Num) and e.value.denominator == 1):
            ex = pretty(e)
        else:
            ex = f"({pretty(e)})"
        return f"{base}^{ex}"
    if isinstance(node, Func):
        return f"{node.name}({pretty(node.arg)})"
    if isinstance(node, (Prod, Sum)):
        kw = "prod" if isinstance(node, Prod) else "sum"
        hi = "inf" if node.hi is None else pretty(node.hi)
        return f"{kw}({node.var},{pretty(node.lo)},{hi},{pretty(node.body)})"
    if isinstance(node, Builtin):
        return f"{node.name}(" + ",".join(_arg(a) for a in node.args) + ")"
    if isinstance(node, D):
        return f"D({pretty(node.arg)})"
    raise TypeError(f"unknown node {node!r}")
