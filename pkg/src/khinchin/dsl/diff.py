"""Symbolic d/dz on the AST.

Products use the logarithmic-derivative form ``(prod f_k)' = prod f_k * sum f_k'/f_k``.
Built-ins are opaque: ``B' = D(B)/z``, and more generally ``(D^j B)' = D^{j+1}(B)/z``,
where ``D^j B`` is evaluated from the built-in's moments (``D^j B = B * E X^j``).
"""

from __future__ import annotations

from fractions import Fraction

from .ast import ONE, ZERO, Z, BinOp, Builtin, D, Func, Idx, Neg, Node, Num, Pow, Prod, Sum, Var, contains_z


def is_builtin_tower(node: Node) -> bool:
    """``D(D(...D(B)...))`` with ``B`` a built-in (zero or more D's)."""
    while isinstance(node, D):
        node = node.arg
    return isinstance(node, Builtin)


# --- light simplification ----------------------------------------------


def _is_num(node: Node, value=None) -> bool:
    return isinstance(node, Num) and (value is None or node.value == value)


def add(a: Node, b: Node) -> Node:
    if _is_num(a, 0):
        return b
    if _is_num(b, 0):
        return a
    if _is_num(a) and _is_num(b):
        return Num(a.value + b.value)
    return BinOp("+", a, b)


def sub(a: Node, b: Node) -> Node:
    if _is_num(b, 0):
        return a
    if _is_num(a) and _is_num(b):
        return Num(a.value - b.value)
    if _is_num(a, 0):
        return neg(b)
    return BinOp("-", a, b)


def neg(a: Node) -> Node:
    if _is_num(a):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def mul(a: Node, b: Node) -> Node:
    if _is_num(a, 0) or _is_num(b, 0):
        return ZERO
    if _is_num(a, 1):
        return b
    if _is_num(b, 1):
        return a
    if _is_num(a) and _is_num(b):
        return Num(a.value * b.value)
    return BinOp("*", a, b)


def div(a: Node, b: Node) -> Node:
    if _is_num(a, 0):
        return ZERO
    if _is_num(b, 1):
        return a
    if _is_num(a) and _is_num(b) and b.value != 0:
        return Num(a.value / b.value)
    return BinOp("/", a, b)


def power(base: Node, e: Node) -> Node:
    if _is_num(e, 1):
        return base
    if _is_num(e, 0):
        return ONE
    return Pow(base, e)


# --- derivative ---------------------------------------------------------


def _d(node: Node) -> Node:
    if isinstance(node, (Num, Idx)):
        return ZERO
    if isinstance(node, Var):
        return ONE
    if not contains_z(node):
        return ZERO
    if isinstance(node, Neg):
        return neg(_d(node.arg))
    if isinstance(node, BinOp):
        a, b = node.left, node.right
        if node.op == "+":
            return add(_d(a), _d(b))
        if node.op == "-":
            return sub(_d(a), _d(b))
        if node.op == "*":
            return add(mul(_d(a), b), mul(a, _d(b)))
        if node.op == "/":
            if not contains_z(b):
                return div(_d(a), b)
            return div(sub(mul(_d(a), b), mul(a, _d(b))), power(b, Num(Fraction(2))))
    if isinstance(node, Pow):
        e = node.exponent
        e_minus_1 = Num(e.value - 1) if isinstance(e, Num) else sub(e, ONE)
        return mul(mul(e, power(node.base, e_minus_1)), _d(node.base))
    if isinstance(node, Func):
        if node.name == "exp":
            return mul(node, _d(node.arg))
        if node.name == "log":
            return div(_d(node.arg), node.arg)
    if isinstance(node, Prod):
        return mul(node, Sum(node.var, node.lo, node.hi, div(_d(node.body), node.body)))
    if isinstance(node, Sum):
        return Sum(node.var, node.lo, node.hi, _d(node.body))
    if isinstance(node, Builtin) or (isinstance(node, D) and is_builtin_tower(node)):
        return div(D(node), Z)
    if isinstance(node, D):
        # D(u) = z u'  =>  (z u')' = u' + z u''
        du = _d(node.arg)
        return add(du, mul(Z, _d(du)))
    raise TypeError(f"cannot differentiate {node!r}")


def differentiate(node: Node, order: int = 1) -> Node:
    """``d^order/dz^order`` of ``node`` for order 1 or 2."""
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    out = _d(node)
    if order == 2:
        out = _d(out)
    return out
