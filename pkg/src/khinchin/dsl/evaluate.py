"""Pointwise evaluation of ASTs (and their symbolic derivatives) with mpmath."""

from __future__ import annotations

import math

import mpmath

from ..canonical import CanonicalProductSpec
from ..genfunc import EvaluationError, GenFunction, weighted_power_sum
from .ast import D, BinOp, children, contains_z, Builtin, Func, Idx, Neg, Node, Num, Pow, Prod, Sum, Var
from .diff import differentiate

MAX_TERMS = 2_000_000


def canon_spec(node: Builtin) -> CanonicalProductSpec:
    rule = node.args[0]
    nums = [float(a.value) for a in node.args[1:]]
    if rule == "list":
        if not nums:
            raise ValueError("canon(list, ...) needs at least one zero")
        return CanonicalProductSpec("list", zeros=tuple(nums))
    if rule == "geometric":
        c, r = (nums + [1.0, 2.0][len(nums):])[:2] if nums else (1.0, 2.0)
        return CanonicalProductSpec("geometric", c=c, r=r)
    if rule == "power":
        a, c = (nums + [2.0, 1.0][len(nums):])[:2] if nums else (2.0, 1.0)
        return CanonicalProductSpec("power", a=a, c=c)
    if nums:
        raise ValueError(f"canon({rule}) takes no parameters")
    return CanonicalProductSpec(rule)


def builtin_genfunction(node: Builtin) -> GenFunction:
    from .. import builtins as bi

    if node.name == "partition":
        return bi.partition()
    if node.name == "bell":
        return bi.bell()
    if node.name == "geom":
        N = int(node.args[0].value) if node.args else 1
        if node.args and (node.args[0].value != N or N < 1):
            raise ValueError("geom(N) needs a positive integer N")
        return bi.negbinomial(N)
    if node.name == "canon":
        return bi.canonical(canon_spec(node))
    raise ValueError(f"unknown built-in {node.name!r}")

# ln f beyond this is useless in double precision; refuse instead of building huge mpf exponents
EXP_ARG_MAX = 1e15


class Evaluator:
    """Evaluate ``f``, ``f'`` and ``f''`` of an AST at real ``t``."""

    def __init__(self, node: Node, dps: int = 30):
        self.node = node
        self.dps = dps
        self._derivs = {0: node}
        self._builtins: dict = {}
        self._moment_cache: dict = {}
        self._sub_derivs: dict = {}

    def derivative(self, order: int) -> Node:
        if order not in self._derivs:
            self._derivs[order] = differentiate(self.node, order)
        return self._derivs[order]

    def values(self, log_t: float, order: int = 2, dps: int | None = None) -> list:
        with mpmath.workdps(dps or self.dps):
            t = mpmath.e ** mpmath.mpf(log_t)
            return [self.eval(self.derivative(j), t) for j in range(order + 1)]

    def value(self, t, dps: int | None = None):
        with mpmath.workdps(dps or self.dps):
            return self.eval(self.node, mpmath.mpf(t))

    # --- core -------------------------------------------------------------
    def eval(self, node: Node, t, env: dict | None = None):
        env = env or {}
        ev = self.eval
        if isinstance(node, Num):
            q = node.value
            return mpmath.mpf(q.numerator) / q.denominator
        if isinstance(node, Var):
            return t
        if isinstance(node, Idx):
            return mpmath.mpf(env[node.name])
        if isinstance(node, Neg):
            return -ev(node.arg, t, env)
        if isinstance(node, BinOp):
            a = ev(node.left, t, env)
            b = ev(node.right, t, env)
            if node.op == "+":
                return a + b
            if node.op == "-":
                return a - b
            if node.op == "*":
                return a * b
            if b == 0:
                raise EvaluationError("division by zero")
            return a / b
        if isinstance(node, Pow):
            base = ev(node.base, t, env)
            e = ev(node.exponent, t, env)
            if e == int(e):
                ei = int(e)
                if ei < 0 and base == 0:
                    raise EvaluationError("0 to a negative power")
                return base**ei
            if base <= 0:
                raise EvaluationError("real power of a nonpositive base")
            return mpmath.exp(e * mpmath.log(base))
        if isinstance(node, Func):
            a = ev(node.arg, t, env)
            if node.name == "exp":
                if a > EXP_ARG_MAX:
                    raise EvaluationError(f"exp argument {mpmath.nstr(a, 5)} beyond {EXP_ARG_MAX:g}")
                return mpmath.exp(a)
            if a <= 0:
                raise EvaluationError("log of a nonpositive value")
            return mpmath.log(a)
        if isinstance(node, (Prod, Sum)):
            return self._bigop(node, t, env)
        if isinstance(node, Builtin):
            return self._theta_builtin(node, 0, t)
        if isinstance(node, D):
            j, inner = 1, node.arg
            while isinstance(inner, D):
                j, inner = j + 1, inner.arg
            if isinstance(inner, Builtin):
                return self._theta_builtin(inner, j, t)
            return t * ev(differentiate(node.arg, 1), t, env)
        raise TypeError(f"cannot evaluate {node!r}")

    # --- cumulants of X_t, structurally ---------------------------------------
    def log_cumulants(self, log_t: float, dps: int | None = None) -> tuple:
        """``(ln f, kappa_1, kappa_2)`` at ``t = e^log_t``.

        Logs of products and powers split into sums, and ``ln exp(u) = u``, so
        clan-like members whose variance is tiny against ``m^2`` keep their digits.
        Other nodes fall back to ``f, f', f''``.
        """
        with mpmath.workdps(dps or self.dps):
            t = mpmath.e ** mpmath.mpf(log_t)
            return self._lc(self.node, t)

    def _lc(self, node, t):
        if not contains_z(node):
            v = self.eval(node, t)
            if v <= 0:
                raise EvaluationError("nonpositive constant factor")
            return mpmath.log(v), mpmath.mpf(0), mpmath.mpf(0)
        if isinstance(node, Var):
            return mpmath.log(t), mpmath.mpf(1), mpmath.mpf(0)
        if isinstance(node, BinOp) and node.op in ("*", "/"):
            a, b = self._lc(node.left, t), self._lc(node.right, t)
            sgn = 1 if node.op == "*" else -1
            return tuple(x + sgn * y for x, y in zip(a, b))
        if isinstance(node, Pow) and not contains_z(node.exponent):
            e = self.eval(node.exponent, t)
            return tuple(e * x for x in self._lc(node.base, t))
        if isinstance(node, Func) and node.name == "exp":
            u = node.arg
            u0 = self.eval(u, t)
            u1 = self.eval(self._d(u, 1), t)
            u2 = self.eval(self._d(u, 2), t)
            return u0, t * u1, t * u1 + t * t * u2
        if isinstance(node, Builtin):
            gf = self._builtins.get(node)
            if gf is None:
                gf = self._builtins[node] = builtin_genfunction(node)
            lt = float(mpmath.log(t))
            h = gf.hooks
            if h is not None and (h.valid is None or h.valid(lt)):
                k = h.cumulants(lt, 2)
                return mpmath.mpf(h.log_f(lt)), mpmath.mpf(k[0]), mpmath.mpf(k[1])
        f0 = self.eval(node, t)
        if f0 <= 0:
            raise EvaluationError("f(t) <= 0")
        f1 = self.eval(self._d(node, 1), t)
        f2 = self.eval(self._d(node, 2), t)
        k1 = t * f1 / f0
        return mpmath.log(f0), k1, k1 + t * t * f2 / f0 - k1 * k1

    def _d(self, node, order):
        key = (node, order)
        if key not in self._sub_derivs:
            self._sub_derivs[key] = differentiate(node, order)
        return self._sub_derivs[key]

    def _bigop(self, node, t, env):
        lo = int(self.eval(node.lo, t, env))
        hi = None if node.hi is None else int(self.eval(node.hi, t, env))
        is_prod = isinstance(node, Prod)
        acc = mpmath.mpf(1) if is_prod else mpmath.mpf(0)
        eps = mpmath.mpf(10) ** (-(mpmath.mp.dps + 3))
        quiet = 0
        k = lo
        while hi is None or k <= hi:
            env2 = dict(env)
            env2[node.var] = k
            v = self.eval(node.body, t, env2)
            if is_prod:
                acc *= v
                small = abs(v - 1) < eps
            else:
                acc += v
                small = abs(v) <= eps * abs(acc) if acc != 0 else v == 0
            if hi is None:
                quiet = quiet + 1 if small else 0
                if quiet >= 5:
                    break
                if k - lo > MAX_TERMS:
                    raise EvaluationError(f"infinite {'product' if is_prod else 'sum'} did not settle")
            k += 1
        return acc

    def _theta_builtin(self, node: Builtin, j: int, t):
        """``(z d/dz)^j B`` at ``t`` = ``B(t) E X_t^j``."""
        from ..builtins import raw_from_cumulants

        key = (node, j, mpmath.nstr(t, 25))
        if key in self._moment_cache:
            return self._moment_cache[key]
        gf = self._builtins.get(node)
        if gf is None:
            gf = self._builtins[node] = builtin_genfunction(node)
        if t == 0:
            val = gf.coeff(0).to_float() if j == 0 else 0.0
            return mpmath.mpf(val)
        lt = float(mpmath.log(t))
        hooks = gf.hooks
        if hooks is not None and (hooks.valid is None or hooks.valid(lt)) and j <= hooks.max_cumulant:
            log_f = hooks.log_f(lt)
            raw = raw_from_cumulants(hooks.cumulants(lt, j)) if j else [1.0]
            val = mpmath.e ** mpmath.mpf(log_f) * mpmath.mpf(raw[j])
        else:
            s = weighted_power_sum(gf, j, log_t=lt)
            val = mpmath.e ** mpmath.mpf(s.log_magnitude)
        self._moment_cache[key] = val
        return val


def finite_difference_check(ev: Evaluator, t: float, order: int, h: float | None = None,
                            radius: float = math.inf) -> tuple:
    """(symbolic, central-difference) values of the ``order``-th derivative at ``t``.

    The default step is proportional to ``min(t, R - t)``, the distance to the nearest trouble.
    """
    with mpmath.workdps(40):
        tt = mpmath.mpf(t)
        if h is None:
            # built-ins are evaluated in double precision, so they need a wider stencil
            scale = min(tt, radius - tt) if math.isfinite(radius) else tt
            h = scale * (mpmath.mpf(10) ** -(4 - (order - 1)) if _has_builtin(ev.node) else mpmath.mpf(10) ** -10)
        h = mpmath.mpf(h)
        sym = ev.eval(ev.derivative(order), tt)

        def central(h):
            if order == 1:
                return (ev.eval(ev.node, tt + h) - ev.eval(ev.node, tt - h)) / (2 * h)
            return (ev.eval(ev.node, tt + h) - 2 * ev.eval(ev.node, tt) + ev.eval(ev.node, tt - h)) / h**2

        # one Richardson step: O(h^4)
        fd = (4 * central(h / 2) - central(h)) / 3
        return sym, fd


def _has_builtin(node: Node) -> bool:
    return isinstance(node, Builtin) or any(_has_builtin(c) for c in children(node))
