"""Compile an AST into a GenFunction.

The coefficient channel is a truncated power series computed from the AST
(exact rationals whenever every step allows it).  ASTs that match a built-in
pattern (``exp(z)``, the partition product, ``exp(exp(z)-1)``, negative-binomial
forms, built-in calls) reuse the built-in's exact oracle and closed-form hooks;
everything else is evaluated pointwise through mpmath and symbolic derivatives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from ..genfunc import ClassKStatus, GenFunction, MfHint, NotInClassK, RadiusSpec, check_class_k
from ..logspace import NEG_INF
from ..series import SeriesError, TruncatedSeries
from .ast import (
    D, BinOp, Builtin, Func, Idx, Neg, Node, Num, Pow, Prod, Sum, Var,
    contains_z, free_indices, pretty, substitute_index,
)
from .evaluate import Evaluator, builtin_genfunction
from .parser import parse


class CompileError(ValueError):
    """The AST does not describe a usable member of class K."""


@dataclass(frozen=True)
class CompileConfig:
    n_trunc: int = 200
    dps: int = 30
    radius: float | None = None  # user-supplied radius when inference is inconclusive
    allow_violations: bool = False


@dataclass
class CompileReport:
    genfunction: GenFunction
    class_k_status: ClassKStatus
    warnings: list = field(default_factory=list)
    series: TruncatedSeries | None = None
    ast: Node | None = None


# --- constant (z-free) subexpressions ------------------------------------


def const_value(node: Node, env: dict | None = None) -> Fraction | float:
    """Exact value of a z-free expression (float when a real power is involved)."""
    env = env or {}
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Idx):
        try:
            return Fraction(env[node.name])
        except KeyError:
            raise CompileError(f"unbound index {node.name!r}") from None
    if isinstance(node, Neg):
        return -const_value(node.arg, env)
    if isinstance(node, BinOp):
        a, b = const_value(node.left, env), const_value(node.right, env)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if b == 0:
            raise CompileError("division by zero in a constant")
        return a / b
    if isinstance(node, Pow):
        a, e = const_value(node.base, env), const_value(node.exponent, env)
        if isinstance(e, Fraction) and e.denominator == 1:
            if a == 0 and e < 0:
                raise CompileError("0 to a negative power")
            return a ** int(e)
        if a <= 0:
            raise CompileError("real power of a nonpositive constant")
        return float(a) ** float(e)
    if isinstance(node, Func):
        a = const_value(node.arg, env)
        if node.name == "exp":
            return Fraction(1) if a == 0 else math.exp(float(a))
        if a <= 0:
            raise CompileError("log of a nonpositive constant")
        return Fraction(0) if a == 1 else math.log(float(a))
    if isinstance(node, (Prod, Sum)):
        lo, hi = _bounds(node, env)
        if hi is None:
            raise CompileError("infinite product/sum of constants")
        acc = Fraction(1) if isinstance(node, Prod) else Fraction(0)
        for k in range(lo, hi + 1):
            v = const_value(node.body, {**env, node.var: k})
            acc = acc * v if isinstance(node, Prod) else acc + v
        return acc
    raise CompileError(f"not a constant: {pretty(node)}")


def _bounds(node, env) -> tuple[int, int | None]:
    lo = const_value(node.lo, env)
    hi = None if node.hi is None else const_value(node.hi, env)
    for b in (lo, hi):
        if b is not None and (not isinstance(b, Fraction) or b.denominator != 1):
            raise CompileError(f"{'prod' if isinstance(node, Prod) else 'sum'}: bounds must be integers")
    lo = int(lo)
    hi = None if hi is None else int(hi)
    if hi is not None and hi < lo:
        raise CompileError("empty product/sum range")
    return lo, hi


# --- series channel --------------------------------------------------------


def _const_series(v, N: int) -> TruncatedSeries:
    if isinstance(v, Fraction):
        return TruncatedSeries.from_exact([v], N)
    return TruncatedSeries.from_floats([float(v)], N)


def builtin_series(node: Builtin, N: int) -> TruncatedSeries:
    gf = builtin_genfunction(node)
    vals = []
    exact_ok = gf.exact is not None
    if exact_ok:
        for n in range(N + 1):
            v = 0 if gf.degree is not None and n > gf.degree else gf.exact(n)
            if v is None:
                exact_ok = False
                break
            vals.append(Fraction(v))
    if exact_ok:
        return TruncatedSeries.from_exact(vals)
    ns = np.arange(N + 1)
    limit = gf.coeff_limit if gf.coeff_limit is not None else N
    if gf.degree is not None:
        limit = max(limit, N)  # zero beyond the degree
    if limit < N:
        raise CompileError(f"{pretty(node)}: only {limit} coefficients available")
    logs = gf.log_coeffs(ns)
    signs = np.where(np.isfinite(logs), 1, 0).astype(np.int8)
    return TruncatedSeries(signs, logs)


def series_of(node: Node, N: int, env: dict | None = None) -> TruncatedSeries:
    """Truncated series (order N) of an AST; exact when every step is rational."""
    env = env or {}
    try:
        return _series(node, N, env)
    except SeriesError as exc:
        raise CompileError(str(exc)) from None


def _series(node: Node, N: int, env: dict) -> TruncatedSeries:
    if not contains_z(node):
        return _const_series(const_value(node, env), N)
    if isinstance(node, Var):
        return TruncatedSeries.monomial(1, N)
    if isinstance(node, Neg):
        return -_series(node.arg, N, env)
    if isinstance(node, BinOp):
        a = _series(node.left, N, env)
        b = _series(node.right, N, env)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if b.signs[0] == 0:
            raise CompileError(f"division by a series with zero constant term: {pretty(node.right)}")
        return a / b
    if isinstance(node, Pow):
        e = const_value(node.exponent, env)
        base = _series(node.base, N, env)
        if isinstance(e, Fraction) and e.denominator == 1:
            k = int(e)
            v = base.valuation()
            if k > 0 and v >= 1 and v * k > N:
                return TruncatedSeries.from_exact([0], N)
            if k < 0 and base.signs[0] == 0:
                raise CompileError(f"negative power of a series with zero constant term: {pretty(node.base)}")
            return base**k
        if base.signs[0] != 1:
            raise CompileError(f"real exponent needs a positive constant term: {pretty(node.base)}")
        return base.pow_real(e if isinstance(e, Fraction) else float(e))
    if isinstance(node, Func):
        a = _series(node.arg, N, env)
        if node.name == "exp":
            return a.exp()
        if a.signs[0] != 1:
            raise CompileError(f"log needs a positive constant term: {pretty(node.arg)}")
        return a.log()
    if isinstance(node, (Prod, Sum)):
        return _bigop_series(node, N, env)
    if isinstance(node, Builtin):
        return builtin_series(node, N)
    if isinstance(node, D):
        return _series(node.arg, N, env).derivative_z()
    raise CompileError(f"cannot expand {node!r}")


def _bigop_series(node, N: int, env: dict) -> TruncatedSeries:
    lo, hi = _bounds(node, env)
    is_prod = isinstance(node, Prod)
    acc = TruncatedSeries.from_exact([1 if is_prod else 0], N)
    if hi is not None:
        for k in range(lo, hi + 1):
            s = _series(node.body, N, {**env, node.var: k})
            acc = acc * s if is_prod else acc + s
        return acc
    # infinite: the k-th factor must be 1 + O(z^{k-lo+1}) (term: O(z^{k-lo+1}))
    one = TruncatedSeries.from_exact([1], N)
    for k in range(lo, lo + N + 1):
        s = _series(node.body, N, {**env, node.var: k})
        rest = s - one if is_prod else s
        need = k - lo + 1
        if rest.valuation() < need:
            what = "factor" if is_prod else "term"
            raise CompileError(
                f"infinite {'product' if is_prod else 'sum'}: {what} {k} is not "
                f"{'1 + ' if is_prod else ''}O(z^{need}); coefficient extraction would not terminate"
            )
        acc = acc * s if is_prod else acc + s
    return acc


# --- polynomials and radius inference ----------------------------------------


def poly_degree(node: Node, env: dict | None = None) -> int | None:
    """Degree bound if the AST is a polynomial in z, else None."""
    env = env or {}
    if not contains_z(node):
        return 0
    if isinstance(node, Var):
        return 1
    if isinstance(node, Neg):
        return poly_degree(node.arg, env)
    if isinstance(node, BinOp):
        a, b = poly_degree(node.left, env), poly_degree(node.right, env)
        if node.op in "+-":
            return None if a is None or b is None else max(a, b)
        if node.op == "*":
            return None if a is None or b is None else a + b
        return a if (not contains_z(node.right)) else None
    if isinstance(node, Pow):
        try:
            e = const_value(node.exponent, env)
        except CompileError:
            return None
        if isinstance(e, Fraction) and e.denominator == 1 and e >= 0:
            b = poly_degree(node.base, env)
            return None if b is None else b * int(e)
        return None
    if isinstance(node, D):
        return poly_degree(node.arg, env)
    if isinstance(node, (Prod, Sum)) and node.hi is not None:
        lo, hi = _bounds(node, env)
        total = 0
        for k in range(lo, hi + 1):
            d = poly_degree(node.body, {**env, node.var: k})
            if d is None:
                return None
            total = total + d if isinstance(node, Prod) else max(total, d)
        return total
    return None


def _poly_roots_radius(node: Node, env: dict) -> float | None:
    d = poly_degree(node, env)
    if d is None:
        return None
    s = series_of(node, max(d, 1), env)
    c = s.to_floats()[: d + 1]
    nz = np.flatnonzero(c)
    if nz.size == 0:
        return 0.0
    c = c[: nz[-1] + 1]
    if c.size <= 1:
        return math.inf
    roots = np.roots(c[::-1])
    return float(np.min(np.abs(roots)))


def zero_radius(node: Node, env: dict | None = None) -> float | None:
    """Smallest modulus of a zero of ``node`` (inf if it has none, None if unknown)."""
    env = env or {}
    if not contains_z(node):
        v = const_value(node, env)
        return math.inf if v != 0 else 0.0
    r = _poly_roots_radius(node, env)
    if r is not None:
        return r
    if isinstance(node, Func) and node.name == "exp":
        return math.inf
    if isinstance(node, BinOp) and node.op == "*":
        a, b = zero_radius(node.left, env), zero_radius(node.right, env)
        return None if a is None or b is None else min(a, b)
    if isinstance(node, BinOp) and node.op == "/":
        return zero_radius(node.left, env)
    if isinstance(node, Pow):
        e = const_value(node.exponent, env)
        return zero_radius(node.base, env) if e > 0 else math.inf
    if isinstance(node, Builtin):
        if node.name == "canon":
            gf = builtin_genfunction(node)
            return float(gf.meta["canonical"].b(np.array([1]))[0])
        return math.inf  # partition, bell and geom have no zeros
    return None


def _min(*rs):
    if any(r is None for r in rs):
        return None
    return min(rs)


def infer_radius(node: Node, env: dict | None = None) -> float | None:
    """Radius of convergence, or None when inference is inconclusive."""
    env = env or {}
    if not contains_z(node) or isinstance(node, Var):
        return math.inf
    if isinstance(node, (Neg, D)):
        return infer_radius(node.arg, env)
    if isinstance(node, BinOp):
        a, b = infer_radius(node.left, env), infer_radius(node.right, env)
        if node.op != "/":
            return _min(a, b)
        return _min(a, b, zero_radius(node.right, env))
    if isinstance(node, Pow):
        e = const_value(node.exponent, env)
        b = infer_radius(node.base, env)
        if isinstance(e, Fraction) and e.denominator == 1 and e >= 0:
            return b
        return _min(b, zero_radius(node.base, env))
    if isinstance(node, Func):
        a = infer_radius(node.arg, env)
        return a if node.name == "exp" else _min(a, zero_radius(node.arg, env))
    if isinstance(node, Builtin):
        return 1.0 if node.name in ("partition", "geom") else math.inf
    if isinstance(node, (Prod, Sum)):
        lo, hi = _bounds(node, env)
        if hi is not None:
            return _min(*[infer_radius(node.body, {**env, node.var: k}) for k in range(lo, hi + 1)])
        return _infinite_radius(node, env, lo)
    return None


def _monomial(node: Node, env: dict):
    """(coefficient, exponent) if the z-dependence of ``node`` is c * z^e."""
    if isinstance(node, Var):
        return Fraction(1), 1
    if isinstance(node, Pow) and isinstance(node.base, Var):
        e = const_value(node.exponent, env)
        return Fraction(1), e
    if isinstance(node, BinOp) and node.op in "*/":
        if not contains_z(node.right):
            m = _monomial(node.left, env)
            c = const_value(node.right, env)
            return None if m is None else ((m[0] * c if node.op == "*" else m[0] / c), m[1])
        if node.op == "*" and not contains_z(node.left):
            m = _monomial(node.right, env)
            return None if m is None else (const_value(node.left, env) * m[0], m[1])
    return None


def _infinite_radius(node, env, lo) -> float | None:
    # sum of c z^{e_k} with c independent of k and e_k increasing: radius 1
    if isinstance(node, Sum):
        ms = [_monomial(node.body, {**env, node.var: k}) for k in range(lo, lo + 6)]
        if all(m is not None for m in ms):
            cs = {m[0] for m in ms}
            es = [m[1] for m in ms]
            if len(cs) == 1 and next(iter(cs)) > 0 and all(b > a for a, b in zip(es, es[1:])):
                return 1.0
        return None
    # product of 1/(1 - c z^{k}) style factors with c independent of k: radius 1
    if isinstance(node, Prod):
        b = node.body
        if isinstance(b, BinOp) and b.op == "/" and not contains_z(b.left):
            den = b.right
        elif isinstance(b, Pow):
            e = const_value(b.exponent, env) if not free_indices(b.exponent) else None
            den = b.base if e is not None and e < 0 else None
        else:
            den = None
        if isinstance(den, BinOp) and den.op == "-" and not contains_z(den.left):
            ms = [_monomial(den.right, {**env, node.var: k}) for k in range(lo, lo + 6)]
            c0 = const_value(den.left, env)
            if all(m is not None for m in ms) and c0 > 0:
                cs = {m[0] / c0 for m in ms}
                if len(cs) == 1 and next(iter(cs)) == 1:
                    return 1.0
        return None
    return None


# --- built-in pattern matching -------------------------------------------------


def _is(node, src: str) -> bool:
    return node == parse(src)


def match_builtin(node: Node) -> GenFunction | None:
    """Built-in GenFunction whose AST form equals ``node`` (up to the index name)."""
    from .. import builtins as bi

    if isinstance(node, Builtin):
        return builtin_genfunction(node)
    if _is(node, "exp(z)"):
        return bi.exponential()
    if _is(node, "exp(exp(z)-1)"):
        return bi.bell()
    if isinstance(node, Prod) and node.lo == Num(Fraction(1)) and node.hi is None:
        if node.body == parse(f"prod({node.var},1,inf,1/(1-z^{node.var}))").body:
            return bi.partition()
    if _is(node, "1/(1-z)"):
        return bi.negbinomial(1)
    for form in ("1/(1-z)^{N}", "(1-z)^(-{N})"):
        for N in range(1, 33):
            if _is(node, form.format(N=N)):
                return bi.negbinomial(N)
    return None


# --- compile --------------------------------------------------------------------


def compile_ast(node: Node, config: CompileConfig | None = None) -> CompileReport:
    from .. import builtins as bi

    config = config or CompileConfig()
    warnings: list[str] = []
    if free_indices(node):
        raise CompileError(f"unbound index {sorted(free_indices(node))[0]!r}")
    deg = poly_degree(node)
    N = config.n_trunc if deg is None else max(deg, 1)
    series = series_of(node, N)
    if series.is_exact:
        status = check_class_k(series.exact)
    else:
        status = check_class_k(signs=series.signs)
        warnings.append("coefficients computed in floating point (no exact channel)")
    if status.kind == "violated" and isinstance(node, D) and status.witness == 0:
        # z f'(z) always has a_0 = 0; its family is the size-biased law of f's
        rest = check_class_k([1] + list(series.exact[1:])) if series.is_exact else check_class_k(
            signs=np.concatenate(([1], series.signs[1:])))
        if rest.kind == "verified":
            warnings.append("derivative transform: a_0 = 0 (size-biased family, not itself in K)")
            status = ClassKStatus("verified", up_to=rest.up_to, reason="a_0 = 0 allowed for D(.)")
        else:
            status = rest
    if status.kind == "violated":
        if not config.allow_violations:
            raise NotInClassK(f"not in class K: {status.reason}", status.witness)
        warnings.append(f"class K violated: {status.reason} at n={status.witness}")

    name = pretty(node)
    if deg is not None:
        coeffs = list(series.exact) if series.is_exact else None
        if coeffs is not None:
            gf = bi.polynomial(coeffs, name=name)
            gf = replace(gf, class_k=status, analytic=Evaluator(node, config.dps))
            return CompileReport(gf, status, warnings, series, node)
    matched = match_builtin(node)
    if matched is not None:
        gf = replace(matched, name=name, analytic=Evaluator(node, config.dps))
        gf = replace(gf, class_k=status)
        return CompileReport(gf, status, warnings, series, node)

    r = infer_radius(node)
    if config.radius is not None:
        if r is not None and not math.isclose(r, config.radius, rel_tol=1e-9):
            warnings.append(f"user radius {config.radius:g} overrides inferred {r:g}")
        r = config.radius
    if r is None:
        radius = RadiusSpec.unknown()
        warnings.append("radius could not be inferred; analytics need an explicit radius")
    elif math.isinf(r):
        radius = RadiusSpec.infinite()
    else:
        radius = RadiusSpec.finite(r)

    logs = np.where(series.signs > 0, series.logs, NEG_INF)

    def log_coeffs(ns, _logs=logs):
        ns = np.asarray(ns, dtype=np.int64)
        out = np.full(ns.shape, NEG_INF)
        ok = ns < len(_logs)
        out[ok] = _logs[ns[ok]]
        return out

    exact = None
    if series.is_exact:
        ex = series.exact

        def exact(n, _ex=ex):
            return _ex[n] if n < len(_ex) else None

    mf_hint = None
    if deg is not None:
        mf_hint = MfHint("finite", float(series.degree()), "polynomial degree")
    elif radius.is_infinite:
        mf_hint = MfHint("infinite", source="entire, not a polynomial")
    gf = GenFunction(
        name=name,
        radius=radius,
        log_coeffs=log_coeffs,
        coeff_limit=N,
        exact=exact,
        degree=series.degree() if deg is not None else None,
        class_k=status,
        mf_hint=mf_hint,
        analytic=Evaluator(node, config.dps),
        meta={"dsl": True},
    )
    return CompileReport(gf, status, warnings, series, node)


def compile_source(src: str, config: CompileConfig | None = None) -> CompileReport:
    return compile_ast(parse(src), config)
