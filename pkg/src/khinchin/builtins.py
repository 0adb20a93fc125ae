"""Built-in members of class K with exact coefficient oracles and closed-form hooks."""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import mpmath
import numpy as np
from scipy.special import gammaln

from . import exact as ex
from .canonical import CanonicalProductSpec, canonical_coefficients, canonical_eval
from .genfunc import (
    ClassKStatus,
    EvalHooks,
    GenFunction,
    MfHint,
    RadiusSpec,
    check_class_k,
)
from .logspace import NEG_INF

ZETA2 = math.pi**2 / 6


def _t(log_t: float) -> float:
    return math.exp(log_t)


def _one_minus_t(log_t: float) -> float:
    return -math.expm1(log_t)


def _logs_from_exact(values) -> np.ndarray:
    out = np.full(len(values), NEG_INF)
    for i, v in enumerate(values):
        if v:
            num = getattr(v, "numerator", v)
            den = getattr(v, "denominator", 1)
            out[i] = math.log(abs(num)) - math.log(den)
    return out


# --- exponential ---------------------------------------------------------


def exponential() -> GenFunction:
    def cumulants(lt, r):
        t = _t(lt)
        return tuple([t] * r)

    hooks = EvalHooks(
        log_f=_t,
        cumulants=cumulants,
        max_cumulant=99,
        factorial_moment=lambda k, lt: math.exp(k * lt),
        log_abs=lambda z: z.real,
    )
    return GenFunction(
        name="exp(z)",
        radius=RadiusSpec.infinite(),
        log_coeffs=lambda n: -gammaln(np.asarray(n, dtype=float) + 1),
        exact=lambda n: ex.exact_coeff("exponential", n),
        hooks=hooks,
        class_k=ClassKStatus("verified", up_to=None),
        mf_hint=MfHint("infinite", source="entire, not a polynomial"),
        meta={"order": 1.0, "clan": True},
    )


# --- geometric / negative binomial --------------------------------------


def negbinomial(N: int = 1) -> GenFunction:
    """``(1-z)^{-N}``; ``N = 1`` is the geometric family."""
    if N < 1:
        raise ValueError("N >= 1")

    def log_f(lt):
        return -N * math.log(_one_minus_t(lt))

    def cumulants(lt, r):
        t, u = _t(lt), _one_minus_t(lt)
        out = [N * t / u, N * t / u**2, N * t * (1 + t) / u**3]
        return tuple(out[:r])

    def fact(k, lt):
        u = _one_minus_t(lt)
        rising = math.prod(range(N, N + k))
        return rising * math.exp(k * lt) / u**k

    def log_coeffs(n):
        n = np.asarray(n, dtype=float)
        return gammaln(n + N) - gammaln(n + 1) - gammaln(N)

    def log_abs(z):
        return -N * math.log(abs(1 - z))

    name = "1/(1-z)" if N == 1 else f"1/(1-z)^{N}"
    return GenFunction(
        name=name,
        radius=RadiusSpec.finite(1.0),
        log_coeffs=log_coeffs,
        exact=lambda n: ex.exact_coeff("negbinomial", n, N),
        hooks=EvalHooks(log_f, cumulants, 3, fact, log_abs),
        class_k=ClassKStatus("verified", up_to=None),
        mf_hint=MfHint("infinite", source="sum n a_n R^n diverges (pole at R)"),
        meta={"clan": False, "N": N},
    )


def geometric() -> GenFunction:
    return negbinomial(1)


# --- polynomials -------------------------------------------------------


def polynomial(coeffs: Sequence, name: str | None = None) -> GenFunction:
    """Polynomial with exact (int/Fraction) coefficients ``coeffs[n] = a_n``."""
    c = [Fraction(x) for x in coeffs]
    while c and c[-1] == 0:
        c.pop()
    status = check_class_k(c)
    deg = len(c) - 1
    logs = _logs_from_exact(c)

    def log_coeffs(n):
        n = np.asarray(n, dtype=np.int64)
        out = np.full(n.shape, NEG_INF)
        ok = (n >= 0) & (n <= deg)
        out[ok] = logs[n[ok]]
        return out

    if name is None:
        terms = []
        for n, a in enumerate(c):
            if not a:
                continue
            coef = "" if (a == 1 and n) else str(a)
            mono = "" if n == 0 else ("z" if n == 1 else f"z^{n}")
            terms.append(coef + ("*" if coef and mono else "") + mono)
        name = "+".join(terms) or "0"
    return GenFunction(
        name=name,
        radius=RadiusSpec.infinite(),
        log_coeffs=log_coeffs,
        coeff_limit=None,
        exact=lambda n: c[n] if n <= deg else Fraction(0),
        degree=deg,
        class_k=status,
        mf_hint=MfHint("finite", float(deg), source="polynomial degree"),
        meta={"clan": True, "coeffs": c},
    )


def binomial(N: int) -> GenFunction:
    f = polynomial([math.comb(N, k) for k in range(N + 1)], name=f"(1+z)^{N}" if N > 1 else "1+z")
    return f


# --- partition function -----------------------------------------------------

_PARTITION_EXACT_MAX = 4000


@lru_cache(maxsize=1)
def _partition_log_table() -> np.ndarray:
    p = ex.partition_numbers(_PARTITION_EXACT_MAX)
    return np.array([math.log(x) for x in p])


def _partition_log_coeffs(n) -> np.ndarray:
    n = np.asarray(n, dtype=np.int64)
    out = np.empty(n.shape, dtype=float)
    small = n <= _PARTITION_EXACT_MAX
    table = _partition_log_table()
    out[small] = table[n[small]]
    if np.any(~small):
        out[~small] = ex.log_partition_asymptotic(n[~small])
    return out


_MODULAR_S = 1.0  # use the eta transformation for s = -ln t below this


def _partition_direct(s: float, r: int):
    """Direct sums over parts for ``t = e^{-s}``: ln P and cumulants up to r <= 3."""
    kmax = int(45.0 / s) + 10
    k = np.arange(1, kmax + 1, dtype=float)
    x = np.exp(-k * s)  # t^k
    em = -np.expm1(-k * s)  # 1 - t^k
    log_f = float(-np.sum(np.log(em)))
    out = [log_f]
    # cumulants of k*Geom(t^k): k^r * Li_{1-r}(t^k)
    if r >= 1:
        out.append(float(np.sum(k * x / em)))
    if r >= 2:
        out.append(float(np.sum(k**2 * x / em**2)))
    if r >= 3:
        out.append(float(np.sum(k**3 * x * (1 + x) / em**3)))
    return out


def _partition_modular(s: float, r: int):
    u = 4 * math.pi**2 / s
    dual = _partition_direct(u, 3)
    g_u, M, V, K3 = dual
    pi2 = math.pi**2
    log_f = pi2 / (6 * s) + 0.5 * math.log(s / (2 * math.pi)) - s / 24 + g_u
    out = [log_f]
    if r >= 1:
        out.append(pi2 / (6 * s**2) - 1 / (2 * s) + 1 / 24 - 4 * pi2 * M / s**2)
    if r >= 2:
        out.append(pi2 / (3 * s**3) - 1 / (2 * s**2) - 8 * pi2 * M / s**3 + 16 * pi2**2 * V / s**4)
    if r >= 3:
        out.append(
            pi2 / s**4 - 1 / s**3 - 24 * pi2 * M / s**4 + 96 * pi2**2 * V / s**5
            - 64 * pi2**3 * K3 / s**6
        )
    return out


def partition_point(log_t: float, r: int = 2, route: str = "auto"):
    """``[ln P(t), kappa_1, ..., kappa_r]`` at ``t = e^{log_t}``."""
    s = -log_t
    if s <= 0:
        raise ValueError("partition function needs t < 1")
    if route == "direct" or (route == "auto" and s >= _MODULAR_S):
        return _partition_direct(s, r)
    return _partition_modular(s, r)


@lru_cache(maxsize=4)
def _divisor_sigma(n_max: int) -> np.ndarray:
    sig = np.zeros(n_max + 1, dtype=float)
    for d in range(1, n_max + 1):
        sig[d::d] += d
    return sig


def _partition_cumulants_high(lt: float, r: int) -> list[float]:
    """kappa_j = sum_n n^{j-1} sigma(n) t^n, j = 1..r (moderate t only)."""
    s = -lt
    n_max = int((60.0 + 10 * r) / s) + 10
    if n_max > 1 << 18:
        raise ValueError("t too close to 1 for high-order partition cumulants")
    n_max = 1 << max(10, (n_max - 1).bit_length())
    sig = _divisor_sigma(n_max)
    n = np.arange(n_max + 1, dtype=float)
    w = sig * np.exp(-n * s)
    return [float(np.sum(n ** (j - 1) * w)) for j in range(1, r + 1)]


def raw_from_cumulants(kappa: Sequence[float]) -> list[float]:
    """Raw moments ``mu'_0..mu'_r`` from cumulants ``kappa_1..kappa_r``."""
    r = len(kappa)
    mu = [1.0]
    for n in range(1, r + 1):
        mu.append(sum(math.comb(n - 1, k - 1) * kappa[k - 1] * mu[n - k] for k in range(1, n + 1)))
    return mu


def factorial_from_raw(mu: Sequence[float], k: int) -> float:
    s1 = ex.stirling1_signed(k)
    return float(sum(s1[j] * mu[j] for j in range(k + 1)))


def partition() -> GenFunction:
    def log_f(lt):
        return partition_point(lt, 0)[0]

    def cumulants(lt, r):
        return tuple(partition_point(lt, r)[1 : r + 1])

    def fact(k, lt):
        if k == 0:
            return 1.0
        try:
            kap = _partition_cumulants_high(lt, k)
        except ValueError:
            if k > 3:
                raise
            # near t = 1 only the modular cumulants (orders <= 3) are available
            kap = partition_point(lt, k)[1:]
        return factorial_from_raw(raw_from_cumulants(kap), k)

    def log_abs(z):
        # prod 1/(1 - z^k), |z| < 1
        r = abs(z)
        kmax = int(45.0 / -math.log(r)) + 10
        k = np.arange(1, kmax + 1)
        return float(-np.sum(np.log(np.abs(1 - z**k))))

    return GenFunction(
        name="partition()",
        radius=RadiusSpec.finite(1.0),
        log_coeffs=_partition_log_coeffs,
        exact=lambda n: ex.exact_coeff("partition", n),
        hooks=EvalHooks(log_f, cumulants, 3, fact, log_abs),
        class_k=ClassKStatus("verified", up_to=None),
        mf_hint=MfHint("infinite", source="sum p(n) n diverges at R=1"),
        meta={"clan": True},
    )


# --- Bell ---------------------------------------------------------------

_BELL_MAX = 1500


@lru_cache(maxsize=1)
def _bell_log_table() -> np.ndarray:
    b = ex.bell_numbers(_BELL_MAX)
    return np.array([math.log(x) for x in b]) - gammaln(np.arange(_BELL_MAX + 1) + 1.0)


def _touchard(k: int, x: float) -> float:
    return float(sum(ex.stirling2(k, j) * x**j for j in range(k + 1)))


def bell() -> GenFunction:
    """``e^{e^z - 1}``, coefficients ``B(n)/n!``."""

    def log_f(lt):
        return math.expm1(_t(lt))

    def cumulants(lt, r):
        t = _t(lt)
        et = math.exp(t)
        return tuple(et * _touchard(j, t) for j in range(1, r + 1))

    def fact(k, lt):
        t = _t(lt)
        return t**k * _touchard(k, math.exp(t))

    def log_coeffs(n):
        return _bell_log_table()[np.asarray(n, dtype=np.int64)]

    def log_abs(z):
        w = np.exp(z) - 1
        return float(w.real)

    return GenFunction(
        name="bell()",
        radius=RadiusSpec.infinite(),
        log_coeffs=log_coeffs,
        coeff_limit=_BELL_MAX,
        exact=lambda n: Fraction(ex.exact_coeff("bell", n), math.factorial(n)),
        hooks=EvalHooks(log_f, cumulants, 8, fact, log_abs, valid=lambda lt: lt < math.log(700.0)),
        class_k=ClassKStatus("verified", up_to=None),
        mf_hint=MfHint("infinite", source="entire, not a polynomial"),
        meta={"clan": True},
    )


# --- canonical products ---------------------------------------------------


def canonical(spec: CanonicalProductSpec, n_coeffs: int = 300) -> GenFunction:
    """``prod (1 + z/b_k)`` with coefficients from the q-product form or Newton's identities."""
    conv = spec.convergence()
    if conv == "divergent":
        raise ValueError(f"{spec.describe()}: sum 1/b_k diverges; not an entire function")

    state: dict = {}

    def coeffs():
        if "c" not in state:
            c, is_exact = canonical_coefficients(spec, n_coeffs)
            state["exact"] = is_exact
            if is_exact:
                state["c"] = c
                state["logs"] = _logs_from_exact(c)
            else:
                state["c"] = c
                state["logs"] = np.array([float(mpmath.log(x)) if x > 0 else NEG_INF for x in c])
        return state

    deg = None
    if spec.is_finite:
        deg = int(sum(spec.mult(np.arange(1, len(spec.zeros) + 1))))
        n_coeffs = min(n_coeffs, deg)

    def log_coeffs(n):
        n = np.asarray(n, dtype=np.int64)
        logs = coeffs()["logs"]
        out = np.full(n.shape, NEG_INF)
        ok = n < len(logs)
        out[ok] = logs[n[ok]]
        return out

    def exact(n):
        st = coeffs()
        if not st["exact"] or n >= len(st["c"]):
            return None
        return st["c"][n]

    def log_f(lt):
        return canonical_eval(spec, log_t=lt).log_f

    def cumulants(lt, r):
        e = canonical_eval(spec, log_t=lt)
        return (e.mean, e.var, e.kappa3)[:r]

    def log_abs(z):
        if spec.is_finite:
            k = np.arange(1, len(spec.zeros) + 1)
            b = np.exp(spec.log_b(k))
            w = spec.mult(k)
            fac = np.abs(1 + z / b)
            if np.any(fac == 0):
                return NEG_INF
            return float(np.sum(w * np.log(fac)))
        total = 0.0
        k0 = 1
        while True:
            k = np.arange(k0, k0 + 4096)
            with np.errstate(over="ignore"):
                b = np.exp(spec.log_b(k))
            fac = np.abs(1 + z / b)
            if np.any(fac == 0):
                return NEG_INF
            total += float(np.sum(spec.mult(k) * np.log(fac)))
            if abs(z) / b[-1] < 1e-17:
                # remaining factors: |log|1+z/b|| <= 2|z|/b; bounded by the tail of sum 1/b_k
                return total
            k0 += 4096
            if k0 > 4_000_000:
                return total

    return GenFunction(
        name=spec.describe(),
        radius=RadiusSpec.infinite(),
        log_coeffs=log_coeffs,
        coeff_limit=n_coeffs,
        exact=exact,
        hooks=EvalHooks(log_f, cumulants, 3, None, log_abs),
        degree=deg,
        class_k=ClassKStatus("verified", up_to=None),
        mf_hint=MfHint("finite", float(deg), "polynomial degree") if deg is not None
        else MfHint("infinite", source="entire, not a polynomial"),
        meta={"canonical": spec, "convergence": conv, "clan": True},
    )


def canonical_pow2() -> GenFunction:
    return canonical(CanonicalProductSpec("geometric", c=1.0, r=2.0))


def canonical_squares() -> GenFunction:
    return canonical(CanonicalProductSpec("power", a=2.0, c=1.0))


# --- gap series -------------------------------------------------------


def lacunary(base: int = 2) -> GenFunction:
    """``1 + sum_{k>=1} z^{base^k}``: radius 1, Hadamard gaps with ratio ``base``."""

    def support(lo, hi):
        out = [0] if lo <= 0 <= hi else []
        p = base
        while p <= hi:
            if p >= lo:
                out.append(p)
            p *= base
        return np.array(out, dtype=np.int64)

    def log_coeffs(n):
        n = np.asarray(n, dtype=np.int64)
        out = np.full(n.shape, NEG_INF)
        for i, v in np.ndenumerate(n):
            if v == 0:
                out[i] = 0.0
            elif v > 0:
                x = int(v)
                while x % base == 0:
                    x //= base
                if x == 1:
                    out[i] = 0.0
        return out

    return GenFunction(
        name=f"1+sum(z^({base}^k))",
        radius=RadiusSpec.finite(1.0),
        log_coeffs=log_coeffs,
        support=support,
        exact=lambda n: Fraction(1) if np.isfinite(log_coeffs(np.array([n]))[0]) else Fraction(0),
        class_k=ClassKStatus("verified", up_to=None),
        mf_hint=MfHint("infinite", source="sum n a_n R^n = sum base^k diverges"),
        meta={"clan": False, "Gbar": float(base)},
    )


def gap_indices(n_max: int) -> list[int]:
    """``n_1 = 0, n_2 = 1, n_{k+1} = k n_k``: 0, 1, 2, 6, 24, 120, ..."""
    out = [0, 1]
    k = 2
    while True:
        nxt = k * out[-1]
        if nxt > n_max:
            return out
        out.append(nxt)
        k += 1


def borel_gap(rho: float = 0.5) -> GenFunction:
    """``1 + sum_{k>=2} n_k^{-n_k/rho} z^{n_k}``: entire, order ``rho``, not a clan."""

    def support(lo, hi):
        idx = np.array(gap_indices(hi), dtype=np.int64)
        return idx[(idx >= lo) & (idx <= hi)]

    def log_coeffs(n):
        n = np.asarray(n, dtype=np.int64)
        out = np.full(n.shape, NEG_INF)
        members = set(gap_indices(int(n.max()) if n.size else 0))
        for i, v in np.ndenumerate(n):
            v = int(v)
            if v in members:
                out[i] = 0.0 if v <= 1 else -(v / rho) * math.log(v)
        return out

    return GenFunction(
        name=f"gapseries(rho={rho:g})",
        radius=RadiusSpec.infinite(),
        log_coeffs=log_coeffs,
        support=support,
        class_k=ClassKStatus("verified", up_to=None),
        mf_hint=MfHint("infinite", source="entire, not a polynomial"),
        meta={"clan": False, "order": rho},
    )


# --- finite-M_f example ------------------------------------------------


def polylog4(eps: float = 1.0) -> GenFunction:
    """``1 + eps * sum_{n>=1} z^n / n^4`` (radius 1, finite M_f)."""

    def li(s, lt):
        return float(mpmath.polylog(s, mpmath.e ** mpmath.mpf(lt)))

    def log_f(lt):
        return math.log1p(eps * li(4, lt))

    def cumulants(lt, r):
        f = 1 + eps * li(4, lt)
        m1 = eps * li(3, lt) / f
        m2 = eps * li(2, lt) / f
        out = [m1, m2 - m1**2]
        if r >= 3:
            m3 = eps * li(1, lt) / f
            out.append(m3 - 3 * m2 * m1 + 2 * m1**3)
        return tuple(out[:r])

    def log_coeffs(n):
        n = np.asarray(n, dtype=float)
        with np.errstate(divide="ignore"):
            out = math.log(eps) - 4 * np.log(n)
        return np.where(n == 0, 0.0, out)

    z3, z4 = float(mpmath.zeta(3)), float(mpmath.zeta(4))
    return GenFunction(
        name=f"1+{eps:g}*Li4(z)",
        radius=RadiusSpec.finite(1.0),
        log_coeffs=log_coeffs,
        hooks=EvalHooks(log_f, cumulants, 3),
        class_k=ClassKStatus("verified", up_to=None),
        mf_hint=MfHint("finite", eps * z3 / (1 + eps * z4), "sum n a_n R^n / sum a_n R^n"),
        meta={"clan": False},
    )


# --- registry -------------------------------------------------------------

REGISTRY = {
    "exp": exponential,
    "exponential": exponential,
    "partition": partition,
    "bell": bell,
    "geom": geometric,
    "geometric": geometric,
    "negbin2": lambda: negbinomial(2),
    "negbin3": lambda: negbinomial(3),
    "bernoulli": lambda: binomial(1),
    "lacunary": lacunary,
    "gapseries": borel_gap,
    "polylog4": polylog4,
    "canon_pow2": canonical_pow2,
    "canon_squares": canonical_squares,
}


def by_name(name: str) -> GenFunction:
    try:
        return REGISTRY[name]()
    except KeyError:
        raise KeyError(f"unknown built-in {name!r}; known: {', '.join(sorted(REGISTRY))}") from None
