"""Saddle-point coefficient estimates, local-CLT deviation and asymptotic comparators."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import mpmath
import numpy as np
from scipy import integrate, special

from .canonical import CanonicalProductSpec, canonical_eval
from .family import KhinchinFamily, family
from .genfunc import EvaluationError, TruncationError
from .verify import CheckReport

LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)
MAX_WINDOW = 2_000_000
ZETA2 = math.pi**2 / 6


def _log_exact(v) -> float:
    if isinstance(v, Fraction):
        return _log_exact(v.numerator) - _log_exact(v.denominator)
    if isinstance(v, int):
        return float(mpmath.log(v)) if v > 0 else -math.inf
    return float(mpmath.log(v))


# --- Hayman ----------------------------------------------------------------


@dataclass(frozen=True)
class CoeffEstimate:
    n: int
    t_n: float
    log_estimate: float
    log_exact: float | None
    ratio: float | None
    mean_residual: float
    caveat: str = "strong gaussianity not checked"


def hayman_estimate(fam, n: int) -> CoeffEstimate:
    """``a_n ~ f(t_n) / (sqrt(2 pi) t_n^n sigma_f(t_n))`` with ``m_f(t_n) = n``, in log space."""
    fam = family(fam)
    lt = fam.solve_log_t_for_mean(n)
    pe = fam.point(log_t=lt)
    log_est = pe.log_f - LOG_SQRT_2PI - n * lt - 0.5 * math.log(pe.var)
    log_ex = None
    ex = fam.f.exact(n) if fam.f.exact is not None else None
    if ex is not None:
        log_ex = _log_exact(ex)
    ratio = math.exp(log_est - log_ex) if log_ex is not None else None
    return CoeffEstimate(n, math.exp(lt), log_est, log_ex, ratio, abs(pe.mean - n) / n)


# --- local CLT -----------------------------------------------------------------


@dataclass(frozen=True)
class CltDeviation:
    t: float
    mean: float
    sigma: float
    deviation: float
    argmax: int
    window: tuple
    outside_bound: float  # Gaussian kernel beyond the window plus pmf tail, scaled
    stride: int = 1  # > 1 only for dense support wider than MAX_WINDOW integers


def local_clt_deviation(fam, t: float | None = None, *, log_t: float | None = None, width: float = 8.0) -> CltDeviation:
    """``sup_n |P(X_t = n) sqrt(2 pi) sigma - exp(-(n - m)^2 / (2 sigma^2))|`` over ``m +- width*sigma``."""
    fam = family(fam)
    lt = math.log(t) if log_t is None else log_t
    pe = fam.point(log_t=lt)
    m, s = pe.mean, math.sqrt(pe.var)
    if s <= 0:
        raise EvaluationError("sigma_f(t) = 0")
    lo, hi = math.ceil(m - width * s), math.floor(m + width * s)
    lo_s = max(lo, 0)
    lim = fam.f.coeff_limit
    if lim is not None and hi > lim and (fam.f.degree is None or fam.f.degree > lim):
        raise TruncationError(f"{fam.name}: CLT window reaches n = {hi}, coefficients known up to {lim}")
    stride = 1
    if hi - lo_s + 1 > MAX_WINDOW and fam.f.support_in(lo_s, lo_s + 999).size == 1000:
        # dense support: the pmf varies on the scale sigma, so a stride of ~1e-5 sigma
        # misses nothing at double precision; the integers next to m are always included
        stride = math.ceil((hi - lo_s + 1) / MAX_WINDOW)
        c0 = int(round(m))
        supp = np.union1d(np.arange(lo_s, hi + 1, stride, dtype=np.int64),
                          np.arange(max(c0 - 2, lo_s), min(c0 + 2, hi) + 1, dtype=np.int64))
    else:
        supp = fam.f.support_in(lo_s, hi) if hi >= lo_s else np.zeros(0, dtype=np.int64)
    dev, arg = 0.0, lo
    if supp.size:
        lp = fam.log_pmf(supp, log_t=lt)
        scaled = np.exp(lp + math.log(s) + LOG_SQRT_2PI)
        gauss = np.exp(-((supp - m) ** 2) / (2 * s * s))
        d = np.abs(scaled - gauss)
        i = int(np.argmax(d))
        dev, arg = float(d[i]), int(supp[i])
    # off-support integers (a_n = 0, including n < 0): the kernel alone; the worst is the one nearest m
    sset = set(supp.tolist()) if stride == 1 and supp.size < 5_000_000 else None
    c = int(round(m))
    for step in range(0, hi - lo + 2):
        cands = [c - step, c + step] if step else [c]
        hit = None
        for n in cands:
            if lo <= n <= hi and (n < 0 or (sset is not None and n not in sset)):
                hit = n
                break
        if hit is not None:
            g = math.exp(-((hit - m) ** 2) / (2 * s * s))
            if g > dev:
                dev, arg = g, hit
            break
        if step > 0 and math.exp(-((step - 1) ** 2) / (2 * s * s)) < dev:
            break
    outside = math.exp(-width * width / 2) * 2 + pe.tail_bound * s * math.sqrt(2 * math.pi)
    return CltDeviation(t if t is not None else math.exp(lt), m, s, dev, arg, (lo, hi), outside, stride)


# --- comparators ------------------------------------------------------------------


@dataclass(frozen=True)
class AsymptoticTarget:
    """``observed(fam, log_t) / target(t)`` is expected to tend to ``limit``."""

    name: str
    observed: Callable[[KhinchinFamily, float], float]
    target: Callable[[float], float]
    limit: float = 1.0
    constants: dict = field(default_factory=dict)


@dataclass(frozen=True)
class AsymptoticTrace:
    name: str
    grid: np.ndarray
    ratios: np.ndarray
    limit: float

    @property
    def final(self) -> float:
        return float(self.ratios[-1])

    @property
    def trend_toward_limit(self) -> bool:
        err = np.abs(self.ratios - self.limit)
        return bool(err[-1] <= err[0])


def partition_mean_target() -> AsymptoticTarget:
    return AsymptoticTarget("partition-mean", lambda F, lt: F.mean(log_t=lt),
                            lambda t: ZETA2 / (1 - t) ** 2, constants={"zeta2": ZETA2})


def partition_var_target() -> AsymptoticTarget:
    return AsymptoticTarget("partition-var", lambda F, lt: F.var(log_t=lt),
                            lambda t: 2 * ZETA2 / (1 - t) ** 3, constants={"zeta2": ZETA2})


def bell_mean_target() -> AsymptoticTarget:
    return AsymptoticTarget("bell-mean", lambda F, lt: F.mean(log_t=lt), lambda t: t * math.exp(t))


def moment_quotient_target(p: float, limit: float = 1.0, name: str | None = None) -> AsymptoticTarget:
    """``E(X^p) / E(X)^p``; the limit is 1 for clans."""

    def obs(F, lt):
        return F.moment(p, log_t=lt) / F.mean(log_t=lt) ** p

    return AsymptoticTarget(name or f"moment-quotient(p={p:g})", obs, lambda t: 1.0, limit)


def negbin_moment_target(N: int, beta: float) -> AsymptoticTarget:
    """``E(X^beta)/E(X)^beta -> Gamma(beta + N) / (Gamma(N) N^beta)`` for ``1/(1-z)^N``."""
    lim = math.exp(special.gammaln(beta + N) - special.gammaln(N) - beta * math.log(N))
    return moment_quotient_target(beta, lim, f"negbin(N={N})-moment(beta={beta:g})")


def compare_asymptotic(fam, target: AsymptoticTarget, grid) -> AsymptoticTrace:
    fam = family(fam)
    ts = np.asarray(grid, dtype=float)
    r = [target.observed(fam, math.log(t)) / target.target(t) for t in ts]
    return AsymptoticTrace(target.name, ts, np.array(r), target.limit)


# --- Beta products --------------------------------------------------------------


@dataclass(frozen=True)
class BetaProductTrace:
    rho: float
    C: float
    grid: np.ndarray
    log_f_ratio: np.ndarray
    mean_ratio: np.ndarray
    var_ratio: np.ndarray
    sigma2_over_m: np.ndarray
    constant: float  # C pi / sin(pi rho)


def beta_product_check(spec: CanonicalProductSpec, grid, *, rho: float, C: float = 1.0) -> BetaProductTrace:
    """For ``N(t) ~ C t^rho``: ``ln f ~ K t^rho``, ``m ~ rho K t^rho``, ``sigma^2 ~ rho^2 K t^rho``, ``K = C pi/sin(pi rho)``."""
    if not 0 < rho < 1:
        raise ValueError("0 < rho < 1")
    K = C * math.pi / math.sin(math.pi * rho)
    ts = np.asarray(grid, dtype=float)
    rows = []
    for t in ts:
        e = canonical_eval(spec, t)
        base = K * t**rho
        rows.append((e.log_f / base, e.mean / (rho * base), e.var / (rho * rho * base), e.var / e.mean))
    a = np.array(rows)
    return BetaProductTrace(rho, C, ts, a[:, 0], a[:, 1], a[:, 2], a[:, 3], K)


def _valiron_integral(spec: CanonicalProductSpec, t: float) -> tuple[float, float]:
    """``int_0^inf N(t y) / (y (y + 1)) dy`` by adaptive quadrature between jumps of N.

    In ``u = ln y`` the integrand is ``N(t e^u) / (1 + e^u)``. Jumps of N sit at
    ``u_j = ln(b_j / t)``; each smooth piece is integrated adaptively. Far out the
    step count is replaced by its smooth average ``N(s) - 1/2`` (power rule)
    or the remaining pieces are negligible (fast rules).
    """
    lt = math.log(t)
    total, err = 0.0, 0.0
    k = 1
    max_pieces = 4000
    tail_done = False
    while k <= max_pieces:
        if spec.n_zeros is not None and k > spec.n_zeros:
            u0 = float(spec.log_b(np.array([spec.n_zeros]))[0]) - lt
            # beyond the last zero N = n_zeros: closed form n * ln(1 + e^{-u0})
            total += spec.n_zeros * math.log1p(math.exp(-u0))
            tail_done = True
            break
        lb = spec.log_b(np.array([k, k + 1]))
        u0, u1 = float(lb[0]) - lt, float(lb[1]) - lt
        if u0 > 40:
            # N(t e^u)/(1+e^u) <= N e^{-u}; with b_k growing at least geometrically this is negligible
            tail_done = True
            break
        if u1 > u0:
            val, e = integrate.quad(lambda u: k / (1 + math.exp(u)), u0, u1, epsabs=1e-14, epsrel=1e-12)
            total += val
            err += e
        k += 1
    if not tail_done:
        if spec.rule != "power":
            raise EvaluationError("Valiron quadrature: tail not resolved")
        u0 = float(spec.log_b(np.array([k]))[0]) - lt
        a, c = spec.a, spec.c

        scale = (t / c) ** (1 / a)

        def smooth(u):
            # ((t e^u / c)^{1/a} - 1/2) / (1 + e^u), written to stay finite as u grows
            return scale * math.exp(u * (1 / a - 1)) / (1 + math.exp(-u)) - 0.5 / (1 + math.exp(min(u, 700.0)))

        val, e = integrate.quad(smooth, u0, np.inf, epsabs=1e-12, epsrel=1e-10, limit=500)
        total += val
        err += e
    return total, err


def valiron_identity(spec: CanonicalProductSpec, t: float) -> CheckReport:
    """``ln f(t) = int_0^inf N(t y) / (y (y+1)) dy``: quadrature vs the direct product sum."""
    if spec.multiplicity != 1:
        raise ValueError("needs simple zeros")
    if t == 0:
        return CheckReport("valiron_identity", spec.describe(), True, {"t": 0.0, "lhs": 0.0, "rhs": 0.0}, 1e-4)
    direct = canonical_eval(spec, t).log_f
    quad, qerr = _valiron_integral(spec, t)
    rel = abs(quad - direct) / abs(direct) if direct else abs(quad)
    tol = 1e-4
    return CheckReport("valiron_identity", spec.describe(), bool(rel <= tol),
                       {"t": t, "sum": direct, "integral": quad, "quad_error": qerr, "rel_err": rel}, tol)
