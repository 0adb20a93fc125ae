"""The Khinchin family ``P(X_t = n) = a_n t^n / f(t)`` of a GenFunction."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Callable

import mpmath
import numpy as np

from . import exact as ex
from .genfunc import (
    ClassKStatus,
    DomainError,
    EvalHooks,
    EvaluationError,
    GenFunction,
    MfHint,
    NotInClassK,
    RadiusSpec,
    TruncationError,
    as_log_t,
    point_eval,
    term_window,
    weighted_power_sum,
)
from .logspace import NEG_INF, SignedLogValue

IDENTITY_RTOL = 1e-8


class DegenerateFamilyWarning(UserWarning):
    pass


class SaddleError(EvaluationError):
    pass


@dataclass(frozen=True)
class FamilyStats:
    t: float
    log_t: float
    log_f: SignedLogValue
    mean: float
    var: float
    ratio: float  # sigma/m
    L_f: float
    second_moment_quotient: float  # E X^2 / m^2
    tail_bound_achieved: float
    route: str
    L_route: str

    @property
    def identity_residual(self) -> float:
        """Relative residual of E X^2/m^2 = 1/m + L_f."""
        rhs = 1.0 / self.mean + self.L_f
        return abs(self.second_moment_quotient - rhs) / abs(rhs)


@dataclass(frozen=True)
class MfClass:
    kind: str  # "finite" | "infinite" | "unknown"
    value: float = math.inf
    source: str = ""

    def __str__(self) -> str:
        if self.kind == "finite":
            return f"finite({self.value:.12g})"
        return self.kind


def raw_from_cumulants(kappa) -> list[float]:
    r = len(kappa)
    mu = [1.0]
    for n in range(1, r + 1):
        mu.append(sum(math.comb(n - 1, k - 1) * kappa[k - 1] * mu[n - k] for k in range(1, n + 1)))
    return mu


def _falling_log_weights(n: np.ndarray, k: int) -> np.ndarray:
    """log of n(n-1)...(n-k+1), -inf where n < k."""
    out = np.zeros(n.shape)
    nf = n.astype(float)
    for j in range(k):
        with np.errstate(divide="ignore", invalid="ignore"):
            out = out + np.log(np.maximum(nf - j, 0.0))
    return out


class KhinchinFamily:
    """Distribution family of ``f``; refuses functions outside class K unless overridden."""

    def __init__(self, f: GenFunction, *, override: bool = False, radius: float | None = None):
        if f.class_k.kind == "violated" and not override:
            raise NotInClassK(f"{f.name}: {f.class_k.reason}", f.class_k.witness)
        if f.class_k.kind != "verified" and override:
            warnings.warn(f"{f.name}: class K status {f.class_k}; proceeding by override", stacklevel=2)
        if radius is not None:
            f = replace(f, radius=RadiusSpec.infinite() if math.isinf(radius) else RadiusSpec.finite(radius))
        self.f = f

    def __repr__(self) -> str:
        return f"KhinchinFamily({self.f.name})"

    @property
    def name(self) -> str:
        return self.f.name

    @property
    def radius(self) -> RadiusSpec:
        return self.f.radius

    def require_radius(self) -> RadiusSpec:
        if self.f.radius.kind == "unknown":
            raise DomainError(f"{self.f.name}: radius unknown; supply one explicitly")
        return self.f.radius

    # --- law ----------------------------------------------------------
    def log_f(self, t: float | None = None, *, log_t: float | None = None) -> float:
        return point_eval(self.f, t, log_t=log_t).log_f

    def log_pmf(self, ns, t: float | None = None, *, log_t: float | None = None) -> np.ndarray:
        lt = as_log_t(t, log_t)
        self.f.check_point(lt)
        ns = np.atleast_1d(np.asarray(ns, dtype=np.int64))
        if lt == NEG_INF:
            out = np.full(ns.shape, NEG_INF)
            out[ns == 0] = 0.0
            return out
        lf = self.log_f(log_t=lt)
        out = np.full(ns.shape, NEG_INF)
        ok = ns >= 0
        if np.any(ok):
            with np.errstate(invalid="ignore"):
                out[ok] = self.f.log_coeffs(ns[ok]) + ns[ok] * lt - lf
        return out

    def pmf(self, n: int, t: float | None = None, *, log_t: float | None = None) -> float:
        return float(np.exp(self.log_pmf([n], t, log_t=log_t)[0]))

    # --- moments -------------------------------------------------------
    def point(self, t=None, *, log_t=None, route="auto"):
        return point_eval(self.f, t, log_t=log_t, route=route)

    def mean(self, t=None, *, log_t=None) -> float:
        return self.point(t, log_t=log_t).mean

    def var(self, t=None, *, log_t=None) -> float:
        return self.point(t, log_t=log_t).var

    def stats(self, t: float | None = None, *, log_t: float | None = None, check: bool = True) -> FamilyStats:
        lt = as_log_t(t, log_t)
        pe = self.point(log_t=lt)
        m, var = pe.mean, pe.var
        if lt == NEG_INF or m == 0:
            return FamilyStats(0.0, lt, SignedLogValue.from_log(pe.log_f), 0.0, 0.0, math.nan, math.nan,
                               math.nan, pe.tail_bound, pe.route, "n/a")
        q = var / m / m + 1.0
        L, L_route = self._L_f(lt, m, var)
        st = FamilyStats(math.exp(lt), lt, SignedLogValue.from_log(pe.log_f), m, var,
                         math.sqrt(max(var, 0.0)) / m, L, q, pe.tail_bound, pe.route, L_route)
        if check and L_route != "identity" and st.identity_residual > IDENTITY_RTOL * max(1.0, 1.0 / max(q - 1, 1e-300) * 1e-8):
            raise EvaluationError(
                f"{self.name}: E X^2/m^2 = {q!r} but 1/m + L_f = {1 / m + L!r} at t={math.exp(lt):.6g} "
                f"(L_f via {L_route})"
            )
        return st

    def _L_f(self, lt: float, m: float, var: float) -> tuple[float, str]:
        """``f f''/f'^2`` from the second factorial moment, by a route independent of (m, sigma^2)."""
        hooks = self.f.hooks
        if hooks is not None and hooks.factorial_moment is not None and (hooks.valid is None or hooks.valid(lt)):
            try:
                F2 = hooks.factorial_moment(2, lt)
                F1 = hooks.factorial_moment(1, lt)
                with np.errstate(all="ignore"):
                    L = F2 / (F1 * F1)
                if math.isfinite(L) and L > 0:
                    return L, "hook-factorial"
            except (ValueError, ArithmeticError, OverflowError):
                pass
        if self.f.analytic is not None and self.f.hooks is None:
            try:
                with mpmath.workdps(40):
                    f0, f1, f2 = self.f.analytic.values(lt, 2, dps=40)
                    return float(f0 * f2 / (f1 * f1)), "symbolic"
            except (ArithmeticError, ValueError, ZeroDivisionError):
                pass
        try:
            w = term_window(self.f, lt, max_terms=2_000_000)
            lf2 = _log_falling_sum(w, 2)
            lf1 = _log_falling_sum(w, 1)
            return math.exp(w.log_total + lf2 - 2 * lf1), "series-factorial"
        except EvaluationError:
            pass
        return var / m / m + 1.0 - 1.0 / m, "identity"

    def moment(self, beta: float, t: float | None = None, *, log_t: float | None = None) -> float:
        """``E X_t^beta = S_beta / S_0`` by direct weighted summation (closed forms as fallback)."""
        if beta <= 0:
            raise ValueError("beta must be positive")
        lt = as_log_t(t, log_t)
        self.f.check_point(lt)
        if lt == NEG_INF:
            return 0.0
        try:
            w = term_window(self.f, lt, p_max=max(8.0, beta))
            if w.tail_log(beta) == math.inf:
                raise TruncationError("tail not geometrically bounded")
            return math.exp(w.log_sum(beta) - w.log_total)
        except EvaluationError:
            pass
        hooks = self.f.hooks
        kb = int(round(beta))
        if hooks is not None and abs(beta - kb) < 1e-15 and kb <= hooks.max_cumulant:
            return raw_from_cumulants(hooks.cumulants(lt, kb))[kb]
        if self.f.analytic is not None and abs(beta - kb) < 1e-15 and kb <= 2:
            with mpmath.workdps(40):
                vals = self.f.analytic.values(lt, 2, dps=40)
                t_ = mpmath.e ** mpmath.mpf(lt)
                F1 = t_ * vals[1] / vals[0]
                if kb == 1:
                    return float(F1)
                return float(t_ * t_ * vals[2] / vals[0] + F1)
        raise EvaluationError(f"{self.name}: moment {beta} unavailable at t={math.exp(lt):.6g}")

    def factorial_moment(self, k: int, t: float | None = None, *, log_t: float | None = None) -> float:
        """``E X^(k falling) = t^k f^(k)(t)/f(t)``."""
        if k < 0:
            raise ValueError("k >= 0")
        if k == 0:
            return 1.0
        lt = as_log_t(t, log_t)
        self.f.check_point(lt)
        if lt == NEG_INF:
            return 0.0
        hooks = self.f.hooks
        if hooks is not None and hooks.factorial_moment is not None and (hooks.valid is None or hooks.valid(lt)):
            try:
                return float(hooks.factorial_moment(k, lt))
            except (ValueError, ArithmeticError):
                pass
        if self.f.analytic is not None and k <= 2:
            with mpmath.workdps(40):
                vals = self.f.analytic.values(lt, k, dps=40)
                t_ = mpmath.e ** mpmath.mpf(lt)
                return float(t_**k * vals[k] / vals[0])
        w = term_window(self.f, lt, p_max=max(8.0, k))
        return math.exp(_log_falling_sum(w, k) - w.log_total)

    def moment_via_stirling(self, k: int, t: float | None = None, *, log_t: float | None = None) -> float:
        if k < 1:
            raise ValueError("k >= 1")
        return sum(ex.stirling2(k, j) * self.factorial_moment(j, t, log_t=log_t) for j in range(k + 1))

    # --- M_f and the saddle ---------------------------------------------
    def classify_Mf(self, window: int = 64) -> MfClass:
        f = self.f
        if f.is_polynomial:
            return MfClass("finite", float(f.degree), "polynomial degree")
        if f.mf_hint is not None:
            return MfClass(f.mf_hint.kind, f.mf_hint.value, f.mf_hint.source)
        if f.radius.is_infinite:
            return MfClass("infinite", source="entire, not a polynomial")
        if not f.radius.is_finite:
            return MfClass("unknown", source="radius unknown")
        # ratio window on n a_n R^n
        n_hi = f.coeff_limit if f.coeff_limit is not None else 4096
        ns = f.support_in(max(1, n_hi // 2), n_hi)
        if ns.size < 4:
            return MfClass("unknown", source="too few coefficients for a ratio window")
        ns = ns[-window:]
        lw = np.log(ns.astype(float)) + f.log_coeffs(ns) + ns * f.radius.log_r
        if np.all(np.diff(lw) >= -1e-12):
            return MfClass("infinite", source=f"n a_n R^n nondecreasing over n in [{ns[0]}, {ns[-1]}]")
        ratios = np.diff(lw) / np.diff(ns)
        if np.max(ratios) < math.log(0.9):
            q = math.exp(float(np.max(ratios)))
            w_all = f.support_in(0, int(ns[-1]))
            lc = f.log_coeffs(w_all) + w_all * f.radius.log_r
            with np.errstate(divide="ignore"):
                num = np.sum(w_all * np.exp(lc)) + math.exp(lw[-1]) * q / (1 - q)
            den = np.sum(np.exp(lc))
            return MfClass("finite", float(num / den), "ratio test at R")
        return MfClass("unknown", source="ratio test at R inconclusive")

    def solve_t_for_mean(self, target: float, *, rtol: float = 1e-12, allow_unknown: bool = False) -> float:
        return math.exp(self.solve_log_t_for_mean(target, rtol=rtol, allow_unknown=allow_unknown))

    def solve_log_t_for_mean(self, target: float, *, rtol: float = 1e-12, allow_unknown: bool = False) -> float:
        """``log t`` with ``m_f(t) = target``, by bisection (m_f is strictly increasing)."""
        if target <= 0:
            raise ValueError("target mean must be positive")
        mf = self.classify_Mf()
        if mf.kind == "finite" and target >= mf.value:
            raise SaddleError(f"{self.name}: target {target} >= M_f = {mf.value:.12g}")
        if mf.kind == "unknown" and not allow_unknown:
            raise SaddleError(f"{self.name}: M_f unknown ({mf.source}); pass allow_unknown=True")
        R = self.require_radius()

        def m_at(x):
            return self.mean(log_t=x_to_lt(x))

        if R.is_finite:
            # t = R exp(-e^{-x}) : x -> inf approaches R with full relative resolution
            def x_to_lt(x):
                return R.log_r - math.exp(-x)
        else:
            def x_to_lt(x):
                return x

        lo, hi = 0.0, 0.0
        try:
            m0 = m_at(0.0)
        except EvaluationError as exc:
            raise SaddleError(f"{self.name}: cannot evaluate m at the starting point: {exc}") from None
        step = 1.0
        if m0 < target:
            lo = 0.0
            hi = step
            while True:
                try:
                    mh = m_at(hi)
                except EvaluationError as exc:
                    raise SaddleError(
                        f"{self.name}: bracketing failed near R; reached t={math.exp(x_to_lt(lo)):.17g} "
                        f"with m={m_at(lo):.6g} < {target} ({exc})"
                    ) from None
                if mh >= target:
                    break
                lo, step = hi, step * 2
                hi = lo + step
                if hi > 800:
                    raise SaddleError(f"{self.name}: no bracket for mean {target}")
        else:
            hi = 0.0
            lo = -step
            while m_at(lo) > target:
                hi, step = lo, step * 2
                lo = hi - step
                if lo < -800:
                    raise SaddleError(f"{self.name}: no bracket for mean {target}")
        for _ in range(400):
            mid = 0.5 * (lo + hi)
            if m_at(mid) < target:
                lo = mid
            else:
                hi = mid
            lt_lo, lt_hi = x_to_lt(lo), x_to_lt(hi)
            gap = abs(lt_hi - lt_lo) if R.is_infinite else abs(lt_hi - lt_lo) / max(R.log_r - lt_hi, 1e-300)
            if gap <= rtol or hi - lo <= 1e-15 * max(1.0, abs(lo)):
                break
        x = 0.5 * (lo + hi)
        return x_to_lt(x)

    # --- derivative family --------------------------------------------------
    def derivative_family(self) -> "KhinchinFamily":
        f = self.f
        nz = f.support_in(0, 64 if f.degree is None else f.degree)
        if f.is_polynomial and nz.size < 3:
            warnings.warn(f"{f.name}: fewer than 3 nonzero coefficients; W_t is degenerate",
                          DegenerateFamilyWarning, stacklevel=2)
        # a_0 = 0 is inherent to z f'(z); the law is still well defined on n >= 1
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            return KhinchinFamily(derivative_genfunction(f), override=True)

    # --- high precision ---------------------------------------------------------
    def stats_hp(self, t, dps: int = 50):
        """(mean, var) as mpf at ``dps`` digits; exact coefficients or the DSL evaluator."""
        f = self.f
        with mpmath.workdps(dps):
            t = mpmath.mpf(t)
            if f.is_polynomial and f.exact is not None:
                cs = [f.exact(n) for n in range(f.degree + 1)]
                S = [mpmath.fsum(mpmath.mpf(c.numerator) / c.denominator * (n**p) * t**n
                                 for n, c in enumerate(cs) if c) for p in range(3)]
            elif f.analytic is not None:
                v = f.analytic.values(float(mpmath.log(t)), 2, dps=dps)
                S = [v[0], t * v[1], t * t * v[2] + t * v[1]]
            else:
                raise EvaluationError(f"{f.name}: no high-precision route")
            m = S[1] / S[0]
            return m, S[2] / S[0] - m * m


def _log_falling_sum(w, k: int) -> float:
    from .logspace import logsumexp

    return logsumexp(w.logw + _falling_log_weights(w.n, k))


# --- D_f -----------------------------------------------------------------------


def derivative_hooks(h: EvalHooks) -> EvalHooks | None:
    """Hooks of ``z f'(z)`` from those of ``f`` (needs cumulants one order higher)."""
    if h.max_cumulant < 3:
        return None

    def log_f(lt):
        k = h.cumulants(lt, 1)
        return h.log_f(lt) + math.log(k[0])

    def cumulants(lt, r):
        k = h.cumulants(lt, min(r + 1, h.max_cumulant))
        k1, k2 = k[0], k[1]
        out = [k1 + k2 / k1]
        if r >= 2:
            out.append(k2 + k[2] / k1 - k2 * k2 / (k1 * k1))
        if r >= 3:
            if len(k) < 4:
                raise ValueError("fourth cumulant unavailable")
            out.append(k[2] + k[3] / k1 - 3 * k2 * k[2] / k1**2 + 2 * k2**3 / k1**3)
        return tuple(out[:r])

    fm = None
    if h.factorial_moment is not None:
        def fm(k, lt):
            # X * X^(k falling) = X^(k+1 falling) + k X^(k falling)
            F1 = h.factorial_moment(1, lt)
            return (h.factorial_moment(k + 1, lt) + k * h.factorial_moment(k, lt)) / F1

    return EvalHooks(log_f, cumulants, h.max_cumulant - 1, fm, None, h.valid)


def derivative_genfunction(f: GenFunction) -> GenFunction:
    from .dsl.ast import D as DNode
    from .dsl.evaluate import Evaluator

    def log_coeffs(ns):
        ns = np.asarray(ns, dtype=np.int64)
        with np.errstate(divide="ignore"):
            return np.where(ns > 0, np.log(np.maximum(ns, 1).astype(float)) + f.log_coeffs(ns), NEG_INF)

    support = None
    if f.support is not None:
        def support(lo, hi):
            s = f.support(max(lo, 1), hi) if hi >= 1 else np.zeros(0, dtype=np.int64)
            return s[s > 0]

    exact = None
    if f.exact is not None:
        def exact(n):
            v = f.exact(n)
            return None if v is None else n * v

    analytic = None
    if f.analytic is not None and hasattr(f.analytic, "node"):
        analytic = Evaluator(DNode(f.analytic.node), f.analytic.dps)
    mf = None
    if f.mf_hint is not None and f.mf_hint.kind == "infinite":
        mf = MfHint("infinite", source="D_f of a family with M_f = inf")
    return GenFunction(
        name=f"D({f.name})",
        radius=f.radius,
        log_coeffs=log_coeffs,
        coeff_limit=f.coeff_limit,
        support=support,
        exact=exact,
        hooks=derivative_hooks(f.hooks) if f.hooks is not None else None,
        degree=f.degree,
        class_k=ClassKStatus("violated", witness=0, reason="a_0 = 0 (derivative transform)"),
        mf_hint=mf,
        analytic=analytic,
        meta={"derivative_of": f},
    )


def family(obj, **kw) -> KhinchinFamily:
    """Build a family from a GenFunction, a built-in name or DSL source."""
    if isinstance(obj, KhinchinFamily):
        return obj
    if isinstance(obj, GenFunction):
        return KhinchinFamily(obj, **kw)
    from .builtins import REGISTRY, by_name

    if isinstance(obj, str) and obj in REGISTRY:
        return KhinchinFamily(by_name(obj), **kw)
    from .dsl import compile_source

    rep = compile_source(obj)
    return KhinchinFamily(rep.genfunction, **kw)


__all__: list[Callable | str] = [
    "FamilyStats",
    "KhinchinFamily",
    "MfClass",
    "derivative_genfunction",
    "derivative_hooks",
    "family",
    "raw_from_cumulants",
]
