"""Generating functions in class K and their pointwise evaluation.

Points ``t`` are handled internally through ``log t``: near a finite radius the
distance ``R - t`` is then recovered without cancellation, and ``t^n`` is just
``n log t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable

import numpy as np

from .logspace import NEG_INF, LogAccumulator, SignedLogValue, logsumexp


class EvaluationError(ArithmeticError):
    """An analytic quantity could not be produced at the requested point."""


class DomainError(EvaluationError):
    pass


class TruncationError(EvaluationError):
    def __init__(self, message: str, achieved_bound: float = math.inf):
        super().__init__(f"{message} (achieved tail bound {achieved_bound:.3e})")
        self.achieved_bound = achieved_bound


class NotInClassK(ValueError):
    def __init__(self, reason: str, witness: int | None = None):
        msg = reason if witness is None else f"{reason} (witness n={witness})"
        super().__init__(msg)
        self.reason = reason
        self.witness = witness


@dataclass(frozen=True)
class RadiusSpec:
    kind: str  # "finite" | "infinite" | "unknown"
    r: float = math.inf

    def __post_init__(self):
        if self.kind == "finite" and not (self.r > 0 and math.isfinite(self.r)):
            raise ValueError("finite radius must be a positive real")
        if self.kind not in ("finite", "infinite", "unknown"):
            raise ValueError(f"bad radius kind {self.kind!r}")

    @classmethod
    def finite(cls, r: float) -> "RadiusSpec":
        return cls("finite", float(r))

    @classmethod
    def infinite(cls) -> "RadiusSpec":
        return cls("infinite", math.inf)

    @classmethod
    def unknown(cls) -> "RadiusSpec":
        return cls("unknown", math.nan)

    @property
    def is_finite(self) -> bool:
        return self.kind == "finite"

    @property
    def is_infinite(self) -> bool:
        return self.kind == "infinite"

    @property
    def log_r(self) -> float:
        return math.log(self.r) if self.is_finite else math.inf

    def __str__(self) -> str:
        return {"finite": f"{self.r:g}", "infinite": "inf", "unknown": "unknown"}[self.kind]


@dataclass(frozen=True)
class ClassKStatus:
    kind: str  # "verified" | "violated" | "unknown"
    up_to: int | None = None
    witness: int | None = None
    reason: str = ""

    def __str__(self) -> str:
        if self.kind == "verified":
            return f"verified-up-to({self.up_to})"
        if self.kind == "violated":
            return f"violated({self.reason}, n={self.witness})"
        return "unknown"


@dataclass(frozen=True)
class MfHint:
    """Builder-supplied knowledge about ``M_f = lim m_f(t)`` (see family.classify_Mf)."""

    kind: str  # "finite" | "infinite"
    value: float = math.inf
    source: str = ""


@dataclass(frozen=True)
class EvalHooks:
    """Closed-form evaluators, all taking ``log t``.

    ``cumulants(log_t, r)`` returns ``(kappa_1, ..., kappa_r)`` of X_t (at least
    r = 2; kappa_1 = m_f, kappa_2 = sigma_f^2). ``log_abs`` optionally gives
    ``ln |f(z)|`` at complex z.
    """

    log_f: Callable[[float], float]
    cumulants: Callable[[float, int], tuple]
    max_cumulant: int = 2
    factorial_moment: Callable[[int, float], float] | None = None
    log_abs: Callable[[complex], float] | None = None
    valid: Callable[[float], bool] | None = None


def check_class_k(exact_coeffs=None, signs=None, *, polynomial_degree: int | None = None,
                  float_channel: bool = False) -> ClassKStatus:
    """Class K needs a_0 > 0, nonnegative coefficients and at least two nonzero ones."""
    if exact_coeffs is not None:
        seq = list(exact_coeffs)
        sgn = [(c > 0) - (c < 0) for c in seq]
    else:
        sgn = [int(s) for s in signs]
    if not sgn or sgn[0] <= 0:
        return ClassKStatus("violated", witness=0, reason="a_0 > 0 violated")
    for n, s in enumerate(sgn):
        if s < 0:
            return ClassKStatus("violated", witness=n, reason="negative coefficient")
    if sum(1 for s in sgn if s) < 2:
        return ClassKStatus("violated", witness=len(sgn) - 1, reason="constant function")
    return ClassKStatus("verified", up_to=len(sgn) - 1)


def _dense_support(lo: int, hi: int) -> np.ndarray:
    return np.arange(lo, hi + 1, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class GenFunction:
    """A power series ``f(z) = sum a_n z^n`` with nonnegative coefficients.

    ``log_coeffs(ns)`` is the coefficient oracle in log space (``-inf`` marks a
    zero coefficient) valid for ``ns <= coeff_limit``; ``support(lo, hi)`` lists
    the indices with ``a_n != 0`` in a range (dense by default).
    """

    name: str
    radius: RadiusSpec
    log_coeffs: Callable[[np.ndarray], np.ndarray]
    coeff_limit: int | None = None
    support: Callable[[int, int], np.ndarray] | None = None
    exact: Callable[[int], Any] | None = None
    hooks: EvalHooks | None = None
    degree: int | None = None  # set for polynomials
    class_k: ClassKStatus = ClassKStatus("unknown")
    mf_hint: MfHint | None = None
    analytic: Any = None  # DSL evaluator with values(log_t, order, dps)
    meta: dict = field(default_factory=dict)

    @property
    def is_polynomial(self) -> bool:
        return self.degree is not None

    def coeff(self, n: int) -> SignedLogValue:
        if self.exact is not None:
            try:
                v = self.exact(n)
            except (IndexError, KeyError):
                v = None
            if v is not None:
                return SignedLogValue.from_exact(v)
        self._check_limit(n)
        return SignedLogValue.from_log(float(self.log_coeffs(np.array([n]))[0]))

    def _check_limit(self, n: int) -> None:
        if self.coeff_limit is not None and n > self.coeff_limit:
            raise TruncationError(f"{self.name}: coefficient {n} beyond available order {self.coeff_limit}")

    def support_in(self, lo: int, hi: int) -> np.ndarray:
        if self.degree is not None:
            hi = min(hi, self.degree)
        if hi < lo:
            return np.zeros(0, dtype=np.int64)
        if self.support is not None:
            return np.asarray(self.support(lo, hi), dtype=np.int64)
        ns = _dense_support(lo, hi)
        if self.coeff_limit is not None and hi > self.coeff_limit:
            ns = ns[ns <= self.coeff_limit]
        lc = self.log_coeffs(ns)
        return ns[np.isfinite(lc)]

    def support_oracle(self, n: int) -> bool:
        return bool(self.support_in(n, n).size)

    def check_point(self, log_t: float) -> None:
        if math.isnan(log_t):
            raise DomainError("t is NaN")
        if self.radius.is_finite and log_t >= self.radius.log_r:
            raise DomainError(f"t = {math.exp(log_t):.17g} is not below the radius {self.radius.r:g}")


def as_log_t(t: float | None = None, log_t: float | None = None) -> float:
    if log_t is not None:
        return float(log_t)
    if t is None:
        raise ValueError("need t or log_t")
    if t < 0:
        raise DomainError("t must be nonnegative")
    return math.log(t) if t > 0 else NEG_INF


# ---------------------------------------------------------------------------
# coefficient-sum machinery


@dataclass
class TermWindow:
    """``log(a_n t^n)`` over the support indices that carry the mass at ``t``.

    ``q_end`` is the largest ratio between consecutive terms over the final
    run; the omitted tail of ``sum n^p a_n t^n`` is bounded geometrically from it.
    """

    log_t: float
    n: np.ndarray
    logw: np.ndarray
    complete: bool
    q_end: float

    @property
    def log_total(self) -> float:
        return logsumexp(self.logw)

    def log_sum(self, p: float = 0.0) -> float:
        if p == 0:
            return self.log_total
        with np.errstate(divide="ignore"):
            return logsumexp(self.logw + p * np.log(self.n.astype(float)))

    def tail_log(self, p: float = 0.0) -> float:
        """Log of an upper bound on the omitted part of ``sum n^p a_n t^n``."""
        if self.complete:
            return NEG_INF
        n_last = float(self.n[-1])
        gap = float(self.n[-1] - self.n[-2]) if self.n.size >= 2 else 1.0
        q = self.q_end * ((n_last + gap) / max(n_last, 1.0)) ** p
        if q >= 1:
            return math.inf
        if q <= 0:
            return NEG_INF
        last = self.logw[-1] + (p * math.log(n_last) if n_last > 0 else 0.0)
        return last + math.log(q / (1 - q))

    def rel_tail(self, p: float = 0.0) -> float:
        tl = self.tail_log(p)
        if tl == NEG_INF:
            return 0.0
        return math.exp(min(tl - self.log_sum(p), 700.0))


DEFAULT_MAX_TERMS = 40_000_000


def term_window(f: GenFunction, log_t: float, *, tol: float = 1e-15, p_max: float = 8.0,
                max_terms: int = DEFAULT_MAX_TERMS) -> TermWindow:
    """Scan the support upward until the remaining tail is provably negligible.

    Stops once the terms have dropped ``margin`` below the running maximum and
    the consecutive-term ratio over the final run stays below 1, so the tail is
    dominated by a geometric series (also with weights ``n^p``, ``p <= p_max``).
    """
    f.check_point(log_t)
    if log_t == NEG_INF:
        ns = f.support_in(0, 0)
        if ns.size == 0:
            raise EvaluationError("a_0 = 0: f(0) vanishes")
        return TermWindow(log_t, ns, f.log_coeffs(ns), True, 0.0)
    margin = 45.0 + p_max * 3.0
    pieces_n, pieces_w = [], []
    acc = LogAccumulator()
    lo = 0
    chunk = 512
    prev_tail = None
    scanned = 0
    while True:
        hi = lo + chunk - 1
        if f.degree is not None:
            hi = min(hi, f.degree)
        limit_hit = f.coeff_limit is not None and hi > f.coeff_limit
        if limit_hit:
            hi = f.coeff_limit
        ns = f.support_in(lo, hi)
        scanned += ns.size
        if ns.size:
            w = f.log_coeffs(ns) + ns * log_t
            pieces_n.append(ns)
            pieces_w.append(w)
            acc.add(w)
        done_poly = f.degree is not None and hi >= f.degree
        if done_poly:
            n = np.concatenate(pieces_n)
            return TermWindow(log_t, n, np.concatenate(pieces_w), True, 0.0)
        # tail test on the last run of terms seen so far
        if pieces_n:
            all_n = pieces_n[-1] if pieces_n[-1].size >= 2 or len(pieces_n) == 1 else np.concatenate(pieces_n[-2:])
            all_w = pieces_w[-1] if pieces_n[-1].size >= 2 or len(pieces_n) == 1 else np.concatenate(pieces_w[-2:])
            if all_n.size >= 2:
                run = min(32, all_n.size - 1)
                # the run covers at most the upper half of the scanned indices
                run = max(1, min(run, int(np.sum(all_n >= all_n[-1] // 2)) - 1))
                dw = np.diff(all_w[-(run + 1):])
                with np.errstate(over="ignore"):
                    q = float(np.exp(np.max(dw)))
                gap = float(all_n[-1] - all_n[-2])
                with np.errstate(over="ignore"):
                    q_p = q * ((all_n[-1] + gap) / max(all_n[-1], 1)) ** p_max
                below = all_w[-1] < acc.value - margin
                if below and q_p < 1:
                    window = TermWindow(log_t, np.concatenate(pieces_n), np.concatenate(pieces_w), False, q)
                    if window.rel_tail(p_max) <= tol:
                        return window
                prev_tail = (all_w[-1] - acc.value, q)
        if limit_hit:
            bound = math.inf
            if prev_tail is not None and prev_tail[1] < 1:
                bound = math.exp(prev_tail[0]) * prev_tail[1] / (1 - prev_tail[1])
            raise TruncationError(
                f"{f.name}: tail bound unattainable within available coefficients (n <= {f.coeff_limit})",
                bound,
            )
        lo = hi + 1
        if scanned > max_terms or lo > 1 << 62:
            raise TruncationError(f"{f.name}: more than {max_terms} terms needed at t={math.exp(log_t):.6g}")
        # sparse supports may jump ahead freely; dense scans are capped per chunk
        chunk = chunk * 2 if ns.size < chunk // 64 else min(chunk * 2, 1 << 22)


# ---------------------------------------------------------------------------
# pointwise evaluation


@dataclass(frozen=True)
class PointEval:
    """``ln f``, ``m_f``, ``sigma_f^2`` at one point with provenance."""

    log_t: float
    log_f: float
    mean: float
    var: float
    route: str
    tail_bound: float = 0.0

    @property
    def t(self) -> float:
        return math.exp(self.log_t)


def _mp_point(f: GenFunction, log_t: float, dps: int = 30) -> PointEval:
    """Analytic route; precision doubles until kappa_2 agrees at two precisions."""
    import mpmath

    prev = None
    while dps <= 1600:
        lf, k1, k2 = f.analytic.log_cumulants(log_t, dps)
        if prev is not None and abs(k2 - prev) <= 1e-10 * abs(k2):
            if k2 <= 0 or k1 <= 0:
                raise EvaluationError(f"{f.name}: nonpositive variance at log t = {log_t:.6g}")
            return PointEval(log_t, float(lf), float(k1), float(k2), "analytic")
        prev = k2
        dps *= 2
    raise EvaluationError(f"{f.name}: variance unresolved by cancellation at log t = {log_t:.6g}")


def point_eval(f: GenFunction, t: float | None = None, *, log_t: float | None = None,
               route: str = "auto", tol: float = 1e-15) -> PointEval:
    """``(ln f, m_f, sigma_f^2)`` at ``t`` via hooks, coefficient sums or the DSL evaluator."""
    lt = as_log_t(t, log_t)
    f.check_point(lt)
    if lt == NEG_INF:
        a0 = f.coeff(0)
        return PointEval(lt, a0.log_magnitude, 0.0, 0.0, "exact")
    routes = [route] if route != "auto" else ["hook", "series", "analytic"]
    last_err: Exception | None = None
    for r in routes:
        try:
            if r == "hook":
                if f.hooks is None or (f.hooks.valid is not None and not f.hooks.valid(lt)):
                    continue
                k = f.hooks.cumulants(lt, 2)
                lf = f.hooks.log_f(lt)
                pe = PointEval(lt, float(lf), float(k[0]), float(k[1]), "hook")
            elif r == "series":
                w = term_window(f, lt, tol=tol)
                pe = _series_point(w)
            elif r == "analytic":
                if f.analytic is None:
                    continue
                pe = _mp_point(f, lt)
            else:
                raise ValueError(f"unknown route {r!r}")
            if not (math.isfinite(pe.log_f) and math.isfinite(pe.mean) and math.isfinite(pe.var)):
                raise EvaluationError(f"{f.name}: non-finite value at log t = {lt:.6g} via {r}")
            return pe
        except EvaluationError as exc:
            last_err = exc
            continue
    if last_err is not None:
        raise last_err
    raise EvaluationError(f"{f.name}: no evaluation route available (route={route})")


def _series_point(w: TermWindow) -> PointEval:
    L = w.log_total
    p = np.exp(w.logw - L)
    n = w.n.astype(float)
    m = float(np.sum(p * n))
    var = float(np.sum(p * (n - m) ** 2))
    tail = max(w.rel_tail(0), w.rel_tail(2))
    return PointEval(w.log_t, L, m, var, "series", tail)


def eval_log_f(f: GenFunction, t: float | None = None, *, log_t: float | None = None,
               route: str = "auto") -> SignedLogValue:
    """``f(t)`` as a SignedLogValue (its log-magnitude is ``ln f(t)``)."""
    lt = as_log_t(t, log_t)
    if route == "auto" and f.hooks is not None:
        f.check_point(lt)
        if lt == NEG_INF:
            return f.coeff(0)
        if f.hooks.valid is None or f.hooks.valid(lt):
            v = f.hooks.log_f(lt)
            if math.isfinite(v):
                return SignedLogValue.from_log(v)
    if route in ("auto", "series"):
        try:
            w = term_window(f, lt)
            return SignedLogValue.from_log(w.log_total)
        except TruncationError:
            if route == "series" or f.analytic is None:
                raise
    if route == "hook":
        if f.hooks is None:
            raise EvaluationError(f"{f.name} has no hooks")
        return SignedLogValue.from_log(f.hooks.log_f(lt))
    return SignedLogValue.from_log(point_eval(f, log_t=lt, route="analytic").log_f)


def weighted_power_sum(f: GenFunction, p: float, t: float | None = None, *,
                       log_t: float | None = None) -> SignedLogValue:
    """``S_p(t) = sum_n n^p a_n t^n`` in log space (``S_0 = f(t)``)."""
    if p < 0:
        raise ValueError("p must be nonnegative")
    lt = as_log_t(t, log_t)
    w = term_window(f, lt, p_max=max(8.0, p))
    if w.tail_log(p) == math.inf:
        raise TruncationError(f"{f.name}: tail of S_{p} not geometrically bounded")
    if lt == NEG_INF:
        return f.coeff(0) if p == 0 else SignedLogValue(0, NEG_INF)
    return SignedLogValue.from_log(w.log_sum(p))


def rational_or_none(x) -> Fraction | None:
    return x if isinstance(x, (int, Fraction)) else None
