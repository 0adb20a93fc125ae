"""Finite-window estimates of gap statistics, clan criteria and order of growth.

Everything here is an *observed* quantity on a finite grid or support window;
none of it certifies a limit.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .family import KhinchinFamily, family
from .genfunc import EvaluationError, GenFunction, RadiusSpec

CLAN_THRESHOLD = 0.05
CLAN_TAIL = 8
AUX_BAND = 0.1


# --- grids ---------------------------------------------------------------


def default_log_grid(radius: RadiusSpec, steps: int | None = None) -> np.ndarray:
    """``log t`` grid: ``t_j = 2^j`` (j = 0..40) when entire, ``R(1 - 2^-j)`` (j = 1..30) otherwise."""
    if radius.is_infinite:
        j = np.arange(0, (steps or 41))
        return j * math.log(2.0)
    if radius.is_finite:
        j = np.arange(1, (steps or 30) + 1)
        return radius.log_r + np.log1p(-(2.0 ** -j.astype(float)))
    raise ValueError("radius unknown: supply an explicit grid")


def _window(k: int) -> int:
    return max(2, math.ceil(math.sqrt(k)))


# --- gaps ---------------------------------------------------------------


@dataclass(frozen=True)
class GapStats:
    support_indices: np.ndarray
    gap_observed: int
    gapbar_observed: int
    Gbar_observed: float
    window: int
    n_max: int
    label: str = "observed"


def gap_stats(f: GenFunction, n_max: int = 4096, window: int | None = None) -> GapStats:
    if f.coeff_limit is not None:
        n_max = min(n_max, f.coeff_limit)
    ns = f.support_in(0, n_max)
    if ns.size < 2:
        raise ValueError(f"{f.name}: fewer than 2 support points up to {n_max}")
    d = np.diff(ns)
    W = window or _window(d.size)
    tail_d = d[-W:]
    pos = ns[ns > 0]
    rat = pos[1:] / pos[:-1] if pos.size >= 2 else np.array([1.0])
    return GapStats(ns, int(d.max()), int(tail_d.max()), float(rat[-W:].max()), W, n_max)


# --- clans --------------------------------------------------------------


@dataclass
class ClanVerdict:
    name: str
    grid: np.ndarray
    ratio_series: np.ndarray
    L_series: np.ndarray
    quotient_series: np.ndarray
    mean_ratio_series: np.ndarray
    log_quotient_series: np.ndarray
    mgf_series: np.ndarray
    Rm_series: np.ndarray | None
    verdict: str
    limit_estimate: float | None
    conditional: bool = False
    trimmed: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def final_ratio(self) -> float:
        return float(self.ratio_series[-1])

    def rows(self):
        for i, t in enumerate(self.grid):
            yield {
                "t": float(t),
                "sigma_over_m": float(self.ratio_series[i]),
                "L_f": float(self.L_series[i]),
                "quotient": float(self.quotient_series[i]),
                "mean_ratio": float(self.mean_ratio_series[i]),
                "log_quotient": float(self.log_quotient_series[i]),
                "mgf": float(self.mgf_series[i]),
                "Rm": float(self.Rm_series[i]) if self.Rm_series is not None else math.nan,
            }


def log_mgf(fam: KhinchinFamily, lt: float, nu: float) -> float:
    """``K(nu) = ln f(t e^nu) - ln f(t)``, the cumulant generating function of X_t.

    The direct difference is used unless it would cancel; then ``m_f`` is
    integrated in ``log t``, or for ``nu`` below the grid resolution of
    ``log t`` the cumulant expansion is summed.
    """
    if lt + nu == lt or nu < 1e-10:
        h = fam.f.hooks
        if h is not None and h.max_cumulant >= 3:
            k = h.cumulants(lt, 3)
        else:
            pe = fam.point(log_t=lt)
            k = (pe.mean, pe.var, 0.0)
        return k[0] * nu + k[1] * nu**2 / 2 + k[2] * nu**3 / 6
    l1, l2 = fam.log_f(log_t=lt), fam.log_f(log_t=lt + nu)
    direct = l2 - l1
    if abs(direct) > 1e-7 * max(abs(l1), abs(l2)):
        return direct
    x, w = np.polynomial.legendre.leggauss(20)
    u = lt + nu * (x + 1) / 2
    return float(nu / 2 * sum(wi * fam.mean(log_t=float(ui)) for ui, wi in zip(u, w)))


def _strictly_decreasing(x: np.ndarray) -> bool:
    return bool(np.all(np.diff(x) < 0))


def clan_diagnose(fam, log_grid=None, *, threshold: float = CLAN_THRESHOLD, tail: int = CLAN_TAIL) -> ClanVerdict:
    """Evaluate the clan criteria along a grid approaching R and issue a labeled verdict.

    Verdict rule: clan-consistent iff sigma/m strictly decreases over the last
    ``tail`` grid points and ends below ``threshold`` (and, for finite R,
    (R - t) m_f(t) increases there). Auxiliary criteria that contradict the
    primary one make the verdict indeterminate.
    """
    fam = family(fam)
    R = fam.require_radius()
    lg = default_log_grid(R) if log_grid is None else np.asarray(log_grid, dtype=float)
    mf = fam.classify_Mf()
    aux = mf.kind == "infinite"
    notes = []
    if not aux:
        notes.append(f"M_f {mf}: log-quotient and mgf criteria omitted")
    rows, trimmed = [], []
    for lt in lg:
        try:
            st = fam.stats(log_t=float(lt))
        except EvaluationError as exc:
            trimmed.append((float(math.exp(lt)), str(exc)))
            continue
        m = st.mean
        mr = lq = mg = math.nan
        nu = math.log1p(1.0 / m)
        lt2 = lt + nu
        if aux and (R.is_infinite or lt2 < R.log_r):
            try:
                if lt2 == lt:
                    mr = 1.0 + st.var * nu / m
                else:
                    mr = fam.mean(log_t=lt2) / m
                lq = log_mgf(fam, lt, nu)
                # E exp((X - m) nu) with e^nu = 1 + 1/m
                mg = math.exp(lq - m * nu)
            except EvaluationError as exc:
                notes.append(f"auxiliary criteria failed at t={math.exp(lt):.6g}: {exc}")
        elif aux:
            notes.append(f"t(1+1/m) >= R at t={math.exp(lt):.6g}; auxiliary criteria omitted there")
        rm = None
        if R.is_finite:
            rm = -math.expm1(lt - R.log_r) * math.exp(R.log_r) * m
        rows.append((math.exp(lt), st.ratio, st.L_f, st.second_moment_quotient, mr, lq, mg, rm))
    if len(rows) < tail + 1:
        raise EvaluationError(f"{fam.name}: only {len(rows)} grid points evaluated ({len(trimmed)} trimmed)")
    arr = np.array([r[:7] for r in rows], dtype=float)
    Rm = np.array([r[7] for r in rows], dtype=float) if R.is_finite else None
    ratio = arr[:, 1]
    last = ratio[-tail:]
    primary_clan = _strictly_decreasing(last) and last[-1] < threshold
    if primary_clan and Rm is not None:
        primary_clan = _strictly_decreasing(-Rm[-tail:])
    aux_vals = [arr[-1, 4], arr[-1, 5], arr[-1, 6]]
    aux_ok = [abs(v - 1) < AUX_BAND for v in aux_vals if math.isfinite(v)]
    limit = None
    if primary_clan:
        verdict = "clan-consistent"
        if aux_ok and not all(aux_ok):
            verdict = "indeterminate"
            notes.append("sigma/m suggests a clan but an auxiliary criterion stays away from 1")
    else:
        d = np.diff(last)
        oscillating = np.any(d > 0) and np.any(d < 0)
        if last[-1] < threshold and oscillating:
            verdict = "indeterminate"
            notes.append("sigma/m small but not monotone over the final window")
        else:
            verdict = "nonclan-consistent"
            limit = float(last[-1]) if abs(last[-1] - last[-2]) < 0.05 * last[-1] else math.inf
            if np.all(d > 0):
                limit = math.inf if last[-1] > 2 * last[0] else float(last[-1])
    return ClanVerdict(fam.name, arr[:, 0], ratio, arr[:, 2], arr[:, 3], arr[:, 4], arr[:, 5], arr[:, 6], Rm,
                       verdict, limit, mf.kind == "unknown", trimmed, notes)


# --- weak clans ---------------------------------------------------------------


@dataclass
class WeakClanReport:
    name: str
    grid: np.ndarray
    ratio_series: np.ndarray
    L_series: np.ndarray
    running_min_ratio: np.ndarray
    running_min_L: np.ndarray
    tail_min_L: float  # min of L_f over the last ceil(sqrt(K)) grid points
    average_quadrature: np.ndarray
    average_closed_form: np.ndarray
    max_identity_error: float
    trimmed: list = field(default_factory=list)


def weak_clan_diagnose(fam, log_grid=None, *, c: float = 1.0) -> WeakClanReport:
    """Running minima of sigma/m and L_f, and the time average of L_f over [c, t].

    The average uses ``int_c^t L_f = t(1 - 1/m_f(t)) - c(1 - 1/m_f(c))`` as the
    closed form and adaptive quadrature (in log t) as the second route.
    """
    fam = family(fam)
    if not fam.radius.is_infinite:
        raise ValueError("weak clan diagnostics need an entire function")
    lg = default_log_grid(fam.radius) if log_grid is None else np.asarray(log_grid, dtype=float)
    lc = math.log(c)

    def L_at(u):
        st = fam.stats(log_t=u, check=False)
        return st.L_f

    mc = fam.mean(log_t=lc)
    rows, trimmed = [], []
    acc, prev = 0.0, lc
    for lt in lg:
        if lt <= lc:
            continue
        try:
            st = fam.stats(log_t=float(lt))
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", integrate.IntegrationWarning)
                piece, _ = integrate.quad(lambda u: L_at(u) * math.exp(u), prev, float(lt), epsrel=1e-11,
                                          epsabs=0, limit=500)
        except EvaluationError as exc:
            trimmed.append((math.exp(lt), str(exc)))
            continue
        acc += piece
        prev = float(lt)
        t = math.exp(lt)
        closed = t * (1 - 1 / st.mean) - c * (1 - 1 / mc)
        rows.append((t, st.ratio, st.L_f, acc / t, closed / t))
    arr = np.array(rows, dtype=float)
    err = float(np.max(np.abs(arr[:, 3] - arr[:, 4]) / np.abs(arr[:, 4])))
    return WeakClanReport(fam.name, arr[:, 0], arr[:, 1], arr[:, 2], np.minimum.accumulate(arr[:, 1]),
                          np.minimum.accumulate(arr[:, 2]), float(arr[-_window(len(arr)):, 2].min()),
                          arr[:, 3], arr[:, 4], err, trimmed)


# --- order ------------------------------------------------------------------


@dataclass
class OrderEstimate:
    name: str
    grid: np.ndarray
    loglog_trace: np.ndarray
    moment_trace: np.ndarray
    hadamard_indices: np.ndarray
    hadamard_trace: np.ndarray
    sigma2_over_m: np.ndarray
    summary: dict

    def rows(self):
        for i, t in enumerate(self.grid):
            yield {"t": float(t), "loglog": float(self.loglog_trace[i]), "moment": float(self.moment_trace[i]),
                   "sigma2_over_m": float(self.sigma2_over_m[i])}


def hadamard_ratios(f: GenFunction, n_max: int = 4096) -> tuple[np.ndarray, np.ndarray]:
    """``n ln n / ln(1/a_n)`` over support indices with ``a_n < 1``, as a windowed running max."""
    if f.coeff_limit is not None:
        n_max = min(n_max, f.coeff_limit)
    ns = f.support_in(2, n_max)
    la = f.log_coeffs(ns)
    ok = la < 0
    ns, la = ns[ok], la[ok]
    if ns.size == 0:
        return ns, np.zeros(0)
    r = ns * np.log(ns.astype(float)) / (-la)
    W = _window(r.size)
    out = np.array([r[max(0, i - W + 1): i + 1].max() for i in range(r.size)])
    return ns, out


def order_estimate(fam, log_grid=None, p: float = 1.0, n_max: int = 4096) -> OrderEstimate:
    fam = family(fam)
    if not fam.radius.is_infinite:
        raise ValueError("order estimates need an entire function")
    lg = default_log_grid(fam.radius) if log_grid is None else np.asarray(log_grid, dtype=float)
    ts, ll, mt, s2m = [], [], [], []
    for lt in lg:
        if lt <= 0:
            continue
        try:
            lf = fam.log_f(log_t=float(lt))
            pe = fam.point(log_t=float(lt))
            mom = pe.mean if p == 1 else fam.moment(p, log_t=float(lt))
        except EvaluationError:
            continue
        ts.append(math.exp(lt))
        ll.append(math.log(lf) / lt if lf > 0 else math.nan)
        mt.append(math.log(mom) / (p * lt) if p != 1 else math.log(mom) / lt)
        s2m.append(pe.var / pe.mean)
    ll, mt, s2m = np.array(ll), np.array(mt), np.array(s2m)
    hn, hr = hadamard_ratios(fam.f, n_max)
    W = _window(len(ts))
    summary = {}
    for key, tr in (("loglog", ll), ("moment", mt), ("hadamard", hr), ("sigma2_over_m", s2m)):
        fin = tr[np.isfinite(tr)]
        if fin.size:
            w = fin[-_window(fin.size):] if key == "hadamard" else fin[-W:]
            summary[key] = {"last": float(fin[-1]), "window_min": float(w.min()), "window_max": float(w.max()),
                            "spread": float(w.max() - w.min())}
    lasts = [summary[k]["last"] for k in ("loglog", "moment", "hadamard") if k in summary]
    summary["agreement_spread"] = float(max(lasts) - min(lasts)) if lasts else math.nan
    if s2m.size:
        summary["lower_order_sigma2_over_m"] = float(np.min(s2m[-W:]))
    return OrderEstimate(fam.name, np.array(ts), ll, mt, hn, hr, s2m, summary)
