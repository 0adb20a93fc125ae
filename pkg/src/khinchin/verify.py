"""Constructive checks of finite inequalities and identities.

Each check evaluates both sides at an explicitly constructed point (a saddle
``t*`` with a prescribed mean, a known zero, a grid point) and returns a
CheckReport carrying the witness values.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import mpmath
import numpy as np

from . import builtins as bi
from .canonical import CanonicalProductSpec, canonical_eval
from .diagnostics import log_mgf
from .family import DegenerateFamilyWarning, KhinchinFamily, SaddleError, family
from .genfunc import EvaluationError, term_window

STD_SLACK = 1e-6
HP_SLACK = 1e-9
IDENTITY_RTOL = 1e-8
ZERO_CONFIRM = 1e-8
HP_DPS = 50


@dataclass
class CheckReport:
    check_name: str
    subject: str
    passed: bool
    witness: dict = field(default_factory=dict)
    tolerance_used: float = 0.0
    skipped: bool = False
    reason: str = ""

    def as_dict(self, decimal_strings: bool = False) -> dict:
        def enc(v):
            if isinstance(v, mpmath.mpf):
                return mpmath.nstr(v, 30) if decimal_strings else float(v)
            if isinstance(v, (np.floating, np.integer)):
                v = v.item()
            if isinstance(v, float) and decimal_strings:
                return repr(v)
            if isinstance(v, float) and not math.isfinite(v):
                return repr(v)
            return v

        return {
            "name": self.check_name,
            "subject": self.subject,
            "passed": self.passed,
            "skipped": self.skipped,
            "reason": self.reason,
            "witness": {k: enc(v) for k, v in self.witness.items()},
            "tolerance": self.tolerance_used,
        }


def _skip(name, subject, reason) -> CheckReport:
    return CheckReport(name, subject, True, {}, 0.0, True, reason)


@dataclass(frozen=True)
class SpacingWindow:
    n: int
    lower: float
    upper: float

    @staticmethod
    def phi(x):
        return x / (1 + x) ** 2

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError("empty spacing window")


# --- high precision helpers --------------------------------------------


def _hp_available(fam: KhinchinFamily) -> bool:
    f = fam.f
    return (f.is_polynomial and f.exact is not None) or f.analytic is not None


def _saddle(fam: KhinchinFamily, target: float, high_precision: bool):
    """(t*, m(t*), var(t*)) with ``m(t*) = target``; mpf values in high precision."""
    lt = fam.solve_log_t_for_mean(target)
    if not (high_precision and _hp_available(fam)):
        pe = fam.point(log_t=lt)
        return math.exp(lt), pe.mean, pe.var
    with mpmath.workdps(HP_DPS):
        tgt = mpmath.mpf(target)
        t = mpmath.findroot(lambda x: fam.stats_hp(x, HP_DPS)[0] - tgt, mpmath.mpf(math.exp(lt)))
        m, v = fam.stats_hp(t, HP_DPS)
        return t, m, v


# --- saddle checks --------------------------------------------------------


def check_boichuk_goldberg(fam, pair, *, high_precision: bool = False) -> CheckReport:
    """At ``m_f(t*) = (n_k + n_{k+1})/2``: ``sigma^2(t*) >= (n_{k+1} - n_k)^2 / 4``."""
    fam = family(fam)
    a, b = pair
    name = "boichuk_goldberg"
    target = (a + b) / 2
    mf = fam.classify_Mf()
    if mf.kind == "finite" and target >= mf.value:
        return _skip(name, fam.name, f"midpoint {target} >= M_f = {mf.value:g}")
    try:
        t, m, var = _saddle(fam, target, high_precision)
    except SaddleError as exc:
        return CheckReport(name, fam.name, False, {"pair": (a, b)}, 0.0, False, f"saddle unreachable: {exc}")
    rhs = (b - a) ** 2 / 4
    slack = var - rhs
    tol = (HP_SLACK if high_precision and _hp_available(fam) else STD_SLACK) * max(1.0, rhs)
    return CheckReport(name, fam.name, bool(slack >= -tol),
                       {"pair": (a, b), "t_star": t, "m_at_t_star": m, "lhs": var, "rhs": rhs, "slack": slack}, tol)


def check_quotient_bound(fam, pair) -> CheckReport:
    """At the same saddle: ``sigma/m >= (n_{k+1} - n_k)/(n_{k+1} + n_k)``."""
    fam = family(fam)
    a, b = pair
    name = "quotient_bound"
    if fam.classify_Mf().kind != "infinite":
        return _skip(name, fam.name, "needs M_f = infinity")
    try:
        t, m, var = _saddle(fam, (a + b) / 2, False)
    except SaddleError as exc:
        return CheckReport(name, fam.name, False, {"pair": (a, b)}, 0.0, False, f"saddle unreachable: {exc}")
    lhs = math.sqrt(var) / m
    rhs = (b - a) / (b + a)
    return CheckReport(name, fam.name, bool(lhs - rhs >= -STD_SLACK),
                       {"pair": (a, b), "t_star": t, "lhs": lhs, "rhs": rhs, "slack": lhs - rhs}, STD_SLACK)


# --- zeros -------------------------------------------------------------------


def known_zeros(fam, limit: int = 6) -> list[tuple[float, float]]:
    """Zeros ``(|z|, arg z)`` known in closed form: polynomial roots, canonical product zeros."""
    fam = family(fam)
    f = fam.f
    spec = f.meta.get("canonical")
    if spec is not None:
        k = np.arange(1, (spec.n_zeros or limit) + 1)[:limit]
        return [(float(b), math.pi) for b in spec.b(k)]
    if f.is_polynomial and f.exact is not None:
        c = [float(f.exact(n)) for n in range(f.degree + 1)]
        roots = np.roots(c[::-1])
        return sorted(((float(abs(r)), float(np.angle(r))) for r in roots), key=lambda x: (x[0], abs(x[1])))[:limit]
    return []


def abs_ratio_at(fam: KhinchinFamily, t: float, theta: float) -> float:
    """``|f(t e^{i theta})| / f(t)`` by hooks, exact sums or direct complex partial sums."""
    f = fam.f
    if f.is_polynomial and f.exact is not None:
        with mpmath.workdps(HP_DPS):
            z = mpmath.mpf(t) * mpmath.expjpi(mpmath.mpf(theta) / mpmath.pi)
            if abs(theta) == math.pi:
                z = -mpmath.mpf(t)
            elif abs(theta) == math.pi / 2:
                z = mpmath.mpc(0, math.copysign(1, theta)) * mpmath.mpf(t)
            cs = [f.exact(n) for n in range(f.degree + 1)]
            num = mpmath.fsum(mpmath.mpf(c.numerator) / c.denominator * z**n for n, c in enumerate(cs))
            den = mpmath.fsum(mpmath.mpf(c.numerator) / c.denominator * mpmath.mpf(t) ** n for n, c in enumerate(cs))
            return float(abs(num) / den)
    lt = math.log(t)
    if f.hooks is not None and f.hooks.log_abs is not None:
        la = f.hooks.log_abs(t * complex(math.cos(theta), math.sin(theta)))
        return math.exp(la - fam.log_f(log_t=lt)) if la > -math.inf else 0.0
    w = term_window(f, lt)
    p = np.exp(w.logw - w.log_total)
    return float(abs(np.sum(p * np.exp(1j * theta * w.n))))


def _mp_angle(theta: float):
    """``theta`` at working precision, snapping float rationals of pi (pi, pi/2, 2pi/3, ...) to exact."""
    for q in range(1, 13):
        p = round(theta * q / math.pi)
        if p and abs(theta - p * math.pi / q) < 4e-16 * max(1.0, theta):
            return mpmath.pi * p / q
    return mpmath.mpf(theta)


def check_zero_free(fam, zero, *, high_precision: bool = False) -> CheckReport:
    """At a zero ``t e^{i theta}``: ``|theta| sigma_f(t) >= pi/2``."""
    fam = family(fam)
    t, theta = zero
    name = "zero_free"
    ratio = abs_ratio_at(fam, t, theta)
    if not ratio < ZERO_CONFIRM:
        return CheckReport(name, fam.name, False, {"t": t, "theta": theta, "abs_ratio": ratio}, ZERO_CONFIRM,
                           False, "supplied point is not a zero")
    hp = high_precision and _hp_available(fam)
    if hp:
        with mpmath.workdps(HP_DPS):
            _, var = fam.stats_hp(t, HP_DPS)
            lhs = _mp_angle(abs(theta)) * mpmath.sqrt(var)
            rhs = mpmath.pi / 2
            slack = lhs - rhs
    else:
        var = fam.var(t)
        lhs = abs(theta) * math.sqrt(var)
        rhs = math.pi / 2
        slack = lhs - rhs
    tol = HP_SLACK if hp else STD_SLACK
    return CheckReport(name, fam.name, bool(slack >= -tol),
                       {"t": t, "theta": theta, "abs_ratio": ratio, "sigma": mpmath.sqrt(var) if hp else math.sqrt(var),
                        "lhs": lhs, "rhs": rhs, "slack": slack}, tol)


# --- canonical products -----------------------------------------------------------


def check_canonical_sandwich(spec: CanonicalProductSpec, log_grid=None) -> CheckReport:
    """``sigma^2 < m < 2 sigma^2 + N(t)`` on every grid point."""
    name = "canonical_sandwich"
    if spec.multiplicity != 1:
        return _skip(name, spec.describe(), "needs simple zeros")
    if log_grid is None:
        log_grid = np.linspace(math.log(1e-3), math.log(1e6), 50)
    worst_lo = worst_hi = math.inf
    where = (None, None)
    for lt in log_grid:
        e = canonical_eval(spec, log_t=float(lt))
        lo = e.mean - e.var
        hi = 2 * e.var + e.count - e.mean
        if lo < worst_lo:
            worst_lo, where = lo, (math.exp(lt), where[1])
        if hi < worst_hi:
            worst_hi, where = hi, (where[0], math.exp(lt))
    slack = 1e-12
    return CheckReport(name, spec.describe(), bool(worst_lo > -slack and worst_hi > -slack),
                       {"points": len(log_grid), "min_m_minus_var": worst_lo, "at_t_lo": where[0],
                        "min_upper_margin": worst_hi, "at_t_hi": where[1],
                        "strict": bool(worst_lo > 0 and worst_hi > 0)}, slack)


def spacing_window(spec: CanonicalProductSpec, n: int) -> SpacingWindow:
    lb = spec.log_b(np.array([n - 1, n, n + 1]))
    return SpacingWindow(n, math.exp((lb[0] + lb[1]) / 2), math.exp((lb[1] + lb[2]) / 2))


def check_spacing_bounds(spec: CanonicalProductSpec, n: int, samples: int = 16) -> CheckReport:
    """On ``I_n``: ``(1/4) min(...) <= sigma^2 <= 1/4 + 4 max(...)`` under ``b_{k+1} >= 2 b_k``."""
    name = "spacing_bounds"
    if n < 2:
        raise ValueError("n >= 2")
    kmax = spec.n_zeros or (n + 60)
    k = np.arange(1, kmax + 1)
    lb = spec.log_b(k)
    if np.any(np.diff(lb) < math.log(2) - 1e-12):
        return CheckReport(name, spec.describe(), False, {"n": n}, 0.0, False, "doubling condition violated")
    W = spacing_window(spec, n)
    lb3 = spec.log_b(np.array([n - 1, n, n + 1]))
    r1 = math.exp((lb3[1] - lb3[2]) / 2)  # sqrt(b_n / b_{n+1})
    r2 = math.exp((lb3[0] - lb3[1]) / 2)  # sqrt(b_{n-1} / b_n)
    upper = 0.25 + 4 * max(r1, r2)
    lower = 0.25 * min(r1, r2)
    lts = np.linspace(math.log(W.lower), math.log(W.upper), samples)
    v = np.array([canonical_eval(spec, log_t=float(x)).var for x in lts])
    tol = STD_SLACK
    ok = bool(np.all(v <= upper + tol) and np.all(v >= lower - tol))
    return CheckReport(name, spec.describe(), ok,
                       {"n": n, "I_lower": W.lower, "I_upper": W.upper, "var_max": float(v.max()),
                        "var_min": float(v.min()), "upper_bound": upper, "lower_bound": lower}, tol)


# --- identities -----------------------------------------------------------------


def check_flambda_series(fam, t: float, kmax: int = 200) -> CheckReport:
    """``f(t + t/m)/f(t) = sum_k E(X^(k falling)) / (k! m^k)``."""
    fam = family(fam)
    name = "flambda_series"
    lt = math.log(t)
    m = fam.mean(log_t=lt)
    nu = math.log1p(1 / m)
    R = fam.require_radius()
    if R.is_finite and lt + nu >= R.log_r:
        return CheckReport(name, fam.name, False, {"t": t, "m": m}, 0.0, False, "t(1 + 1/m) >= R")
    lhs = math.exp(log_mgf(fam, lt, nu))
    total, term, k = 1.0, 1.0, 0
    terms = [1.0]
    tail = math.inf
    deg = fam.f.degree
    logk = 0.0
    for k in range(1, kmax + 1):
        if deg is not None and k > deg:
            tail = 0.0
            break
        Fk = fam.factorial_moment(k, log_t=lt)
        logk += math.log(k)
        term = math.exp(math.log(Fk) - k * math.log(m) - logk) if Fk > 0 else 0.0
        total += term
        terms.append(term)
        if k >= 4 and term < 1e-17 * total:
            q = terms[-1] / terms[-2] if terms[-2] > 0 else 0.0
            if q < 0.5:
                tail = term * q / (1 - q)
                break
    rel = abs(lhs - total) / lhs
    tol = 1e-6
    return CheckReport(name, fam.name, bool(rel <= tol and tail <= tol * lhs),
                       {"t": t, "m": m, "lhs": lhs, "rhs": total, "terms": k, "tail_bound": tail, "rel_err": rel},
                       tol)


def check_derivative_relation(fam, p: float, t: float) -> CheckReport:
    """``E(W_t^p) = E(X_t^{p+1}) / m_f(t)`` by two independent sums."""
    fam = family(fam)
    name = "derivative_relation"
    f = fam.f
    if f.is_polynomial and f.support_in(0, f.degree).size < 3:
        raise ValueError(f"{f.name}: two-term f gives a degenerate W_t")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", (DegenerateFamilyWarning, UserWarning))
        W = fam.derivative_family()
    lhs = W.moment(p, t)
    rhs = fam.moment(p + 1, t) / fam.mean(t)
    rel = abs(lhs - rhs) / abs(rhs)
    tol = 1e-10
    return CheckReport(name, fam.name, bool(rel <= tol), {"p": p, "t": t, "lhs": lhs, "rhs": rhs, "rel_err": rel}, tol)


# --- suite -----------------------------------------------------------------------


def _poly(src):
    from .dsl import compile_source

    return KhinchinFamily(compile_source(src).genfunction)


def _lacunary_pairs(jmax=14):
    return [(0, 2)] + [(2**j, 2 ** (j + 1)) for j in range(1, jmax)]


def default_corpus() -> dict:
    """Named families used by the default suite (built lazily)."""
    return {
        "1+z": lambda: _poly("1+z"),
        "1+z^2": lambda: _poly("1+z^2"),
        "1+z^3": lambda: _poly("1+z^3"),
        "1+z+z^2": lambda: _poly("1+z+z^2"),
        "1+z+z^3": lambda: _poly("1+z+z^3"),
        "exp": lambda: KhinchinFamily(bi.exponential()),
        "partition": lambda: KhinchinFamily(bi.partition()),
        "bell": lambda: KhinchinFamily(bi.bell()),
        "geom": lambda: KhinchinFamily(bi.geometric()),
        "negbin3": lambda: KhinchinFamily(bi.negbinomial(3)),
        "lacunary": lambda: KhinchinFamily(bi.lacunary()),
        "canon_pow2": lambda: KhinchinFamily(bi.canonical_pow2()),
        "canon_squares": lambda: KhinchinFamily(bi.canonical_squares()),
        "polylog4": lambda: KhinchinFamily(bi.polylog4()),
    }


CHECKS = ("boichuk_goldberg", "quotient_bound", "zero_free", "canonical_sandwich", "spacing_bounds",
          "flambda_series", "derivative_relation")


def _cases(check: str, fams: dict):
    pow2 = CanonicalProductSpec("geometric", c=1.0, r=2.0)
    if check == "boichuk_goldberg":
        yield "1+z", lambda F: check_boichuk_goldberg(F, (0, 1), high_precision=True)
        yield "1+z^3", lambda F: check_boichuk_goldberg(F, (0, 3), high_precision=True)
        for k in (0, 1, 5, 20):
            yield "exp", lambda F, k=k: check_boichuk_goldberg(F, (k, k + 1))
        for k in (1, 10, 100):
            yield "partition", lambda F, k=k: check_boichuk_goldberg(F, (k, k + 1))
        for pr in _lacunary_pairs():
            yield "lacunary", lambda F, pr=pr: check_boichuk_goldberg(F, pr)
    elif check == "quotient_bound":
        for k in (1, 10, 1000):
            yield "exp", lambda F, k=k: check_quotient_bound(F, (k, k + 1))
        for pr in _lacunary_pairs()[1:]:
            yield "lacunary", lambda F, pr=pr: check_quotient_bound(F, pr)
        yield "partition", lambda F: check_quotient_bound(F, (10**6, 10**6 + 1))
    elif check == "zero_free":
        yield "1+z", lambda F: check_zero_free(F, (1.0, math.pi), high_precision=True)
        yield "1+z^2", lambda F: check_zero_free(F, (1.0, math.pi / 2), high_precision=True)
        for name in ("1+z^3", "1+z+z^2", "canon_pow2", "canon_squares", "geom"):
            yield name, None  # known zeros, or a skip
    elif check == "canonical_sandwich":
        yield "canon_pow2", lambda F: check_canonical_sandwich(pow2)
        yield "canon_squares", lambda F: check_canonical_sandwich(CanonicalProductSpec("power", a=2.0, c=1.0),
                                                                  np.linspace(math.log(1e-3), math.log(1e4), 20))
    elif check == "spacing_bounds":
        for n in range(2, 12):
            yield "canon_pow2", lambda F, n=n: check_spacing_bounds(pow2, n)
        yield "canon(factorial)", lambda F: check_spacing_bounds(CanonicalProductSpec("factorial"), 6)
        for n in (3, 4, 5):
            yield "canon(expsq)", lambda F, n=n: check_spacing_bounds(CanonicalProductSpec("expsq"), n)
    elif check == "flambda_series":
        yield "exp", lambda F: check_flambda_series(F, 4.0)
        yield "1+z", lambda F: check_flambda_series(F, 1.0)
        yield "1+z+z^2", lambda F: check_flambda_series(F, 1.0)
        yield "partition", lambda F: check_flambda_series(F, 0.5)
        yield "bell", lambda F: check_flambda_series(F, 1.0)
        yield "canon_pow2", lambda F: check_flambda_series(F, 2.0)
    elif check == "derivative_relation":
        for name, t in (("exp", 3.0), ("partition", 0.5), ("bell", 1.0), ("1+z+z^3", 1.0), ("1+z+z^2", 0.7),
                        ("geom", 0.5), ("negbin3", 0.3), ("lacunary", 0.9), ("canon_pow2", 2.0),
                        ("canon_squares", 5.0), ("polylog4", 0.5)):
            for p in (1, 2):
                yield name, lambda F, p=p, t=t: check_derivative_relation(F, p, t)


def run_suite(corpus: dict | None = None, checks=None) -> list[CheckReport]:
    """Run the selected checks over the corpus; failures are collected, never raised."""
    corpus = default_corpus() if corpus is None else corpus
    checks = CHECKS if checks is None else tuple(checks)
    built: dict = {}
    out: list[CheckReport] = []

    def get(name):
        if name not in built:
            built[name] = corpus[name]() if name in corpus else None
        return built[name]

    for check in checks:
        if check not in CHECKS:
            raise ValueError(f"unknown check {check!r}; known: {', '.join(CHECKS)}")
        for name, fn in _cases(check, corpus):
            if name in corpus or name.startswith("canon("):
                F = get(name) if name in corpus else None
            else:
                continue
            try:
                if check == "zero_free" and fn is None:
                    zs = known_zeros(F)
                    if not zs:
                        out.append(_skip(check, F.name, "no known zeros (f never vanishes)"))
                    for z in zs[:3]:
                        out.append(check_zero_free(F, z))
                    continue
                out.append(fn(F))
            except (EvaluationError, ValueError, ArithmeticError) as exc:
                out.append(CheckReport(check, name, False, {}, 0.0, False, f"error: {exc}"))
    return out
