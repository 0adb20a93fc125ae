"""Genus-0 canonical products ``prod_k (1 + z/b_k)^{mult_k}`` with negative zeros."""

from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import mpmath
import numpy as np

from .logspace import NEG_INF

RULES = ("list", "geometric", "power", "factorial", "expsq", "dexp", "custom")


class CanonicalError(ValueError):
    pass


@dataclass(frozen=True)
class CanonicalProductSpec:
    """Zero magnitudes ``b_k`` (k >= 1) given by a rule, with multiplicities.

    ``list``: explicit finite ``zeros``; ``geometric``: ``c*r^k``;
    ``power``: ``c*k^a``; ``factorial``: ``k!``; ``expsq``: ``e^{k^2}``;
    ``dexp``: ``e^{e^k}``; ``custom``: ``log_b(k)`` callable (convergence is then
    only checked heuristically).
    """

    rule: str
    c: float = 1.0
    r: float = 2.0
    a: float = 2.0
    zeros: tuple = ()
    multiplicity: int | tuple = 1
    log_b_custom: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.rule not in RULES:
            raise CanonicalError(f"unknown rule {self.rule!r}")
        if self.rule == "list":
            if not self.zeros:
                raise CanonicalError("list rule needs at least one zero")
            z = [float(x) for x in self.zeros]
            if any(x <= 0 for x in z) or any(b <= a for a, b in zip(z, z[1:])):
                raise CanonicalError("zeros must be positive and strictly increasing")
            if isinstance(self.multiplicity, tuple) and len(self.multiplicity) != len(self.zeros):
                raise CanonicalError("one multiplicity per zero")
        if self.rule == "geometric" and (self.r <= 1 or self.c <= 0):
            raise CanonicalError("geometric rule needs r > 1 and c > 0")
        if self.rule == "power" and self.c <= 0:
            raise CanonicalError("power rule needs c > 0")
        if self.rule == "custom" and self.log_b_custom is None:
            raise CanonicalError("custom rule needs log_b_custom")
        if isinstance(self.multiplicity, int) and self.multiplicity < 1:
            raise CanonicalError("multiplicities are positive integers")

    # --- rule evaluation ------------------------------------------------
    @property
    def is_finite(self) -> bool:
        return self.rule == "list"

    @property
    def n_zeros(self) -> int | None:
        return len(self.zeros) if self.is_finite else None

    def mult(self, k: np.ndarray) -> np.ndarray:
        k = np.asarray(k)
        if isinstance(self.multiplicity, tuple):
            return np.asarray(self.multiplicity, dtype=float)[k - 1]
        return np.full(k.shape, float(self.multiplicity))

    def log_b(self, k) -> np.ndarray:
        k = np.asarray(k, dtype=float)
        if self.rule == "list":
            return np.log(np.asarray(self.zeros, dtype=float))[k.astype(int) - 1]
        if self.rule == "geometric":
            return math.log(self.c) + k * math.log(self.r)
        if self.rule == "power":
            return math.log(self.c) + self.a * np.log(k)
        if self.rule == "factorial":
            from scipy.special import gammaln

            return gammaln(k + 1)
        if self.rule == "expsq":
            return k * k
        if self.rule == "dexp":
            return np.exp(k)
        return np.asarray(self.log_b_custom(k), dtype=float)

    def b(self, k):
        return np.exp(self.log_b(k))

    def describe(self) -> str:
        if self.rule == "list":
            return "canon(list, " + ", ".join(str(z) for z in self.zeros) + ")"
        if self.rule == "geometric":
            return f"canon(geometric, {self.c:g}, {self.r:g})"
        if self.rule == "power":
            return f"canon(power, {self.a:g}, {self.c:g})"
        return f"canon({self.rule})"

    def convergence(self) -> str:
        """``verified`` when sum mult_k/b_k provably converges, else ``unverified``."""
        if self.rule in ("list", "geometric", "factorial", "expsq", "dexp"):
            return "verified"
        if self.rule == "power":
            return "verified" if self.a > 1 else "divergent"
        # ratio/partial-sum heuristic over a window
        k = np.arange(1, 4001)
        terms = self.mult(k) * np.exp(-self.log_b(k))
        if np.any(np.diff(self.log_b(k)) <= 0):
            return "divergent"
        ratios = terms[1:] / terms[:-1]
        if np.all(ratios[-1000:] < 0.99):
            return "verified"
        # log-log slope of the terms; a decay faster than k^{-1.5} is accepted but flagged
        slope = np.polyfit(np.log(k[-2000:]), np.log(terms[-2000:]), 1)[0]
        return "unverified" if slope < -1.0 else "divergent"

    def counting(self, t: float) -> int:
        """``N(t) = #{k : b_k <= t}`` counted with multiplicity."""
        if t <= 0:
            return 0
        lt = math.log(t)
        if self.rule == "list":
            z = np.asarray(self.zeros, dtype=float)
            k = np.arange(1, len(z) + 1)
            return int(np.sum(self.mult(k)[z <= t]))
        if self.rule == "power":
            # b_k <= t  <=>  k <= (t/c)^{1/a}; guard against rounding at the boundary
            kmax = int(math.floor((t / self.c) ** (1.0 / self.a)))
            while kmax >= 1 and self.log_b(kmax) > lt + 1e-15:
                kmax -= 1
            while self.log_b(kmax + 1) <= lt + 1e-15:
                kmax += 1
            if isinstance(self.multiplicity, int):
                return kmax * self.multiplicity
            return int(np.sum(self.mult(np.arange(1, kmax + 1))))
        count = 0
        k = 1
        while float(self.log_b(k)) <= lt + 1e-15:
            count += int(self.mult(np.array([k]))[0])
            k += 1
        return count


@dataclass(frozen=True)
class CanonicalEval:
    log_f: float
    mean: float
    var: float
    count: int
    tail_bound: float
    kappa3: float = math.nan


_TERM_FUNCS = {
    # u = t/b_k ; per-zero contributions to log f, m, sigma^2, kappa_3
    "log": lambda u: np.log1p(u),
    "mean": lambda u: u / (1 + u),
    "var": lambda u: u / (1 + u) ** 2,
    "k3": lambda u: u * (1 - u) / (1 + u) ** 3,
}

_MP_TERM_FUNCS = {
    "log": lambda u: mpmath.log1p(u),
    "mean": lambda u: u / (1 + u),
    "var": lambda u: u / (1 + u) ** 2,
    "k3": lambda u: u * (1 - u) / (1 + u) ** 3,
}


# fn(w) = sum_j (-1)^{j+1} j^p w^j for the log, mean, var and kappa_3 terms
_TAYLOR_POWER = {"log": -1, "mean": 0, "var": 1, "k3": 2}


def _power_tail(spec: CanonicalProductSpec, log_t: float, k0: int) -> tuple[dict, float]:
    """Sum over k >= k0 for the power rule by Euler-Maclaurin (integral via w = t/b)."""
    a = spec.a
    mu = float(spec.multiplicity) if isinstance(spec.multiplicity, int) else None
    if mu is None:
        raise CanonicalError("power rule tail needs a constant multiplicity")
    with mpmath.workdps(30):
        v = mpmath.e ** (mpmath.mpf(log_t) - mpmath.log(spec.c))  # t/c
        w0 = v * mpmath.mpf(k0) ** (-a)
        out = {}
        err = 0.0
        for name, fn in _MP_TERM_FUNCS.items():
            # int_{k0}^inf fn(v x^{-a}) dx = (1/a) v^{1/a} int_0^{w0} fn(w) w^{-1/a-1} dw
            integrand = lambda w, fn=fn: fn(w) * w ** (-1 / mpmath.mpf(a) - 1)
            # near w = 0 the integrand behaves like w^{-1/a}: integrate the Taylor series there
            eps = min(w0, mpmath.mpf(1) / 4)
            ia = 1 / mpmath.mpf(a)
            p = _TAYLOR_POWER[name]
            head = mpmath.fsum((-1) ** (j + 1) * mpmath.mpf(j) ** p * eps ** (j - ia) / (j - ia) for j in range(1, 80))
            integral, qerr = (head, 0) if w0 <= eps else mpmath.quad(integrand, [eps, w0] if w0 <= 1 else [eps, 1, w0],
                                                                      error=True)
            if w0 > eps:
                integral += head
            integral *= v ** (1 / mpmath.mpf(a)) / a
            g = lambda x, fn=fn: fn(v * x ** (-a))
            d1 = mpmath.diff(g, k0, 1)
            d3 = mpmath.diff(g, k0, 3)
            d5 = mpmath.diff(g, k0, 5)
            total = integral + g(k0) / 2 - d1 / 12 + d3 / 720 - d5 / 30240
            out[name] = float(mu * total)
            err = max(err, float(mu * (abs(d5) / 30240 + abs(qerr) * v ** (1 / mpmath.mpf(a)) / a)))
    return out, err


def canonical_eval(spec: CanonicalProductSpec, t: float | None = None, *, log_t: float | None = None,
                   tol: float = 1e-13) -> CanonicalEval:
    """``(ln f, m_f, sigma_f^2, N(t))`` by partial sums plus a rule-based tail bound."""
    if log_t is None:
        if t is None or t < 0:
            raise CanonicalError("t must be nonnegative")
        if t == 0:
            return CanonicalEval(0.0, 0.0, 0.0, 0, 0.0, 0.0)
        log_t = math.log(t)
    return _canonical_eval(spec, float(log_t), tol)


@lru_cache(maxsize=8192)
def _canonical_eval(spec: CanonicalProductSpec, log_t: float, tol: float) -> CanonicalEval:
    if log_t == NEG_INF:
        return CanonicalEval(0.0, 0.0, 0.0, 0, 0.0, 0.0)
    t_val = math.exp(log_t) if log_t < 709 else math.inf
    sums = {k: 0.0 for k in _TERM_FUNCS}
    tail = 0.0

    if spec.rule == "list":
        k = np.arange(1, len(spec.zeros) + 1)
        u = np.exp(log_t - spec.log_b(k))
        w = spec.mult(k)
        for name, fn in _TERM_FUNCS.items():
            sums[name] = float(np.sum(w * fn(u)))
    elif spec.rule == "power":
        k0 = 1000
        k = np.arange(1, k0)
        u = np.exp(log_t - spec.log_b(k))
        w = spec.mult(k)
        for name, fn in _TERM_FUNCS.items():
            sums[name] = float(np.sum(w * fn(u)))
        tails, tail = _power_tail(spec, log_t, k0)
        for name in sums:
            sums[name] += tails[name]
    else:
        # rapidly growing rules: sum until the remaining terms are geometric and negligible
        chunk = 64
        start = 1
        while True:
            k = np.arange(start, start + chunk)
            lb = spec.log_b(k)
            u = np.exp(log_t - lb)
            w = spec.mult(k)
            for name, fn in _TERM_FUNCS.items():
                sums[name] += float(np.sum(w * fn(u)))
            # remaining terms bounded by sum_{j>last} mult t/b_j; ratio of consecutive 1/b
            q = float(np.exp(lb[-2] - lb[-1]))
            rest = float(w[-1] * u[-1]) * q / (1 - q) if q < 1 else math.inf
            if rest <= tol * max(sums["mean"], 1e-300) or (u[-1] == 0.0 and q < 1):
                tail = rest
                break
            start += chunk
            if start > 10_000_000:
                raise CanonicalError(f"tail bound unattainable (achieved {rest:.3e})")
            chunk = min(chunk * 2, 1 << 20)
    count = spec.counting(t_val) if t_val < math.inf else 0
    return CanonicalEval(sums["log"], sums["mean"], sums["var"], count, tail, sums["k3"])


def canonical_power_sums(spec: CanonicalProductSpec, m_max: int, dps: int) -> list:
    """``p_m = sum_k mult_k b_k^{-m}`` for m = 1..m_max, at ``dps`` digits."""
    out = []
    with mpmath.workdps(dps):
        if spec.rule == "power":
            mu = spec.multiplicity
            for m in range(1, m_max + 1):
                out.append(mu * mpmath.mpf(spec.c) ** (-m) * mpmath.zeta(spec.a * m))
            return out
        if spec.rule == "geometric" and isinstance(spec.multiplicity, int):
            for m in range(1, m_max + 1):
                q = mpmath.mpf(spec.r) ** (-m)
                out.append(spec.multiplicity * mpmath.mpf(spec.c) ** (-m) * q / (1 - q))
            return out
        if spec.rule == "list":
            ks = range(1, len(spec.zeros) + 1)
        else:
            ks = None
        for m in range(1, m_max + 1):
            total = mpmath.mpf(0)
            k = 1
            while True:
                if ks is not None and k > len(spec.zeros):
                    break
                lb = mpmath.mpf(float(spec.log_b(k))) if spec.rule != "list" else mpmath.log(mpmath.mpf(spec.zeros[k - 1]))
                term = float(spec.mult(np.array([k]))[0]) * mpmath.e ** (-m * lb)
                total += term
                if ks is None and term < total * mpmath.mpf(10) ** (-dps - 5):
                    break
                k += 1
            out.append(total)
    return out


def canonical_coefficients(spec: CanonicalProductSpec, n_max: int):
    """Taylor coefficients ``a_0..a_{n_max}``.

    Geometric rules with rational data use the closed q-product form and are
    exact; everything else goes through Newton's identities at a working
    precision raised until two precisions agree.
    """
    if spec.rule == "geometric" and isinstance(spec.multiplicity, int) and spec.multiplicity == 1:
        c = Fraction(spec.c).limit_denominator(10**12)
        r = Fraction(spec.r).limit_denominator(10**12)
        if float(c) == spec.c and float(r) == spec.r:
            q = 1 / r
            out = [Fraction(1)]
            prod = Fraction(1)
            for n in range(1, n_max + 1):
                prod *= 1 - q**n
                out.append(q ** (n * (n + 1) // 2) / (c**n * prod))
            return out, True
    if spec.rule == "list" and all(float(Fraction(z)) == float(z) for z in spec.zeros):
        # finite product, exact
        coeffs = [Fraction(1)]
        ks = range(1, len(spec.zeros) + 1)
        for k in ks:
            b = Fraction(spec.zeros[k - 1])
            mult = int(spec.mult(np.array([k]))[0])
            for _ in range(mult):
                new = coeffs + [Fraction(0)]
                for i in range(len(coeffs)):
                    new[i + 1] += coeffs[i] / b
                coeffs = new
        coeffs = coeffs[: n_max + 1] + [Fraction(0)] * max(0, n_max + 1 - len(coeffs))
        return coeffs, True

    if spec.rule == "power" and spec.a == 2.0 and spec.multiplicity == 1:
        # prod (1 + z/(c j^2)) = sinh(pi sqrt(z/c)) / (pi sqrt(z/c))
        with mpmath.workdps(30):
            x = mpmath.pi**2 / spec.c
            return [x**n / mpmath.factorial(2 * n + 1) for n in range(n_max + 1)], False

    if spec.rule in ("factorial", "expsq", "dexp"):
        # all terms positive, so the recurrence e_j += x_k e_{j-1} is stable; factors with
        # x_k / x_{n_max} below 1e-30 change no coefficient at working precision
        with mpmath.workdps(40):
            e = [mpmath.mpf(1)] + [mpmath.mpf(0)] * n_max
            lx_n = -float(spec.log_b(np.array([max(n_max, 1)]))[0])
            k = 1
            while True:
                lx = -float(spec.log_b(np.array([k]))[0])
                if k > n_max and lx - lx_n < -70:
                    break
                x = mpmath.e ** mpmath.mpf(lx)
                for _ in range(int(spec.mult(np.array([k]))[0])):
                    for j in range(min(k, n_max), 0, -1):
                        e[j] += x * e[j - 1]
                k += 1
        return e, False

    def newton(dps):
        p = canonical_power_sums(spec, n_max, dps)
        with mpmath.workdps(dps):
            e = [mpmath.mpf(1)]
            for n in range(1, n_max + 1):
                acc = mpmath.mpf(0)
                for i in range(1, n + 1):
                    term = e[n - i] * p[i - 1]
                    acc += term if i % 2 else -term
                e.append(acc / n)
        return e

    dps = 40 + 3 * n_max
    while True:
        lo = newton(dps)
        hi = newton(dps + 30)
        ok = all(
            h == 0 or abs((l - h) / h) < mpmath.mpf(10) ** -25 for l, h in zip(lo, hi)
        )
        if ok:
            return hi, False
        dps *= 2
        if dps > 20000:
            raise CanonicalError("canonical coefficients did not stabilize")
