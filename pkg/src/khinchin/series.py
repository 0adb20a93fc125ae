"""Truncated power series with an exact rational channel and a log-space channel.

Every series carries its coefficients as signed logs (so nothing overflows).
When all inputs are rational and the operation keeps them rational, the exact
``Fraction`` coefficients are carried along as well; the log channel is then
derived from them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .logspace import NEG_INF, SignedLogValue, signed_logsumexp


class SeriesError(ValueError):
    pass


def _exact_to_log(coeffs: Sequence[Fraction]) -> tuple[np.ndarray, np.ndarray]:
    signs = np.zeros(len(coeffs), dtype=np.int8)
    logs = np.full(len(coeffs), NEG_INF)
    for i, c in enumerate(coeffs):
        v = SignedLogValue.from_exact(c)
        signs[i] = v.sign
        logs[i] = v.log_magnitude
    return signs, logs


@dataclass(frozen=True, eq=False)
class TruncatedSeries:
    """Coefficients of ``z^0 .. z^N``; index ``n`` holds the coefficient of ``z^n``."""

    signs: np.ndarray
    logs: np.ndarray
    exact: tuple[Fraction, ...] | None = None

    def __post_init__(self):
        if len(self.signs) != len(self.logs):
            raise SeriesError("sign and log arrays differ in length")
        if len(self.signs) < 2:
            raise SeriesError("truncation order must be at least 1")

    # construction -----------------------------------------------------
    @classmethod
    def from_exact(cls, coeffs: Sequence, order: int | None = None) -> "TruncatedSeries":
        c = [Fraction(x) for x in coeffs]
        if order is not None:
            c = (c + [Fraction(0)] * (order + 1))[: order + 1]
        signs, logs = _exact_to_log(c)
        return cls(signs, logs, tuple(c))

    @classmethod
    def from_floats(cls, coeffs: Sequence[float], order: int | None = None) -> "TruncatedSeries":
        c = [float(x) for x in coeffs]
        if order is not None:
            c = (c + [0.0] * (order + 1))[: order + 1]
        a = np.asarray(c)
        with np.errstate(divide="ignore"):
            logs = np.log(np.abs(a))
        return cls(np.sign(a).astype(np.int8), logs)

    @classmethod
    def from_signed_logs(cls, values: Sequence[SignedLogValue]) -> "TruncatedSeries":
        return cls(
            np.array([v.sign for v in values], dtype=np.int8),
            np.array([v.log_magnitude for v in values], dtype=float),
        )

    @classmethod
    def constant(cls, c, order: int) -> "TruncatedSeries":
        if isinstance(c, (int, Fraction)):
            return cls.from_exact([c], order)
        return cls.from_floats([c], order)

    @classmethod
    def monomial(cls, k: int, order: int, coeff=1) -> "TruncatedSeries":
        c = [0] * (order + 1)
        if k <= order:
            c[k] = coeff
        if isinstance(coeff, (int, Fraction)):
            return cls.from_exact(c)
        return cls.from_floats(c)

    # accessors --------------------------------------------------------
    @property
    def truncation_order(self) -> int:
        return len(self.signs) - 1

    @property
    def coeffs(self) -> tuple[SignedLogValue, ...]:
        return tuple(
            SignedLogValue.from_log(float(l), int(s)) if s else SignedLogValue(0, NEG_INF)
            for s, l in zip(self.signs, self.logs)
        )

    def __len__(self) -> int:
        return len(self.signs)

    def __getitem__(self, n: int) -> SignedLogValue:
        s = int(self.signs[n])
        return SignedLogValue.from_log(float(self.logs[n]), s) if s else SignedLogValue(0, NEG_INF)

    def to_floats(self) -> np.ndarray:
        return self.signs * np.exp(self.logs)

    @property
    def is_exact(self) -> bool:
        return self.exact is not None

    def valuation(self) -> int:
        """Index of the first nonzero coefficient (``N+1`` for the zero series)."""
        nz = np.flatnonzero(self.signs)
        return int(nz[0]) if nz.size else self.truncation_order + 1

    def degree(self) -> int:
        nz = np.flatnonzero(self.signs)
        return int(nz[-1]) if nz.size else -1

    def _check(self, other: "TruncatedSeries") -> None:
        if self.truncation_order != other.truncation_order:
            raise SeriesError(
                f"mismatched truncation orders {self.truncation_order} and {other.truncation_order}"
            )

    # arithmetic -------------------------------------------------------
    def __neg__(self) -> "TruncatedSeries":
        ex = tuple(-c for c in self.exact) if self.exact is not None else None
        return TruncatedSeries(-self.signs, self.logs.copy(), ex)

    def __add__(self, other: "TruncatedSeries") -> "TruncatedSeries":
        self._check(other)
        if self.exact is not None and other.exact is not None:
            return TruncatedSeries.from_exact([a + b for a, b in zip(self.exact, other.exact)])
        signs = np.zeros_like(self.signs)
        logs = np.full_like(self.logs, NEG_INF)
        for n in range(len(self)):
            s, l = signed_logsumexp(
                [self.signs[n], other.signs[n]], [self.logs[n], other.logs[n]]
            )
            signs[n], logs[n] = s, l
        return TruncatedSeries(signs, logs)

    def __sub__(self, other: "TruncatedSeries") -> "TruncatedSeries":
        return self + (-other)

    def __mul__(self, other: "TruncatedSeries") -> "TruncatedSeries":
        self._check(other)
        N = self.truncation_order
        if self.exact is not None and other.exact is not None:
            a, b = self.exact, other.exact
            nb = [k for k in range(N + 1) if b[k]]
            out = [Fraction(0)] * (N + 1)
            for i in range(N + 1):
                ai = a[i]
                if not ai:
                    continue
                for k in nb:
                    if i + k > N:
                        break
                    out[i + k] += ai * b[k]
            return TruncatedSeries.from_exact(out)
        signs = np.zeros(N + 1, dtype=np.int8)
        logs = np.full(N + 1, NEG_INF)
        for n in range(N + 1):
            s, l = signed_logsumexp(
                self.signs[: n + 1] * other.signs[n::-1], self.logs[: n + 1] + other.logs[n::-1]
            )
            signs[n], logs[n] = s, l
        return TruncatedSeries(signs, logs)

    def __truediv__(self, other: "TruncatedSeries") -> "TruncatedSeries":
        self._check(other)
        if other.signs[0] == 0:
            raise SeriesError("division by a series with zero constant term")
        N = self.truncation_order
        if self.exact is not None and other.exact is not None:
            a, b = self.exact, other.exact
            nb = [k for k in range(1, N + 1) if b[k]]
            q = [Fraction(0)] * (N + 1)
            b0 = b[0]
            for n in range(N + 1):
                acc = a[n]
                for k in nb:
                    if k > n:
                        break
                    acc -= b[k] * q[n - k]
                q[n] = acc / b0
            return TruncatedSeries.from_exact(q)
        signs = np.zeros(N + 1, dtype=np.int8)
        logs = np.full(N + 1, NEG_INF)
        for n in range(N + 1):
            # a_n - sum_{k=1}^n b_k q_{n-k}
            ts = np.concatenate(([self.signs[n]], -other.signs[1 : n + 1] * signs[n - 1 :: -1] if n else []))
            tl = np.concatenate(([self.logs[n]], other.logs[1 : n + 1] + logs[n - 1 :: -1] if n else []))
            s, l = signed_logsumexp(ts, tl)
            signs[n] = s * other.signs[0]
            logs[n] = l - other.logs[0] if s else NEG_INF
        return TruncatedSeries(signs, logs)

    def __pow__(self, k: int) -> "TruncatedSeries":
        if not isinstance(k, int):
            return self.pow_real(k)
        if k < 0:
            return TruncatedSeries.constant(1, self.truncation_order) / (self ** (-k))
        result = TruncatedSeries.constant(1, self.truncation_order)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def shift_scale(self, k: int) -> "TruncatedSeries":
        """Substitute ``z -> z^k``."""
        N = self.truncation_order
        if self.exact is not None:
            out = [Fraction(0)] * (N + 1)
            for n, c in enumerate(self.exact):
                if n * k > N:
                    break
                out[n * k] = c
            return TruncatedSeries.from_exact(out)
        signs = np.zeros(N + 1, dtype=np.int8)
        logs = np.full(N + 1, NEG_INF)
        m = N // k + 1
        signs[::k] = self.signs[:m]
        logs[::k] = self.logs[:m]
        return TruncatedSeries(signs, logs)

    def derivative_z(self) -> "TruncatedSeries":
        """``z f'(z)``: coefficient ``n a_n``."""
        if self.exact is not None:
            return TruncatedSeries.from_exact([n * c for n, c in enumerate(self.exact)])
        with np.errstate(divide="ignore"):
            return TruncatedSeries(self.signs.copy(), self.logs + np.log(np.arange(len(self))))

    # transcendental ---------------------------------------------------
    def exp(self) -> "TruncatedSeries":
        N = self.truncation_order
        if self.exact is not None and self.exact[0] == 0:
            h = self.exact
        else:
            h = None
        if h is not None:
            g = [Fraction(0)] * (N + 1)
            g[0] = Fraction(1)
            nz = [k for k in range(1, N + 1) if h[k]]
            for n in range(1, N + 1):
                acc = Fraction(0)
                for k in nz:
                    if k > n:
                        break
                    acc += k * h[k] * g[n - k]
                g[n] = acc / n
            return TruncatedSeries.from_exact(g)
        h0 = self[0].to_float()
        signs = np.zeros(N + 1, dtype=np.int8)
        logs = np.full(N + 1, NEG_INF)
        signs[0], logs[0] = 1, h0
        ks = np.arange(1, N + 1)
        with np.errstate(divide="ignore"):
            logk = np.log(ks)
        for n in range(1, N + 1):
            s, l = signed_logsumexp(
                self.signs[1 : n + 1] * signs[n - 1 :: -1],
                logk[:n] + self.logs[1 : n + 1] + logs[n - 1 :: -1],
            )
            signs[n], logs[n] = s, (l - math.log(n) if s else NEG_INF)
        return TruncatedSeries(signs, logs)

    def log(self) -> "TruncatedSeries":
        if self.signs[0] != 1:
            raise SeriesError("log requires a positive constant term")
        N = self.truncation_order
        if self.exact is not None and self.exact[0] == 1:
            h = self.exact
            g = [Fraction(0)] * (N + 1)
            for n in range(1, N + 1):
                acc = Fraction(0)
                for k in range(1, n):
                    if g[k] and h[n - k]:
                        acc += k * g[k] * h[n - k]
                g[n] = h[n] - acc / n
            return TruncatedSeries.from_exact(g)
        # log h = log h0 + log(h/h0)
        h0 = self[0]
        signs = np.zeros(N + 1, dtype=np.int8)
        logs = np.full(N + 1, NEG_INF)
        c0 = h0.log_magnitude
        if c0 != 0:
            signs[0], logs[0] = (1 if c0 > 0 else -1), math.log(abs(c0))
        hl = self.logs - h0.log_magnitude  # normalized so h_0 = 1
        ks = np.arange(N + 1)
        with np.errstate(divide="ignore"):
            logk = np.log(ks)
        for n in range(1, N + 1):
            # n g_n = n h_n - sum_{k=1}^{n-1} k g_k h_{n-k}
            ts = np.concatenate(([self.signs[n]], -signs[1:n] * self.signs[n - 1 : 0 : -1]))
            tl = np.concatenate(([math.log(n) + hl[n]], logk[1:n] + logs[1:n] + hl[n - 1 : 0 : -1]))
            s, l = signed_logsumexp(ts, tl)
            signs[n], logs[n] = s, (l - math.log(n) if s else NEG_INF)
        return TruncatedSeries(signs, logs)

    def pow_real(self, alpha) -> "TruncatedSeries":
        if isinstance(alpha, int):
            return self ** alpha
        if self.signs[0] != 1:
            raise SeriesError("real power requires a positive constant term")
        N = self.truncation_order
        if self.exact is not None and self.exact[0] == 1 and isinstance(alpha, Fraction):
            h = self.exact
            g = [Fraction(0)] * (N + 1)
            g[0] = Fraction(1)
            nz = [k for k in range(1, N + 1) if h[k]]
            for n in range(1, N + 1):
                acc = Fraction(0)
                for k in nz:
                    if k > n:
                        break
                    acc += ((alpha + 1) * k - n) * h[k] * g[n - k]
                g[n] = acc / n
            return TruncatedSeries.from_exact(g)
        alpha = float(alpha)
        h0 = self[0].log_magnitude
        hl = self.logs - h0
        signs = np.zeros(N + 1, dtype=np.int8)
        logs = np.full(N + 1, NEG_INF)
        signs[0], logs[0] = 1, alpha * h0
        for n in range(1, N + 1):
            k = np.arange(1, n + 1)
            w = (alpha + 1) * k - n
            with np.errstate(divide="ignore"):
                lw = np.log(np.abs(w))
            s, l = signed_logsumexp(
                np.sign(w) * self.signs[1 : n + 1] * signs[n - 1 :: -1],
                lw + hl[1 : n + 1] + logs[n - 1 :: -1],
            )
            signs[n], logs[n] = s, (l - math.log(n) if s else NEG_INF)
        return TruncatedSeries(signs, logs)


def series_combine(a: TruncatedSeries, b: TruncatedSeries, op: str) -> TruncatedSeries:
    """Coefficientwise ``add`` or truncated Cauchy ``mul`` of two order-N series."""
    if op == "add":
        return a + b
    if op == "mul":
        return a * b
    raise ValueError(f"unknown op {op!r}")


def series_transcend(h: TruncatedSeries, op: str, alpha=None) -> TruncatedSeries:
    """``exp``, ``log`` or ``pow_real`` (with exponent ``alpha``) of a series."""
    if op == "exp":
        return h.exp()
    if op == "log":
        return h.log()
    if op == "pow_real":
        if alpha is None:
            raise ValueError("pow_real needs alpha")
        return h.pow_real(alpha)
    raise ValueError(f"unknown op {op!r}")
