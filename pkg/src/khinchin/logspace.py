"""Signed log-space numbers and stable accumulation.

Magnitudes such as ``a_n t^n`` or ``f(t)`` overflow doubles long before the
quantities we care about (ratios, means) do, so they are carried as
``(sign, log|x|)`` pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

NEG_INF = -math.inf


@dataclass(frozen=True)
class SignedLogValue:
    """A real number stored as ``sign * exp(log_magnitude)``."""

    sign: int
    log_magnitude: float

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise ValueError(f"sign must be -1, 0 or +1, got {self.sign}")
        if (self.sign == 0) != (self.log_magnitude == NEG_INF):
            raise ValueError("sign == 0 exactly when log_magnitude == -inf")
        if math.isnan(self.log_magnitude):
            raise ValueError("log_magnitude is NaN")

    @classmethod
    def from_float(cls, x: float) -> "SignedLogValue":
        if x == 0:
            return ZERO
        return cls(1 if x > 0 else -1, math.log(abs(x)))

    @classmethod
    def from_log(cls, log_magnitude: float, sign: int = 1) -> "SignedLogValue":
        if log_magnitude == NEG_INF:
            return ZERO
        return cls(sign, float(log_magnitude))

    @classmethod
    def from_exact(cls, q) -> "SignedLogValue":
        """From an int or Fraction of any size, without going through float."""
        if q == 0:
            return ZERO
        sign = 1 if q > 0 else -1
        q = abs(q)
        num = getattr(q, "numerator", q)
        den = getattr(q, "denominator", 1)
        return cls(sign, math.log(num) - math.log(den))

    def to_float(self) -> float:
        if self.sign == 0:
            return 0.0
        return self.sign * math.exp(self.log_magnitude)

    def __float__(self) -> float:
        return self.to_float()

    def __neg__(self) -> "SignedLogValue":
        if self.sign == 0:
            return self
        return SignedLogValue(-self.sign, self.log_magnitude)

    def __mul__(self, other: "SignedLogValue") -> "SignedLogValue":
        if self.sign == 0 or other.sign == 0:
            return ZERO
        return SignedLogValue(self.sign * other.sign, self.log_magnitude + other.log_magnitude)

    def __truediv__(self, other: "SignedLogValue") -> "SignedLogValue":
        if other.sign == 0:
            raise ZeroDivisionError("division by a zero SignedLogValue")
        if self.sign == 0:
            return ZERO
        return SignedLogValue(self.sign * other.sign, self.log_magnitude - other.log_magnitude)

    def __add__(self, other: "SignedLogValue") -> "SignedLogValue":
        s, l = signed_logaddexp(self.sign, self.log_magnitude, other.sign, other.log_magnitude)
        return SignedLogValue.from_log(l, s)

    def __sub__(self, other: "SignedLogValue") -> "SignedLogValue":
        return self + (-other)

    def isclose(self, other: "SignedLogValue", rel_tol: float = 1e-12) -> bool:
        if self.sign != other.sign:
            return False
        if self.sign == 0:
            return True
        return abs(self.log_magnitude - other.log_magnitude) <= rel_tol


ZERO = SignedLogValue(0, NEG_INF)
ONE = SignedLogValue(1, 0.0)


def signed_logaddexp(s1: int, l1: float, s2: int, l2: float) -> tuple[int, float]:
    """Add ``s1*e^l1 + s2*e^l2``; returns ``(sign, log|sum|)``."""
    if s1 == 0:
        return s2, l2
    if s2 == 0:
        return s1, l1
    if l1 < l2:
        s1, l1, s2, l2 = s2, l2, s1, l1
    d = l2 - l1
    if s1 == s2:
        return s1, l1 + math.log1p(math.exp(d))
    if d == 0.0:
        return 0, NEG_INF
    return s1, l1 + math.log(-math.expm1(d))


def logsumexp(logs) -> float:
    """``log(sum(exp(logs)))`` for nonnegative summands given as logs."""
    a = np.asarray(logs, dtype=float)
    if a.size == 0:
        return NEG_INF
    m = float(np.max(a))
    if m == NEG_INF:
        return NEG_INF
    if m == math.inf:
        return math.inf
    return m + math.log(float(np.sum(np.exp(a - m))))


def signed_logsumexp(signs, logs) -> tuple[int, float]:
    """Signed version of :func:`logsumexp`; returns ``(sign, log|sum|)``."""
    s = np.asarray(signs, dtype=float)
    a = np.asarray(logs, dtype=float)
    mask = s != 0
    if not np.any(mask):
        return 0, NEG_INF
    s, a = s[mask], a[mask]
    m = float(np.max(a))
    total = float(np.sum(s * np.exp(a - m)))
    if total == 0.0:
        return 0, NEG_INF
    return (1 if total > 0 else -1), m + math.log(abs(total))


class LogAccumulator:
    """Running log-sum-exp over chunks of nonnegative terms.

    Keeps a running maximum so partial sums never overflow; each ``add`` is a
    vectorized chunk of log-terms.
    """

    def __init__(self):
        self.max = NEG_INF
        self._scaled = 0.0

    def add(self, logs) -> None:
        a = np.asarray(logs, dtype=float)
        if a.size == 0:
            return
        m = float(np.max(a))
        if m == NEG_INF:
            return
        if m > self.max:
            self._scaled = self._scaled * math.exp(self.max - m) if self.max > NEG_INF else 0.0
            self.max = m
        self._scaled += float(np.sum(np.exp(a - self.max)))

    @property
    def value(self) -> float:
        if self.max == NEG_INF:
            return NEG_INF
        return self.max + math.log(self._scaled)
