"""Independent brute-force oracles used by the tests."""

from __future__ import annotations

import itertools
import math
from fractions import Fraction


def partitions_dp(n_max: int) -> list[int]:
    """p(n) by dynamic programming over parts (coin-change count)."""
    p = [1] + [0] * n_max
    for part in range(1, n_max + 1):
        for n in range(part, n_max + 1):
            p[n] += p[n - part]
    return p


def set_partitions(n: int) -> int:
    """Number of set partitions of {0..n-1} by restricted growth strings."""
    if n == 0:
        return 1
    count = 0
    for rgs in itertools.product(range(n), repeat=n - 1):
        s = (0,) + rgs
        if all(s[i] <= max(s[:i]) + 1 for i in range(1, n)):
            count += 1
    return count


def convolve(a, b, N):
    return [sum(Fraction(a[k]) * Fraction(b[n - k]) for k in range(n + 1)) for n in range(N + 1)]


def gen_binom(alpha: Fraction, n: int) -> Fraction:
    out = Fraction(1)
    for j in range(n):
        out *= (alpha - j) / (j + 1)
    return out


def poisson_raw_moment(k: int, t: float) -> float:
    """E X^k for Poisson(t) by direct summation in high precision."""
    import mpmath

    with mpmath.workdps(40):
        return float(mpmath.nsum(lambda n: n**k * mpmath.e ** (-t) * t**n / mpmath.factorial(n), [0, mpmath.inf]))


def direct_canonical(b, t):
    """(ln f, m, sigma^2) for prod (1 + z/b_k) by plain summation over a finite list."""
    lf = sum(math.log1p(t / x) for x in b)
    m = sum(t / (t + x) for x in b)
    v = sum(x * t / (t + x) ** 2 for x in b)
    return lf, m, v
