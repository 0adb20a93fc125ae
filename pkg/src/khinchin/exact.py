"""Exact integer/rational coefficient oracles and Stirling numbers."""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache

import numpy as np

_partitions = [1]
_bell_row = [1]  # last row of the Bell triangle
_bells = [1]


def partition_numbers(n_max: int) -> list[int]:
    """``p(0..n_max)`` by Euler's pentagonal-number recurrence."""
    p = _partitions
    while len(p) <= n_max:
        n = len(p)
        total = 0
        k = 1
        while True:
            g1 = k * (3 * k - 1) // 2
            if g1 > n:
                break
            sgn = 1 if k % 2 else -1
            total += sgn * p[n - g1]
            g2 = g1 + k
            if g2 <= n:
                total += sgn * p[n - g2]
            k += 1
        p.append(total)
    return p[: n_max + 1]


def bell_numbers(n_max: int) -> list[int]:
    """``B(0..n_max)`` from the Bell triangle."""
    global _bell_row
    row = _bell_row
    while len(_bells) <= n_max:
        new = [row[-1]]
        for x in row:
            new.append(new[-1] + x)
        row = new
        _bells.append(row[0])
    _bell_row = row
    return _bells[: n_max + 1]


def exact_coeff(name: str, n: int, N: int | None = None):
    """Exact coefficient ``a_n`` of a named family.

    ``partition`` -> p(n); ``bell`` -> the Bell number B(n) (the generating
    function ``e^{e^z-1}`` has coefficient ``B(n)/n!``); ``binomial`` ->
    C(N, n) for ``(1+z)^N``; ``negbinomial`` -> C(n+N-1, N-1) for
    ``(1-z)^{-N}``; ``exponential`` -> ``1/n!``.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if name == "partition":
        return partition_numbers(n)[n]
    if name == "bell":
        return bell_numbers(n)[n]
    if name == "binomial":
        if N is None:
            raise ValueError("binomial needs N")
        return math.comb(N, n)
    if name == "negbinomial":
        if N is None:
            raise ValueError("negbinomial needs N")
        return math.comb(n + N - 1, N - 1)
    if name == "exponential":
        return Fraction(1, math.factorial(n))
    raise ValueError(f"unknown family {name!r}")


_RADEMACHER_C = math.pi * math.sqrt(2.0 / 3.0)


def log_partition_asymptotic(n) -> np.ndarray:
    """``log p(n)`` from the leading Rademacher term.

    The dropped terms are relatively ``O(exp(-C sqrt(n)/2))``, below double
    rounding once ``n`` is a few hundred.
    """
    n = np.asarray(n, dtype=float)
    lam = np.sqrt(n - 1.0 / 24.0)
    x = _RADEMACHER_C * lam
    # d/dn [sinh(x)/lam] = (C cosh x / lam - sinh x / lam^2) / (2 lam)
    # = e^x/(4 lam^2) * (C (1+e^{-2x}) - (1-e^{-2x})/lam)
    e2 = np.exp(-2 * x)
    inner = _RADEMACHER_C * (1 + e2) - (1 - e2) / lam
    return x - np.log(4 * lam**2) + np.log(inner) - math.log(math.pi * math.sqrt(2.0))


class StirlingTable:
    """Second-kind Stirling numbers ``S(k, j)`` for ``k <= k_max`` (exact ints)."""

    def __init__(self, k_max: int):
        rows = [[1]]
        for k in range(1, k_max + 1):
            prev = rows[-1]
            row = [0] * (k + 1)
            for j in range(1, k + 1):
                a = prev[j] if j < len(prev) else 0
                row[j] = j * a + prev[j - 1]
            rows.append(row)
        self._rows = rows
        self.k_max = k_max

    def __call__(self, k: int, j: int) -> int:
        if j < 0 or j > k:
            return 0
        return self._rows[k][j]

    def row(self, k: int) -> list[int]:
        return list(self._rows[k])


@lru_cache(maxsize=1)
def stirling_table(k_max: int = 32) -> StirlingTable:
    return StirlingTable(k_max)


def stirling2(k: int, j: int) -> int:
    table = stirling_table()
    if k > table.k_max:
        return StirlingTable(k)(k, j)
    return table(k, j)


def stirling1_signed(k: int) -> list[int]:
    """Signed first-kind Stirling numbers ``s(k, j)``, j = 0..k (falling factorial coefficients)."""
    row = [1]
    for i in range(k):
        # x^{(i+1) falling} = x^{(i) falling} * (x - i)
        new = [0] * (len(row) + 1)
        for j, c in enumerate(row):
            new[j + 1] += c
            new[j] -= i * c
        row = new
    return row
