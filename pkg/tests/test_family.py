import math
import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from khinchin import builtins as bi
from khinchin.exact import stirling2, stirling_table
from khinchin.family import DegenerateFamilyWarning, KhinchinFamily, SaddleError, family
from khinchin.genfunc import DomainError, EvaluationError, NotInClassK

from oracles import poisson_raw_moment

# (name, upper end of a safe interior t range)
CORPUS = [("exp", 20.0), ("partition", 0.9), ("bell", 3.0), ("geom", 0.9), ("negbin3", 0.9),
          ("1+z+z^2", 5.0), ("canon_pow2", 20.0), ("polylog4", 0.95), ("1+z+z^3", 4.0)]


def fam_at(draw_name, frac):
    name, hi = draw_name
    return family(name), hi * frac


corpus = st.sampled_from(CORPUS)
fracs = st.floats(0.05, 1.0)


# --- pmf ---------------------------------------------------------------------------


def test_pmf_examples():
    F = family("exp")
    assert F.pmf(3, 5.0) == pytest.approx(5**3 * math.exp(-5) / 6, rel=1e-14)
    G = family("geom")
    assert all(G.pmf(n, 0.5) == pytest.approx(0.5 ** (n + 1), rel=1e-14) for n in range(30))
    for name, _ in CORPUS:
        assert family(name).pmf(0, 0.0) == 1.0
        assert family(name).pmf(3, 0.0) == 0.0


def test_pmf_out_of_range():
    with pytest.raises(DomainError):
        family("geom").pmf(1, 1.0)
    with pytest.raises(DomainError):
        family("geom").pmf(1, -0.1)


@given(corpus, fracs)
def test_normalization(c, frac):
    F, t = fam_at(c, frac)
    from khinchin.genfunc import term_window

    w = term_window(F.f, math.log(t))
    total = float(np.sum(np.exp(F.log_pmf(w.n, t))))
    assert total == pytest.approx(1.0, abs=1e-12 + w.rel_tail())


# --- stats -----------------------------------------------------------------------------


def test_stats_examples():
    B = family("bell").stats(1.0)
    assert (B.mean, B.var) == pytest.approx((math.e, 2 * math.e), rel=1e-14)
    S = family("1+z").stats(1.0)
    assert S.var == pytest.approx(0.25, rel=1e-15)
    G = family("geom").stats(0.5)
    assert (G.mean, G.var, G.L_f) == pytest.approx((1.0, 2.0, 2.0), rel=1e-13)


@given(corpus, fracs)
def test_quotient_identity(c, frac):
    st_ = fam_at(c, frac)[0].stats(fam_at(c, frac)[1])
    assert st_.second_moment_quotient == pytest.approx(1 / st_.mean + st_.L_f, rel=1e-8)
    assert st_.var > 0


@pytest.mark.parametrize("name,hi", CORPUS)
def test_mean_strictly_increasing(name, hi):
    F = family(name)
    ms = [F.mean(t) for t in np.linspace(hi / 200, hi, 200)]
    assert np.all(np.diff(ms) > 0)


@pytest.mark.parametrize("name,hi", [c for c in CORPUS if c[0] != "1+z+z^3"] + [("lacunary", 0.99)])
def test_size_biased_mean_increasing(name, hi):
    # E(X^2)/E(X) increases when f has at least three nonzero coefficients;
    # E(X^2)/E(X)^2 need not (it is 1 + 1/t for e^z)
    F = family(name)
    q = [F.moment(2, t) / F.mean(t) for t in np.linspace(hi / 50, hi, 50)]
    assert np.all(np.diff(q) > 0)


def test_size_biased_mean_constant_for_two_terms():
    F = family("1+z^3")
    assert all(F.moment(2, t) / F.mean(t) == pytest.approx(3.0, rel=1e-14) for t in (0.1, 1.0, 7.0))


# --- moments ---------------------------------------------------------------------------


@pytest.mark.parametrize("t", [0.3, 2.0, 7.5])
def test_poisson_moments(t):
    F = family("exp")
    assert F.moment(1, t) == pytest.approx(F.mean(t), rel=1e-12)
    assert F.moment(2, t) == pytest.approx(t * t + t, rel=1e-12)
    for k in range(0, 9):
        assert F.factorial_moment(k, t) == pytest.approx(t**k, rel=1e-12)
    for k in range(1, 7):
        stirling = sum(stirling2(k, j) * t**j for j in range(k + 1))
        assert F.moment(k, t) == pytest.approx(stirling, rel=1e-12)
        assert F.moment(k, t) == pytest.approx(poisson_raw_moment(k, t), rel=1e-12)


def test_geometric_second_moment():
    assert family("geom").moment(2, 0.5) == pytest.approx(3.0, rel=1e-13)


def test_factorial_conventions():
    for name, hi in CORPUS:
        F = family(name)
        t = hi / 2
        assert F.factorial_moment(0, t) == 1.0
        assert F.factorial_moment(1, t) == pytest.approx(F.mean(t), rel=1e-10)
        assert F.moment_via_stirling(1, t) == pytest.approx(F.mean(t), rel=1e-10)


def test_stirling_table():
    T = stirling_table(20)
    for k in range(1, 21):
        assert T.row(k)[k] == 1 and T.row(k)[1] == 1
        for j in range(2, k):
            assert T.row(k)[j] == j * T.row(k - 1)[j] + T.row(k - 1)[j - 1]


def test_partition_stirling_k3():
    F = family("partition")
    assert F.moment_via_stirling(3, 0.5) == pytest.approx(F.moment(3, 0.5), rel=1e-8)


@given(corpus, fracs, st.floats(1.0, 6.0))
def test_jensen(c, frac, beta):
    F, t = fam_at(c, frac)
    assert F.moment(beta, t) >= F.mean(t) ** beta * (1 - 1e-12)


@given(corpus, fracs, st.floats(1.01, 6.0), st.floats(1.01, 6.0))
def test_monotone_normalized_moments(c, frac, a, b):
    assume(abs(a - b) > 1e-6)
    a, b = sorted((a, b))
    F, t = fam_at(c, frac)
    m = F.mean(t)
    assert F.moment(a, t) / m**a <= F.moment(b, t) / m**b * (1 + 1e-12)


@given(corpus, fracs, st.floats(1.0001, 2.0))
def test_simic_sandwich(c, frac, lam):
    F, t = fam_at(c, frac)
    name, hi = c
    R = F.radius.r
    assume(lam * t < min(R, 10 * hi) * (0.999 if math.isfinite(R) else 1))
    if name == "bell":
        assume(lam * t < 6.0)
    q = F.log_f(lam * t) - F.log_f(t)
    L = math.log(lam)
    assert F.mean(t) * L <= q * (1 + 1e-12)
    assert q <= F.mean(lam * t) * L * (1 + 1e-12)


@pytest.mark.parametrize("name,hi", CORPUS)
def test_quotient_f_lambda_increasing(name, hi):
    F = family(name)
    lam = 1.5
    ts = np.linspace(hi / 40, hi / lam, 40)
    q = [F.log_f(lam * t) - F.log_f(t) for t in ts]
    assert np.all(np.diff(q) > 0)


@pytest.mark.parametrize("name,log_t", [("exp", 14 * math.log(2)), ("partition", math.log(0.999)),
                                        ("bell", math.log(50.0)), ("canon_pow2", 100.0)])
def test_factorial_moment_equivalence_trend(name, log_t):
    # canon_pow2 has m ~ log2(t), so the ratio 1 - O(k^2/m) needs a very large t
    F = family(name)
    for k in range(1, 5):
        r = F.factorial_moment(k, log_t=log_t) / F.moment(k, log_t=log_t)
        assert 0.9 <= r <= 1.0 + 1e-10


# --- M_f -------------------------------------------------------------------------------------


def test_classify_Mf():
    M = family("1+z^3").classify_Mf()
    assert (M.kind, M.value) == ("finite", 3)
    assert family("exp").classify_Mf().kind == "infinite"
    P = family("polylog4").classify_Mf()
    z3, z4 = float(mpmath.zeta(3)), float(mpmath.zeta(4))
    assert P.kind == "finite" and P.value == pytest.approx(z3 / (1 + z4), rel=1e-9)
    assert family("geom").classify_Mf().kind == "infinite"
    assert family("partition").classify_Mf().kind == "infinite"


# --- saddle ------------------------------------------------------------------------------------


def test_solve_examples():
    assert family("exp").solve_t_for_mean(5) == pytest.approx(5.0, rel=1e-12)
    assert family("geom").solve_t_for_mean(1) == pytest.approx(0.5, rel=1e-12)
    P = family("partition")
    t = P.solve_t_for_mean(10)
    closed = sum(k * t**k / (1 - t**k) for k in range(1, 2000))
    assert closed == pytest.approx(10, rel=1e-11)


def test_solve_beyond_Mf():
    with pytest.raises(SaddleError):
        family("1+z^3").solve_t_for_mean(3.0)
    with pytest.raises(SaddleError):
        family("polylog4").solve_t_for_mean(1.0)
    assert family("1+z^3").solve_t_for_mean(1.5) == pytest.approx(1.0, rel=1e-12)


# --- derivative family ------------------------------------------------------------------------


def test_derivative_family_examples():
    W = family("exp").derivative_family()
    for t in (0.5, 3.0, 10.0):
        assert W.mean(t) == pytest.approx(t + 1, rel=1e-12)
    W = family("1+z+z^2").derivative_family()
    assert W.pmf(0, 0.7) == 0.0
    assert W.pmf(1, 0.7) + W.pmf(2, 0.7) == pytest.approx(1.0, rel=1e-15)
    P = family("partition")
    assert P.derivative_family().mean(0.5) == pytest.approx(P.moment(2, 0.5) / P.moment(1, 0.5), rel=1e-10)


def test_derivative_family_degenerate():
    with pytest.warns(DegenerateFamilyWarning):
        family("1+z^3").derivative_family()


@pytest.mark.parametrize("name,t", [("exp", 3.0), ("bell", 1.5), ("geom", 0.6), ("partition", 0.4)])
def test_derivative_moment_identity(name, t):
    F = family(name)
    W = F.derivative_family()
    for p in (1, 2, 3, 0.5):
        assert W.moment(p, t) == pytest.approx(F.moment(p + 1, t) / F.mean(t), rel=1e-10)


def test_override():
    with pytest.raises(NotInClassK):
        family("1-z/2+z^2")
    with pytest.warns(UserWarning):
        from khinchin.dsl import CompileConfig, compile_source

        gf = compile_source("1-z/2+z^2", CompileConfig(allow_violations=True)).genfunction
        KhinchinFamily(gf, override=True)
