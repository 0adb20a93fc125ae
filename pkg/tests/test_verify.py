import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from khinchin.canonical import CanonicalProductSpec, canonical_eval
from khinchin.family import family
from khinchin.verify import (
    CHECKS,
    check_boichuk_goldberg,
    check_canonical_sandwich,
    check_derivative_relation,
    check_flambda_series,
    check_quotient_bound,
    check_spacing_bounds,
    check_zero_free,
    default_corpus,
    known_zeros,
    run_suite,
    spacing_window,
)

POW2 = CanonicalProductSpec("geometric", c=1.0, r=2.0)
SQUARES = CanonicalProductSpec("power", a=2.0, c=1.0)


# --- saddle checks ---------------------------------------------------------------


def test_bg_equality_two_term():
    r = check_boichuk_goldberg("1+z", (0, 1), high_precision=True)
    assert r.passed
    assert abs(float(r.witness["t_star"]) - 1) < 1e-40
    assert abs(float(r.witness["slack"])) <= 1e-9


def test_bg_equality_cubic():
    r = check_boichuk_goldberg("1+z^3", (0, 3), high_precision=True)
    assert r.passed and abs(float(r.witness["lhs"]) - 9 / 4) < 1e-30
    assert abs(float(r.witness["slack"])) <= 1e-9


@pytest.mark.parametrize("k", [0, 1, 5, 20])
def test_bg_exp(k):
    r = check_boichuk_goldberg("exp", (k, k + 1))
    assert r.passed
    assert r.witness["lhs"] == pytest.approx(k + 0.5, rel=1e-10)


def test_bg_midpoint_beyond_Mf_skips():
    r = check_boichuk_goldberg("1+z^3", (3, 4))
    assert r.skipped and "M_f" in r.reason


def test_quotient_bound_lacunary():
    for j in range(1, 10):
        r = check_quotient_bound("lacunary", (2**j, 2 ** (j + 1)))
        assert r.passed and r.witness["rhs"] == pytest.approx(1 / 3)


@pytest.mark.parametrize("k", [1, 10, 1000])
def test_quotient_bound_exp(k):
    r = check_quotient_bound("exp", (k, k + 1))
    assert r.passed and r.witness["rhs"] == pytest.approx(1 / (2 * k + 1))
    assert r.witness["lhs"] == pytest.approx(1 / math.sqrt(k + 0.5), rel=1e-10)


def test_quotient_bound_needs_infinite_Mf():
    assert check_quotient_bound("1+z^3", (0, 3)).skipped


# --- zeros -----------------------------------------------------------------------------


def test_zero_free_equality_cases():
    for src, z in (("1+z", (1.0, math.pi)), ("1+z^2", (1.0, math.pi / 2))):
        r = check_zero_free(src, z, high_precision=True)
        assert r.passed and abs(float(r.witness["slack"])) <= 1e-9


def test_zero_free_canonical():
    r = check_zero_free("canon_pow2", (2.0, math.pi))
    assert r.passed and r.witness["sigma"] >= 0.5
    assert r.witness["sigma"] == pytest.approx(0.92, abs=0.01)
    assert r.witness["sigma"] ** 2 == pytest.approx(canonical_eval(POW2, 2.0).var, rel=1e-12)


def test_zero_free_rejects_nonzero():
    r = check_zero_free("1+z", (1.0, math.pi / 2))
    assert not r.passed and r.reason == "supplied point is not a zero"


def test_known_zeros():
    zs = known_zeros(family("canon_pow2"), 3)
    assert np.allclose(zs, [(2.0, math.pi), (4.0, math.pi), (8.0, math.pi)], rtol=1e-14)
    zs = known_zeros(family("1+z^3"))
    assert len(zs) == 3 and all(abs(r - 1) < 1e-12 for r, _ in zs)
    assert known_zeros(family("geom")) == []


def test_zero_free_all_cubic_roots():
    for z in known_zeros(family("1+z^3")):
        assert check_zero_free("1+z^3", z).passed


# --- canonical products ---------------------------------------------------------------


def test_sandwich_pow2_and_squares():
    assert check_canonical_sandwich(POW2).passed
    r = check_canonical_sandwich(SQUARES, [math.log(100)])
    assert r.passed and canonical_eval(SQUARES, 100).count == 10


def test_sandwich_at_two():
    e = canonical_eval(POW2, 2.0)
    assert e.var < e.mean < 2 * e.var + 1
    # the direct sum gives 0.846, quoted as about 0.83
    assert e.var == pytest.approx(0.83, abs=0.02)


def test_spacing_window():
    w = spacing_window(POW2, 5)
    assert w.lower == pytest.approx(2**4.5) and w.upper == pytest.approx(2**5.5)
    assert w.lower < w.upper


@pytest.mark.parametrize("n", range(2, 12))
def test_spacing_pow2(n):
    assert check_spacing_bounds(POW2, n).passed


def test_spacing_factorial_and_hayman():
    r = check_spacing_bounds(CanonicalProductSpec("factorial"), 6)
    # max(sqrt(b_5/b_6), sqrt(b_6/b_7)) = sqrt(1/6)
    assert r.passed and r.witness["upper_bound"] == pytest.approx(0.25 + 4 / math.sqrt(6))
    bands = [check_spacing_bounds(CanonicalProductSpec("expsq"), n).witness for n in (3, 4, 5)]
    # the upper bound closes in on 1/4 and the peak of sigma^2 sits just below it
    ub = [w["upper_bound"] for w in bands]
    assert all(b < a for a, b in zip(ub, ub[1:])) and ub[-1] - 0.25 < 0.05
    assert all(abs(w["var_max"] - 0.25) < 0.01 for w in bands)


def test_spacing_rejects_slow_zeros():
    r = check_spacing_bounds(SQUARES, 5)
    assert not r.passed and "doubling" in r.reason


# --- identities ---------------------------------------------------------------------------


def test_flambda_exp():
    r = check_flambda_series("exp", 4.0)
    assert r.passed and r.witness["lhs"] == pytest.approx(math.e, rel=1e-14)


def test_flambda_finite_support():
    r = check_flambda_series("1+z", 1.0)
    # m(1) = 1/2, so the shifted point is 3 and f(3)/f(1) = 2; the series stops at k = 1
    assert r.passed and r.witness["lhs"] == pytest.approx(2.0) and r.witness["terms"] == 2
    assert r.witness["tail_bound"] == 0


def test_flambda_precondition_fails_near_radius():
    r = check_flambda_series("geom", 0.9)
    assert not r.passed and "R" in r.reason


def test_derivative_relation_examples():
    r = check_derivative_relation("exp", 1, 3.0)
    assert r.passed and r.witness["lhs"] == pytest.approx(4.0)
    assert check_derivative_relation("partition", 2, 0.5).passed


def test_derivative_relation_two_term_excluded():
    with pytest.raises(ValueError):
        check_derivative_relation("1+z^3", 1, 1.0)


@settings(max_examples=15)
@given(t=st.floats(0.05, 20.0), p=st.sampled_from([1, 2]))
def test_derivative_relation_property(t, p):
    assert check_derivative_relation("exp", p, t).passed


# --- suite -----------------------------------------------------------------------------------


def test_suite_passes():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        reports = run_suite()
    failed = [r for r in reports if not r.passed and not r.skipped]
    assert not failed, failed
    assert {r.check_name for r in reports} == set(CHECKS)


def test_suite_empty_selection():
    assert run_suite(checks=[]) == []


def test_suite_skip_for_zero_free_geom():
    reports = run_suite({"geom": default_corpus()["geom"]}, ["zero_free"])
    assert len(reports) == 1 and reports[0].skipped and "never vanishes" in reports[0].reason


def test_suite_deterministic_order():
    a = [(r.check_name, r.subject) for r in run_suite(checks=["flambda_series", "quotient_bound"])]
    b = [(r.check_name, r.subject) for r in run_suite(checks=["flambda_series", "quotient_bound"])]
    assert a == b and a[0][0] == "flambda_series"


def test_suite_unknown_check():
    with pytest.raises(ValueError):
        run_suite(checks=["nope"])
