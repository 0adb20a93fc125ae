import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from khinchin.family import family
from khinchin.genfunc import TruncationError
from khinchin.sampler import concentration_test, empirical_tv, sample


def test_t_zero_all_zero():
    b = sample("exp", 0.0, 1000, seed=1)
    assert np.all(b.samples == 0) and b.truncation_tail_mass == 0


def test_geometric_p0():
    n = 20000
    b = sample("geom", 0.5, n, seed=2)
    assert abs(np.mean(b.samples == 0) - 0.5) < 3 * math.sqrt(0.25 / n)
    assert b.truncation_tail_mass < 1e-12


def test_poisson_mean():
    n = 20000
    b = sample("exp", 5.0, n, seed=3)
    assert abs(b.samples.mean() - 5) < 3 * math.sqrt(5 / n)
    assert b.algorithm == "PCG64" and b.samples.dtype.kind == "i"


def test_determinism():
    a = sample("partition", 0.9, 5000, seed=42).samples
    b = sample("partition", 0.9, 5000, seed=42).samples
    c = sample("partition", 0.9, 5000, seed=43).samples
    assert a.tobytes() == b.tobytes() and a.tobytes() != c.tobytes()


def test_injected_generator():
    rng = np.random.Generator(np.random.PCG64(7))
    a = sample("exp", 2.0, 100, seed=rng).samples
    b = sample("exp", 2.0, 100, seed=7).samples
    assert np.array_equal(a, b)


def test_support_respected():
    b = sample("lacunary", 0.99, 5000, seed=4)
    vals = set(b.samples.tolist())
    assert all(v == 0 or (v & (v - 1)) == 0 for v in vals)
    b = sample("1+z^3", 1.0, 2000, seed=5)
    assert set(b.samples.tolist()) <= {0, 3}


def test_tv_exp():
    assert empirical_tv("exp", 5.0, 100_000, seed=0) < 0.01


def test_tv_two_point():
    assert empirical_tv("1+z", 1.0, 100_000, seed=0) < 0.005


def test_tv_empty_batch():
    with pytest.raises(ValueError, match="empty batch"):
        empirical_tv("exp", 5.0, 0)
    with pytest.raises(ValueError, match="empty batch"):
        concentration_test("exp", [1.0], 0.1, 0)


def test_untruncatable_tail():
    with pytest.raises(TruncationError):
        sample("bell", 800.0, 10)


def test_concentration_partition_decreases():
    r = concentration_test("partition", [0.99, 0.999], 0.1, 20_000, seed=0)
    assert r.exceedances[1] < r.exceedances[0]
    assert r.consistent


def test_concentration_geometric_stays():
    r = concentration_test("geom", [0.9, 0.99, 0.999, 0.9999], 0.5, 20_000, seed=0)
    assert np.all(r.exceedances > 0.2) and r.consistent


def test_concentration_exp_large_t():
    r = concentration_test("exp", [1e4], 0.1, 20_000, seed=0)
    assert r.rows[0].exceedance < 0.01 and r.rows[0].chebyshev == pytest.approx(0.01)


def test_concentration_reproducible():
    a = concentration_test("partition", [0.9, 0.99], 0.2, 5000, seed=9)
    b = concentration_test("partition", [0.9, 0.99], 0.2, 5000, seed=9)
    assert a == b


@settings(max_examples=10)
@given(t=st.floats(0.05, 30.0), eps=st.floats(0.05, 1.0), seed=st.integers(0, 2**32))
def test_chebyshev_consistency(t, eps, seed):
    assert concentration_test("exp", [t], eps, 2000, seed=seed).consistent
