import math
import warnings

import numpy as np
import pytest

from khinchin import builtins as bi
from khinchin.diagnostics import (
    clan_diagnose,
    default_log_grid,
    gap_stats,
    order_estimate,
    weak_clan_diagnose,
)
from khinchin.family import family
from khinchin.genfunc import RadiusSpec

ZETA2 = math.pi**2 / 6


def test_default_grids():
    g = np.exp(default_log_grid(RadiusSpec.infinite()))
    assert g.size == 41 and g[0] == 1 and g[-1] == pytest.approx(2.0**40)
    g = np.exp(default_log_grid(RadiusSpec.finite(1.0)))
    assert g.size == 30 and g[0] == pytest.approx(0.5) and g[-1] == pytest.approx(1 - 2.0**-30)
    with pytest.raises(ValueError):
        default_log_grid(RadiusSpec.unknown())


# --- gaps ------------------------------------------------------------------


def test_gap_exp():
    g = gap_stats(bi.exponential())
    assert g.gap_observed == 1 and g.gapbar_observed == 1
    assert g.Gbar_observed >= 1 and g.Gbar_observed == pytest.approx(1.0, abs=1e-3)


def test_gap_lacunary():
    g = gap_stats(bi.lacunary(), n_max=2**20)
    assert g.Gbar_observed == 2.0
    assert g.gap_observed >= g.gapbar_observed >= 1


def test_gap_series_ratio_grows():
    f = bi.borel_gap()
    vals = [gap_stats(f, n_max=N).Gbar_observed for N in (10**3, 10**6, 10**9, 10**12)]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_gap_needs_two_points():
    with pytest.raises(ValueError):
        gap_stats(bi.lacunary(), n_max=0)


# --- clans -----------------------------------------------------------------------------


def test_partition_clan():
    v = clan_diagnose(family("partition"))
    assert v.verdict == "clan-consistent"
    st = family("partition").stats(0.999)
    assert st.ratio == pytest.approx(math.sqrt(2 * 0.001 / ZETA2), rel=0.02)
    assert round(st.ratio, 3) == 0.035
    # finite radius: (R - t) m_f(t) increases
    assert np.all(np.diff(v.Rm_series) > 0)


def test_geometric_nonclan():
    v = clan_diagnose(family("geom"))
    assert v.verdict == "nonclan-consistent"
    assert v.limit_estimate == pytest.approx(1.0, rel=1e-3)


def test_log_nonclan_diverges():
    v = clan_diagnose(family("1+log(1/(1-z))"))
    assert v.verdict == "nonclan-consistent"
    tail = v.ratio_series[-8:]
    assert np.all(np.diff(tail) > 0) and tail[-1] > 2


@pytest.mark.parametrize("name,expected", [("exp", "clan-consistent"), ("bell", "clan-consistent"),
                                           ("1+z^3", "clan-consistent"), ("canon_pow2", "clan-consistent"),
                                           ("1/(1-z)^3", "nonclan-consistent"), ("lacunary", "nonclan-consistent")])
def test_clan_corpus(name, expected):
    assert clan_diagnose(family(name)).verdict == expected


def test_negbin_limit():
    v = clan_diagnose(family("negbin3"))
    assert v.limit_estimate == pytest.approx(1 / math.sqrt(3), rel=1e-3)


def test_criteria_consistent_for_clans():
    v = clan_diagnose(family("exp"))
    # every criterion tends to 1 together with sigma/m -> 0
    for s in (v.quotient_series, v.mean_ratio_series, v.log_quotient_series, v.mgf_series):
        assert abs(s[-1] - 1) < 1e-5
    assert np.all(np.abs(v.quotient_series - (1 / np.exp(np.log(v.grid)) + v.L_series)) < 1e-8 * v.quotient_series)


def test_aux_omitted_for_finite_Mf():
    v = clan_diagnose(family("1+z^3"))
    assert np.all(np.isnan(v.log_quotient_series))
    assert any("omitted" in n for n in v.notes)


@pytest.mark.parametrize("src", ["bell()*exp(z)", "partition()^2", "exp(z)^2", "exp(z^2)", "D(exp(z))",
                                 "exp(exp(z)-1)", "partition()*exp(z)"])
def test_closure_spot_checks(src):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert clan_diagnose(family(src)).verdict == "clan-consistent"


def test_trimmed_points_are_reported():
    v = clan_diagnose(family("bell"))
    assert v.trimmed and all(t > 500 for t, _ in v.trimmed)
    assert v.verdict == "clan-consistent"


# --- weak clans -----------------------------------------------------------------------------


def test_weak_clan_exp():
    r = weak_clan_diagnose(family("exp"))
    assert np.allclose(r.L_series, 1.0, rtol=1e-14)
    assert r.max_identity_error < 1e-6


def test_weak_clan_time_average_bell():
    r = weak_clan_diagnose(family("bell"))
    assert r.max_identity_error < 1e-6
    assert np.allclose(r.average_quadrature, r.average_closed_form, rtol=1e-6, atol=1e-9)


def test_weak_clan_gap_series():
    r = weak_clan_diagnose(family("gapseries"))
    assert abs(r.tail_min_L - 1) < 1e-3
    # sigma/m oscillates: near-zero between gaps, spikes at each new term
    d = np.diff(r.ratio_series)
    assert np.sum(d > 0) >= 3 and np.sum(d < 0) >= 3
    assert r.ratio_series[14] > 0.3 and r.ratio_series[13] < 1e-9


def test_weak_clan_needs_entire():
    with pytest.raises(ValueError):
        weak_clan_diagnose(family("geom"))


# --- order ---------------------------------------------------------------------------------------


def test_order_exp():
    o = order_estimate(family("exp"))
    assert np.max(np.abs(o.loglog_trace[1:] - 1)) < 1e-14
    assert abs(o.moment_trace[-1] - 1) < 1e-10
    # n log n / log(1/a_n) = 1 / (1 - 1/log n) + o(1)
    assert abs(o.hadamard_trace[-1] - 1 / (1 - 1 / math.log(4096))) < 0.02


def test_order_exp_z2():
    o = order_estimate(family("exp(z^2)"))
    assert abs(o.loglog_trace[-1] - 2) < 0.05


def test_order_gap_series():
    o = order_estimate(family("gapseries"))
    assert 0.4 <= o.summary["hadamard"]["last"] <= 0.6


def test_order_polynomial():
    o = order_estimate(family("1+z+z^3"))
    ll = o.loglog_trace[np.isfinite(o.loglog_trace)]
    assert ll[-1] < 0.2 and np.all(np.diff(ll[-10:]) < 0)


@pytest.mark.parametrize("name,rho", [("exp", 1.0), ("canon_squares", 0.5)])
def test_sigma2_over_m_sandwich(name, rho):
    o = order_estimate(family(name))
    s = o.sigma2_over_m[np.isfinite(o.sigma2_over_m)]
    tail = s[len(s) // 2:]
    assert tail.min() - 0.1 <= rho <= tail.max() + 0.1
