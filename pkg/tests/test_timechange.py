import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from voltail.cev import CevParams
from voltail.montecarlo import (McConfig, compose_time_change, expectation, simulate_cir_and_integral,
                                simulate_exponential_functional, tail_prob)
from voltail.timechange import (CirParams, CriticalMoment, cev_moment_correspondence, cir_mgf_integrated,
                                cir_mgf_linearized, critical_lambda, critical_lambda_dense, digital_tail_slope,
                                riccati_blowup_time, sabr_clock_gaussian_bounds)

CIR = CirParams(2.0, 0.04, 0.5, 0.04)


@pytest.fixture(scope="module")
def cm():
    return critical_lambda(CIR, 1.0)


def test_mgf_at_zero_is_one():
    r = cir_mgf_integrated(CIR, 0.0, 1.0)
    assert r.value == 1.0 and not r.exploded


def test_nearly_deterministic_clock():
    p = CirParams(2.0, 0.04, 1e-6, 0.09)
    for lam in (0.5, 3.0):
        r = cir_mgf_integrated(p, lam, 1.0)
        assert r.value == pytest.approx(math.exp(lam * p.mean_integral(1.0)), rel=1e-4)


def test_mgf_matches_linearised_oracle():
    for lam in (1.0, 10.0, 35.0):
        assert cir_mgf_integrated(CIR, lam, 1.0).value == pytest.approx(cir_mgf_linearized(CIR, lam, 1.0), rel=1e-8)


def test_critical_lambda_against_dense_oracle(cm):
    assert cm.finite
    assert cm.lambda_star == pytest.approx(critical_lambda_dense(CIR, 1.0), rel=1e-5)
    lo, hi = cm.bracket
    assert not cir_mgf_integrated(CIR, lo, 1.0).exploded
    assert cir_mgf_integrated(CIR, hi, 1.0).exploded


def test_blowup_time_closed_form(cm):
    # at lambda*(T) the Riccati solution blows up exactly at T
    assert riccati_blowup_time(CIR, cm.lambda_star) == pytest.approx(1.0, rel=1e-4)
    r = cir_mgf_integrated(CIR, 2 * cm.lambda_star, 1.0)
    assert r.exploded and r.blowup_time == pytest.approx(riccati_blowup_time(CIR, 2 * cm.lambda_star), rel=1e-3)
    assert riccati_blowup_time(CIR, 1.0) == math.inf


def test_critical_lambda_decreases_with_horizon(cm):
    cm2 = critical_lambda(CIR, 2.0)
    assert cm2.lambda_star <= cm.lambda_star
    assert cm2.lambda_star == pytest.approx(critical_lambda_dense(CIR, 2.0), rel=1e-5)


def test_mgf_monotone_and_explosion_is_upper_ray(cm):
    lams = np.linspace(0.0, 2 * cm.lambda_star, 25)
    res = [cir_mgf_integrated(CIR, lam, 1.0) for lam in lams]
    flags = [r.exploded for r in res]
    first = flags.index(True)
    assert all(flags[first:]) and not any(flags[:first])
    vals = [r.value for r in res[:first]]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


@given(st.floats(0.5, 5), st.floats(0.01, 0.2), st.floats(0.1, 1.5), st.floats(0.5, 3))
def test_bracket_straddles_transition(kappa, theta, sigma_v, T):
    p = CirParams(kappa, theta, sigma_v, theta)
    c = critical_lambda(p, T, rtol=1e-4)
    lo, hi = c.bracket
    assert lo <= c.lambda_star <= hi
    assert not cir_mgf_integrated(p, lo, T).exploded
    assert cir_mgf_integrated(p, hi, T).exploded


def test_critical_moment_rejects_outside_bracket():
    with pytest.raises(ValueError):
        CriticalMoment(5.0, 1.0, (1.0, 2.0))


def test_digital_tail_slope_values():
    assert digital_tail_slope(CriticalMoment(2.0, 1.0, (1.9, 2.1))) == 2.0
    assert digital_tail_slope(CriticalMoment(0.5, 1.0, (0.4, 0.6))) == 1.0
    with pytest.raises(ValueError):
        digital_tail_slope(CriticalMoment(math.inf, 1.0, (1.0, math.inf)))


def test_correspondence_stabilises_below_and_flags_above(cm):
    cev = CevParams(0.2, -0.5, 1.0, 1.0)
    corr = cev_moment_correspondence(cev, cm)
    assert "sup" in corr.statement
    _, tau = simulate_cir_and_integral(CIR, 1.0, McConfig(200_000, 100, seed=31))
    S = compose_time_change(cev, tau, McConfig(200_000, 200, seed=32))
    below = expectation(S, lambda s: corr.transform(s, cm.lambda_star / 16))
    assert not below.heavy_tail_flag and below.half_width_95 < 0.05 * below.value
    above = expectation(S, lambda s: corr.transform(s, 4 * cm.lambda_star))
    assert above.heavy_tail_flag


def test_digital_tail_mc_sanity(cm):
    # one-sided: -log P(z > x) / x at high quantiles is at least half the limiting slope
    cev = CevParams(2.0, -0.5, 0.01, 1.0)
    _, tau = simulate_cir_and_integral(CIR, 1.0, McConfig(200_000, 100, seed=33))
    z = cev_moment_correspondence(cev, cm).z(compose_time_change(cev, tau, McConfig(200_000, 200, seed=34)))
    for x in np.quantile(z, [0.99, 0.999]):
        assert -math.log(tail_prob(z, x).value) / x >= 0.5 * digital_tail_slope(cm)


def test_sabr_bounds_values():
    lo, hi = sabr_clock_gaussian_bounds(4.0, 1.0)
    assert lo == pytest.approx(math.exp(-6.0), rel=1e-14)
    assert hi == pytest.approx(math.exp(-2.0), rel=1e-14)
    with pytest.raises(ValueError):
        sabr_clock_gaussian_bounds(-1.0, 1.0)


@given(st.floats(0.01, 50), st.floats(0.01, 10), st.floats(0, 2))
def test_sabr_lower_below_upper(x, t, eps):
    lo, hi = sabr_clock_gaussian_bounds(x, t, eps)
    assert lo <= hi


def test_sabr_functional_tail_below_upper_bound():
    A = simulate_exponential_functional(-0.5, 1.0, McConfig(200_000, 500, seed=35))
    for x in (2.0, 3.0, 4.0):
        est = tail_prob(A, x)
        assert est.value + est.half_width_95 < sabr_clock_gaussian_bounds(x, 1.0)[1]
