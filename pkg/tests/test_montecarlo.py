import math

import numpy as np
import pytest
from scipy.stats import ks_2samp

from voltail.cev import CevParams, cev_absorption_closed_form
from voltail.montecarlo import (McConfig, McEstimate, compose_time_change, expectation, running_means,
                                simulate_cev, simulate_cir_and_integral, simulate_exponential_functional,
                                simulate_log_stock, tail_prob)
from voltail.timechange import CirParams
from voltail.volmodel import DriftSpec, VolModel

CIR = CirParams(2.0, 0.04, 0.5, 0.04)


def test_config_validation():
    with pytest.raises(ValueError):
        McConfig(0, 10)
    with pytest.raises(ValueError):
        McConfig(10, 10, seed=-1)


def test_same_seed_same_samples_and_streams_differ():
    cfg = McConfig(5000, 20, seed=9, block_size=1024)
    m, d = VolModel.local_dip(), DriftSpec.driftless_log_stock()
    a = simulate_log_stock(m, d, 0.0, 1.0, cfg)
    np.testing.assert_array_equal(a, simulate_log_stock(m, d, 0.0, 1.0, cfg))
    b = simulate_log_stock(m, d, 0.0, 1.0, McConfig(5000, 20, seed=10, block_size=1024))
    assert not np.array_equal(a, b)
    # blocks draw from distinct spawn keys
    assert not np.array_equal(a[:1024], a[1024:2048])


def test_log_stock_exponential_is_martingale():
    X = simulate_log_stock(VolModel.local_dip(), DriftSpec.driftless_log_stock(), 0.0, 1.0,
                           McConfig(200_000, 100, seed=11))
    assert expectation(np.exp(X)).within(1.0)


def test_constant_vol_terminal_moments():
    s0 = 0.3
    X = simulate_log_stock(VolModel.constant(s0), DriftSpec.zero(), 0.5, 2.0, McConfig(200_000, 10, seed=12))
    assert expectation(X).within(0.5)
    assert np.var(X) == pytest.approx(s0 * s0 * 2.0, rel=0.02)


def test_cev_absorbed_fraction_matches_closed_form():
    p = CevParams(1.0, -0.5, 1.0, 1.0)
    s = simulate_cev(p, McConfig(100_000, 500, seed=13))
    q = cev_absorption_closed_form(p)
    assert abs(s.absorbed_fraction - q) <= 3 * math.sqrt(q * (1 - q) / 100_000) + 2e-3
    assert np.all(s.terminal >= 0)
    assert expectation(s.terminal).within(p.x0)


def test_cev_absorption_bias_shrinks_with_steps():
    p = CevParams(1.0, -0.5, 1.0, 1.0)
    q = cev_absorption_closed_form(p)
    coarse = simulate_cev(p, McConfig(100_000, 20, seed=14)).absorbed_fraction
    fine = simulate_cev(p, McConfig(100_000, 1000, seed=14)).absorbed_fraction
    assert abs(fine - q) < abs(coarse - q)


def test_cir_means():
    v, I = simulate_cir_and_integral(CIR, 1.0, McConfig(100_000, 200, seed=15))
    assert np.all(v >= 0) and np.all(I >= 0)
    assert expectation(v).within(CIR.mean_v(1.0))
    assert expectation(I).within(CIR.mean_integral(1.0))


def test_compose_with_degenerate_clock_matches_direct_simulation():
    p = CevParams(0.5, -0.5, 1.0, 1.0)
    n = 50_000
    direct = simulate_cev(p, McConfig(n, 200, seed=16)).terminal
    composed = compose_time_change(p, np.full(n, p.T), McConfig(n, 200, seed=17))
    assert ks_2samp(direct, composed).pvalue > 1e-3
    # zero clock leaves the start point untouched
    np.testing.assert_array_equal(compose_time_change(p, np.zeros(10), McConfig(10, 50)), np.full(10, p.x0))


def test_compose_stream_independent_of_clock_seed():
    p = CevParams(0.2, -0.5, 1.0, 1.0)
    _, t1 = simulate_cir_and_integral(CIR, 1.0, McConfig(20_000, 50, seed=1))
    _, t2 = simulate_cir_and_integral(CIR, 1.0, McConfig(20_000, 50, seed=2))
    assert not np.array_equal(t1, t2)
    assert abs(t1.mean() - t2.mean()) < 4 * math.hypot(t1.std(), t2.std()) / math.sqrt(20_000)
    with pytest.raises(ValueError):
        compose_time_change(p, t1[:10], McConfig(20_000, 50))
    with pytest.raises(ValueError):
        compose_time_change(p, -np.ones(3), McConfig(3, 5))


def test_exponential_functional_mean():
    # E A_t = int_0^t exp(2 (mu + 1) s) ds
    mu, t = -0.5, 1.0
    A = simulate_exponential_functional(mu, t, McConfig(100_000, 200, seed=18))
    rate = 2 * (mu + 1)
    assert expectation(A).within(math.expm1(rate * t) / rate, n_se=4)


def test_tail_prob_examples():
    est = tail_prob(np.arange(10_000) % 2, 0.5)
    assert est.value == 0.5
    assert est.half_width_95 == pytest.approx(0.0098, abs=1e-4)
    full = tail_prob(np.ones(100), 0.0)
    assert full.value == 1.0 and full.half_width_95 == 0.0
    with pytest.raises(ValueError):
        tail_prob([], 0.0)


def test_expectation_heavy_tail_flag_and_helpers():
    x = np.ones(1000)
    x[0] = 1e6
    assert expectation(x).heavy_tail_flag
    assert not expectation(np.ones(1000)).heavy_tail_flag
    assert expectation(np.array([1.0, 800.0]), np.log).heavy_tail_flag
    with pytest.raises(ValueError):
        expectation(np.array([]))
    np.testing.assert_allclose(running_means([1, 2, 3, 4], [1, 2, 4]), [1.0, 1.5, 2.5])
    e = McEstimate(1.0, 1.959963984540054, 10, False)
    assert e.std_error == pytest.approx(1.0) and e.within(3.9) and not e.within(4.1)
