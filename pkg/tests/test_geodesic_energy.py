import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import ndtr

from voltail.energy import (EnergyProblem, NsBounds, direct_minimize_energy, discrete_energy, energy_curve,
                            ns_bounds_check, solve_euler_lagrange)
from voltail.geodesic import (DossBounds, doss_sandwich_log_tail, doss_sandwich_tail, doss_tail_asymptote,
                              geodesic_curve, geodesic_distance, inverse_geodesic)
from voltail.volmodel import DriftSpec, VolModel

DIP = VolModel.local_dip()
DRIFTLESS = DriftSpec.driftless_log_stock()


# -- geodesic ---------------------------------------------------------------


def test_constant_distance_is_linear():
    assert geodesic_distance(VolModel.constant(0.25), 1.0, 3.0) == 8.0


def test_expression_distance_against_closed_form():
    # sigma = 1 + x^2 gives d(0, u) = arctan(u)
    m = VolModel.from_expression("1 + x^2", sigma_lo=1.0, sigma_hi=101.0)
    assert geodesic_distance(m, 0.0, 2.0) == pytest.approx(math.atan(2.0), abs=1e-12)


def test_dip_distance_against_simpson_oracle():
    from scipy.integrate import simpson
    z = np.linspace(0.0, 2.0, 1_000_001)
    ref = simpson(1.0 / DIP.sigma(z), x=z)
    d = geodesic_distance(DIP, 0.0, 2.0)
    assert d == pytest.approx(ref, abs=1e-8)
    assert inverse_geodesic(DIP, 0.0, d) == pytest.approx(2.0, abs=1e-7)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_distance_antisymmetric_and_additive(a, b, c):
    dab, dbc, dac = (geodesic_distance(DIP, *p) for p in ((a, b), (b, c), (a, c)))
    assert geodesic_distance(DIP, b, a) == pytest.approx(-dab, abs=1e-12)
    assert dab + dbc == pytest.approx(dac, abs=1e-9)


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_distance_bounded_by_sigma_range(a, b):
    d = abs(geodesic_distance(DIP, a, b))
    assert abs(b - a) / DIP.sigma_hi - 1e-12 <= d <= abs(b - a) / DIP.sigma_lo + 1e-12


@given(st.floats(-2, 2), st.floats(-6, 6))
def test_inverse_geodesic_round_trip(y, x):
    u = inverse_geodesic(DIP, y, x)
    assert geodesic_distance(DIP, y, u) == pytest.approx(x, abs=1e-9)


def test_geodesic_curve_rows():
    rows = geodesic_curve(VolModel.constant(0.5), 0.0, [0.0, 1.0])
    assert rows == [(0.0, 0.0, 0.0), (0.0, 1.0, 2.0)]


def test_doss_asymptote_and_sandwich_constant_vol():
    s0, t = 0.4, 1.0
    m = VolModel.constant(s0)
    assert doss_tail_asymptote(m, 0.0, 2.0, t) == pytest.approx((2.0 / s0) ** 2 / 2)
    bounds = DossBounds.for_constant_vol(s0)
    lo, hi = doss_sandwich_tail(m, bounds, 0.0, 1.0, t)
    exact = float(ndtr(-(1.0 + 0.5 * s0 * s0 * t) / (s0 * math.sqrt(t))))
    assert lo == pytest.approx(exact, rel=1e-12)
    assert lo <= hi
    llo, lhi = doss_sandwich_log_tail(m, bounds, 0.0, 50.0, t)
    assert math.isfinite(llo) and llo <= lhi


def test_doss_bounds_validate_order():
    with pytest.raises(ValueError):
        DossBounds(1.0, 0.0)


# -- energy -----------------------------------------------------------------


def test_constant_energy_with_drift_exact():
    p = EnergyProblem(0.2, 1.4, -0.5, 1.3, VolModel.constant(0.35), DriftSpec.explicit("0.3"))
    exact = (1.3 + 0.5 - 0.3 * 1.2) ** 2 / (2 * 0.35 ** 2 * 1.2)
    assert solve_euler_lagrange(p, n_grid=128).energy == pytest.approx(exact, abs=1e-10)
    assert direct_minimize_energy(p, n_grid=128).energy == pytest.approx(exact, rel=1e-8)


def test_zero_drift_energy_is_half_squared_distance_over_duration():
    for y in (-2.5, -1.0, 0.7, 2.9):
        p = EnergyProblem(0.0, 1.0, 0.0, y, DIP, DriftSpec.zero())
        d = geodesic_distance(DIP, 0.0, y)
        assert solve_euler_lagrange(p, n_grid=512).energy == pytest.approx(0.5 * d * d, rel=1e-8)


def test_shooting_agrees_with_direct_minimisation_on_dip():
    for y in (-3.0, -1.2, 0.4, 3.0):
        p = EnergyProblem(0.0, 1.0, 0.0, y, DIP, DRIFTLESS)
        sh = solve_euler_lagrange(p, n_grid=256)
        dm = direct_minimize_energy(p, n_grid=256)
        assert sh.method == "shooting"
        assert sh.residual < 1e-9
        assert abs(sh.energy - dm.energy) <= 1e-4 * dm.energy
        # the direct minimiser can only lower the energy of a discrete path
        assert dm.energy <= discrete_energy(p, np.linspace(0.0, y, 256)) + 1e-15


def test_direct_minimiser_history_nonincreasing():
    p = EnergyProblem(0.0, 1.0, 0.0, 2.0, DIP, DRIFTLESS)
    h = direct_minimize_energy(p, n_grid=128).history
    assert all(b <= a + 1e-15 for a, b in zip(h, h[1:]))


def test_time_dependent_sigma_reduces_to_homogeneous_case():
    m_t = VolModel.from_expression("0.4 + 0*t + 0.1*exp(-x^2)", sigma_lo=0.4, sigma_hi=0.5)
    m = VolModel.from_expression("0.4 + 0.1*exp(-x^2)", sigma_lo=0.4, sigma_hi=0.5)
    a = solve_euler_lagrange(EnergyProblem(0, 1, 0, 1.5, m_t, DriftSpec.zero()), 256).energy
    b = solve_euler_lagrange(EnergyProblem(0, 1, 0, 1.5, m, DriftSpec.zero()), 256).energy
    assert a == pytest.approx(b, rel=1e-12)


def test_time_dependent_sigma_shooting_matches_direct():
    m = VolModel.from_expression("0.3 + 0.2*t*exp(-x^2)", sigma_lo=0.3, sigma_hi=0.5)
    p = EnergyProblem(0.0, 1.0, 0.0, 1.0, m, DriftSpec.zero())
    assert solve_euler_lagrange(p, 512).energy == pytest.approx(direct_minimize_energy(p, 512).energy, rel=1e-5)


def test_ns_bounds_for_dip():
    b = NsBounds.from_model(DIP, DRIFTLESS)
    assert b.lambda_cap == pytest.approx(1.0 / (0.5 * DIP.sigma_lo ** 2))
    assert b.check_model(DIP)
    for y in (-3.0, 0.0, 3.0):
        p = EnergyProblem(0.0, 1.0, 0.0, y, DIP, DRIFTLESS)
        assert ns_bounds_check(p, b, solve_euler_lagrange(p, 256).energy).strictly_inside


@given(st.floats(0.1, 2.0), st.floats(-2, 2), st.floats(-3, 3), st.floats(0.1, 3.0))
def test_ns_bounds_hold_for_constant_coefficients(sig, mu, y, D):
    m = VolModel.constant(sig)
    drift = DriftSpec.explicit(mu)
    p = EnergyProblem(0.0, D, 0.0, y, m, drift)
    exact = (y - mu * D) ** 2 / (2 * sig * sig * D)
    assert ns_bounds_check(p, NsBounds.from_model(m, drift), exact).inside


def test_energy_curve_rows_ordered_and_flagged():
    rows = energy_curve(DIP, DRIFTLESS, 0.0, 1.0, 0.0, [1.0, -1.0, 0.0], n_grid=128, cross_check=True)
    assert [r.y for r in rows] == [1.0, -1.0, 0.0]
    assert all(r.ok and r.rel_diff < 1e-3 for r in rows)
    assert rows[2].half_d2 == 0.0


def test_problem_validates_times():
    with pytest.raises(ValueError):
        EnergyProblem(1.0, 1.0, 0.0, 1.0, DIP)
