import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from voltail.expr import ExpressionError, parse
from voltail.volmodel import BoundsError, DomainError, DriftSpec, VolModel, drift_mu, eval_sigma


def dip_closed(x):
    return 0.5 - 0.1 * math.exp(1 - x * x) + 0.4 * math.exp(-2 * math.exp(x))


def test_parse_precedence_and_associativity():
    assert parse("2^3^2").evaluate(0.0) == 2.0 ** 9
    assert parse("-2^2").evaluate(0.0) == -4.0
    assert parse("1 - 2 - 3").evaluate(0.0) == -4.0
    assert parse("8 / 4 / 2").evaluate(0.0) == 1.0
    assert parse("e").evaluate(0.0) == pytest.approx(math.e)
    assert parse("log(exp(x))").evaluate(1.7) == pytest.approx(1.7)


@pytest.mark.parametrize("text, column", [("0.3 +", 6), ("(x", 3), ("foo(x)", 1), ("x $ 2", 3), ("", 1)])
def test_parse_errors_carry_column(text, column):
    with pytest.raises(ExpressionError) as info:
        parse(text)
    assert info.value.column == column


@given(st.floats(-3, 3))
def test_symbolic_derivative_matches_finite_difference(x):
    tree = parse("0.5 - 0.1*e^(1 - x^2) + 0.4*exp(-2*exp(x)) + x^3/7")
    h = 1e-6
    fd = (tree.evaluate(x + h) - tree.evaluate(x - h)) / (2 * h)
    assert tree.diff("x").evaluate(x) == pytest.approx(fd, rel=1e-6, abs=1e-8)


def test_local_dip_values_and_alias():
    m = VolModel.from_kind("paper-figure-1")
    assert m.kind == "local-dip"
    for x in (-3.0, -0.2, 0.0, 0.4, 2.5):
        assert eval_sigma(m, x) == pytest.approx(dip_closed(x), rel=1e-15)
    assert eval_sigma(m, 0.0) == pytest.approx(0.5 - 0.1 * math.e + 0.4 * math.exp(-2), rel=1e-14)
    assert m.sigma_lo == pytest.approx(0.273283556702, abs=1e-9)
    assert m.sigma_hi == 0.9


def test_local_dip_limits():
    m = VolModel.local_dip()
    assert eval_sigma(m, -40.0) == pytest.approx(0.9, abs=1e-12)
    assert eval_sigma(m, 40.0) == pytest.approx(0.5, abs=1e-12)


@given(st.floats(-4, 4))
def test_analytic_and_central_difference_partials_agree(x):
    m = VolModel.local_dip()
    a = m.partials(x)
    c = m.with_central_differences().partials(x)
    assert c[0] == a[0]
    assert c[1] == pytest.approx(a[1], abs=1e-8)
    assert c[2] == pytest.approx(a[2], abs=1e-6)


def test_expression_matches_builtin_dip():
    m = VolModel.from_expression("0.5 - 0.1*e^(1 - x^2) + 0.4*exp(-2*exp(x))", confirm_bounds=True)
    ref = VolModel.local_dip()
    xs = np.linspace(-3, 3, 31)
    for a, b in zip(m.partials(xs), ref.partials(xs)):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-14)


def test_expression_bounds_need_confirmation():
    with pytest.raises(BoundsError):
        VolModel.from_expression("0.3 + 0.1*exp(-x^2)")
    m = VolModel.from_expression("0.3 + 0.1*exp(-x^2)", confirm_bounds=True)
    assert m.sigma_lo == pytest.approx(0.3, abs=1e-9) and m.sigma_hi == pytest.approx(0.4, abs=1e-6)
    with pytest.raises(BoundsError):
        VolModel.from_expression("0.3 + 0.1*exp(-x^2)", sigma_lo=0.35, sigma_hi=0.5)
    with pytest.raises(BoundsError):
        VolModel.from_expression("x", confirm_bounds=True)


def test_constant_and_cev_local():
    assert eval_sigma(VolModel.constant(0.3), 12.0) == 0.3
    with pytest.raises(BoundsError):
        VolModel.constant(0.0)
    cev = VolModel.cev_local(0.2, -0.5)
    assert eval_sigma(cev, 4.0) == pytest.approx(0.4)
    assert cev.sigma_lo == 0.0
    with pytest.raises(DomainError):
        cev.sigma(-1.0)


def test_driftless_drift_forms():
    m = VolModel.local_dip()
    d = DriftSpec.driftless_log_stock()
    x = np.linspace(-2, 2, 9)
    s, sx, _ = m.partials(x)
    np.testing.assert_allclose(d.mu(m, x), -0.5 * s * s - s * sx)
    np.testing.assert_allclose(d.sde_drift(m, x), -0.5 * s * s)
    b, sig = d.sde_coefficients(m, x)
    np.testing.assert_allclose(b, -0.5 * s * s)
    np.testing.assert_allclose(sig, s)
    assert drift_mu(VolModel.constant(0.4), 1.0) == pytest.approx(-0.08)


def test_explicit_drift_partials_and_time_dependence():
    m = VolModel.from_expression("0.3 + 0.1*t*exp(-x^2)", sigma_lo=0.3, sigma_hi=0.4)
    assert m.time_dependent
    d = DriftSpec.explicit("x*t")
    mu, mux, mut = d.mu_partials(m, np.array([2.0]), 0.5)
    assert (mu[0], mux[0], mut[0]) == (1.0, 0.5, 2.0)
    st_, sxt = m.time_partials(np.array([0.0]), 0.3)
    assert st_[0] == pytest.approx(0.1) and sxt[0] == pytest.approx(0.0)
