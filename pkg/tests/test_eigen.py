import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from plap1d.core_types import (
    Grid,
    GridFunction,
    Interval,
    NoEigenvalueError,
    Weight,
    step_weight,
)
from plap1d.eigen import normalize_sup, principal_eigenvalue, shoot

UNIT = Interval(0.0, 1.0)
ONE = Weight.constant(1.0, UNIT)
ZERO = Weight.constant(0.0, UNIT)


def lambda1_constant(p, length):
    # closed form for c = 0, m = 1 on an interval of the given length
    pi_p = 2.0 * np.pi / (p * np.sin(np.pi / p))
    return (p - 1.0) * (pi_p / length) ** p


class TestShoot:
    def test_lambda_zero_is_linear(self):
        traj, zero = shoot(0.0, 2.7, ZERO, ONE, UNIT, n=256)
        assert zero is None
        assert np.allclose(traj.values, traj.grid.nodes, atol=1e-12)

    def test_first_zero_at_right_endpoint(self):
        _, zero = shoot(np.pi**2, 2.0, ZERO, ONE, UNIT)
        assert zero == pytest.approx(1.0, abs=1e-4)

    def test_first_zero_at_half(self):
        _, zero = shoot(4.0 * np.pi**2, 2.0, ZERO, ONE, UNIT)
        assert zero == pytest.approx(0.5, abs=1e-4)

    def test_subcritical_lambda_stays_positive(self):
        traj, zero = shoot(0.5 * np.pi**2, 2.0, ZERO, ONE, UNIT)
        assert zero is None
        assert traj.values[-1] > 0

    def test_bad_exponent(self):
        with pytest.raises(ValueError):
            shoot(1.0, 1.0, ZERO, ONE, UNIT)


class TestPrincipalEigenvalue:
    @pytest.mark.parametrize("p", [1.5, 2.0, 2.5, 3.0])
    def test_constant_coefficient_closed_form(self, p):
        pair = principal_eigenvalue(p, ZERO, ONE, UNIT)
        exact = lambda1_constant(p, 1.0)
        assert pair.lambda1 == pytest.approx(exact, rel=1e-6)

    def test_p3_reference_value(self):
        pair = principal_eigenvalue(3.0, ZERO, ONE, UNIT)
        assert pair.lambda1 == pytest.approx(28.2888, abs=5e-4)

    def test_constant_c_shifts_linearly_at_p2(self):
        pair = principal_eigenvalue(2.0, Weight.constant(5.0, UNIT), ONE, UNIT)
        assert pair.lambda1 == pytest.approx(np.pi**2 + 5.0, rel=1e-6)

    def test_eigenfunction_shape(self):
        pair = principal_eigenvalue(2.0, ZERO, ONE, UNIT)
        assert pair.phi.values[0] == 0.0
        assert pair.phi.values[-1] == 0.0
        assert np.all(pair.phi.values[1:-1] > 0.0)
        assert np.max(pair.phi.values) == 1.0
        # p = 2 eigenfunction is sin(pi x)
        assert np.allclose(pair.phi.values, np.sin(np.pi * pair.phi.grid.nodes), atol=1e-5)

    @pytest.mark.parametrize("p", [1.6, 2.0, 3.5])
    def test_rayleigh_cross_check(self, p):
        m = step_weight(UNIT, Interval(0.2, 0.9), 2.0, 0.5)
        c = Weight.constant(0.3, UNIT)
        pair = principal_eigenvalue(p, c, m, UNIT)
        assert abs(pair.rayleigh - pair.lambda1) <= 1e-4 * pair.lambda1

    @pytest.mark.parametrize("tau", [0.5, 2.0, 10.0])
    def test_homogeneity_in_m(self, tau):
        I = Interval(0.25, 0.75)
        c = Weight.constant(0.2, UNIT)
        m = step_weight(UNIT, I, 1.0, 0.0)
        base = principal_eigenvalue(2.4, c, m, I).lambda1
        scaled = principal_eigenvalue(2.4, c, m.affine(tau, 0.0), I).lambda1
        assert scaled == pytest.approx(base / tau, rel=1e-8)

    def test_domain_monotonicity(self):
        inner = Interval(0.3, 0.7)
        lam_full = principal_eigenvalue(2.5, ZERO, ONE, UNIT).lambda1
        lam_inner = principal_eigenvalue(2.5, ZERO, ONE, inner).lambda1
        assert lam_inner > lam_full

    def test_zero_mass_weight_rejected(self):
        with pytest.raises(NoEigenvalueError):
            principal_eigenvalue(2.0, ZERO, Weight.constant(0.0, UNIT), UNIT)

    def test_window_restriction_matches_closed_form(self):
        I = Interval(0.25, 0.75)
        pair = principal_eigenvalue(2.0, ZERO, ONE, I)
        assert pair.lambda1 == pytest.approx(lambda1_constant(2.0, 0.5), rel=1e-6)

    @given(
        p=st.floats(1.3, 4.0),
        tau=st.floats(0.1, 20.0),
    )
    def test_homogeneity_property(self, p, tau):
        lam = principal_eigenvalue(p, ZERO, ONE, UNIT, n=128).lambda1
        lam_tau = principal_eigenvalue(p, ZERO, Weight.constant(tau, UNIT), UNIT, n=128).lambda1
        assert lam_tau == pytest.approx(lam / tau, rel=1e-7)


class TestNormalizeSup:
    def test_constant_two(self):
        g = Grid.uniform(UNIT, 16)
        out = normalize_sup(GridFunction(g, np.full(17, 2.0)))
        assert np.all(out.values == 1.0)

    def test_already_normalized_sine(self):
        g = Grid.uniform(UNIT, 64)
        vals = np.sin(np.pi * g.nodes)
        out = normalize_sup(GridFunction(g, vals.copy()))
        assert np.array_equal(out.values, vals / np.max(vals))
        assert np.max(out.values) == 1.0

    def test_nonpositive_rejected(self):
        g = Grid.uniform(UNIT, 8)
        with pytest.raises(ValueError):
            normalize_sup(GridFunction(g, -np.ones(9)))
