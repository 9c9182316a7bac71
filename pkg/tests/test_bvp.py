import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plap1d.bvp import residual_g, solve_g
from plap1d.core_types import Grid, Interval, Weight, p_conjugate

UNIT = Interval(0.0, 1.0)
ONE = Weight.constant(1.0, UNIT)
ZERO = Weight.constant(0.0, UNIT)


def exact_midpoint_value(p):
    # for -(phi_p(v'))' = 1 on (0,1): v(x) = ((1/2)^{p'} - |1/2-x|^{p'}) / p'
    pp = p_conjugate(p)
    return 0.5 ** pp / pp


def test_p2_nodal_exactness():
    g = Grid.uniform(UNIT, 16)
    v = solve_g(2.0, ZERO, ONE, UNIT, grid=g)
    exact = 0.5 * g.nodes * (1.0 - g.nodes)
    np.testing.assert_allclose(v.values, exact, atol=1e-13)
    assert v(0.5) == pytest.approx(0.125, abs=1e-13)


@pytest.mark.parametrize("p", [1.5, 2.0, 2.5, 3.0])
def test_constant_load_matches_exact_profile(p):
    g = Grid.uniform(UNIT, 256)
    v = solve_g(p, ZERO, ONE, UNIT, grid=g)
    pp = p_conjugate(p)
    exact = (0.5 ** pp - np.abs(0.5 - g.nodes) ** pp) / pp
    assert np.max(np.abs(v.values - exact)) < 2e-3 * exact.max()
    assert v(0.5) == pytest.approx(exact_midpoint_value(p), rel=5e-3)


@pytest.mark.parametrize("p", [1.6, 2.0, 3.2])
def test_residual_small_at_solution(p):
    g = Grid.uniform(UNIT, 128)
    c = Weight.constant(0.3, UNIT)
    v = solve_g(p, c, ONE, UNIT, grid=g, tol=1e-11)
    r = residual_g(v, p, c, ONE)
    assert np.max(np.abs(r)) < 1e-10


def test_residual_flags_wrong_function():
    g = Grid.uniform(UNIT, 64)
    v = solve_g(2.0, ZERO, ONE, UNIT, grid=g)
    wrong = v.scaled(2.0)
    r = residual_g(wrong, 2.0, ZERO, ONE)
    assert np.max(np.abs(r)) > 0.5


def test_zero_load_gives_zero():
    v = solve_g(2.5, ONE, ZERO, UNIT, grid=Grid.uniform(UNIT, 32))
    assert v.sup_norm() == 0.0


def test_positive_c_decreases_solution():
    g = Grid.uniform(UNIT, 128)
    v0 = solve_g(2.5, ZERO, ONE, UNIT, grid=g)
    v1 = solve_g(2.5, Weight.constant(5.0, UNIT), ONE, UNIT, grid=g)
    assert np.all(v1.values <= v0.values + 1e-12)
    assert v1(0.5) < v0(0.5)


def test_rejects_negative_data():
    with pytest.raises(ValueError):
        solve_g(2.0, ZERO, Weight.constant(-1.0, UNIT), UNIT)
    with pytest.raises(ValueError):
        solve_g(2.0, Weight.constant(-1.0, UNIT), ONE, UNIT)
    with pytest.raises(ValueError):
        solve_g(1.0, ZERO, ONE, UNIT)


# p much below 1.4 runs into the quantization floor of the degenerate flux,
# see the solve_g docstring; keep the property inside the supported range
@given(st.floats(1.4, 4.0), st.floats(0.1, 3.0))
@settings(max_examples=12, deadline=None)
def test_symmetry_and_positivity(p, gval):
    g = Grid.uniform(UNIT, 64)
    v = solve_g(p, ZERO, Weight.constant(gval, UNIT), UNIT, grid=g)
    assert np.all(v.values >= 0.0)
    np.testing.assert_allclose(v.values, v.values[::-1], atol=1e-8 * max(1.0, v.sup_norm()))
