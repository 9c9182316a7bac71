import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from plap1d import (
    Certificate,
    EpsTooLargeError,
    GlueError,
    Grid,
    GridFunction,
    Interval,
    NoSupersolutionError,
    Problem,
    TauTooLargeError,
    Weight,
    build_subsolution,
    build_supersolution,
    build_u1_exp,
    build_u1_linear,
    build_u1_power,
    build_u1_sinh,
    build_u3_power,
    c_pq,
    enforce_ordering,
    glue,
    rescale_certificate,
    step_weight,
)
from plap1d.subsuper import _power_params
from plap1d.verify import check_weak_subsolution, check_weak_supersolution

UNIT = Interval(0.0, 1.0)
WIN = Interval(0.25, 0.75)


def step_problem(p, q, mu, csup=0.0, window=WIN):
    m = step_weight(UNIT, window, 1.0, -mu)
    return Problem(
        p=p, q=q, domain=UNIT, m=m, c=Weight.constant(csup, UNIT), window=window
    )


class TestPowerPieces:
    def test_variant_a_p2_parameters(self):
        prob = step_problem(2.0, 0.5, 0.1)
        k, sigma = _power_params(prob, 6.0, "A")
        assert k == 2.0
        assert sigma == pytest.approx(3.0, rel=1e-12)

    def test_closed_form_ramp_without_negative_mass(self):
        # m >= 0 leaves only the eps inflation: u1 = (sigma eps (x-a)^2/2)^k
        prob = step_problem(2.5, 1.0, 0.0)
        tau, eps = 5.0, 1e-3
        u1 = build_u1_power(prob, tau, eps, "A", n=64)
        k, sigma = _power_params(prob, tau, "A")
        x = u1.grid.nodes
        expected = (sigma * eps * x**2 / 2.0) ** k
        assert np.allclose(u1.values, expected, rtol=1e-12, atol=1e-300)

    def test_left_piece_vanishes_at_a_and_rises(self):
        prob = step_problem(2.5, 1.0, 0.1)
        u1 = build_u1_power(prob, 10.0, 1e-3, "A")
        assert u1.values[0] == 0.0
        assert np.all(np.diff(u1.values) > 0.0)

    def test_right_piece_vanishes_at_b_and_falls(self):
        prob = step_problem(2.5, 1.0, 0.1)
        u3 = build_u3_power(prob, 10.0, 1e-3, "A")
        assert u3.values[-1] == 0.0
        assert np.all(np.diff(u3.values) < 0.0)

    def test_reflection_symmetry(self):
        prob = step_problem(1.75, 0.5, 0.2)
        u1 = build_u1_power(prob, 3.0, 1e-3, "B", n=80)
        u3 = build_u3_power(prob, 3.0, 1e-3, "B", n=80)
        assert np.allclose(u3.values, u1.values[::-1], rtol=1e-12)

    def test_overgrown_profile_rejected(self):
        prob = step_problem(2.5, 1.0, 0.5)
        with pytest.raises(TauTooLargeError):
            build_u1_power(prob, 1e9, 1e-2, "A")

    def test_variant_preconditions(self):
        with pytest.raises(ValueError, match="variant A"):
            build_u1_power(step_problem(1.5, 0.25, 0.1), 1.0, 1e-3, "A")
        with pytest.raises(ValueError, match="variant B"):
            build_u1_power(step_problem(2.5, 1.0, 0.1), 1.0, 1e-3, "B")
        with pytest.raises(ValueError, match="variant"):
            build_u1_power(step_problem(2.0, 0.5, 0.1), 1.0, 1e-3, "C")


class TestHyperbolicPieces:
    def test_sinh_amplitude_reference(self):
        # ||c|| = 1, ||m^-|| = 0.5, tau = 40: peak f = sqrt(20) sinh(3/(4 sqrt 12))
        prob = step_problem(2.0, 0.5, 0.5, csup=1.0)
        u1 = build_u1_sinh(prob, 40.0)
        f_peak = math.sqrt(20.0) * math.sinh(0.75 / math.sqrt(12.0))
        assert f_peak <= 1.0
        k = 2.0 / 0.5
        assert u1.values.max() == pytest.approx(f_peak**k, rel=1e-10)
        assert u1.values[0] == 0.0

    def test_exp_dominates_sinh_pointwise(self):
        prob = step_problem(2.0, 0.5, 0.3, csup=1.0)
        us = build_u1_sinh(prob, 10.0, n=64)
        ue = build_u1_exp(prob, 10.0, n=64)
        assert np.all(ue.values >= us.values)

    def test_exp_profile_allows_small_p(self):
        prob = step_problem(1.5, 0.25, 0.1, csup=1.0)
        u1 = build_u1_exp(prob, 2.0)
        assert u1.values[0] == 0.0
        assert np.all(np.diff(u1.values) > 0.0)

    def test_sinh_requires_large_p(self):
        with pytest.raises(ValueError, match="p >= 2"):
            build_u1_sinh(step_problem(1.5, 0.25, 0.1, csup=1.0), 1.0)

    def test_hyperbolic_profiles_require_c(self):
        with pytest.raises(ValueError, match="c"):
            build_u1_sinh(step_problem(2.0, 0.5, 0.1), 1.0)
        with pytest.raises(ValueError, match="c"):
            build_u1_exp(step_problem(2.0, 0.5, 0.1), 1.0)

    def test_linear_profile_requires_c_free(self):
        with pytest.raises(ValueError, match="c"):
            build_u1_linear(step_problem(2.0, 0.5, 0.1, csup=1.0), 1.0)

    def test_linear_profile_closed_form(self):
        prob = step_problem(2.0, 0.5, 0.5)
        tau = 20.0
        u1 = build_u1_linear(prob, tau, n=32)
        slope = (tau * 0.5 / 12.0) ** 0.5
        assert np.allclose(u1.values, (slope * u1.grid.nodes) ** 4.0, rtol=1e-12)

    def test_oversized_sinh_rejected(self):
        prob = step_problem(2.0, 0.5, 0.5, csup=1.0)
        with pytest.raises(TauTooLargeError):
            build_u1_sinh(prob, 1e6)


def triangle(interval, n, peak=1.0):
    g = Grid.uniform(interval, n)
    mid = 0.5 * (interval.a + interval.b)
    half = 0.5 * interval.length()
    vals = peak * (1.0 - np.abs(g.nodes - mid) / half)
    return GridFunction(g, vals)


class TestGlue:
    def test_coinciding_pieces_join_at_first_overlap_node(self):
        u2 = triangle(WIN, 32)
        g1 = Grid.uniform(Interval(0.0, 0.75), 48)
        u1 = GridFunction(g1, u2(g1.nodes))
        u3 = GridFunction(Grid.uniform(Interval(0.25, 1.0), 48), u2(np.linspace(0.25, 1.0, 49)))
        glued, x_lo, x_hi = glue(u1, u2, u3)
        assert x_lo == 0.25
        assert x_hi == 0.75

    def test_missing_pieces_return_window_edges(self):
        u2 = triangle(WIN, 32)
        glued, x_lo, x_hi = glue(None, u2, None)
        assert (x_lo, x_hi) == (WIN.a, WIN.b)
        assert np.array_equal(glued.values, u2.values)

    def test_never_crossing_piece_fails(self):
        u2 = triangle(WIN, 32)
        g1 = Grid.uniform(Interval(0.0, 0.75), 48)
        u1 = GridFunction(g1, u2(g1.nodes) + 0.5)
        with pytest.raises(GlueError, match="left"):
            glue(u1, u2, None)

    def test_glued_function_is_continuous_and_bounded(self):
        prob = step_problem(2.0, 0.5, 0.5)
        cert = build_subsolution(prob, "cor", Grid.uniform(UNIT, 512))
        u = cert.u
        s = cert.construction["rescale"]
        assert np.all(np.diff(u.grid.nodes) > 0)
        assert u.values.max() <= s * (1.0 + 1e-12)
        assert u.values[0] == 0.0 and u.values[-1] == 0.0

    def test_symmetric_problem_gives_symmetric_junctions(self):
        prob = step_problem(2.0, 0.5, 0.5)
        cert = build_subsolution(prob, "cor", Grid.uniform(UNIT, 1024))
        lo = cert.construction["junction_lo"]
        hi = cert.construction["junction_hi"]
        assert lo + hi == pytest.approx(1.0, abs=1e-6)


class TestRescale:
    def test_identity_at_one(self):
        u = triangle(UNIT, 16)
        prob = step_problem(2.0, 0.5, 0.1)
        out = rescale_certificate(u, 1.0, prob)
        assert np.array_equal(out.values, u.values)

    def test_reference_factor(self):
        # p=2, q=1/2: exponent 1/(p-1-q) = 2, so tau=4 scales by 1/16
        u = triangle(UNIT, 16)
        prob = step_problem(2.0, 0.5, 0.1)
        out = rescale_certificate(u, 4.0, prob)
        assert np.allclose(out.values, u.values / 16.0, rtol=1e-15)

    def test_rejects_nonpositive_tau(self):
        with pytest.raises(ValueError):
            rescale_certificate(triangle(UNIT, 8), 0.0, step_problem(2.0, 0.5, 0.1))

    def test_rescaled_certificate_still_verifies(self):
        # a subsolution for m is one for (tau m)/tau; rescaling moves it to
        # the weight m/tau without spending any slack
        prob = step_problem(2.0, 0.5, 0.5)
        cert = build_subsolution(prob, "cor", Grid.uniform(UNIT, 1024))
        tau = 4.0
        m_small = prob.m.affine(1.0 / tau)
        prob_small = Problem(
            p=2.0, q=0.5, domain=UNIT, m=m_small, c=prob.c, window=WIN
        )
        moved = rescale_certificate(cert.u, tau, prob)
        rep = check_weak_subsolution(moved, prob_small)
        assert rep.passed


class TestBuildSubsolution:
    def test_window_covering_domain_skips_gluing(self):
        m = Weight.constant(1.0, UNIT)
        prob = Problem(
            p=2.0, q=0.5, domain=UNIT, m=m, c=Weight.constant(0.0, UNIT), window=UNIT
        )
        cert = build_subsolution(prob, "cor", Grid.uniform(UNIT, 512))
        assert cert.construction["junction_lo"] == 0.0
        assert cert.construction["junction_hi"] == 1.0
        s = cert.construction["rescale"]
        assert cert.u.values.max() == pytest.approx(s, rel=1e-12)
        assert check_weak_subsolution(cert.u, prob).passed

    @pytest.mark.parametrize(
        "theorem, p, q, csup, mu",
        [
            ("thm1_i", 2.5, 1.0, 0.2, 0.1),
            ("thm1_ii", 1.75, 0.5, 0.1, 0.1),
            ("thm2_i", 2.5, 1.0, 0.5, 0.5),
            ("thm2_ii", 1.6, 0.3, 0.5, 0.2),
            ("cor", 2.0, 0.5, 0.0, 0.5),
        ],
    )
    def test_families_verify_on_their_own_grid(self, theorem, p, q, csup, mu):
        prob = step_problem(p, q, mu, csup=csup)
        cert = build_subsolution(prob, theorem, Grid.uniform(UNIT, 1024))
        rep = check_weak_subsolution(cert.u, prob)
        assert rep.passed, f"worst {rep.worst_value} at x={rep.worst_x}"
        assert cert.kind == "subsolution"
        for key in ("theorem", "tau", "tau_effective", "eps", "k", "sigma",
                    "junction_lo", "junction_hi", "rescale", "lambda1"):
            assert key in cert.construction

    def test_infeasible_weight_raises(self):
        prob = step_problem(2.0, 0.5, 1.0)
        with pytest.raises(EpsTooLargeError):
            build_subsolution(prob, "cor", Grid.uniform(UNIT, 256))

    def test_unknown_theorem_rejected(self):
        prob = step_problem(2.0, 0.5, 0.1)
        with pytest.raises(ValueError, match="theorem"):
            build_subsolution(prob, "thm3")

    def test_certificate_positive_inside_window(self):
        prob = step_problem(2.0, 0.5, 0.5)
        cert = build_subsolution(prob, "cor", Grid.uniform(UNIT, 512))
        nodes = cert.u.grid.nodes
        inside = (nodes > WIN.a) & (nodes < WIN.b)
        assert np.all(cert.u.values[inside] > 0.0)


class TestBuildSupersolution:
    def test_reference_k_for_unit_weight(self):
        m = Weight.constant(1.0, UNIT)
        prob = Problem(
            p=2.0, q=0.5, domain=UNIT, m=m, c=Weight.constant(0.0, UNIT), window=UNIT
        )
        cert = build_supersolution(prob, Grid.uniform(UNIT, 1024))
        assert cert.construction["k"] == pytest.approx(9.0 / 8.0, rel=1e-8)
        assert cert.construction["v_sup"] == pytest.approx(1.0 / 8.0, rel=1e-8)
        rep = check_weak_supersolution(cert.u, prob, tol=1e-6)
        assert rep.passed

    def test_floor_is_k(self):
        prob = step_problem(2.0, 0.5, 0.5)
        cert = build_supersolution(prob, Grid.uniform(UNIT, 512))
        assert cert.u.values.min() >= cert.construction["k"] - 1e-12
        assert cert.kind == "supersolution"

    def test_doubling_weight_doubles_companion_at_p2(self):
        base = step_problem(2.0, 0.5, 0.5)
        doubled = Problem(
            p=2.0, q=0.5, domain=UNIT, m=base.m.affine(2.0), c=base.c, window=WIN
        )
        g = Grid.uniform(UNIT, 512)
        v1 = build_supersolution(base, g).construction["v_sup"]
        v2 = build_supersolution(doubled, g).construction["v_sup"]
        assert v2 == pytest.approx(2.0 * v1, rel=1e-7)

    def test_sign_changing_c_mode_builds_when_companion_nonnegative(self):
        # with the flag set the companion problem keeps the true c; a mild
        # negative c stays below the Dirichlet ground state, so v >= 0 and
        # the construction goes through
        prob = Problem(
            p=2.0,
            q=0.5,
            domain=UNIT,
            m=step_weight(UNIT, WIN, 1.0, -0.1),
            c=Weight.constant(-1.0, UNIT),
            window=WIN,
            allow_sign_changing_c=True,
        )
        sup = build_supersolution(prob, Grid.uniform(UNIT, 256))
        k = sup.construction["k"]
        assert float(np.min(sup.u.values)) >= k - 1e-12
        assert k > 1.0


class TestEnforceOrdering:
    def test_ordered_pair_passes_through(self):
        prob = step_problem(2.0, 0.5, 0.5)
        g = Grid.uniform(UNIT, 512)
        sub = build_subsolution(prob, "cor", g)
        sup = build_supersolution(prob, g)
        out = enforce_ordering(sub, sup)
        assert out is sub

    def test_halving_restores_order(self):
        prob = step_problem(2.0, 0.5, 0.5)
        g = Grid.uniform(UNIT, 256)
        sup = build_supersolution(prob, g)
        tall = Certificate("subsolution", triangle(UNIT, 256, peak=40.0), {})
        out = enforce_ordering(tall, sup)
        factor = out.construction["ordering_factor"]
        assert factor < 1.0
        assert math.log2(1.0 / factor) == int(math.log2(1.0 / factor))
        X = np.union1d(out.u.grid.nodes, sup.u.grid.nodes)
        assert np.all(out.u(X) <= sup.u(X))
        # one halving fewer would still violate somewhere
        assert np.any(2.0 * factor * tall.u(X) > sup.u(X))


class TestExponentIdentities:
    @given(p=st.floats(2.0, 4.0), frac=st.floats(0.01, 0.99))
    def test_variant_a_bookkeeping(self, p, frac):
        q = (p - 2.0) + frac * (1.0 - 1e-9)
        if not 0.0 < q < p - 1.0:
            return
        prob = step_problem(p, q, 0.1)
        k, _ = _power_params(prob, 1.0, "A")
        l = (k - 1.0) * (p - 1.0)
        assert l - 1.0 + p == pytest.approx(k * (p - 1.0), rel=1e-10)
        assert l + p - 2.0 == pytest.approx(k * q, rel=1e-10)

    @given(p=st.floats(1.1, 4.0), frac=st.floats(0.05, 0.95))
    def test_hyperbolic_bookkeeping(self, p, frac):
        q = frac * (p - 1.0)
        k = p / (p - 1.0 - q)
        l = (k - 1.0) * (p - 1.0)
        assert l - 1.0 == pytest.approx(k * q, rel=1e-9)
        assert k ** (p - 1.0) * l == pytest.approx(c_pq(p, q), rel=1e-9)
