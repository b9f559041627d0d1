import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from toruslab.dynamics import (HyperbolicToralMap, NotHyperbolic,
                               torus_distance, verify_hyperbolicity, wrap)

LAMBDA_CAT = (3.0 + math.sqrt(5.0)) / 2.0
LAMBDA_GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0

unit = st.floats(min_value=0.0, max_value=1.0, exclude_max=True,
                 allow_nan=False)
points = st.tuples(unit, unit)


class TestConstruction:
    def test_identity_rejected(self):
        with pytest.raises(ValueError, match="hyperbolic"):
            HyperbolicToralMap([[1, 0], [0, 1]])

    def test_parabolic_rejected(self):
        with pytest.raises(ValueError, match="hyperbolic"):
            HyperbolicToralMap([[1, 1], [0, 1]])

    def test_det_minus_one_trace_zero_rejected(self):
        with pytest.raises(ValueError, match="hyperbolic"):
            HyperbolicToralMap([[0, 1], [1, 0]])

    def test_golden_matrix_admitted(self):
        m = HyperbolicToralMap([[1, 1], [1, 0]])
        assert m.det == -1
        assert abs(m.lam_u - LAMBDA_GOLDEN) < 1e-12

    def test_non_unimodular_rejected(self):
        with pytest.raises(ValueError, match="unimodular"):
            HyperbolicToralMap([[2, 0], [0, 1]])

    def test_contraction_bound_enforced(self):
        # amp * |A^-1| * 2 pi |c| |k| must stay below 1/2
        with pytest.raises(ValueError, match="contract"):
            HyperbolicToralMap([[2, 1], [1, 1]], 0.4, [((0.5, 0.0), (0, 1))])

    def test_zero_frequency_rejected(self):
        with pytest.raises(ValueError, match="nonzero"):
            HyperbolicToralMap([[2, 1], [1, 1]], 0.01, [((1.0, 0.0), (0, 0))])


class TestStep:
    def test_fixed_point(self, cat):
        assert np.allclose(cat.step([0.0, 0.0]), [0.0, 0.0])

    def test_half_half(self, cat):
        # A (1/2, 1/2) = (3/2, 1) = (1/2, 0) mod 1
        assert np.allclose(cat.step([0.5, 0.5]), [0.5, 0.0])

    def test_golden_example(self, golden):
        assert np.allclose(golden.step([0.25, 0.5]), [0.75, 0.25])

    def test_batch_shape(self, cat, rng):
        pts = rng.random((40, 2))
        out = cat.step(pts)
        assert out.shape == (40, 2)
        assert np.all((out >= 0) & (out < 1))


class TestInverse:
    def test_linear_example(self, cat):
        # A^-1 = [[1,-1],[-1,2]], A^-1 (1/2, 0) = (1/2, -1/2) = (1/2, 1/2)
        assert np.allclose(cat.step_inverse([0.5, 0.0]), [0.5, 0.5])

    def test_fixed_point(self, cat):
        assert np.allclose(cat.step_inverse([0.0, 0.0]), [0.0, 0.0])

    @settings(max_examples=50, deadline=None)
    @given(p=points)
    def test_roundtrip_linear(self, cat, p):
        q = cat.step_inverse(cat.step(np.array(p)))
        assert torus_distance(q, np.array(p)) <= 1e-10

    def test_roundtrip_perturbed_bulk(self):
        m = HyperbolicToralMap([[2, 1], [1, 1]], 0.004,
                               [((1.0, 0.5), (1, 2)), ((0.0, 1.0), (2, -1))])
        pts = np.random.default_rng(7).random((10_000, 2))
        back = m.step_inverse(m.step(pts))
        assert float(np.max(torus_distance(back, pts))) <= 1e-10


class TestDifferential:
    def test_linear_is_matrix(self, cat, rng):
        pts = rng.random((5, 2))
        D = cat.differential(pts)
        assert np.allclose(D, cat.matrix.astype(float))
        assert np.allclose(np.linalg.det(D), 1.0)

    def test_perturbed_entry_formula(self):
        m = HyperbolicToralMap([[2, 1], [1, 1]], 0.005, [((1.0, 0.0), (0, 1))])
        p = np.array([0.3, 0.7])
        D = m.differential(p)
        expected_12 = 1.0 + 0.005 * 2 * math.pi * math.cos(2 * math.pi * 0.7)
        assert abs(D[0, 1] - expected_12) < 1e-14
        assert abs(D[0, 0] - 2.0) < 1e-14
        assert abs(D[1, 0] - 1.0) < 1e-14
        assert abs(D[1, 1] - 1.0) < 1e-14

    def test_matches_finite_differences(self):
        m = HyperbolicToralMap([[2, 1], [1, 1]], 0.008,
                               [((0.8, 0.3), (1, 1)), ((0.2, -0.4), (0, 2))])
        rng = np.random.default_rng(11)
        pts = rng.random((1000, 2))
        D = m.differential(pts)
        h = 1e-6

        def lift(q):  # unwrapped map for differencing
            return q @ m.matrix.T.astype(float) + m.amplitude * m._psi(q)

        for axis in range(2):
            e = np.zeros(2)
            e[axis] = h
            fd = (lift(pts + e) - lift(pts - e)) / (2 * h)
            assert float(np.max(np.abs(fd - D[:, :, axis]))) < 1e-6


class TestOrbit:
    def test_single(self, cat):
        o = cat.orbit([0.3, 0.4], 1)
        assert o.shape == (1, 2)
        assert np.allclose(o[0], [0.3, 0.4])

    def test_fixed_point_constant(self, cat):
        o = cat.orbit([0.0, 0.0], 9)
        assert np.allclose(o, 0.0)

    def test_three_steps(self, cat):
        o = cat.orbit([0.5, 0.5], 3)
        assert np.allclose(o, [[0.5, 0.5], [0.5, 0.0], [0.0, 0.5]])

    @settings(max_examples=30, deadline=None)
    @given(p=points, n=st.integers(min_value=2, max_value=12))
    def test_shift_property(self, cat, p, n):
        o = cat.orbit(np.array(p), n)
        o2 = cat.orbit(cat.step(np.array(p)), n - 1)
        assert np.allclose(o[1:], o2)

    @pytest.mark.parametrize("q", range(2, 21))
    def test_rational_points_periodic(self, q):
        # exact arithmetic: the map permutes the q^2 rational points (a/q, b/q)
        A = np.array([[2, 1], [1, 1]], dtype=object)
        state = (1 % q, max(q - 1, 0))
        seen = {state: 0}
        a, b = state
        for step in range(1, q * q + 1):
            a, b = (2 * a + b) % q, (a + b) % q
            if (a, b) == state:
                assert step <= q * q
                return
        pytest.fail("no period within q^2 steps")

    def test_rational_float_orbit_matches_exact(self, cat):
        q = 7
        a, b = 2, 3
        orbit = cat.orbit([a / q, b / q], 20)
        ea, eb = a, b
        for i in range(20):
            assert torus_distance(orbit[i], np.array([ea / q, eb / q])) < 1e-7
            ea, eb = (2 * ea + eb) % q, (ea + eb) % q


class TestWrap:
    def test_tiny_negative(self):
        w = wrap(np.array([-1e-18, 0.5]))
        assert w[0] < 1.0 and w[0] >= 0.0

    @settings(max_examples=50, deadline=None)
    @given(p=points)
    def test_distance_bound(self, p):
        d = torus_distance(np.array(p), np.array([0.9, 0.1]))
        assert 0.0 <= d <= math.sqrt(2.0) / 2.0 + 1e-15


class TestConeVerification:
    def test_cat_exact_expansion(self, cat):
        rep = verify_hyperbolicity(cat, 32)
        assert rep.passed
        assert abs(rep.lambda_expand - LAMBDA_CAT) < 1e-9
        assert abs(rep.lambda_contract - 1.0 / LAMBDA_CAT) < 1e-9

    def test_golden_exact_expansion(self, golden):
        rep = verify_hyperbolicity(golden, 32)
        assert rep.passed
        assert abs(rep.lambda_expand - LAMBDA_GOLDEN) < 1e-9
        assert rep.lambda_contract < 1.0

    def test_steep_perturbation_fails_tight_cone(self):
        # passes the construction contraction bound but rotates directions
        # past a 0.02 cone; the same map is fine at the default angle
        m = HyperbolicToralMap([[2, 1], [1, 1]], 0.4, [((0.075, 0.0), (0, 1))])
        with pytest.raises(NotHyperbolic):
            verify_hyperbolicity(m, 32, cone_half_angle=0.02)
        assert verify_hyperbolicity(m, 32, cone_half_angle=0.15).passed

    def test_small_grid_rejected(self, cat):
        with pytest.raises(ValueError):
            verify_hyperbolicity(cat, 8)

    def test_perturbed_passes_default(self):
        m = HyperbolicToralMap([[2, 1], [1, 1]], 0.005, [((1.0, 0.0), (0, 1))])
        rep = verify_hyperbolicity(m, 32)
        assert rep.passed
        assert rep.lambda_expand > 1.0 > rep.lambda_contract
