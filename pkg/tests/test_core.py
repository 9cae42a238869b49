"""Domain types, wave-function evaluation, norms, and frame rotation."""

import math

import numpy as np
import pytest

from logtrap.core import (
    GaussonState,
    StationaryPoint,
    TrapConfig,
    evaluate_wavefunction,
    gausson_norm,
    pack_symmetric,
    rotate_frame,
    rotation_matrix,
    unpack_symmetric,
)

W1 = math.sqrt(2.0 / 3.0)
W2 = math.sqrt(4.0 / 3.0)


class TestTrapConfig:
    def test_frequency_ordering_enforced(self):
        with pytest.raises(ValueError):
            TrapConfig(omega1=1.2, omega2=0.8)
        with pytest.raises(ValueError):
            TrapConfig(omega1=1.0, omega2=1.0)

    def test_positive_frequencies_required(self):
        with pytest.raises(ValueError):
            TrapConfig(omega1=-0.5, omega2=1.0)
        with pytest.raises(ValueError):
            TrapConfig(omega1=0.0, omega2=1.0)

    def test_negative_rotation_normalized(self):
        cfg = TrapConfig(W1, W2, Omega=-0.7)
        assert cfg.Omega == 0.7

    def test_three_dimensional_needs_omega3(self):
        with pytest.raises(ValueError):
            TrapConfig(W1, W2, dim=3)
        cfg = TrapConfig(W1, W2, omega3=2.0, dim=3)
        assert np.allclose(np.diag(cfg.vmat), [W1**2, W2**2, 4.0])

    def test_omega3_rejected_in_two_dimensions(self):
        with pytest.raises(ValueError):
            TrapConfig(W1, W2, omega3=1.0)

    def test_rotation_matrix_is_cross_product(self):
        cfg = TrapConfig(W1, W2, Omega=0.3)
        w = cfg.omega_matrix
        # W v must equal Omega x v for in-plane vectors.
        v = np.array([1.0, 2.0])
        assert np.allclose(w @ v, [-0.3 * 2.0, 0.3 * 1.0])
        assert np.allclose(w, -w.T)

    def test_with_rotation_copies(self):
        cfg = TrapConfig(W1, W2, b=1.0)
        cfg2 = cfg.with_rotation(0.9)
        assert cfg2.Omega == 0.9 and cfg2.b == 1.0
        assert cfg.Omega == 0.0


class TestSymmetricPacking:
    def test_roundtrip_2d_and_3d(self):
        rng = np.random.default_rng(7)
        for dim in (2, 3):
            m = rng.normal(size=(dim, dim))
            m = m + m.T
            assert np.array_equal(unpack_symmetric(pack_symmetric(m), dim), m)

    def test_packing_order_is_diagonal_first(self):
        m = np.array([[1.0, 5.0], [5.0, 2.0]])
        assert np.array_equal(pack_symmetric(m), [1.0, 2.0, 5.0])

    def test_non_symmetric_rejected(self):
        with pytest.raises(ValueError):
            pack_symmetric(np.array([[1.0, 2.0], [0.5, 3.0]]))


class TestGaussonState:
    def test_from_matrices_and_back(self):
        a = np.array([[2.0, 0.3], [0.3, 1.0]])
        b = np.array([[0.1, -0.2], [-0.2, 0.4]])
        s = GaussonState.from_matrices(a, b, xi=(0.5, -0.5), pi=(1.0, 0.0), N=2.0, f=0.3)
        assert np.array_equal(s.A, a)
        assert np.array_equal(s.B, b)
        assert s.dim == 2

    def test_width_matrix_must_be_positive_definite(self):
        with pytest.raises(ValueError):
            GaussonState.from_matrices(np.diag([1.0, -0.5]), np.zeros((2, 2)))
        # Symmetric but indefinite through the off-diagonal:
        with pytest.raises(ValueError):
            GaussonState.from_matrices([[1.0, 2.0], [2.0, 1.0]], np.zeros((2, 2)))

    def test_amplitude_must_be_positive(self):
        with pytest.raises(ValueError):
            GaussonState.from_matrices(np.eye(2), np.zeros((2, 2)), N=0.0)

    def test_arrays_are_read_only(self):
        s = GaussonState.from_matrices(np.eye(2), np.zeros((2, 2)))
        with pytest.raises(ValueError):
            s.a_upper[0] = 5.0
        with pytest.raises(ValueError):
            s.xi[0] = 1.0


class TestEvaluateWavefunction:
    def test_unit_gaussian_at_origin(self):
        s = GaussonState.from_matrices(np.eye(2), np.zeros((2, 2)))
        assert evaluate_wavefunction(s, np.zeros(2)) == pytest.approx(1.0 + 0.0j)

    def test_unit_gaussian_at_unit_radius(self):
        s = GaussonState.from_matrices(np.eye(2), np.zeros((2, 2)))
        val = evaluate_wavefunction(s, np.array([1.0, 0.0]))
        assert val == pytest.approx(math.exp(-0.5))

    def test_anisotropic_with_phase_curvature(self):
        # Hand evaluation at r=(1,1): r.A.r = 2 + 1 = 3, r.B.r = 2*0.3 = 0.6,
        # so amplitude e^{-3/2} and phase -0.3.
        s = GaussonState.from_matrices(
            np.diag([2.0, 1.0]), np.array([[0.0, 0.3], [0.3, 0.0]])
        )
        val = evaluate_wavefunction(s, np.array([1.0, 1.0]))
        assert abs(val) == pytest.approx(math.exp(-1.5), rel=1e-14)
        assert np.angle(val) == pytest.approx(-0.3, abs=1e-14)

    def test_batch_matches_single_points(self):
        rng = np.random.default_rng(11)
        a = np.array([[1.5, 0.2], [0.2, 0.9]])
        s = GaussonState.from_matrices(
            a, np.array([[0.1, -0.3], [-0.3, 0.2]]), xi=(0.4, -0.1), pi=(0.7, 0.2),
            N=1.3, f=0.5,
        )
        pts = rng.normal(size=(8, 2))
        batch = evaluate_wavefunction(s, pts)
        for k in range(8):
            # Summation order differs between the batched and single-point
            # paths, so agreement is to rounding, not bitwise.
            assert batch[k] == pytest.approx(evaluate_wavefunction(s, pts[k]), rel=1e-13)


class TestGaussonNorm:
    def test_unit_widths(self):
        s = GaussonState.from_matrices(np.eye(2), np.zeros((2, 2)))
        assert gausson_norm(s) == pytest.approx(math.pi)

    def test_width_scaling(self):
        s = GaussonState.from_matrices(4.0 * np.eye(2), np.zeros((2, 2)))
        assert gausson_norm(s) == pytest.approx(math.pi / 4.0)

    def test_unit_normalization_in_3d(self):
        s = GaussonState.from_matrices(
            np.eye(3), np.zeros((3, 3)), xi=np.zeros(3), pi=np.zeros(3),
            N=math.pi ** -0.75,
        )
        assert gausson_norm(s) == pytest.approx(1.0)

    def test_matches_grid_quadrature(self):
        s = GaussonState.from_matrices(
            np.array([[1.7, 0.4], [0.4, 2.3]]),
            np.array([[0.2, -0.1], [-0.1, 0.3]]),
            xi=(0.3, -0.2), pi=(0.5, 0.1), N=1.2, f=0.7,
        )
        xs = np.linspace(-8, 8, 801)
        xg, yg = np.meshgrid(xs, xs, indexing="ij")
        pts = np.column_stack([xg.ravel(), yg.ravel()])
        psi = evaluate_wavefunction(s, pts)
        dx = xs[1] - xs[0]
        quad = float((np.abs(psi) ** 2).sum() * dx * dx)
        assert quad == pytest.approx(gausson_norm(s), rel=1e-8)


class TestRotateFrame:
    def _state(self):
        return GaussonState.from_matrices(
            np.array([[2.0, 0.3], [0.3, 1.2]]),
            np.array([[0.1, 0.4], [0.4, -0.2]]),
            xi=(0.5, -0.1), pi=(0.2, 0.6), N=1.1, f=0.9, t=2.0,
        )

    def test_zero_angle_is_identity(self):
        s = self._state()
        r = rotate_frame(s, 0.0)
        assert np.array_equal(r.A, s.A) and np.array_equal(r.B, s.B)
        assert np.array_equal(r.xi, s.xi) and np.array_equal(r.pi, s.pi)
        assert (r.N, r.f, r.t) == (s.N, s.f, s.t)

    def test_half_turn_preserves_diagonal_widths(self):
        s = GaussonState.from_matrices(np.diag([2.0, 1.0]), np.zeros((2, 2)))
        r = rotate_frame(s, math.pi)
        assert np.allclose(r.A, s.A, atol=1e-15)

    def test_quarter_turn_swaps_axes(self):
        s = GaussonState.from_matrices(np.diag([2.0, 1.0]), np.zeros((2, 2)))
        r = rotate_frame(s, math.pi / 2.0)
        assert np.allclose(r.A, np.diag([1.0, 2.0]), atol=1e-15)

    def test_rotation_roundtrip(self):
        s = self._state()
        r = rotate_frame(rotate_frame(s, 0.77), -0.77)
        assert np.allclose(r.A, s.A, atol=1e-14)
        assert np.allclose(r.B, s.B, atol=1e-14)
        assert np.allclose(r.xi, s.xi, atol=1e-15)
        assert np.allclose(r.pi, s.pi, atol=1e-15)

    def test_norm_invariant(self):
        s = self._state()
        assert gausson_norm(rotate_frame(s, 1.3)) == pytest.approx(gausson_norm(s))

    def test_rotation_matrix_3d_fixes_third_axis(self):
        r = rotation_matrix(0.6, dim=3)
        assert np.allclose(r @ np.array([0.0, 0.0, 1.0]), [0.0, 0.0, 1.0])


class TestStationaryPoint:
    def test_negative_widths_rejected(self):
        with pytest.raises(ValueError):
            StationaryPoint(alpha1=-1.0, alpha2=1.0, beta=0.0, Omega=0.0, residual=0.0)

    def test_as_gausson_state_has_unit_norm(self):
        p = StationaryPoint(alpha1=1.7, alpha2=2.4, beta=0.3, Omega=0.5, residual=0.0)
        s = p.as_gausson_state()
        assert gausson_norm(s) == pytest.approx(1.0, rel=1e-14)
        assert np.array_equal(s.A, np.diag([1.7, 2.4]))
        assert s.B[0, 1] == 0.3 and s.B[0, 0] == 0.0
