"""Time integration of the Gaussian-ansatz ODE system.

The closed-form oracle used throughout: with b = 0 and no rotation the
width dynamics on each principal axis collapse to a complex Riccati
equation.  Writing z = b + i*a (phase curvature plus i times inverse
squared width), the equations da/dt = 2ab and db/dt = b^2 - a^2 + w^2
combine into dz/dt = z^2 + w^2, solved by z(t) = w*tan(w*t + atan(z0/w))
with a complex constant.  That gives an independent analytic trajectory
to integrate against.
"""

import cmath
import math

import numpy as np
import pytest

from logtrap.core import GaussonState, TrapConfig, gausson_norm
from logtrap.errors import PositiveDefinitenessLost
from logtrap.gausson_ode import (
    OdeMethod,
    OdeSettings,
    Trajectory,
    energy,
    integrate,
    rhs,
    write_trajectory_csv,
)
from logtrap.stationary import Region, solve_linear_rotating

W1 = math.sqrt(2.0 / 3.0)
W2 = math.sqrt(4.0 / 3.0)


def generic_state():
    return GaussonState.from_matrices(
        np.array([[1.8, 0.25], [0.25, 3.1]]),
        np.array([[0.2, -0.35], [-0.35, -0.1]]),
        xi=(0.3, -0.2), pi=(0.1, 0.4), N=1.0, f=0.0,
    )


def riccati_width(a0, b0, w, t):
    """Exact diagonal width/curvature pair at time t for b=0, Omega=0."""
    z0 = complex(b0, a0)
    z = w * cmath.tan(w * t + cmath.atan(z0 / w))
    return z.imag, z.real


class TestRhs:
    def test_stationary_point_has_zero_shape_derivative(self):
        cfg = TrapConfig(W1, W2, Omega=0.5)
        p = solve_linear_rotating(cfg, Region.BELOW)
        d = rhs(p.as_gausson_state(), cfg)
        assert np.max(np.abs(d.dA)) < 1e-12
        assert np.max(np.abs(d.dB)) < 1e-12
        assert np.max(np.abs(d.dxi)) < 1e-15
        assert np.max(np.abs(d.dpi)) < 1e-15
        assert d.dN == pytest.approx(0.0, abs=1e-15)
        # The global phase still advances at a stationary point.
        assert d.df != 0.0

    def test_center_equations_are_classical(self):
        cfg = TrapConfig(W1, W2, Omega=0.3)
        s = GaussonState.from_matrices(
            np.eye(2), np.zeros((2, 2)), xi=(0.5, -0.2), pi=(0.1, 0.7)
        )
        d = rhs(s, cfg)
        # dxi = pi - Omega x xi, dpi = -V xi - Omega x pi.
        assert np.allclose(d.dxi, [0.1 - 0.3 * 0.2, 0.7 - 0.3 * 0.5])
        assert np.allclose(
            d.dpi,
            [-W1**2 * 0.5 + 0.3 * 0.7, -W2**2 * (-0.2) - 0.3 * 0.1],
        )

    def test_amplitude_tracks_trace_of_b(self):
        cfg = TrapConfig(W1, W2)
        s = GaussonState.from_matrices(
            np.eye(2), np.array([[0.4, 0.1], [0.1, -0.1]]), N=2.0
        )
        assert rhs(s, cfg).dN == pytest.approx(0.5 * 0.3 * 2.0)


class TestRiccatiOracle:
    @pytest.mark.parametrize("method", [OdeMethod.RK4_FIXED, OdeMethod.RK45_ADAPTIVE])
    def test_diagonal_widths_follow_tangent_solution(self, method):
        cfg = TrapConfig(W1, W2, b=0.0, Omega=0.0)
        s = GaussonState.from_matrices(
            np.diag([1.5, 0.8]), np.diag([0.4, -0.3])
        )
        t_end = 1.7
        traj = integrate(s, cfg, OdeSettings(t_end=t_end, dt=1e-3, method=method))
        final = traj.final
        a1, b1 = riccati_width(1.5, 0.4, W1, t_end)
        a2, b2 = riccati_width(0.8, -0.3, W2, t_end)
        assert final.A[0, 0] == pytest.approx(a1, abs=1e-8)
        assert final.A[1, 1] == pytest.approx(a2, abs=1e-8)
        assert final.B[0, 0] == pytest.approx(b1, abs=1e-8)
        assert final.B[1, 1] == pytest.approx(b2, abs=1e-8)
        assert abs(final.A[0, 1]) < 1e-12 and abs(final.B[0, 1]) < 1e-12

    def test_classical_center_oscillation(self):
        cfg = TrapConfig(W1, W2, b=1.0, Omega=0.0)
        s = GaussonState.from_matrices(
            np.diag([2.0, 2.5]), np.zeros((2, 2)), xi=(0.1, 0.0)
        )
        t_end = 7.0
        traj = integrate(s, cfg, OdeSettings(t_end=t_end, dt=1e-3))
        assert traj.final.xi[0] == pytest.approx(0.1 * math.cos(W1 * t_end), abs=1e-9)
        assert traj.final.pi[0] == pytest.approx(-0.1 * W1 * math.sin(W1 * t_end), abs=1e-9)


class TestConservation:
    def test_norm_and_energy_constant_along_flow(self):
        cfg = TrapConfig(W1, W2, b=1.0, Omega=0.7)
        traj = integrate(generic_state(), cfg, OdeSettings(t_end=5.0))
        norm = np.asarray(traj.norm)
        en = np.asarray(traj.energy)
        assert np.max(np.abs(norm - norm[0])) / norm[0] < 1e-10
        assert np.max(np.abs(en - en[0])) < 1e-7

    def test_stationary_point_is_fixed(self):
        cfg = TrapConfig(W1, W2, b=1.0, Omega=0.9)
        from logtrap.stationary import ContinuationSettings, find_all_roots

        roots = find_all_roots(cfg, ContinuationSettings())
        p = roots[1]  # the compact coexisting root
        traj = integrate(p.as_gausson_state(), cfg, OdeSettings(t_end=5.0))
        dev_a = np.max(np.abs(traj.final.A - p.A))
        dev_b = np.max(np.abs(traj.final.B - p.B))
        assert dev_a < 1e-8 and dev_b < 1e-8

    def test_isotropic_ground_state_energy(self):
        # For b=0 the normalized stationary Gaussian has energy (w1+w2)/2.
        cfg = TrapConfig(W1, W2, b=0.0, Omega=0.0)
        s = GaussonState.from_matrices(
            np.diag([W1, W2]), np.zeros((2, 2)), N=(W1 * W2) ** 0.25 / math.sqrt(math.pi)
        )
        assert energy(s, cfg) == pytest.approx(0.5 * (W1 + W2), rel=1e-13)
        assert gausson_norm(s) == pytest.approx(1.0, rel=1e-13)


class TestThreeDimensional:
    def _setup(self):
        cfg = TrapConfig(W1, W2, omega3=2.0, b=0.5, Omega=0.4, dim=3)
        a = np.array([[1.2, 0.1, 0.0], [0.1, 0.8, -0.05], [0.0, -0.05, 1.5]])
        b = np.array([[0.1, 0.05, 0.0], [0.05, -0.2, 0.0], [0.0, 0.0, 0.3]])
        s = GaussonState.from_matrices(
            a, b, xi=(0.2, -0.1, 0.05), pi=(0.0, 0.3, -0.1)
        )
        return cfg, s

    def test_energy_and_norm_conserved(self):
        cfg, s = self._setup()
        traj = integrate(s, cfg, OdeSettings(t_end=2.0))
        norm = np.asarray(traj.norm)
        en = np.asarray(traj.energy)
        assert np.max(np.abs(norm - norm[0])) / norm[0] < 1e-9
        assert np.max(np.abs(en - en[0])) < 1e-7

    def test_planar_block_matches_two_dimensional_run(self):
        # A state that is block diagonal in (xy)|z stays so under rotation
        # about z, and its planar block must follow the 2D equations.
        cfg3 = TrapConfig(W1, W2, omega3=2.0, b=1.0, Omega=0.6, dim=3)
        cfg2 = TrapConfig(W1, W2, b=1.0, Omega=0.6)
        a2 = np.array([[1.8, 0.25], [0.25, 3.1]])
        b2 = np.array([[0.2, -0.35], [-0.35, -0.1]])
        a3 = np.block([[a2, np.zeros((2, 1))], [np.zeros((1, 2)), np.array([[1.0]])]])
        b3 = np.zeros((3, 3))
        b3[:2, :2] = b2
        s2 = GaussonState.from_matrices(a2, b2)
        s3 = GaussonState.from_matrices(
            a3, b3, xi=np.zeros(3), pi=np.zeros(3)
        )
        settings = OdeSettings(t_end=1.0, dt=1e-3, method=OdeMethod.RK4_FIXED)
        f2 = integrate(s2, cfg2, settings).final
        f3 = integrate(s3, cfg3, settings).final
        assert np.allclose(f3.A[:2, :2], f2.A, atol=1e-12)
        assert np.allclose(f3.B[:2, :2], f2.B, atol=1e-12)
        assert np.max(np.abs(f3.A[2, :2])) < 1e-15


class TestFailureModes:
    def _collapsing_state(self):
        return GaussonState.from_matrices(
            np.diag([1.5e-12, 1.0]), np.diag([-1.0, 0.0])
        )

    @pytest.mark.parametrize("method", [OdeMethod.RK4_FIXED, OdeMethod.RK45_ADAPTIVE])
    def test_width_collapse_raises(self, method):
        cfg = TrapConfig(W1, W2)
        with pytest.raises(PositiveDefinitenessLost) as exc:
            integrate(self._collapsing_state(), cfg, OdeSettings(t_end=5.0, method=method))
        assert 0.0 < exc.value.t <= 5.0

    def test_incommensurate_grid_rejected(self):
        cfg = TrapConfig(W1, W2)
        with pytest.raises(ValueError):
            integrate(
                generic_state(), cfg,
                OdeSettings(t_end=0.105, dt=0.01, method=OdeMethod.RK4_FIXED),
            )

    def test_bad_settings_rejected(self):
        with pytest.raises(ValueError):
            OdeSettings(t_end=-1.0)
        with pytest.raises(ValueError):
            OdeSettings(t_end=1.0, dt=0.0)
        with pytest.raises(ValueError):
            OdeSettings(t_end=1.0, sample_every=0)


class TestSamplingAndCsv:
    def test_sample_stride(self):
        cfg = TrapConfig(W1, W2)
        traj = integrate(
            generic_state(), cfg,
            OdeSettings(t_end=0.1, dt=0.01, method=OdeMethod.RK4_FIXED, sample_every=5),
        )
        assert np.allclose(traj.times, [0.0, 0.05, 0.1])

    def test_methods_agree(self):
        cfg = TrapConfig(W1, W2, b=1.0, Omega=0.7)
        s = generic_state()
        f4 = integrate(s, cfg, OdeSettings(t_end=1.0, dt=1e-3, method=OdeMethod.RK4_FIXED)).final
        f5 = integrate(s, cfg, OdeSettings(t_end=1.0, method=OdeMethod.RK45_ADAPTIVE)).final
        assert np.allclose(f4.A, f5.A, atol=1e-8)
        assert np.allclose(f4.B, f5.B, atol=1e-8)
        assert np.allclose(f4.xi, f5.xi, atol=1e-9)

    def test_csv_roundtrip(self, tmp_path):
        cfg = TrapConfig(W1, W2, b=1.0, Omega=0.7)
        traj = integrate(
            generic_state(), cfg,
            OdeSettings(t_end=0.2, dt=0.01, method=OdeMethod.RK4_FIXED, sample_every=4),
        )
        path = tmp_path / "traj.csv"
        write_trajectory_csv(traj, path)
        data = np.genfromtxt(path, delimiter=",", names=True)
        assert data.shape[0] == len(traj.samples)
        assert np.allclose(data["t"], traj.times)
        assert np.allclose(data["A11"], [s.A[0, 0] for s in traj.samples])
        assert np.allclose(data["norm"], traj.norm)
        assert np.allclose(data["energy"], traj.energy)
        assert isinstance(traj, Trajectory)
