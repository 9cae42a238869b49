"""Linear stability of stationary points: spectra, verdicts, consistency.

The strongest check here integrates the full nonlinear width equations
from a point nudged along an unstable eigenvector and fits the observed
growth rate, which must reproduce the eigenvalue of the linearization.
"""

import math

import numpy as np
import pytest

from logtrap.core import GaussonState, Stability, TrapConfig
from logtrap.gausson_ode import OdeSettings, integrate
from logtrap.stability import (
    STAB_TOL,
    SpectrumReport,
    Subsystem,
    classify,
    classify_scan,
    com_matrix,
    com_spectrum,
    shape_jacobian,
    shape_jacobian_analytic,
    write_spectra_csv,
)
from logtrap.stationary import (
    ContinuationSettings,
    StationaryPoint,
    find_all_roots,
    solve_zero_rotation,
    trace_branches,
)

W1 = math.sqrt(2.0 / 3.0)
W2 = math.sqrt(4.0 / 3.0)


class TestShapeJacobian:
    def test_finite_difference_matches_analytic(self):
        for b, om in ((1.0, 0.9), (-1.0, 1.1), (1.0, 1.3), (0.0, 0.5)):
            cfg = TrapConfig(W1, W2, b=b, Omega=om)
            for p in find_all_roots(cfg):
                fd = shape_jacobian(p, cfg)
                an = shape_jacobian_analytic(p, cfg)
                assert np.max(np.abs(fd - an)) < 1e-8

    def test_rejects_non_stationary_point(self):
        cfg = TrapConfig(W1, W2, b=1.0, Omega=0.3)
        fake = StationaryPoint(alpha1=1.0, alpha2=1.0, beta=0.0, Omega=0.3, residual=0.5)
        with pytest.raises(ValueError):
            shape_jacobian(fake, cfg)

    def test_harmonic_mode_frequencies(self):
        # Without the logarithmic term the shape spectrum is known exactly:
        # breathing modes at 2 w1 and 2 w2, a quadrupole pair at w1 + w2.
        cfg = TrapConfig(W1, W2, b=0.0, Omega=0.0)
        p = solve_zero_rotation(cfg)
        eig = np.linalg.eigvals(shape_jacobian_analytic(p, cfg))
        assert np.max(np.abs(eig.real)) < 1e-10
        got = np.sort(np.abs(eig.imag))
        expected = np.sort([2 * W1, 2 * W1, 2 * W2, 2 * W2, W1 + W2, W1 + W2])
        assert np.allclose(got, expected, atol=1e-9)


class TestShapeClassification:
    def test_repulsive_three_root_window(self):
        cfg = TrapConfig(W1, W2, b=1.0, Omega=1.3)
        roots = find_all_roots(cfg)
        reports = [classify(p, cfg) for p in roots]
        assert reports[0].classification is Stability.UNSTABLE
        assert reports[0].max_real_part == pytest.approx(0.3930474761143393, abs=1e-8)
        assert reports[1].classification is Stability.MARGINAL
        assert reports[2].classification is Stability.MARGINAL

    def test_attractive_coexistence_window(self):
        cfg = TrapConfig(W1, W2, b=-1.0, Omega=1.1)
        roots = find_all_roots(cfg)
        reports = [classify(p, cfg) for p in roots]
        assert reports[0].classification is Stability.MARGINAL
        assert reports[1].classification is Stability.UNSTABLE
        assert reports[1].max_real_part == pytest.approx(0.17797437247599243, abs=1e-8)

    def test_spectrum_report_structure(self):
        cfg = TrapConfig(W1, W2, b=1.0, Omega=0.9)
        rep = classify(find_all_roots(cfg)[1], cfg)
        assert isinstance(rep, SpectrumReport)
        assert rep.subsystem is Subsystem.SHAPE
        assert len(rep.eigenvalues) == 6
        # Eigenvalues come in +/- pairs for this Hamiltonian flow.
        assert rep.max_real_part == pytest.approx(
            -min(z.real for z in rep.eigenvalues), abs=1e-9
        )
        res = sorted(z.real for z in rep.eigenvalues)
        assert res == [z.real for z in rep.eigenvalues]


class TestNonlinearConsistency:
    def test_unstable_eigenvalue_sets_observed_growth_rate(self):
        cfg = TrapConfig(W1, W2, b=1.0, Omega=1.3)
        p = find_all_roots(cfg)[0]
        jac = shape_jacobian_analytic(p, cfg)
        w, v = np.linalg.eig(jac)
        iu = int(np.argmax(w.real))
        lam = w[iu].real
        vec = v[:, iu].real
        vec /= np.linalg.norm(vec)

        eps = 1e-6
        base = np.array([p.alpha1, p.alpha2, 0.0, 0.0, 0.0, p.beta])
        a11, a22, a12, b11, b22, b12 = base + eps * vec
        start = GaussonState.from_matrices(
            [[a11, a12], [a12, a22]], [[b11, b12], [b12, b22]]
        )
        traj = integrate(start, cfg, OdeSettings(t_end=12.0, sample_every=100))
        devs = np.array(
            [max(np.abs(s.A - p.A).max(), np.abs(s.B - p.B).max()) for s in traj.samples]
        )
        assert devs[-1] / devs[0] > 50.0
        rate = np.polyfit(np.asarray(traj.times), np.log(devs), 1)[0]
        assert rate == pytest.approx(lam, rel=1e-3)

    def test_marginal_point_stays_bounded(self):
        cfg = TrapConfig(W1, W2, b=1.0, Omega=1.3)
        p = find_all_roots(cfg)[1]
        eps = 1e-6
        start = GaussonState.from_matrices(
            p.A + np.diag([eps, -eps]), p.B + eps * np.diag([1.0, -1.0])
        )
        traj = integrate(start, cfg, OdeSettings(t_end=12.0, sample_every=100))
        devs = [
            max(np.abs(s.A - p.A).max(), np.abs(s.B - p.B).max()) for s in traj.samples
        ]
        assert max(devs) < 1e-4


class TestCenterOfMass:
    def test_matrix_layout(self):
        cfg = TrapConfig(W1, W2, Omega=0.3)
        m = com_matrix(cfg)
        assert m.shape == (4, 4)
        assert np.allclose(m[:2, 2:], np.eye(2))
        assert np.allclose(m[:2, :2], -cfg.omega_matrix)
        assert np.allclose(m[2:, :2], -cfg.vmat)

    def test_static_trap_frequencies(self):
        rep = com_spectrum(TrapConfig(W1, W2))
        got = np.sort(np.abs(np.array([z.imag for z in rep.eigenvalues])))
        assert np.allclose(got, np.sort([W1, W1, W2, W2]), atol=1e-12)
        assert rep.classification is Stability.MARGINAL
        assert rep.subsystem is Subsystem.CENTER_OF_MASS

    def test_unstable_band_between_trap_frequencies(self):
        verdicts = {
            om: com_spectrum(TrapConfig(W1, W2, Omega=om)).classification
            for om in (0.5, 0.9, 1.0, 1.1, 1.5)
        }
        assert verdicts[0.5] is Stability.MARGINAL
        assert verdicts[0.9] is Stability.UNSTABLE
        assert verdicts[1.0] is Stability.UNSTABLE
        assert verdicts[1.1] is Stability.UNSTABLE
        assert verdicts[1.5] is Stability.MARGINAL

    def test_independent_of_interaction_strength(self):
        a = com_matrix(TrapConfig(W1, W2, Omega=0.7, b=0.0))
        b = com_matrix(TrapConfig(W1, W2, Omega=0.7, b=5.0))
        assert np.array_equal(a, b)


class TestScanClassification:
    def test_classify_scan_fills_every_point(self):
        cfg = TrapConfig(W1, W2, b=1.0)
        scan = trace_branches(
            cfg, ContinuationSettings(omega_min=1.2, omega_max=1.5, n_omega=16)
        )
        classified = classify_scan(scan)
        assert all(p.stability is not None for p in classified.points)
        # Ids restart at the window edge; the smallest-alpha1 branch (id 0
        # here) is the unstable saddle throughout this window.
        verdicts = {p.stability for p in classified.points if p.branch_id == 0}
        assert verdicts == {Stability.UNSTABLE}
        assert len(classified.points) == len(scan.points)
        assert np.array_equal(classified.multiplicity, scan.multiplicity)

    def test_spectra_csv_layout(self, tmp_path):
        cfg = TrapConfig(W1, W2, b=1.0, Omega=1.3)
        p = find_all_roots(cfg)[0]
        entries = [
            (1.3, None, com_spectrum(cfg)),
            (1.3, 0, classify(p, cfg)),
        ]
        path = tmp_path / "spectra.csv"
        write_spectra_csv(entries, path)
        lines = path.read_text().strip().split("\n")
        assert len(lines) == 3
        header = lines[0].split(",")
        assert header[0] == "Omega" and header[-1] == "classification"
        com_row = lines[1].split(",")
        assert com_row[1] == ""  # no branch id for centre-of-mass
        assert com_row[2] == "CenterOfMass"
        assert com_row[-3] == ""  # only four eigenvalues
        shape_row = lines[2].split(",")
        assert shape_row[1] == "0" and shape_row[-1] == "Unstable"


class TestTolerance:
    def test_tolerance_band_is_symmetric(self):
        assert STAB_TOL == 1e-7
        # A spectrum sitting exactly on the axis is marginal, not stable.
        rep = com_spectrum(TrapConfig(W1, W2))
        assert abs(rep.max_real_part) <= STAB_TOL
        assert rep.classification is Stability.MARGINAL
