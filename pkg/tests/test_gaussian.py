import math

import numpy as np
import pytest

from magsqueeze.gaussian import (
    CovarianceState,
    closed_form_vacuum_variances,
    compare,
    drift_matrices,
    evolve_covariance,
    oracle_trajectory,
    thermal_covariance,
    vacuum_covariance,
)
from magsqueeze.hamiltonians import TimeDependentHamiltonian, build_quadratic_magnon
from magsqueeze.lindblad import (
    CollapseTerm,
    IntegratorSettings,
    LindbladModel,
    evolve,
)
from magsqueeze.operators import HilbertSpec, annihilation, fock_projector
from magsqueeze.params import TWO_PI

from conftest import make_derived


def quadratic_model(d, n, kappa_mhz, nbar=0.0):
    m = annihilation(n)
    kap = TWO_PI * kappa_mhz
    return LindbladModel(
        TimeDependentHamiltonian(build_quadratic_magnon(d, n)),
        (
            CollapseTerm(m, kap * (nbar + 1.0), ("magnon", "lower")),
            CollapseTerm(m.conj().T, kap * nbar, ("magnon", "raise")),
        ),
        HilbertSpec(n, qubit_present=False),
        label="quadratic",
    )


class TestDriftMatrices:
    def test_free_rotation(self):
        d = make_derived(g_c=0.0)
        a, diff = drift_matrices(d, 0.0, 0.0)
        w = TWO_PI * 3.0
        assert np.allclose(a, [[0.0, w], [-w, 0.0]])
        assert np.allclose(diff, 0.0)

    def test_nilpotent_at_critical_point(self):
        d = make_derived(g_c=1.0)
        a, _ = drift_matrices(d, 0.0, 0.0)
        assert np.max(np.abs(a @ a)) == 0.0

    def test_ou_relaxation(self):
        d = make_derived(delta_m=0.0, g_c=0.0)
        kappa = 0.8
        nbar = 0.4
        a, diff = drift_matrices(d, kappa, nbar)
        traj = evolve_covariance(a, diff, vacuum_covariance(), np.linspace(0, 5, 40))
        kap = TWO_PI * kappa
        expected = nbar + 0.5 + (0.5 - (nbar + 0.5)) * np.exp(-kap * traj.times_us)
        assert np.max(np.abs(traj.v11 - expected)) < 1e-8
        assert np.max(np.abs(traj.v22 - expected)) < 1e-8


class TestEvolveCovariance:
    def test_constant_when_static(self):
        traj = evolve_covariance(np.zeros((2, 2)), np.zeros((2, 2)),
                                 thermal_covariance(0.3), np.linspace(0, 2, 11))
        assert np.max(np.abs(traj.v11 - 0.8)) == 0.0
        assert np.max(np.abs(traj.means)) == 0.0

    @pytest.mark.parametrize("g_c", [0.5, 0.9, 0.9988])
    def test_matches_closed_form(self, g_c):
        d = make_derived(g_c=g_c)
        a, diff = drift_matrices(d, 0.0, 0.0)
        t = np.linspace(0.0, 2.0, 401)
        traj = evolve_covariance(a, diff, vacuum_covariance(), t)
        v11, v22, v12 = closed_form_vacuum_variances(d.delta_m, g_c, t)
        assert np.max(np.abs(traj.v11 - v11)) < 1e-9 * max(1.0, v11.max())
        assert np.max(np.abs(traj.v22 - v22)) < 1e-10
        assert np.max(np.abs(traj.v12 - v12)) < 1e-9 * max(1.0, np.abs(v12).max())

    def test_symplectic_invariant_conserved(self):
        d = make_derived(g_c=0.8)
        a, diff = drift_matrices(d, 0.0, 0.0)
        traj = evolve_covariance(a, diff, vacuum_covariance(), np.linspace(0, 3, 200))
        dets = traj.v11 * traj.v22 - traj.v12**2
        assert np.max(np.abs(dets - 0.25)) < 1e-9

    def test_critical_shear_branch(self):
        v11, v22, v12 = closed_form_vacuum_variances(3.0, 1.0, np.array([0.0, 0.1]))
        tau = TWO_PI * 3.0 * 0.1
        assert v22[1] == 0.5
        assert v11[1] == pytest.approx(0.5 * (1 + tau**2), rel=1e-12)
        assert v12[1] == pytest.approx(0.5 * tau, rel=1e-12)

    def test_mean_transport(self):
        d = make_derived(g_c=0.5)
        a, diff = drift_matrices(d, 0.0, 0.0)
        state0 = CovarianceState(np.array([1.0, 0.0]), 0.5 * np.eye(2))
        t = np.linspace(0, 1, 50)
        traj = evolve_covariance(a, diff, state0, t)
        u = 1 - 0.25
        w = TWO_PI * 3.0 * math.sqrt(u)
        assert np.max(np.abs(traj.means[:, 0] - np.cos(w * t))) < 1e-9
        assert np.max(np.abs(traj.means[:, 1] + math.sqrt(u) * np.sin(w * t))) < 1e-9


class TestEngineOracleAgreement:
    def test_identical_inputs_zero_report(self):
        d = make_derived(g_c=0.9)
        t = np.linspace(0, 1, 21)
        traj = oracle_trajectory(d, 0.0, 0.0, vacuum_covariance(), t)

        class Fake:
            times_ns = t * 1e3
            v11 = traj.v11
            v22 = traj.v22
            v12 = traj.v12
            mean1 = traj.means[:, 0]
            mean2 = traj.means[:, 1]

        report = compare(Fake(), traj)
        assert report.worst == 0.0

    def test_grid_mismatch_rejected(self):
        d = make_derived(g_c=0.9)
        t = np.linspace(0, 1, 21)
        traj = oracle_trajectory(d, 0.0, 0.0, vacuum_covariance(), t)

        class Fake:
            times_ns = t * 1e3 + 1.0
            v11 = traj.v11
            v22 = traj.v22
            v12 = traj.v12
            mean1 = traj.means[:, 0]
            mean2 = traj.means[:, 1]

        with pytest.raises(ValueError, match="grids"):
            compare(Fake(), traj)

    def test_closed_quadratic_model(self):
        d = make_derived(g_c=0.9)
        n = 40
        model = quadratic_model(d, n, 0.0)
        traj = evolve(model, fock_projector(0, n), 2.0, 0.02,
                      IntegratorSettings(record_spectrum=False))
        oracle = oracle_trajectory(d, 0.0, 0.0, vacuum_covariance(),
                                   traj.times_ns * 1e-3)
        report = compare(traj, oracle, fock_dim=n)
        assert report.cap_index is None
        assert report.worst < 1e-3

    def test_damped_quadratic_model(self):
        d = make_derived(g_c=0.9)
        n = 40
        model = quadratic_model(d, n, 0.5)
        traj = evolve(model, fock_projector(0, n), 3.0, 0.02,
                      IntegratorSettings(record_spectrum=False))
        oracle = oracle_trajectory(d, 0.5, 0.0, vacuum_covariance(),
                                   traj.times_ns * 1e-3)
        report = compare(traj, oracle, fock_dim=n)
        assert report.worst < 1e-3

    def test_near_critical_window_capped(self):
        # at g_c ~ 0.9988 the antisqueezed variance outgrows any affordable
        # truncation; the comparison window caps at N/4 and is recorded
        d = make_derived(g_c=0.9988)
        n = 60
        model = quadratic_model(d, n, 0.0)
        traj = evolve(model, fock_projector(0, n), 2.0, 0.02,
                      IntegratorSettings(record_spectrum=False))
        oracle = oracle_trajectory(d, 0.0, 0.0, vacuum_covariance(),
                                   traj.times_ns * 1e-3)
        report = compare(traj, oracle, fock_dim=n)
        assert report.cap_index is not None
        assert report.cap_reason and "N/4" in report.cap_reason
        assert report.n_compared > 10
        # squeezed moment and means are ceiling-insensitive; the antisqueezed
        # and cross moments carry the truncated-tail weight at the cap edge
        assert report.max_diff["v22"] < 1e-3
        assert report.max_diff["mean1"] < 1e-6
        assert report.max_diff["v11"] < 0.02 * n / 4
        assert report.max_diff["v12"] < 0.02 * n / 4

    def test_near_critical_converges_with_truncation(self):
        # same capped window, larger space: the engine converges onto the
        # oracle, pinning the residual above to truncation alone
        d = make_derived(g_c=0.9988)
        window_n = 60
        n = 140
        model = quadratic_model(d, n, 0.0)
        traj = evolve(model, fock_projector(0, n), 0.32, 0.02,
                      IntegratorSettings(record_spectrum=False))
        oracle = oracle_trajectory(d, 0.0, 0.0, vacuum_covariance(),
                                   traj.times_ns * 1e-3)
        report = compare(traj, oracle, fock_dim=window_n)
        assert report.worst < 2e-3
