import math

import numpy as np
import pytest

from magsqueeze import linalg, observables
from magsqueeze.hamiltonians import TimeDependentHamiltonian, build_quadratic_magnon
from magsqueeze.lindblad import (
    CollapseTerm,
    IntegrationError,
    IntegratorSettings,
    LindbladModel,
    build_full_master,
    build_rabi_master,
    evolve,
    rhs,
)
from magsqueeze.operators import (
    HilbertSpec,
    annihilation,
    basis_state,
    fock_projector,
    number,
    pauli,
    product_state,
    thermal_state,
)
from magsqueeze.params import TWO_PI

from conftest import make_derived, replace_system


def magnon_model(n, terms, h=None, label="test"):
    spec = HilbertSpec(n, qubit_present=False)
    static = np.zeros((n, n), dtype=complex) if h is None else h
    return LindbladModel(TimeDependentHamiltonian(static), tuple(terms), spec, label)


def random_state(rng, n):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


class TestRhs:
    def test_single_loss_channel_occupation_rate(self):
        n = 6
        kappa = TWO_PI * 0.5
        model = magnon_model(n, [CollapseTerm(annihilation(n), kappa, ("magnon", "lower"))])
        drho = rhs(model, fock_projector(1, n), 0.0)
        dn = np.trace(number(n) @ drho).real
        assert abs(dn - (-kappa)) < 1e-12

    def test_pure_commutator_traceless(self):
        n = 5
        rng = np.random.default_rng(2)
        h = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        h = 0.5 * (h + h.conj().T)
        model = magnon_model(n, [], h=h)
        out = rhs(model, random_state(rng, n), 0.0)
        assert abs(np.trace(out)) < 1e-13

    def test_traceless_on_random_states(self, paper_params, paper_derived):
        spec = HilbertSpec(8)
        model = build_full_master(paper_params, paper_derived, spec)
        rng = np.random.default_rng(11)
        for t in (0.0, 0.37, 1.4):
            out = rhs(model, random_state(rng, spec.dim), t)
            assert abs(np.trace(out)) < 1e-12

    def test_dimension_mismatch(self, paper_params, paper_derived):
        model = build_full_master(paper_params, paper_derived, HilbertSpec(8))
        with pytest.raises(ValueError, match="dimension"):
            rhs(model, np.eye(4) / 4.0, 0.0)

    def test_fast_path_matches_general(self, paper_params, paper_derived):
        # the engine's Hermitian shortcut against the reference formula
        from magsqueeze.lindblad import _compiled

        spec = HilbertSpec(10)
        model = build_full_master(paper_params, paper_derived, spec)
        comp = _compiled(model)
        rng = np.random.default_rng(3)
        rho = random_state(rng, spec.dim)[None]
        for t in (0.0, 0.21):
            a = comp.rhs_hermitian(rho, t)
            b = comp.rhs_general(rho, t)
            assert linalg.max_abs_diff(a, b) < 1e-13

    def test_batched_matches_single_runs(self, paper_params, paper_derived):
        from magsqueeze.lindblad import evolve_batch
        from magsqueeze.params import derive

        spec = HilbertSpec(10)
        kappas = [0.2, 0.7, 1.5]
        models, states = [], []
        for kap in kappas:
            p = replace_system(paper_params, kappa=kap)
            models.append(build_rabi_master(p, derive(p), spec))
            states.append(product_state(thermal_state(0.0, 10),
                                        basis_state("qubit_ground", spec)))
        batched = evolve_batch(models, states, 0.4, 0.02,
                               IntegratorSettings(record_spectrum=False))
        for model, rho0, traj_b in zip(models, states, batched):
            fresh = LindbladModel(model.hamiltonian, model.collapse, spec, model.label)
            solo = evolve(fresh, rho0, 0.4, 0.02, IntegratorSettings(record_spectrum=False))
            # lockstep batching changes only the shared step sequence, so
            # agreement is at integration tolerance, not bitwise
            assert np.max(np.abs(traj_b.v_min - solo.v_min)) < 1e-7
            assert np.max(np.abs(traj_b.mean_occupation - solo.mean_occupation)) < 1e-7

    def test_kernel_matches_python_path(self, paper_params, paper_derived):
        from magsqueeze import _kernel

        if not _kernel.AVAILABLE:
            pytest.skip("numba not installed")
        spec = HilbertSpec(12)
        rho0 = product_state(thermal_state(paper_derived.nbar_m, 12),
                             basis_state("qubit_ground", spec))
        results = {}
        for use_kernel in (True, False):
            model = build_full_master(paper_params, paper_derived, spec)
            traj = evolve(model, rho0, 0.02, 0.002,
                          IntegratorSettings(record_spectrum=False, use_kernel=use_kernel))
            results[use_kernel] = traj
        assert results[True].stats["kernel"] and not results[False].stats["kernel"]
        assert abs(results[True].stats["steps"] - results[False].stats["steps"]) <= 2
        for field in ("v_min", "v11", "v22", "v12", "mean_occupation", "s_db"):
            a = getattr(results[True], field)
            b = getattr(results[False], field)
            assert np.max(np.abs(a - b)) < 1e-11

    def test_kernel_fixed_step_matches_python_path(self, paper_params, paper_derived):
        from magsqueeze import _kernel

        if not _kernel.AVAILABLE:
            pytest.skip("numba not installed")
        spec = HilbertSpec(10)
        rho0 = product_state(thermal_state(0.0, 10), basis_state("qubit_ground", spec))
        results = {}
        for use_kernel in (True, False):
            model = build_rabi_master(paper_params, paper_derived, spec)
            traj = evolve(model, rho0, 0.1, 0.01,
                          IntegratorSettings(fixed_step_us=0.001, record_spectrum=False,
                                             use_kernel=use_kernel))
            results[use_kernel] = traj
        for field in ("v_min", "s_db", "mean_occupation"):
            a = getattr(results[True], field)
            b = getattr(results[False], field)
            assert np.max(np.abs(a - b)) < 1e-12

    def test_batched_fixed_step_bitwise_equal(self, paper_params, paper_derived):
        from magsqueeze.lindblad import evolve_batch
        from magsqueeze.params import derive

        spec = HilbertSpec(8)
        settings = IntegratorSettings(fixed_step_us=0.002, record_spectrum=False)
        models, states = [], []
        for kap in (0.2, 1.0):
            p = replace_system(paper_params, kappa=kap)
            models.append(build_rabi_master(p, derive(p), spec))
            states.append(product_state(thermal_state(0.0, 8),
                                        basis_state("qubit_ground", spec)))
        batched = evolve_batch(models, states, 0.2, 0.02, settings)
        for model, rho0, traj_b in zip(models, states, batched):
            fresh = LindbladModel(model.hamiltonian, model.collapse, spec, model.label)
            solo = evolve(fresh, rho0, 0.2, 0.02, settings)
            assert np.array_equal(traj_b.v_min, solo.v_min)
            assert np.array_equal(traj_b.s_db, solo.s_db)

    def test_structured_appliers_match_dense(self, paper_params, paper_derived):
        spec = HilbertSpec(9)
        model = build_full_master(paper_params, paper_derived, spec)
        stripped = LindbladModel(
            model.hamiltonian,
            tuple(CollapseTerm(t.operator, t.rate, None) for t in model.collapse),
            spec,
        )
        rng = np.random.default_rng(4)
        rho = random_state(rng, spec.dim)
        assert linalg.max_abs_diff(rhs(model, rho, 0.1), rhs(stripped, rho, 0.1)) < 1e-13


class TestMasterBuilders:
    def test_full_term_list_thermal(self, paper_params):
        from magsqueeze.params import derive

        p = replace_system(paper_params, T=0.150)
        d = derive(p)
        model = build_full_master(p, d, HilbertSpec(8))
        assert len(model.collapse) == 5
        kap = TWO_PI * p.kappa
        gam = TWO_PI * p.gamma
        rates = [t.rate for t in model.collapse]
        assert rates[0] == pytest.approx(kap * (d.nbar_m + 1))
        assert rates[1] == pytest.approx(kap * d.nbar_m)
        assert rates[2] == pytest.approx(gam * (d.nbar_q + 1))
        assert rates[3] == pytest.approx(gam * d.nbar_q)
        assert rates[4] == pytest.approx(TWO_PI * p.gamma_phi / 2)

    def test_full_zero_temperature_counts(self, paper_params):
        from magsqueeze.params import derive

        p = replace_system(paper_params, T=0.0)
        d = derive(p)
        model = build_full_master(p, d, HilbertSpec(8))
        nonzero = [t for t in model.collapse if t.rate > 0]
        assert len(nonzero) == 3

    def test_full_thermal_gain_negligible_at_10mk(self, paper_params, paper_derived):
        model = build_full_master(paper_params, paper_derived, HilbertSpec(8))
        gain = model.collapse[1]
        loss = model.collapse[0]
        assert gain.rate < 1e-12 * loss.rate

    def test_full_dephasing_removed_when_zero(self, paper_params):
        from magsqueeze.params import derive

        p = replace_system(paper_params, gamma_phi=0.0)
        model = build_full_master(p, derive(p), HilbertSpec(8))
        assert len(model.collapse) == 4

    def test_rabi_always_three_terms(self, paper_params):
        from magsqueeze.params import derive

        for kw in ({}, {"T": 0.0}, {"gamma": 0.0, "kappa": 0.0}):
            p = replace_system(paper_params, **kw)
            d = derive(p)
            model = build_rabi_master(p, d, HilbertSpec(8))
            assert len(model.collapse) == 3

    def test_rabi_sigma_x_rate(self, paper_params):
        from magsqueeze.params import derive

        p = replace_system(paper_params, T=0.0)
        d = derive(p)
        model = build_rabi_master(p, d, HilbertSpec(8))
        assert model.collapse[2].rate == pytest.approx(TWO_PI * p.gamma / 4 * 2)
        p2 = replace_system(paper_params, T=0.150)
        d2 = derive(p2)
        model2 = build_rabi_master(p2, d2, HilbertSpec(8))
        assert model2.collapse[2].rate == pytest.approx(
            TWO_PI * p2.gamma / 2 * (2 * d2.nbar_q + 1)
        )


class TestEvolveAnalytic:
    def test_decay_law(self):
        n = 6
        kappa = TWO_PI * 0.5
        model = magnon_model(n, [CollapseTerm(annihilation(n), kappa, ("magnon", "lower"))])
        traj = evolve(model, fock_projector(1, n), 3.0, 0.01)
        expected = np.exp(-kappa * traj.times_ns * 1e-3)
        assert np.max(np.abs(traj.mean_occupation - expected)) < 1e-6

    def test_thermal_relaxation(self):
        n = 30
        nbar = 0.5
        kappa = TWO_PI * 0.5
        m = annihilation(n)
        model = magnon_model(
            n,
            [
                CollapseTerm(m, kappa * (nbar + 1), ("magnon", "lower")),
                CollapseTerm(m.conj().T, kappa * nbar, ("magnon", "raise")),
            ],
        )
        traj = evolve(model, fock_projector(0, n), 3.0, 0.05)
        assert abs(traj.mean_occupation[-1] - nbar) < 1e-4
        # exact relaxation curve: nbar + (n0 - nbar) e^{-kappa t}
        t_us = traj.times_ns * 1e-3
        expected = nbar * (1.0 - np.exp(-kappa * t_us))
        assert np.max(np.abs(traj.mean_occupation - expected)) < 1e-6

    def test_qubit_decay(self):
        gamma = TWO_PI * 0.8
        spec = HilbertSpec(2, qubit_present=False)  # two-level system alone
        sm = pauli("minus")
        model = LindbladModel(
            TimeDependentHamiltonian(np.zeros((2, 2), dtype=complex)),
            (CollapseTerm(sm, gamma, None),),
            spec,
        )
        rho0 = np.diag([0.0, 1.0]).astype(complex)  # excited state
        traj = evolve(model, rho0, 2.0, 0.01, IntegratorSettings(record_spectrum=False))
        # <sigma_z>(t) = 2 e^{-gamma t} - 1 reconstructed from the populations
        # stored via mean_occupation of the 2-level "mode": n = rho_ee here
        t_us = traj.times_ns * 1e-3
        assert np.max(np.abs(traj.mean_occupation - np.exp(-gamma * t_us))) < 1e-6


class TestEvolvePhysicality:
    def test_closed_system_conservation(self, paper_params):
        from magsqueeze.params import derive

        p = replace_system(paper_params, kappa=0.0, gamma=0.0, gamma_phi=0.0)
        d = derive(p)
        spec = HilbertSpec(16)
        model = build_rabi_master(p, d, spec)
        rho0 = product_state(thermal_state(0.0, 16), basis_state("qubit_ground", spec))
        traj = evolve(model, rho0, 3.0, 0.05)
        assert np.all(traj.trace_error < 1e-8)
        assert np.all(traj.herm_residual < 1e-9)
        assert traj.min_eigenvalue.min() > -1e-7

        # conservation checked below integration noise: structural leakage
        # would not respond to tolerance, controller noise does
        tight = IntegratorSettings(rtol=1e-10, atol=1e-12)
        h = model.hamiltonian.static_part
        checkpoints = evolve(
            model, rho0, 3.0, 1.5, tight, checkpoint_times_us=[0.0, 1.5, 3.0]
        ).checkpoints
        e = [np.trace(h @ r).real for r in checkpoints.values()]
        scale = np.linalg.norm(h, 2)
        assert max(e) - min(e) < 1e-8 * scale
        purities = [observables.purity(r) for r in checkpoints.values()]
        assert max(purities) - min(purities) < 1e-6

    def test_dissipative_run_physical(self, paper_params, paper_derived):
        spec = HilbertSpec(24)
        model = build_rabi_master(paper_params, paper_derived, spec)
        rho0 = product_state(
            thermal_state(paper_derived.nbar_m, 24), basis_state("qubit_ground", spec)
        )
        traj = evolve(model, rho0, 1.0, 0.01)
        assert np.all(traj.trace_error < 1e-8)
        assert np.all(traj.herm_residual < 1e-9)
        assert traj.min_eigenvalue.min() > -1e-7
        # Heisenberg bound holds along the trajectory
        det = traj.v11 * traj.v22 - traj.v12**2
        assert np.all(det > 0.25 * (1 - 1e-6))

    def test_trace_drift_flags_failure(self):
        n = 4
        model = magnon_model(
            n, [CollapseTerm(annihilation(n), -TWO_PI * 2.0, ("magnon", "lower"))]
        )
        # negative rate anti-damps rho_00 below zero: positivity must break
        traj = evolve(model, fock_projector(1, n), 1.0, 0.05)
        assert traj.min_eigenvalue.min() < -1e-7


class TestEvolveControls:
    def test_max_step_respects_drive_frequency(self, paper_params, paper_derived):
        spec = HilbertSpec(4)
        model = build_full_master(paper_params, paper_derived, spec)
        rho0 = product_state(thermal_state(0.0, 4), basis_state("qubit_ground", spec))
        traj = evolve(model, rho0, 0.01, 0.005)
        bound = 1.0 / (20.0 * paper_derived.Delta_12)
        assert traj.stats["max_step_bound_us"] <= bound * (1 + 1e-12)
        assert traj.stats["h_max_us"] <= bound * (1 + 1e-12)

    def test_fixed_step_deterministic(self, paper_params, paper_derived):
        spec = HilbertSpec(10)
        model = build_rabi_master(paper_params, paper_derived, spec)
        rho0 = product_state(
            thermal_state(paper_derived.nbar_m, 10), basis_state("qubit_ground", spec)
        )
        settings = IntegratorSettings(fixed_step_us=0.001, record_spectrum=False)
        a = evolve(model, rho0, 0.2, 0.01, settings)
        b = evolve(model, rho0, 0.2, 0.01, settings)
        assert np.array_equal(a.v_min, b.v_min)
        assert np.array_equal(a.s_db, b.s_db)

    def test_step_underflow_raises(self):
        n = 4
        model = magnon_model(n, [], h=np.diag(np.arange(n)).astype(complex) * 1e9)
        rho0 = np.zeros((n, n), dtype=complex)
        rho0[:2, :2] = 0.5  # coherence evolving at 1e9 rad/us
        with pytest.raises(IntegrationError, match="underflow"):
            evolve(
                model,
                rho0,
                1.0,
                0.5,
                IntegratorSettings(rtol=1e-14, atol=1e-16, h_floor_us=1e-6),
            )

    def test_invalid_initial_state_rejected(self, paper_params, paper_derived):
        spec = HilbertSpec(6)
        model = build_rabi_master(paper_params, paper_derived, spec)
        with pytest.raises(ValueError, match="trace"):
            evolve(model, 2.0 * np.eye(12, dtype=complex) / 12.0 * 1.5, 1.0, 0.1)
        with pytest.raises(ValueError, match="shape"):
            evolve(model, np.eye(4, dtype=complex) / 4.0, 1.0, 0.1)

    def test_checkpoints_stored(self, paper_params, paper_derived):
        spec = HilbertSpec(8)
        model = build_rabi_master(paper_params, paper_derived, spec)
        rho0 = product_state(thermal_state(0.0, 8), basis_state("qubit_ground", spec))
        traj = evolve(model, rho0, 0.5, 0.05, checkpoint_times_us=[0.25])
        assert list(traj.checkpoints) == [250.0]
        rho = traj.checkpoints[250.0]
        assert abs(np.trace(rho) - 1.0) < 1e-8


class TestTruncationConvergence:
    def test_quadratic_model_vmin_stable(self):
        d = make_derived(g_c=0.9)
        results = {}
        for n in (30, 50):
            model = LindbladModel(
                TimeDependentHamiltonian(build_quadratic_magnon(d, n)),
                (
                    CollapseTerm(annihilation(n), TWO_PI * 0.5, ("magnon", "lower")),
                    CollapseTerm(annihilation(n).conj().T, 0.0, ("magnon", "raise")),
                ),
                HilbertSpec(n, qubit_present=False),
            )
            traj = evolve(model, fock_projector(0, n), 2.0, 0.02,
                          IntegratorSettings(record_spectrum=False))
            results[n] = traj.v_min
        assert np.max(np.abs(results[30] - results[50])) < 1e-4
