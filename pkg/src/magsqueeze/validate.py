"""Built-in oracle and invariant suite behind the ``validate`` CLI command.

Each check returns a CheckResult with the measured value and its bound; the
command prints one pass/fail line per check and exits nonzero on any failure.
Checks accept optional model overrides so harness tests can inject broken
models (e.g. a sign-flipped rate) and watch the right criterion trip.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .config import PAPER_SYSTEM
from .gaussian import (
    closed_form_vacuum_variances,
    compare,
    oracle_trajectory,
    vacuum_covariance,
)
from .hamiltonians import TimeDependentHamiltonian, build_quadratic_magnon
from .lindblad import (
    CollapseTerm,
    IntegratorSettings,
    LindbladModel,
    build_rabi_master,
    evolve,
    rhs,
)
from .observables import purity
from .operators import (
    HilbertSpec,
    annihilation,
    basis_state,
    fock_projector,
    product_state,
    thermal_state,
)
from .params import TWO_PI, DerivedParams, SystemParams, derive

__all__ = ["CheckResult", "run_validation", "ALL_CHECKS"]


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: float
    bound: float
    detail: str = ""

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        extra = f"  ({self.detail})" if self.detail else ""
        return f"[{mark}] {self.name}: measured {self.measured:.3e} vs bound {self.bound:.3e}{extra}"


def _paper() -> tuple[SystemParams, DerivedParams]:
    p = SystemParams(**PAPER_SYSTEM)
    return p, derive(p)


def _near_critical(delta_m: float = 3.0, e2: float = 60.0, g_c: float = 0.9) -> DerivedParams:
    g = 0.5 * g_c * math.sqrt(e2 * delta_m)
    return DerivedParams(
        Delta_q=373.3, Delta_m=297.5, nu_q=5859.6, nu_m=5932.4, G=2 * g, g=g,
        delta_m=delta_m, delta_q=-69.7, Delta_12=1000.0, g_c=g_c,
        zeta=delta_m / e2, nbar_m=0.0, nbar_q=0.0,
    )


def _quadratic_model(d: DerivedParams, n: int, kappa_mhz: float) -> LindbladModel:
    m = annihilation(n)
    kap = TWO_PI * kappa_mhz
    return LindbladModel(
        TimeDependentHamiltonian(build_quadratic_magnon(d, n)),
        (
            CollapseTerm(m, kap, ("magnon", "lower")),
            CollapseTerm(m.conj().T, 0.0, ("magnon", "raise")),
        ),
        HilbertSpec(n, qubit_present=False),
        label="quadratic",
    )


def check_derived_parameters() -> CheckResult:
    _, d = _paper()
    errs = [
        abs(d.Delta_q - 373.3),
        abs(d.Delta_m - 297.5),
        abs(d.nu_q - 5859.6),
        abs(d.nu_m - 5932.4),
        abs(d.G - 13.4),
    ]
    worst = max(errs)
    return CheckResult("derived parameters vs quoted values", worst < 0.1, worst, 0.1)


def check_critical_coupling() -> CheckResult:
    _, d = _paper()
    ok = 0.995 <= d.g_c <= 1.0
    return CheckResult("critical coupling in [0.995, 1]", ok, d.g_c, 1.0,
                       detail="normal phase")


def check_decay_law() -> CheckResult:
    n = 6
    kappa = TWO_PI * 0.5
    model = LindbladModel(
        TimeDependentHamiltonian(np.zeros((n, n), dtype=complex)),
        (CollapseTerm(annihilation(n), kappa, ("magnon", "lower")),),
        HilbertSpec(n, qubit_present=False),
    )
    traj = evolve(model, fock_projector(1, n), 3.0, 0.05,
                  IntegratorSettings(record_spectrum=False))
    err = float(np.max(np.abs(traj.mean_occupation - np.exp(-kappa * traj.times_ns * 1e-3))))
    return CheckResult("single-quantum decay law", err < 1e-6, err, 1e-6)


def check_thermal_relaxation() -> CheckResult:
    n = 30
    nbar, kappa = 0.5, TWO_PI * 0.5
    m = annihilation(n)
    model = LindbladModel(
        TimeDependentHamiltonian(np.zeros((n, n), dtype=complex)),
        (
            CollapseTerm(m, kappa * (nbar + 1), ("magnon", "lower")),
            CollapseTerm(m.conj().T, kappa * nbar, ("magnon", "raise")),
        ),
        HilbertSpec(n, qubit_present=False),
    )
    traj = evolve(model, fock_projector(0, n), 3.0, 0.1,
                  IntegratorSettings(record_spectrum=False))
    err = abs(traj.mean_occupation[-1] - nbar)
    return CheckResult("thermal relaxation endpoint", err < 1e-4, err, 1e-4)


def check_qubit_decay() -> CheckResult:
    gamma = TWO_PI * 0.8
    model = LindbladModel(
        TimeDependentHamiltonian(np.zeros((2, 2), dtype=complex)),
        (CollapseTerm(np.array([[0, 1], [0, 0]], dtype=complex), gamma, None),),
        HilbertSpec(2, qubit_present=False),
    )
    rho0 = np.diag([0.0, 1.0]).astype(complex)
    traj = evolve(model, rho0, 2.0, 0.05, IntegratorSettings(record_spectrum=False))
    # <sigma_z>(t) = 2 e^{-gamma t} - 1; mean_occupation holds the excited population
    sz = 2.0 * traj.mean_occupation - 1.0
    expected = 2.0 * np.exp(-gamma * traj.times_ns * 1e-3) - 1.0
    err = float(np.max(np.abs(sz - expected)))
    return CheckResult("two-level decay law", err < 1e-6, err, 1e-6)


def check_rhs_traceless(model: LindbladModel | None = None) -> CheckResult:
    if model is None:
        p, d = _paper()
        model = build_rabi_master(p, d, HilbertSpec(10))
    rng = np.random.default_rng(123)
    worst = 0.0
    for _ in range(5):
        a = rng.standard_normal((model.spec.dim,) * 2) + 1j * rng.standard_normal((model.spec.dim,) * 2)
        rho = a @ a.conj().T
        rho /= np.trace(rho)
        worst = max(worst, abs(np.trace(rhs(model, rho, 0.0))))
    return CheckResult("generator preserves trace", worst < 1e-12, worst, 1e-12)


def _paper_rabi_run(n: int = 24, horizon: float = 1.5,
                    model: LindbladModel | None = None):
    p, d = _paper()
    if model is None:
        model = build_rabi_master(p, d, HilbertSpec(n))
    rho0 = product_state(thermal_state(d.nbar_m, model.spec.fock_dim),
                         basis_state("qubit_ground", model.spec)) \
        if model.spec.qubit_present else fock_projector(0, model.spec.fock_dim)
    return evolve(model, rho0, horizon, 0.01)


def check_state_physicality(model: LindbladModel | None = None) -> CheckResult:
    traj = _paper_rabi_run(model=model)
    trace_err = float(traj.trace_error.max())
    herm = float(traj.herm_residual.max())
    min_eig = float(traj.min_eigenvalue.min())
    ok = trace_err < 1e-8 and herm < 1e-9 and min_eig > -1e-7
    return CheckResult(
        "state physicality (trace, Hermiticity, positivity)", ok,
        min_eig, -1e-7,
        detail=f"trace_err {trace_err:.1e}, herm {herm:.1e}, min_eig {min_eig:.1e}",
    )


def check_heisenberg_bound(model: LindbladModel | None = None) -> CheckResult:
    traj = _paper_rabi_run(model=model)
    det = traj.v11 * traj.v22 - traj.v12**2
    worst = float(det.min())
    bound = 0.25 * (1 - 1e-6)
    return CheckResult("Heisenberg bound on covariances", worst >= bound, worst, bound)


def check_closed_system_conservation() -> CheckResult:
    p, d = _paper()
    import dataclasses as dc

    p0 = dc.replace(p, kappa=0.0, gamma=0.0, gamma_phi=0.0)
    d0 = derive(p0)
    spec = HilbertSpec(16)
    model = build_rabi_master(p0, d0, spec)
    rho0 = product_state(thermal_state(0.0, 16), basis_state("qubit_ground", spec))
    traj = evolve(model, rho0, 3.0, 1.0,
                  IntegratorSettings(rtol=1e-10, atol=1e-12),
                  checkpoint_times_us=[0.0, 1.5, 3.0])
    purities = [purity(r) for r in traj.checkpoints.values()]
    drift = max(purities) - min(purities)
    return CheckResult("closed-system purity drift", drift < 1e-6, drift, 1e-6)


def check_oracle_agreement() -> CheckResult:
    d = _near_critical(g_c=0.9)
    n = 30
    worst = 0.0
    for kappa in (0.0, 0.5):
        model = _quadratic_model(d, n, kappa)
        traj = evolve(model, fock_projector(0, n), 1.0, 0.02,
                      IntegratorSettings(record_spectrum=False))
        oracle = oracle_trajectory(d, kappa, 0.0, vacuum_covariance(), traj.times_ns * 1e-3)
        worst = max(worst, compare(traj, oracle, fock_dim=n).worst)
    return CheckResult("covariance oracle agreement", worst < 1e-3, worst, 1e-3)


def check_closed_form_anchor() -> CheckResult:
    d = _near_critical(g_c=0.9)
    n = 40
    model = _quadratic_model(d, n, 0.0)
    traj = evolve(model, fock_projector(0, n), 2.0, 0.02,
                  IntegratorSettings(record_spectrum=False))
    _, v22, _ = closed_form_vacuum_variances(d.delta_m, d.g_c, traj.times_ns * 1e-3)
    err = float(np.max(np.abs(traj.v22 - v22)))
    return CheckResult("closed-form quadrature variance", err < 1e-3, err, 1e-3)


def check_truncation_convergence(n_small: int = 30, n_large: int = 50) -> CheckResult:
    d = _near_critical(g_c=0.9)
    vals = {}
    for n in (n_small, n_large):
        model = _quadratic_model(d, n, 0.5)
        traj = evolve(model, fock_projector(0, n), 2.0, 0.05,
                      IntegratorSettings(record_spectrum=False))
        vals[n] = traj.v_min
    diff = float(np.max(np.abs(vals[n_small] - vals[n_large])))
    return CheckResult(
        "truncation convergence of V_min", diff < 1e-4, diff, 1e-4,
        detail=f"N={n_small} vs N={n_large}; raise N if this fails",
    )


ALL_CHECKS: tuple[Callable[[], CheckResult], ...] = (
    check_derived_parameters,
    check_critical_coupling,
    check_decay_law,
    check_thermal_relaxation,
    check_qubit_decay,
    check_rhs_traceless,
    check_state_physicality,
    check_heisenberg_bound,
    check_closed_system_conservation,
    check_oracle_agreement,
    check_closed_form_anchor,
    check_truncation_convergence,
)


def run_validation(printer=print) -> bool:
    ok = True
    for check in ALL_CHECKS:
        result = check()
        printer(result.line())
        ok = ok and result.passed
    printer("validation " + ("PASSED" if ok else "FAILED"))
    return ok
