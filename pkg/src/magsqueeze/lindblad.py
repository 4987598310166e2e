"""Lindblad master-equation engine.

Models are a time-dependent Hamiltonian plus weighted collapse terms.  A
collapse term ``(o, r)`` contributes

    (r / 2) * (2 o rho o+ - o+ o rho - rho o+ o)

to d(rho)/dt, i.e. the stored rate already includes thermal factors, so the
magnon loss term of the thermal master equation is simply
``(m, kappa * (nbar + 1))`` with ``kappa`` in angular units (rad/us).

The right-hand side is evaluated directly on density matrices (dense
products); at the dimensions used here (<= ~120) that is far cheaper than a
vectorized superoperator and keeps time-dependent coefficients free.  The
integrator is an embedded Dormand-Prince 4(5) pair with PI step-size control
and an optional fixed-step mode for bit-reproducible regression runs; the
state is re-symmetrized (rho <- (rho + rho+)/2) after every accepted step.

The engine natively propagates a *stack* of states: sweeps over parameter
values that share one model structure integrate in lockstep (the controller
uses the worst per-run error), which amortizes the per-call overhead of
small-matrix arithmetic across the batch.  In fixed-step mode each run's
arithmetic is independent of the batch composition, so results are
bit-identical however cells are grouped or distributed over workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _kernel, linalg, observables
from .hamiltonians import TimeDependentHamiltonian, build_driven_jc, build_rabi
from .operators import HilbertSpec, annihilation, pauli
from .params import TWO_PI, DerivedParams, SystemParams

__all__ = [
    "CollapseTerm",
    "LindbladModel",
    "IntegratorSettings",
    "Trajectory",
    "IntegrationError",
    "build_full_master",
    "build_rabi_master",
    "rabi_frame_collapse",
    "magnon_collapse",
    "rhs",
    "evolve",
    "evolve_batch",
]


class IntegrationError(RuntimeError):
    """A run failed (step underflow, trace drift, unphysical state)."""


@dataclass
class CollapseTerm:
    """Collapse operator with its full prefactor rate (angular units).

    ``structure`` optionally names a recognized operator shape
    (slot, kind) in {('magnon','lower'|'raise'), ('qubit','minus'|'plus'|
    'z'|'x')} enabling an O(d^2) application path; it is verified against the
    matrix at compile time and silently ignored if it does not match.
    """

    operator: np.ndarray
    rate: float
    structure: tuple[str, str] | None = None


@dataclass(eq=False)
class LindbladModel:
    hamiltonian: TimeDependentHamiltonian
    collapse: tuple[CollapseTerm, ...]
    spec: HilbertSpec
    label: str = "model"

    def __post_init__(self):
        d = self.spec.dim
        if self.hamiltonian.static_part.shape != (d, d):
            raise ValueError("Hamiltonian dimension does not match the Hilbert spec")
        for term in self.collapse:
            if term.operator.shape != (d, d):
                raise ValueError("collapse operator dimension does not match the Hilbert spec")


@dataclass(frozen=True)
class IntegratorSettings:
    rtol: float = 1e-8
    atol: float = 1e-10
    max_step_us: float | None = None  # extra cap on top of the drive-frequency bound
    fixed_step_us: float | None = None  # fixed-step mode when set
    safety: float = 0.9
    min_factor: float = 0.2
    max_factor: float = 5.0
    h_floor_us: float = 1e-13
    trace_tol: float = 1e-6
    record_spectrum: bool = True
    use_kernel: bool = True  # compiled stepper when numba + model shape allow


@dataclass
class Trajectory:
    """Per-output-time observables of one run (times in ns)."""

    times_ns: np.ndarray
    v11: np.ndarray
    v22: np.ndarray
    v12: np.ndarray
    mean1: np.ndarray
    mean2: np.ndarray
    v_min: np.ndarray
    theta_opt: np.ndarray
    s_db: np.ndarray
    mean_occupation: np.ndarray
    trace_error: np.ndarray
    herm_residual: np.ndarray
    min_eigenvalue: np.ndarray
    stats: dict
    checkpoints: dict[float, np.ndarray] = field(default_factory=dict)
    label: str = "run"


# ---------------------------------------------------------------------------
# model builders
# ---------------------------------------------------------------------------


def build_full_master(p: SystemParams, d: DerivedParams, spec: HilbertSpec) -> LindbladModel:
    """Two-tone driven model with magnon loss/gain, qubit relaxation/excitation
    and qubit pure dephasing (drive-1 rotating frame).

    Thermal factors are Bose-Einstein occupations at the dressed frequencies
    nu_m, nu_q already stored in ``d``.  The dephasing term is omitted
    entirely at gamma_phi = 0.
    """
    if not spec.qubit_present:
        raise ValueError("full model needs the qubit factor")
    m = linalg.kron(annihilation(spec.fock_dim), np.eye(2))
    kap = TWO_PI * p.kappa
    gam = TWO_PI * p.gamma
    gph = TWO_PI * p.gamma_phi
    terms = [
        CollapseTerm(m, kap * (d.nbar_m + 1.0), ("magnon", "lower")),
        CollapseTerm(m.conj().T, kap * d.nbar_m, ("magnon", "raise")),
        CollapseTerm(_lift_qubit("minus", spec), gam * (d.nbar_q + 1.0), ("qubit", "minus")),
        CollapseTerm(_lift_qubit("plus", spec), gam * d.nbar_q, ("qubit", "plus")),
    ]
    if p.gamma_phi != 0.0:
        terms.append(CollapseTerm(_lift_qubit("z", spec), 0.5 * gph, ("qubit", "z")))
    return LindbladModel(
        hamiltonian=build_driven_jc(p, d, spec),
        collapse=tuple(terms),
        spec=spec,
        label="full",
    )


def build_rabi_master(p: SystemParams, d: DerivedParams, spec: HilbertSpec) -> LindbladModel:
    """Rotating-frame master equation: the static Rabi model with magnon
    loss/gain and a single qubit sigma_x channel of rate (gamma/2)(2 nbar_q + 1).
    Pure dephasing does not survive the frame transformation and is absent.
    Always exactly three collapse terms (rates may be zero)."""
    if not spec.qubit_present:
        raise ValueError("Rabi model needs the qubit factor")
    m = linalg.kron(annihilation(spec.fock_dim), np.eye(2))
    kap = TWO_PI * p.kappa
    gam = TWO_PI * p.gamma
    terms = (
        CollapseTerm(m, kap * (d.nbar_m + 1.0), ("magnon", "lower")),
        CollapseTerm(m.conj().T, kap * d.nbar_m, ("magnon", "raise")),
        CollapseTerm(_lift_qubit("x", spec), 0.5 * gam * (2.0 * d.nbar_q + 1.0), ("qubit", "x")),
    )
    return LindbladModel(
        hamiltonian=TimeDependentHamiltonian(static_part=build_rabi(d, spec)),
        collapse=terms,
        spec=spec,
        label="rabi",
    )


def _lift_qubit(label: str, spec: HilbertSpec) -> np.ndarray:
    return linalg.kron(np.eye(spec.fock_dim), pauli(label))


def rabi_frame_collapse(p: SystemParams, d: DerivedParams, spec: HilbertSpec) -> tuple[CollapseTerm, ...]:
    """The rotating-frame collapse set (magnon pair + qubit sigma_x channel),
    reusable for any Hamiltonian living in that frame."""
    return build_rabi_master(p, d, spec).collapse


def magnon_collapse(p: SystemParams, d: DerivedParams, fock_dim: int) -> tuple[CollapseTerm, ...]:
    """Magnon loss/gain pair on a magnon-only space."""
    m = annihilation(fock_dim)
    kap = TWO_PI * p.kappa
    return (
        CollapseTerm(m, kap * (d.nbar_m + 1.0), ("magnon", "lower")),
        CollapseTerm(m.conj().T, kap * d.nbar_m, ("magnon", "raise")),
    )


# ---------------------------------------------------------------------------
# compiled right-hand side (batch-native: states have shape (B, d, d))
# ---------------------------------------------------------------------------


_STRUCTURED_KINDS = {
    ("magnon", "lower"),
    ("magnon", "raise"),
    ("qubit", "minus"),
    ("qubit", "plus"),
    ("qubit", "z"),
    ("qubit", "x"),
}


def _structure_matrix(structure: tuple[str, str], spec: HilbertSpec) -> np.ndarray:
    slot, kind = structure
    if slot == "magnon":
        m = annihilation(spec.fock_dim)
        op = m if kind == "lower" else m.conj().T
        return linalg.kron(op, np.eye(spec.qubit_dim))
    op = {"minus": pauli("minus"), "plus": pauli("plus"), "z": pauli("z"), "x": pauli("x")}[kind]
    return linalg.kron(np.eye(spec.fock_dim), op)


def _adj(x: np.ndarray) -> np.ndarray:
    return x.conj().swapaxes(-1, -2)


def _term_signature(term: CollapseTerm, spec: HilbertSpec) -> tuple:
    structure = term.structure
    if structure in _STRUCTURED_KINDS and (structure[0] == "magnon" or spec.qubit_dim == 2) \
            and linalg.max_abs_diff(term.operator, _structure_matrix(structure, spec)) < 1e-12:
        return structure
    return ("dense", id(term.operator))


def _active_terms(model: LindbladModel) -> list[CollapseTerm]:
    """Collapse terms above the per-model relative rate floor (terms at
    ~1e-12 of the dominant rate contribute below the error-control floor)."""
    floor = 1e-12 * max((abs(t.rate) for t in model.collapse), default=0.0)
    return [t for t in model.collapse if abs(t.rate) > floor]


def batch_signature(model: LindbladModel) -> tuple:
    """Models with equal signatures can integrate in one lockstep batch."""
    active = tuple(_term_signature(t, model.spec) for t in _active_terms(model))
    return (model.spec.fock_dim, model.spec.qubit_dim, len(model.hamiltonian.drive_terms), active)


class _CompiledBatch:
    """Precomputed quantities for fast RHS evaluation over a model stack.

    rhs(rho_k) = M_k(t) rho_k + rho_k M_k(t)+ + sum_j r_jk o_j rho_k o_j+
    with M_k(t) = -i H_k(t) - (1/2) sum_j r_jk o_j+ o_j.

    All models must share one structure signature (same operator kinds, own
    rates and drive coefficients).  Collapse terms whose rate is below 1e-12
    of the stack's largest rate are dropped: their integrated contribution
    sits far below the error-control floor (e.g. the thermal-gain channel at
    millikelvin, rate ~ 1e-12 kappa).
    """

    def __init__(self, models: Sequence[LindbladModel]):
        self.models = list(models)
        spec = models[0].spec
        self.spec = spec
        sig = batch_signature(models[0])
        for m in models[1:]:
            if batch_signature(m) != sig or m.spec != spec:
                raise ValueError("models in one batch must share dimension and term structure")
        d = spec.dim
        self.dim = d
        b = len(self.models)
        self.batch = b
        n, q = spec.fock_dim, spec.qubit_dim

        g0 = np.zeros((b, d, d), dtype=np.complex128)
        jump_sets = []
        for k, mod in enumerate(self.models):
            g0[k] = -1j * mod.hamiltonian.static_part
            terms = []
            for term in _active_terms(mod):
                o = linalg.as_complex_matrix(term.operator)
                g0[k] -= 0.5 * term.rate * (o.conj().T @ o)
                terms.append((_term_signature(term, spec), term))
            jump_sets.append(terms)

        # group the structured appliers across the batch (same kind order)
        kinds = [s for s, _ in jump_sets[0]]
        assert all([s for s, _ in js] == kinds for js in jump_sets)
        self._jump_ops = []
        w = np.sqrt(np.arange(1, n))
        w2 = w[:, None, None, None] * w[None, None, :, None]
        for j, kind in enumerate(kinds):
            rates = np.array([js[j][1].rate for js in jump_sets])
            r_bcast = rates[:, None, None, None, None]
            if kind == ("magnon", "lower"):
                self._jump_ops.append(("m_lower", r_bcast * w2[None]))
            elif kind == ("magnon", "raise"):
                self._jump_ops.append(("m_raise", r_bcast * w2[None]))
            elif kind == ("qubit", "minus"):
                self._jump_ops.append(("q_swap", rates[:, None, None], 1, 0))
            elif kind == ("qubit", "plus"):
                self._jump_ops.append(("q_swap", rates[:, None, None], 0, 1))
            elif kind == ("qubit", "z"):
                mask = np.array([[1.0, -1.0], [-1.0, 1.0]])
                self._jump_ops.append(("q_mask", r_bcast * mask[None, None, :, None, :]))
            elif kind == ("qubit", "x"):
                self._jump_ops.append(("q_flip", r_bcast))
            else:
                ops = np.stack([js[j][1].operator for js in jump_sets])
                self._jump_ops.append(("dense", rates[:, None, None], ops, _adj(ops)))

        self.g0 = g0
        # drive terms: per-model flat sparse updates on top of g0
        self._drives = []
        for k, mod in enumerate(self.models):
            per_model = []
            for dt_ in mod.hamiltonian.drive_terms:
                mat = -1j * dt_.matrix
                idx = np.nonzero(mat.ravel())[0]
                per_model.append((dt_.coefficient, idx, mat.ravel()[idx], dt_.carrier))
            self._drives.append(per_model)
        self.time_dependent = any(self._drives)
        self._m_buf = np.empty((b, d, d), dtype=np.complex128)
        self._w_buf = np.empty((b, d, d), dtype=np.complex128)
        self._kernel_plan = self._build_kernel_plan(jump_sets) if _kernel.AVAILABLE else None

    _Q_NONZEROS = {
        ("qubit", "minus"): ((0, 1, 1.0),),
        ("qubit", "plus"): ((1, 0, 1.0),),
        ("qubit", "z"): ((0, 0, -1.0), (1, 1, 1.0)),
        ("qubit", "x"): ((0, 1, 1.0), (1, 0, 1.0)),
    }

    def _build_kernel_plan(self, jump_sets):
        """Marshal the model stack into plain arrays for the jitted stepper,
        or return None when the structure is not representable."""
        n, q, b, d = self.spec.fock_dim, self.spec.qubit_dim, self.batch, self.dim
        kinds = [s for s, _ in jump_sets[0]]
        if any(k[0] == "dense" for k in kinds):
            return None
        # drive carriers must reproduce the coefficient functions
        d_model, d_omega, d_phase, d_ptr, d_idx, d_val = [], [], [], [0], [], []
        for k, per_model in enumerate(self._drives):
            for coeff, idx, vals, carrier in per_model:
                if carrier is None:
                    return None
                omega, phase = carrier
                for t_probe in (0.0, 0.137, 0.91):
                    if abs(coeff(t_probe) - np.exp(1j * (omega * t_probe - phase))) > 1e-12:
                        return None
                d_model.append(k)
                d_omega.append(omega)
                d_phase.append(phase)
                d_idx.extend(idx.tolist())
                d_val.extend(vals.tolist())
                d_ptr.append(len(d_idx))

        j_count = len(kinds)
        j_delta = np.zeros(j_count, dtype=np.int64)
        j_wm = np.ones((j_count, n), dtype=np.float64)
        j_rate = np.zeros((j_count, b), dtype=np.float64)
        j_qs = np.zeros((j_count, 2), dtype=np.int64)
        j_qa = np.zeros((j_count, 2), dtype=np.int64)
        j_qv = np.zeros((j_count, 2), dtype=np.complex128)
        for j, kind in enumerate(kinds):
            j_rate[j] = [js[j][1].rate for js in jump_sets]
            if kind[0] == "magnon":
                if kind[1] == "lower":
                    j_delta[j] = 1
                    j_wm[j] = np.sqrt(np.arange(1, n + 1))
                else:
                    j_delta[j] = -1
                    j_wm[j] = np.sqrt(np.arange(n))
                if q == 2:
                    entries = ((0, 0, 1.0), (1, 1, 1.0))
                else:
                    entries = ((0, 0, 1.0),)
            else:
                entries = self._Q_NONZEROS[kind]
            for z, (s, a, v) in enumerate(entries):
                j_qs[j, z] = s
                j_qa[j, z] = a
                j_qv[j, z] = v
        return {
            "arrays": (
                self.g0,
                np.array(d_model, dtype=np.int64),
                np.array(d_omega, dtype=np.float64),
                np.array(d_phase, dtype=np.float64),
                np.array(d_ptr, dtype=np.int64),
                np.array(d_idx, dtype=np.int64),
                np.array(d_val, dtype=np.complex128),
                j_delta, j_wm, j_rate, j_qs, j_qa, j_qv, n, q,
            ),
            "buffers": (
                np.empty((7, b, d, d), dtype=np.complex128),
                self._m_buf,
                np.empty((b, d, d), dtype=np.complex128),
                np.empty((b, d, d), dtype=np.complex128),
            ),
        }

    def _left_product(self, m: np.ndarray, rho: np.ndarray) -> np.ndarray:
        # stacked (b,d,d) matmul misses BLAS in numpy; per-slice 2-D hits it
        w = self._w_buf
        for k in range(self.batch):
            np.matmul(m[k], rho[k], out=w[k])
        return w

    def drift_matrix(self, t: float) -> np.ndarray:
        """Stack of M_k(t), valid until the next call (internal buffer)."""
        if not self.time_dependent:
            return self.g0
        m = self._m_buf
        np.copyto(m, self.g0)
        for k, per_model in enumerate(self._drives):
            flat = m[k].ravel()
            for coeff, idx, vals, _carrier in per_model:
                flat[idx] += coeff(t) * vals
        return m

    def _apply_jumps(self, rho: np.ndarray, out: np.ndarray) -> None:
        b, n, q = self.batch, self.spec.fock_dim, self.spec.qubit_dim
        r5 = rho.reshape(b, n, q, n, q)
        o5 = out.reshape(b, n, q, n, q)
        for op in self._jump_ops:
            kind = op[0]
            if kind == "m_lower":
                o5[:, :-1, :, :-1, :] += op[1] * r5[:, 1:, :, 1:, :]
            elif kind == "m_raise":
                o5[:, 1:, :, 1:, :] += op[1] * r5[:, :-1, :, :-1, :]
            elif kind == "q_swap":
                _, rates, src, dst = op
                o5[:, :, dst, :, dst] += rates * r5[:, :, src, :, src]
            elif kind == "q_mask":
                o5 += op[1] * r5
            elif kind == "q_flip":
                o5 += op[1] * r5[:, :, ::-1, :, ::-1]
            else:  # dense fallback
                _, rates, ops, ops_dag = op
                out += rates * (ops @ rho @ ops_dag)

    def rhs_hermitian(self, rho: np.ndarray, t: float) -> np.ndarray:
        """RHS stack assuming each rho_k Hermitian (rho M+ = (M rho)+)."""
        w = self._left_product(self.drift_matrix(t), rho)
        out = w + _adj(w)
        self._apply_jumps(rho, out)
        return out

    def rhs_general(self, rho: np.ndarray, t: float) -> np.ndarray:
        m = self.drift_matrix(t)
        out = self._left_product(m, rho).copy()
        madj = _adj(m)
        for k in range(self.batch):
            out[k] += rho[k] @ madj[k]
        self._apply_jumps(rho, out)
        return out


def _compiled(model: LindbladModel) -> _CompiledBatch:
    c = getattr(model, "_compiled_cache", None)
    if c is None:
        c = _CompiledBatch([model])
        model._compiled_cache = c
    return c


def rhs(model: LindbladModel, rho: np.ndarray, t: float = 0.0) -> np.ndarray:
    """d(rho)/dt of the model at time t (microseconds)."""
    rho = linalg.as_complex_matrix(rho)
    if rho.shape != (model.spec.dim, model.spec.dim):
        raise ValueError(f"state shape {rho.shape} does not match model dimension {model.spec.dim}")
    return _compiled(model).rhs_general(rho[None], t)[0]


# ---------------------------------------------------------------------------
# Dormand-Prince 4(5) with PI step control
# ---------------------------------------------------------------------------

_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
_DP_ERR = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)


class _Stepper:
    """Lockstep stepper over a state stack, holding stage buffers and stats."""

    def __init__(self, compiled: _CompiledBatch, settings: IntegratorSettings):
        self.f = compiled.rhs_hermitian
        self.settings = settings
        self.k = np.empty((7, compiled.batch, compiled.dim, compiled.dim), dtype=np.complex128)
        self.have_fsal = False
        self.err_prev = 1e-4
        self.n_steps = 0
        self.n_rejected = 0
        self.n_rhs = 0
        self.h_min_seen = math.inf
        self.h_max_seen = 0.0

    def _error_norm(self, err_mat, rho, y_new) -> float:
        # worst per-run scaled RMS: the batch advances at the strictest step
        s = self.settings
        scale = s.atol + s.rtol * np.maximum(np.abs(rho), np.abs(y_new))
        q = np.abs(err_mat) / scale
        per_run = np.sqrt(np.mean(q * q, axis=(-1, -2)))
        return float(per_run.max())

    def step_fixed(self, rho, t, h):
        k = self.k
        if self.have_fsal:
            k[0] = k[6]
        else:
            k[0] = self.f(rho, t)
            self.n_rhs += 1
        for i in range(1, 6):
            y = rho + h * np.tensordot(_DP_A[i], k[:i], axes=1)
            k[i] = self.f(y, t + _DP_C[i] * h)
        y5 = rho + h * np.tensordot(_DP_B5, k[:6], axes=1)
        k[6] = self.f(y5, t + h)
        self.n_rhs += 6
        self.have_fsal = True
        self.n_steps += 1
        return y5

    def step_adaptive(self, rho, t, h, t_limit):
        """Advance one accepted step, shrinking h on rejection.

        Returns (y_new, t_new, h_next)."""
        s = self.settings
        while True:
            h = min(h, t_limit - t)
            if h < s.h_floor_us:
                raise IntegrationError(
                    f"step size underflow at t = {t * 1e3:.6f} ns (h = {h:.3e} us)"
                )
            y5 = self.step_fixed(rho, t, h)
            err_mat = h * np.tensordot(_DP_ERR, self.k, axes=1)
            err = self._error_norm(err_mat, rho, y5)
            if err <= 1.0:
                # stabilized PI controller (order-5 propagation)
                fac = s.safety * (max(err, 1e-16) ** -0.17) * (self.err_prev**0.04)
                fac = min(s.max_factor, max(s.min_factor, fac))
                self.err_prev = max(err, 1e-4)
                self.h_min_seen = min(self.h_min_seen, h)
                self.h_max_seen = max(self.h_max_seen, h)
                return y5, t + h, h * fac
            self.n_rejected += 1
            self.have_fsal = False
            fac = s.safety * (err ** -0.2)
            h *= min(1.0, max(s.min_factor, fac))


def _resolve_max_step(models: Sequence[LindbladModel], settings: IntegratorSettings,
                      output_dt: float) -> float:
    h = output_dt
    f_max = max(m.hamiltonian.max_drive_frequency_mhz for m in models)  # cycles/us
    if f_max > 0:
        h = min(h, 1.0 / (20.0 * f_max))
    if settings.max_step_us is not None:
        h = min(h, settings.max_step_us)
    return h


# ---------------------------------------------------------------------------
# evolution driver
# ---------------------------------------------------------------------------

_RECORD_FIELDS = (
    "v11", "v22", "v12", "mean1", "mean2", "v_min", "theta_opt", "s_db",
    "mean_occupation", "trace_error", "herm_residual", "min_eigenvalue",
)


def evolve(
    model: LindbladModel,
    rho0: np.ndarray,
    t_end_us: float,
    output_dt_us: float,
    settings: IntegratorSettings | None = None,
    checkpoint_times_us: Sequence[float] = (),
    progress: Callable[[int, int], None] | None = None,
) -> Trajectory:
    """Integrate one master equation and record observables on a uniform grid.

    Adaptive steps never exceed the drive-resolution bound 1/(20 f_max) nor
    the output spacing.  A trace drift beyond ``settings.trace_tol`` or a
    step underflow aborts the run with an IntegrationError.
    """
    return evolve_batch(
        [model], [rho0], t_end_us, output_dt_us, settings,
        checkpoint_times_us=checkpoint_times_us, progress=progress,
    )[0]


def evolve_batch(
    models: Sequence[LindbladModel],
    rho0s: Sequence[np.ndarray],
    t_end_us: float,
    output_dt_us: float,
    settings: IntegratorSettings | None = None,
    checkpoint_times_us: Sequence[float] = (),
    progress: Callable[[int, int], None] | None = None,
) -> list[Trajectory]:
    """Integrate several same-structure models in lockstep.

    In adaptive mode the whole stack advances at the strictest member's step
    (results for each run are tolerance-equivalent to a solo integration);
    in fixed-step mode each run's arithmetic is byte-identical to a solo
    integration regardless of how runs are batched.
    """
    settings = settings or IntegratorSettings()
    if len(models) != len(rho0s) or not models:
        raise ValueError("need one initial state per model")
    d = models[0].spec.dim
    b = len(models)
    y = np.empty((b, d, d), dtype=np.complex128)
    for k, (mod, rho0) in enumerate(zip(models, rho0s)):
        rho = linalg.as_complex_matrix(rho0)
        if rho.shape != (d, d):
            raise ValueError(f"initial state shape {rho.shape} does not match model dimension {d}")
        if abs(np.trace(rho).real - 1.0) > 1e-8 or abs(np.trace(rho).imag) > 1e-10:
            raise ValueError("initial state must have unit trace")
        if linalg.hermiticity_residual(rho) > 1e-10:
            raise ValueError("initial state must be Hermitian")
        y[k] = 0.5 * (rho + rho.conj().T)
    if t_end_us <= 0 or output_dt_us <= 0:
        raise ValueError("horizon and output spacing must be positive")

    n_out = int(round(t_end_us / output_dt_us))
    if abs(n_out * output_dt_us - t_end_us) > 1e-9 * max(t_end_us, 1.0):
        n_out = int(math.ceil(t_end_us / output_dt_us))
    grid = np.arange(n_out + 1) * output_dt_us

    compiled = _CompiledBatch(models)
    max_step = _resolve_max_step(models, settings, output_dt_us)
    stepper = None
    if not (settings.use_kernel and compiled._kernel_plan is not None):
        stepper = _Stepper(compiled, settings)

    fixed_h = None
    if settings.fixed_step_us is not None:
        per = max(1, int(math.ceil(output_dt_us / min(settings.fixed_step_us, max_step))))
        fixed_h = output_dt_us / per

    checkpoint_idx = {int(round(t / output_dt_us)) for t in checkpoint_times_us}

    n_rec = n_out + 1
    rec = {name: np.empty((b, n_rec)) for name in _RECORD_FIELDS}
    checkpoints: list[dict[float, np.ndarray]] = [{} for _ in range(b)]

    plan = compiled._kernel_plan if settings.use_kernel else None
    # ctrl: [h, err_prev, steps, rejected, rhs_evals, h_min, h_max, raw_residual]
    ctrl = np.array([min(max_step, output_dt_us), 1e-4, 0.0, 0.0, 0.0, math.inf, 0.0, 0.0])

    raw_residual = 0.0
    h = min(max_step, output_dt_us)

    for i_out in range(n_rec):
        t_node = grid[i_out]
        _record_node(models, settings, y, raw_residual, rec, i_out, t_node)
        if i_out in checkpoint_idx:
            for k in range(b):
                checkpoints[k][t_node * 1e3] = y[k].copy()
        if progress is not None:
            progress(i_out, n_rec)
        if i_out == n_rec - 1:
            break

        t = t_node
        t_next = grid[i_out + 1]
        if plan is not None:
            code = _kernel._segment(
                y, t_node, t_next, ctrl, max_step,
                settings.rtol, settings.atol, settings.safety,
                settings.min_factor, settings.max_factor, settings.h_floor_us,
                fixed_h if fixed_h is not None else 0.0,
                *plan["arrays"], *plan["buffers"],
            )
            if code != 0:
                raise IntegrationError(
                    f"step size underflow near t = {t_node * 1e3:.3f} ns ({models[0].label})"
                )
            raw_residual = ctrl[7]
        else:
            y_new = y
            if fixed_h is not None:
                n_sub = int(round((t_next - t_node) / fixed_h))
                for j in range(n_sub):
                    y_new = stepper.step_fixed(y, t, fixed_h)
                    y = 0.5 * (y_new + _adj(y_new))
                    t = t_node + (j + 1) * fixed_h
            else:
                while t < t_next - 1e-15 * max(1.0, t_next):
                    h = min(h, max_step)
                    y_new, t, h = stepper.step_adaptive(y, t, h, t_next)
                    y = 0.5 * (y_new + _adj(y_new))
            # residual of the last raw step before the node's re-symmetrization
            raw_residual = float(np.max(np.abs(y_new - _adj(y_new))))

    if plan is not None:
        stats = {
            "steps": int(ctrl[2]),
            "rejected": int(ctrl[3]),
            "rhs_evaluations": int(ctrl[4]),
            "h_min_us": ctrl[5] if math.isfinite(ctrl[5]) else None,
            "h_max_us": ctrl[6] or None,
        }
    else:
        stats = {
            "steps": stepper.n_steps,
            "rejected": stepper.n_rejected,
            "rhs_evaluations": stepper.n_rhs,
            "h_min_us": stepper.h_min_seen if math.isfinite(stepper.h_min_seen) else None,
            "h_max_us": stepper.h_max_seen or None,
        }
    stats.update({
        "max_step_bound_us": max_step,
        "fixed_step_us": fixed_h,
        "batch": b,
        "kernel": plan is not None,
    })
    out = []
    for k, mod in enumerate(models):
        out.append(Trajectory(
            times_ns=grid * 1e3,
            **{name: rec[name][k] for name in _RECORD_FIELDS},
            stats=stats,
            checkpoints=checkpoints[k],
            label=mod.label,
        ))
    return out


def _record_node(models, settings, y, raw_residual, rec, i_out, t_node) -> None:
    for k, mod in enumerate(models):
        rho = y[k]
        tr = np.trace(rho)
        trace_error = abs(tr - 1.0)
        if trace_error > settings.trace_tol:
            raise IntegrationError(
                f"trace drift {trace_error:.3e} beyond {settings.trace_tol:.1e} "
                f"at t = {t_node * 1e3:.3f} ns ({mod.label})"
            )
        rho_m = observables.partial_trace_magnon(rho, mod.spec)
        stats_q = observables.quadrature_stats(rho_m)
        rec["v11"][k, i_out] = stats_q.v11
        rec["v22"][k, i_out] = stats_q.v22
        rec["v12"][k, i_out] = stats_q.v12
        rec["mean1"][k, i_out] = stats_q.mean1
        rec["mean2"][k, i_out] = stats_q.mean2
        rec["v_min"][k, i_out] = stats_q.v_min
        rec["theta_opt"][k, i_out] = stats_q.theta_opt
        rec["s_db"][k, i_out] = stats_q.s_db
        rec["mean_occupation"][k, i_out] = observables.mean_occupation(rho_m)
        rec["trace_error"][k, i_out] = trace_error
        rec["herm_residual"][k, i_out] = raw_residual
        if settings.record_spectrum:
            rec["min_eigenvalue"][k, i_out] = float(np.linalg.eigvalsh(rho).min())
        else:
            rec["min_eigenvalue"][k, i_out] = math.nan
