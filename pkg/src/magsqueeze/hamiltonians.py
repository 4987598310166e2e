"""Builders for every Hamiltonian of the protocol, as static matrices or
time-dependent term lists.

All outputs are in angular units (rad/us); builders take the MHz-valued
parameter objects and multiply by 2 pi internally.  Time-dependent models are
represented as a static part plus drive terms ``coeff_k(t) * matrix_k`` whose
coefficient functions are pure functions of t (microseconds), so a model can
be shared freely across sweep workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import linalg
from .operators import HilbertSpec, annihilation, embed, number, pauli
from .params import TWO_PI, DerivedParams, SystemParams

__all__ = [
    "DriveTerm",
    "TimeDependentHamiltonian",
    "build_three_mode",
    "three_mode_single_excitation_block",
    "build_driven_jc",
    "build_rabi",
    "build_effective_np",
    "build_quadratic_magnon",
]


@dataclass(frozen=True)
class DriveTerm:
    """One time-dependent term: ``coefficient(t) * matrix``.

    ``frequency_mhz`` declares the carrier frequency of the coefficient in
    cycles/us; the integrator uses it to bound its step size so fast drive
    oscillations are never skated over.  When the coefficient is a pure
    exponential exp(i (omega t - phi)), ``carrier`` holds (omega, phi) in
    rad/us so compiled integration kernels can evaluate it without calling
    back into Python; it is advisory and verified against ``coefficient``.
    """

    matrix: np.ndarray
    coefficient: Callable[[float], complex]
    frequency_mhz: float = 0.0
    carrier: tuple[float, float] | None = None


@dataclass(frozen=True)
class TimeDependentHamiltonian:
    """H(t) = static_part + sum_k coeff_k(t) matrix_k, Hermitian at every t
    (drive terms come in adjoint pairs with conjugate coefficients)."""

    static_part: np.ndarray
    drive_terms: tuple[DriveTerm, ...] = field(default_factory=tuple)

    @property
    def dim(self) -> int:
        return self.static_part.shape[0]

    @property
    def is_static(self) -> bool:
        return len(self.drive_terms) == 0

    @property
    def max_drive_frequency_mhz(self) -> float:
        return max((t.frequency_mhz for t in self.drive_terms), default=0.0)

    def at(self, t: float) -> np.ndarray:
        """Evaluate H(t), t in microseconds."""
        h = self.static_part.copy()
        for term in self.drive_terms:
            h += term.coefficient(t) * term.matrix
        return h

    def hermiticity_residual(self, t: float) -> float:
        return linalg.hermiticity_residual(self.at(t))


def _sym(mat: np.ndarray) -> np.ndarray:
    """mat + mat^dagger (exact Hermiticity by construction)."""
    return mat + mat.conj().T


def build_three_mode(
    p: SystemParams,
    cavity_dim: int = 5,
    magnon_dim: int = 5,
    dim_cap: int = 4096,
) -> np.ndarray:
    """Static three-mode Hamiltonian on cavity (x) magnon (x) qubit
    (cavity slowest):

        w_c c+c + (w_Q/2) s_z + w_M m+m + g_cq (c s+ + c+ s-) + g_cm (c m+ + c+ m)

    Only spectral checks are supported downstream; the composite dimension is
    capped to keep exact diagonalization tractable.
    """
    if cavity_dim < 2 or magnon_dim < 2:
        raise ValueError("cavity and magnon truncations must be >= 2")
    dim = cavity_dim * magnon_dim * 2
    if dim > dim_cap:
        raise ValueError(f"composite dimension {dim} exceeds cap {dim_cap}")
    ic, im, iq = np.eye(cavity_dim), np.eye(magnon_dim), np.eye(2)
    c = annihilation(cavity_dim)
    m = annihilation(magnon_dim)

    def lift(op_c, op_m, op_q):
        return linalg.kron(linalg.kron(op_c, op_m), op_q)

    h = TWO_PI * p.nu_c * lift(number(cavity_dim), im, iq)
    h += TWO_PI * 0.5 * p.nu_Q * lift(ic, im, pauli("z"))
    h += TWO_PI * p.nu_M * lift(ic, number(magnon_dim), iq)
    h += TWO_PI * p.g_cq * _sym(lift(c, im, pauli("plus")))
    h += TWO_PI * p.g_cm * _sym(lift(c.conj().T, im, iq) @ lift(ic, m, iq))
    return h


def three_mode_single_excitation_block(p: SystemParams) -> np.ndarray:
    """3x3 block of the three-mode Hamiltonian in the single-excitation
    sector, ordered (cavity, magnon, qubit), relative to the zero-excitation
    energy.  Angular units."""
    return TWO_PI * np.array(
        [
            [p.nu_c, p.g_cm, p.g_cq],
            [p.g_cm, p.nu_M, 0.0],
            [p.g_cq, 0.0, p.nu_Q],
        ],
        dtype=np.complex128,
    )


def build_driven_jc(
    p: SystemParams, d: DerivedParams, spec: HilbertSpec
) -> TimeDependentHamiltonian:
    """Two-tone driven magnon-qubit model in the frame rotating with drive 1.

    Static part:  delta_m m+m + (delta_q/2) s_z + G (s+ m + s- m+) + E1 (s+ + s-).
    Drive part:   E2 s+ exp(i (Delta_12 t - delta_phi)) + h.c.

    The relative drive phase enters only the oscillating coefficient;
    delta_phi = 0 recovers the in-phase two-tone model exactly.
    """
    if not spec.qubit_present:
        raise ValueError("driven model needs the qubit factor")
    m = embed(annihilation(spec.fock_dim), "magnon", spec)
    nm = embed(number(spec.fock_dim), "magnon", spec)
    sz = embed(pauli("z"), "qubit", spec)
    sp = embed(pauli("plus"), "qubit", spec)
    sx = embed(pauli("x"), "qubit", spec)

    static = TWO_PI * d.delta_m * nm
    static += TWO_PI * 0.5 * d.delta_q * sz
    static += TWO_PI * d.G * _sym(sp @ m)
    static += TWO_PI * p.E1 * sx

    omega_12 = TWO_PI * d.Delta_12  # rad/us
    phase = p.delta_phi
    amp = TWO_PI * p.E2

    def coeff_plus(t: float, _w=omega_12, _phi=phase) -> complex:
        return complex(np.exp(1j * (_w * t - _phi)))

    def coeff_minus(t: float, _w=omega_12, _phi=phase) -> complex:
        return complex(np.exp(-1j * (_w * t - _phi)))

    terms = (
        DriveTerm(amp * sp, coeff_plus, frequency_mhz=abs(d.Delta_12),
                  carrier=(omega_12, phase)),
        DriveTerm(amp * sp.conj().T, coeff_minus, frequency_mhz=abs(d.Delta_12),
                  carrier=(-omega_12, -phase)),
    )
    return TimeDependentHamiltonian(static_part=static, drive_terms=terms)


def build_rabi(d: DerivedParams, spec: HilbertSpec) -> np.ndarray:
    """Quantum Rabi model delta_m m+m + (E2_half) s_z + g (m + m+) s_x.

    The two-level splitting is the second drive's Rabi frequency E2 encoded
    in d.zeta (E2 = delta_m / zeta); coupling g = G/2.
    """
    if not spec.qubit_present:
        raise ValueError("Rabi model needs the qubit factor")
    e2 = d.delta_m / d.zeta
    m = annihilation(spec.fock_dim)
    q = m + m.conj().T
    h = TWO_PI * d.delta_m * embed(number(spec.fock_dim), "magnon", spec)
    h += TWO_PI * 0.5 * e2 * embed(pauli("z"), "qubit", spec)
    h += TWO_PI * d.g * embed(q, "magnon", spec) @ embed(pauli("x"), "qubit", spec)
    return h


def build_effective_np(d: DerivedParams, spec: HilbertSpec) -> np.ndarray:
    """Normal-phase effective model: the Rabi model with the coupling folded
    into a conditional quadratic magnon term,

        delta_m m+m + (E2/2) s_z + (delta_m g_c^2 / 4) (m+ + m)^2 s_z.
    """
    if not spec.qubit_present:
        raise ValueError("effective model needs the qubit factor")
    e2 = d.delta_m / d.zeta
    m = annihilation(spec.fock_dim)
    q2 = (m + m.conj().T) @ (m + m.conj().T)
    h = TWO_PI * d.delta_m * embed(number(spec.fock_dim), "magnon", spec)
    h += TWO_PI * 0.5 * e2 * embed(pauli("z"), "qubit", spec)
    h += TWO_PI * 0.25 * d.delta_m * d.g_c**2 * (
        embed(q2, "magnon", spec) @ embed(pauli("z"), "qubit", spec)
    )
    return h


def build_quadratic_magnon(d: DerivedParams, fock_dim: int) -> np.ndarray:
    """Magnon-only two-magnon (parametric-amplification-like) model,

        delta_m m+m - (delta_m g_c^2 / 4) (m+ + m)^2,

    i.e. the qubit-ground projection of the normal-phase effective model."""
    m = annihilation(fock_dim)
    q2 = (m + m.conj().T) @ (m + m.conj().T)
    h = TWO_PI * d.delta_m * number(fock_dim)
    h += -(TWO_PI * 0.25 * d.delta_m * d.g_c**2) * q2
    return h
