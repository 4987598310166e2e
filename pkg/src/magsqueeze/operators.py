"""Operators and states of the truncated magnon Fock space and the qubit.

Basis conventions (fixed once, used everywhere)
-----------------------------------------------
- Composite order is magnon (x) qubit with the magnon index varying slowest:
  the joint basis index is ``n_magnon * 2 + i_qubit``.
- The qubit is stored in the order (|g>, |e|), i.e. index 0 is the ground
  state.  With that ordering ``sigma_z = diag(-1, +1)`` so that
  ``sigma_z |g> = -|g>``, ``sigma_minus = |g><e|`` and
  ``sigma_plus = |e><g|``.

All constructors are deterministic and return fresh arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg

__all__ = [
    "HilbertSpec",
    "annihilation",
    "creation",
    "number",
    "pauli",
    "embed",
    "displacement",
    "parity",
    "thermal_state",
    "basis_state",
    "fock_projector",
    "vacuum_state",
    "product_state",
    "TruncationError",
]

_PAULI_LABELS = ("x", "y", "z", "plus", "minus")


class TruncationError(ValueError):
    """Raised when a requested state does not fit the truncated space."""


@dataclass(frozen=True)
class HilbertSpec:
    """Composite Hilbert space: magnon truncated to ``fock_dim`` levels,
    optionally tensored with a two-level qubit (magnon index slowest)."""

    fock_dim: int
    qubit_present: bool = True

    def __post_init__(self):
        if self.fock_dim < 2:
            raise ValueError(f"fock_dim must be >= 2, got {self.fock_dim}")

    @property
    def qubit_dim(self) -> int:
        return 2 if self.qubit_present else 1

    @property
    def dim(self) -> int:
        return self.fock_dim * self.qubit_dim


def annihilation(n: int) -> np.ndarray:
    """Bosonic annihilation operator: <k-1| m |k> = sqrt(k)."""
    if n < 2:
        raise ValueError(f"truncation must be >= 2, got {n}")
    m = np.zeros((n, n), dtype=np.complex128)
    ks = np.arange(1, n)
    m[ks - 1, ks] = np.sqrt(ks)
    return m


def creation(n: int) -> np.ndarray:
    return linalg.adjoint(annihilation(n))


def number(n: int) -> np.ndarray:
    return np.diag(np.arange(n, dtype=np.complex128))


def pauli(label: str) -> np.ndarray:
    """Pauli operator in the fixed (|g>, |e|) ordering."""
    if label not in _PAULI_LABELS:
        raise ValueError(f"unknown Pauli label {label!r}; expected one of {_PAULI_LABELS}")
    minus = np.zeros((2, 2), dtype=np.complex128)
    minus[0, 1] = 1.0  # |g><e|
    plus = minus.conj().T
    if label == "minus":
        return minus
    if label == "plus":
        return plus
    if label == "x":
        return plus + minus
    if label == "y":
        return 1j * (minus - plus)
    return plus @ minus - minus @ plus  # z = |e><e| - |g><g|


def embed(op: np.ndarray, slot: str, spec: HilbertSpec) -> np.ndarray:
    """Lift a single-factor operator to the composite space (identity on the
    other factor, magnon slowest)."""
    op = linalg.as_complex_matrix(op)
    if slot == "magnon":
        if op.shape != (spec.fock_dim, spec.fock_dim):
            raise ValueError(f"magnon operator shape {op.shape} != ({spec.fock_dim}, {spec.fock_dim})")
        if not spec.qubit_present:
            return op.copy()
        return linalg.kron(op, np.eye(2))
    if slot == "qubit":
        if not spec.qubit_present:
            raise ValueError("spec has no qubit factor")
        if op.shape != (2, 2):
            raise ValueError(f"qubit operator shape {op.shape} != (2, 2)")
        return linalg.kron(np.eye(spec.fock_dim), op)
    raise ValueError(f"unknown slot {slot!r}; expected 'magnon' or 'qubit'")


def displacement(alpha: complex, n: int) -> np.ndarray:
    """Displacement operator exp(alpha m^+ - alpha* m) in the n-level
    truncation (matrix exponential of the truncated generator).

    Unitary up to truncation error; accurate while |alpha|^2 << n.
    """
    if n < 2:
        raise ValueError(f"truncation must be >= 2, got {n}")
    m = annihilation(n)
    gen = alpha * m.conj().T - np.conj(alpha) * m
    return linalg.expm(gen)


def parity(n: int) -> np.ndarray:
    """Photon-number parity exp(i pi m^+ m) = diag((-1)^k)."""
    if n < 2:
        raise ValueError(f"truncation must be >= 2, got {n}")
    return np.diag((-1.0 + 0j) ** np.arange(n))


def thermal_state(nbar: float, n: int) -> np.ndarray:
    """Bose-Einstein thermal state, renormalized on the truncated space.

    The discarded tail weight of the untruncated distribution must be below
    1e-10, otherwise the truncation is inadequate and a TruncationError is
    raised.
    """
    if nbar < 0:
        raise ValueError(f"nbar must be >= 0, got {nbar}")
    if n < 2:
        raise ValueError(f"truncation must be >= 2, got {n}")
    if nbar == 0.0:
        return fock_projector(0, n)
    q = nbar / (nbar + 1.0)
    tail = q**n  # weight of the discarded levels of the full geometric law
    if tail > 1e-10:
        raise TruncationError(
            f"thermal state with nbar={nbar} needs a larger truncation: "
            f"tail weight {tail:.3e} > 1e-10 at n={n}"
        )
    weights = q ** np.arange(n)
    weights /= weights.sum()
    return np.diag(weights.astype(np.complex128))


def fock_projector(k: int, n: int) -> np.ndarray:
    if not 0 <= k < n:
        raise ValueError(f"Fock index {k} outside truncation of size {n}")
    rho = np.zeros((n, n), dtype=np.complex128)
    rho[k, k] = 1.0
    return rho


def vacuum_state(n: int) -> np.ndarray:
    return fock_projector(0, n)


def basis_state(kind: str, spec: HilbertSpec, fock_index: int = 0) -> np.ndarray:
    """Rank-one projector onto a basis vector of the requested factor.

    ``kind`` is one of ``fock`` (uses ``fock_index``), ``qubit_ground``,
    ``qubit_excited``.  Returns the density matrix on that factor alone;
    combine factors with :func:`product_state`.
    """
    if kind == "fock":
        return fock_projector(fock_index, spec.fock_dim)
    if kind in ("qubit_ground", "qubit_excited"):
        if not spec.qubit_present:
            raise ValueError("spec has no qubit factor")
        rho = np.zeros((2, 2), dtype=np.complex128)
        rho[0 if kind == "qubit_ground" else 1,
            0 if kind == "qubit_ground" else 1] = 1.0
        return rho
    raise ValueError(f"unknown basis state kind {kind!r}")


def product_state(rho_magnon: np.ndarray, rho_qubit: np.ndarray | None) -> np.ndarray:
    """Joint density matrix magnon (x) qubit (magnon slowest)."""
    if rho_qubit is None:
        return linalg.as_complex_matrix(rho_magnon).copy()
    return linalg.kron(rho_magnon, rho_qubit)
