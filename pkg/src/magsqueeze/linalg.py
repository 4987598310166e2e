"""Dense complex linear-algebra kernel used by every other module.

Matrices are plain 2-D numpy arrays of ``complex128``; there is no wrapper
class.  All constructors in this package return fresh arrays, so matrices can
be shared read-only across worker processes.

Conventions
-----------
- ``kron(a, b)`` places ``a`` on the slow (outer) index, i.e. the composite
  basis index is ``i_a * b.shape[0] + i_b``.
- Equality is always checked element-wise against an explicit tolerance
  (``allclose`` / ``max_abs_diff``); there is no implicit comparison.
- ``expm`` delegates to ``scipy.linalg.expm`` (Pade approximation with
  scaling and squaring), which comfortably meets a 1e-10 relative accuracy
  target for the operator norms (<~50) occurring here.

System dimensions stay small (<~100), so dense storage and O(d^3) products
are cheaper and simpler than any sparse scheme.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as _sla

__all__ = [
    "matmul",
    "kron",
    "adjoint",
    "trace",
    "expectation",
    "expm",
    "eig_hermitian",
    "allclose",
    "max_abs",
    "max_abs_diff",
    "hermiticity_residual",
    "as_complex_matrix",
]


def as_complex_matrix(a) -> np.ndarray:
    """Coerce input to a 2-D complex128 array, rejecting anything else."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got ndim={m.ndim}")
    return m


def _require_square(a: np.ndarray, what: str) -> None:
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"{what} requires a square matrix, got shape {a.shape}")


def matmul(a, b) -> np.ndarray:
    """Matrix product with an explicit dimension check."""
    a = as_complex_matrix(a)
    b = as_complex_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"dimension mismatch in matmul: {a.shape} x {b.shape}")
    return a @ b


def kron(a, b) -> np.ndarray:
    """Kronecker product with the first factor varying slowest."""
    return np.kron(as_complex_matrix(a), as_complex_matrix(b))


def adjoint(a) -> np.ndarray:
    return as_complex_matrix(a).conj().T


def trace(a) -> complex:
    a = as_complex_matrix(a)
    _require_square(a, "trace")
    return complex(np.trace(a))


def expectation(op, rho) -> complex:
    """trace(op @ rho); for Hermitian ``op`` on a valid state this is real
    up to numerical noise (the imaginary part is returned, not discarded)."""
    return trace(matmul(op, rho))


def expm(a) -> np.ndarray:
    """Matrix exponential (scaling-and-squaring Pade, via scipy)."""
    a = as_complex_matrix(a)
    _require_square(a, "expm")
    return _sla.expm(a)


def eig_hermitian(a, herm_tol: float = 1e-10):
    """Eigendecomposition of a Hermitian matrix.

    Returns ``(eigenvalues, eigenvectors)`` with real eigenvalues sorted
    ascending and eigenvectors in the columns.  Inputs whose Hermiticity
    residual exceeds ``herm_tol`` are rejected.
    """
    a = as_complex_matrix(a)
    _require_square(a, "eig_hermitian")
    resid = hermiticity_residual(a)
    if resid > herm_tol:
        raise ValueError(
            f"eig_hermitian requires a Hermitian matrix; residual {resid:.3e} > {herm_tol:.1e}"
        )
    vals, vecs = np.linalg.eigh(a)
    return vals, vecs


def allclose(a, b, tol: float = 1e-12) -> bool:
    """Element-wise equality within an absolute tolerance."""
    return max_abs_diff(a, b) <= tol


def max_abs(a) -> float:
    a = np.asarray(a)
    return float(np.max(np.abs(a))) if a.size else 0.0


def max_abs_diff(a, b) -> float:
    return max_abs(np.asarray(a) - np.asarray(b))


def hermiticity_residual(a) -> float:
    """Max-norm of (a - a^dagger)."""
    a = as_complex_matrix(a)
    return max_abs(a - a.conj().T)
