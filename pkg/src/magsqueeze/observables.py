"""Reported quantities: quadrature covariance, optimal squeezing angle,
squeezing in dB, magnon occupation, and the Wigner function.

Quadratures are X1 = (m + m+)/sqrt(2) and X2 = i (m+ - m)/sqrt(2); the
vacuum variance is the constant 0.5 and is never recomputed from a truncated
state.  The squeezing degree is S = -10 log10(V_min / 0.5) dB, positive when
squeezed below vacuum.

The Wigner function follows the displaced-parity definition

    W(alpha) = (2/pi) Tr[ exp(i pi m+m) D(alpha) rho D+(alpha) ],

evaluated through the identity D+(alpha) P D(alpha) = D(-2 alpha) P with the
displacement matrix elements computed in closed form from the normally
ordered factorization D(beta) = e^{-|beta|^2/2} e^{beta m+} e^{-beta* m}.
Both exponentials are nilpotent polynomials whose truncated matrix elements
are exact, so the kernel carries no expm truncation error; grid points are
independent and safe to evaluate in parallel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import linalg
from .operators import HilbertSpec, annihilation, parity

__all__ = [
    "QuadratureStats",
    "WignerGrid",
    "partial_trace_magnon",
    "covariance",
    "quadrature_stats",
    "min_variance",
    "squeezing_db",
    "mean_occupation",
    "purity",
    "wigner",
]

V_VACUUM = 0.5


@dataclass(frozen=True)
class QuadratureStats:
    """First and second moments of the magnon quadratures plus the derived
    minimum variance, optimal angle (in [0, pi)) and squeezing in dB."""

    mean1: float
    mean2: float
    v11: float
    v22: float
    v12: float
    v_min: float
    theta_opt: float
    s_db: float

    def heisenberg_defect(self) -> float:
        """How far the covariance determinant falls below the bound 1/4
        (positive = violation; physical states stay <= ~1e-6)."""
        return 0.25 - (self.v11 * self.v22 - self.v12**2)


@dataclass
class WignerGrid:
    re_axis: np.ndarray
    im_axis: np.ndarray
    values: np.ndarray  # shape (len(im_axis), len(re_axis))
    warnings: list[str] = field(default_factory=list)


@lru_cache(maxsize=16)
def _quad_ops(n: int):
    m = annihilation(n)
    x1 = (m + m.conj().T) / math.sqrt(2.0)
    x2 = 1j * (m.conj().T - m) / math.sqrt(2.0)
    sym12 = 0.5 * (x1 @ x2 + x2 @ x1)
    nm = m.conj().T @ m
    return x1, x2, x1 @ x1, x2 @ x2, sym12, nm


def partial_trace_magnon(rho: np.ndarray, spec: HilbertSpec) -> np.ndarray:
    """Reduced magnon state (trace over the qubit when present)."""
    rho = linalg.as_complex_matrix(rho)
    d = spec.dim
    if rho.shape != (d, d):
        raise ValueError(f"state shape {rho.shape} does not match spec dimension {d}")
    if not spec.qubit_present:
        return rho
    n = spec.fock_dim
    return np.einsum("isjs->ij", rho.reshape(n, 2, n, 2))


def _real_expectation(op: np.ndarray, rho: np.ndarray, tol: float, what: str) -> float:
    val = complex(np.tensordot(op, rho, axes=([0, 1], [1, 0])))
    if abs(val.imag) > tol:
        raise ValueError(f"{what} has imaginary residue {val.imag:.3e} beyond {tol:.1e}")
    return val.real


def _check_state(rho: np.ndarray, tol: float = 1e-6) -> None:
    if abs(np.trace(rho) - 1.0) > tol:
        raise ValueError(f"state trace deviates from 1 by {abs(np.trace(rho) - 1.0):.3e}")
    if linalg.hermiticity_residual(rho) > tol:
        raise ValueError("state is not Hermitian within tolerance")


def min_variance(v11: float, v22: float, v12: float) -> tuple[float, float]:
    """Minimum of V(theta) = (V11+V22)/2 + ((V11-V22)/2) cos 2theta + V12 sin 2theta
    and the achieving angle in [0, pi).  Isotropic ties break to theta = 0."""
    half_diff = 0.5 * (v11 - v22)
    radius = math.hypot(half_diff, v12)
    v_min = 0.5 * (v11 + v22) - radius
    if radius < 1e-15 * max(1.0, abs(v11) + abs(v22)):
        return v_min, 0.0
    theta = 0.5 * math.atan2(-v12, -half_diff)
    if theta < 0.0:
        theta += math.pi
    if theta >= math.pi:
        theta -= math.pi
    return v_min, theta


def squeezing_db(v_min: float) -> float:
    """Squeezing degree in dB relative to the vacuum variance 0.5."""
    if v_min <= 0.0:
        raise ValueError(f"V_min must be positive, got {v_min}")
    return -10.0 * math.log10(v_min / V_VACUUM)


def covariance(rho: np.ndarray, spec: HilbertSpec | None = None) -> QuadratureStats:
    """Quadrature means and covariance of the magnon mode.

    ``rho`` may be the reduced magnon state, or the joint state together with
    its HilbertSpec, in which case the qubit is traced out first.
    """
    rho = linalg.as_complex_matrix(rho)
    if spec is not None and spec.qubit_present and rho.shape[0] == spec.dim:
        rho = partial_trace_magnon(rho, spec)
    _check_state(rho)
    return quadrature_stats(rho)


def quadrature_stats(rho_magnon: np.ndarray) -> QuadratureStats:
    """Moments of a reduced magnon state (no validation; engine hot path)."""
    n = rho_magnon.shape[0]
    x1, x2, x1sq, x2sq, sym12, _ = _quad_ops(n)
    tol = 1e-8
    m1 = _real_expectation(x1, rho_magnon, tol, "<X1>")
    m2 = _real_expectation(x2, rho_magnon, tol, "<X2>")
    v11 = _real_expectation(x1sq, rho_magnon, tol, "<X1^2>") - m1 * m1
    v22 = _real_expectation(x2sq, rho_magnon, tol, "<X2^2>") - m2 * m2
    v12 = _real_expectation(sym12, rho_magnon, tol, "<{X1,X2}>/2") - m1 * m2
    v_min, theta = min_variance(v11, v22, v12)
    return QuadratureStats(
        mean1=m1, mean2=m2, v11=v11, v22=v22, v12=v12,
        v_min=v_min, theta_opt=theta, s_db=squeezing_db(v_min),
    )


def mean_occupation(rho_magnon: np.ndarray) -> float:
    """<m+ m> of a reduced magnon state."""
    n = rho_magnon.shape[0]
    _, _, _, _, _, nm = _quad_ops(n)
    return _real_expectation(nm, rho_magnon, 1e-10, "<m+m>")


def purity(rho: np.ndarray) -> float:
    """tr(rho^2) of a Hermitian state."""
    return float(np.sum(np.abs(rho) ** 2))


# ---------------------------------------------------------------------------
# Wigner function
# ---------------------------------------------------------------------------


@lru_cache(maxsize=8)
def _tri_tables(n: int):
    """Index arrays and coefficient table for the lower-triangular
    matrix elements <i| e^{beta m+} |j> = beta^(i-j) sqrt(i!/j!)/(i-j)!."""
    rows, cols = np.tril_indices(n)
    k = rows - cols
    # log of sqrt(i!/j!)/(i-j)! computed stably
    lg = np.concatenate(([0.0], np.cumsum(np.log(np.arange(1, n)))))
    coeff = np.exp(0.5 * (lg[rows] - lg[cols]) - lg[k])
    return rows, cols, k, coeff


def _exp_raising(beta: complex, n: int) -> np.ndarray:
    rows, cols, k, coeff = _tri_tables(n)
    powers = beta ** np.arange(n)
    t = np.zeros((n, n), dtype=np.complex128)
    t[rows, cols] = powers[k] * coeff
    return t


def displaced_parity_overlap(beta: complex, weighted: np.ndarray) -> complex:
    """Tr[D(beta) W] for an arbitrary matrix W, using the closed-form
    displacement matrix elements (exact within the truncation of W)."""
    n = weighted.shape[0]
    t1 = _exp_raising(beta, n)
    t2 = _exp_raising(-np.conj(beta), n).T
    d = math.exp(-0.5 * abs(beta) ** 2) * (t1 @ t2)
    return complex(np.tensordot(d, weighted, axes=([0, 1], [1, 0])))


def wigner(
    rho_magnon: np.ndarray,
    extent: float = 3.0,
    points: int = 121,
    pad: int = 20,
) -> WignerGrid:
    """Wigner function on a square grid Re/Im alpha in [-extent, extent].

    Evaluated in a truncation enlarged by ``pad`` levels.  If the grid
    reaches beyond |alpha| ~ sqrt(N)/2 a validity warning is attached (the
    state cannot represent structure that far out).
    """
    rho = linalg.as_complex_matrix(rho_magnon)
    _check_state(rho)
    n = rho.shape[0]
    nw = n + pad
    warnings = []
    corner = math.sqrt(2.0) * extent
    if corner > 0.5 * math.sqrt(n):
        warnings.append(
            f"grid corner |alpha| = {corner:.2f} exceeds the truncation validity "
            f"radius sqrt(N)/2 = {0.5 * math.sqrt(n):.2f}"
        )
    padded = np.zeros((nw, nw), dtype=np.complex128)
    padded[:n, :n] = rho
    weighted = parity(nw) @ padded  # Tr[D(-2a) P rho]

    axis = np.linspace(-extent, extent, points)
    values = np.empty((points, points))
    max_imag = 0.0
    for iy, im in enumerate(axis):
        for ix, re in enumerate(axis):
            val = displaced_parity_overlap(-2.0 * (re + 1j * im), weighted)
            max_imag = max(max_imag, abs(val.imag))
            values[iy, ix] = (2.0 / math.pi) * val.real
    if max_imag * 2.0 / math.pi > 1e-9:
        raise ValueError(
            f"Wigner values carry imaginary residue {max_imag * 2 / math.pi:.3e} > 1e-9"
        )
    return WignerGrid(re_axis=axis, im_axis=axis.copy(), values=values, warnings=warnings)
