"""Independent first/second-moment oracle for the quadratic magnon model.

For the two-magnon Hamiltonian delta_m m+m - (delta_m g_c^2/4)(m+ + m)^2 the
quadrature form is H = (delta_m/2) [(1 - g_c^2) X1^2 + X2^2] + const, so the
mean vector r = (<X1>, <X2>) and covariance V obey the linear equations

    dr/dt = A r,        dV/dt = A V + V A^T + D,

with (u = 1 - g_c^2, angular delta_m, magnon loss kappa at occupation nbar)

    A = [[-kappa/2,          delta_m],
         [-delta_m * u,     -kappa/2]],      D = kappa (nbar + 1/2) I.

This module never touches the density-matrix engine: moments are propagated
in closed form through the 2x2 matrix exponential (plus a Lyapunov solve for
the driven part), with an adaptive-ODE fallback, so it is a genuinely
independent check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.integrate as _si
import scipy.linalg as _sla

from .params import TWO_PI, DerivedParams

__all__ = [
    "CovarianceState",
    "OracleTrajectory",
    "ComparisonReport",
    "drift_matrices",
    "evolve_covariance",
    "oracle_trajectory",
    "closed_form_vacuum_variances",
    "vacuum_covariance",
    "thermal_covariance",
    "compare",
]


@dataclass(frozen=True)
class CovarianceState:
    """Mean vector (<X1>, <X2>) and symmetric 2x2 covariance matrix."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(2)
        cov = np.asarray(self.cov, dtype=float).reshape(2, 2)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", 0.5 * (cov + cov.T))


def vacuum_covariance() -> CovarianceState:
    return CovarianceState(np.zeros(2), 0.5 * np.eye(2))


def thermal_covariance(nbar: float) -> CovarianceState:
    return CovarianceState(np.zeros(2), (nbar + 0.5) * np.eye(2))


@dataclass
class OracleTrajectory:
    times_us: np.ndarray
    means: np.ndarray  # (n, 2)
    covs: np.ndarray  # (n, 2, 2)

    @property
    def v11(self) -> np.ndarray:
        return self.covs[:, 0, 0]

    @property
    def v22(self) -> np.ndarray:
        return self.covs[:, 1, 1]

    @property
    def v12(self) -> np.ndarray:
        return self.covs[:, 0, 1]

    @property
    def states(self) -> list[CovarianceState]:
        return [CovarianceState(m, c) for m, c in zip(self.means, self.covs)]

    def __len__(self) -> int:
        return len(self.times_us)

    def __getitem__(self, i: int) -> CovarianceState:
        return CovarianceState(self.means[i], self.covs[i])


def drift_matrices(d: DerivedParams, kappa_mhz: float, nbar: float):
    """Drift and diffusion matrices (angular units, rad/us) of the damped
    quadratic model; ``kappa_mhz`` is the ordinary-frequency loss rate."""
    delta = TWO_PI * d.delta_m
    kappa = TWO_PI * kappa_mhz
    u = 1.0 - d.g_c**2
    a = np.array([[-0.5 * kappa, delta], [-delta * u, -0.5 * kappa]])
    diff = kappa * (nbar + 0.5) * np.eye(2)
    return a, diff


def evolve_covariance(
    a: np.ndarray, d: np.ndarray, state0: CovarianceState, t_grid_us: np.ndarray
) -> OracleTrajectory:
    """Propagate means and covariance over a time grid (microseconds).

    Uses the exact solution V(t) = Phi (V0 - Vp) Phi^T + Vp with Phi = e^{At}
    and A Vp + Vp A^T + D = 0 whenever that Lyapunov system is solvable,
    falling back to a high-accuracy adaptive ODE otherwise.
    """
    a = np.asarray(a, dtype=float).reshape(2, 2)
    d = np.asarray(d, dtype=float).reshape(2, 2)
    t_grid = np.asarray(t_grid_us, dtype=float)
    v0 = state0.cov
    r0 = state0.mean

    vp = None
    if np.allclose(d, 0.0, atol=0.0):
        vp = np.zeros((2, 2))
    else:
        try:
            cand = _sla.solve_continuous_lyapunov(a, -d)
            if np.max(np.abs(a @ cand + cand @ a.T + d)) < 1e-9 * max(1.0, np.max(np.abs(d))):
                vp = cand
        except Exception:
            vp = None

    n = len(t_grid)
    means = np.empty((n, 2))
    covs = np.empty((n, 2, 2))
    if vp is not None:
        w0 = v0 - vp
        for i, t in enumerate(t_grid):
            phi = _sla.expm(a * t)
            means[i] = phi @ r0
            covs[i] = phi @ w0 @ phi.T + vp
    else:
        def rhs(_t, y):
            r = y[:2]
            v = y[2:].reshape(2, 2)
            dv = a @ v + v @ a.T + d
            return np.concatenate([a @ r, dv.ravel()])

        y0 = np.concatenate([r0, v0.ravel()])
        sol = _si.solve_ivp(
            rhs, (t_grid[0], t_grid[-1]), y0, t_eval=t_grid,
            rtol=1e-12, atol=1e-14, method="DOP853",
        )
        if not sol.success:
            raise RuntimeError(f"covariance ODE failed: {sol.message}")
        means[:] = sol.y[:2].T
        covs[:] = sol.y[2:].T.reshape(n, 2, 2)
    covs = 0.5 * (covs + np.transpose(covs, (0, 2, 1)))
    return OracleTrajectory(times_us=t_grid.copy(), means=means, covs=covs)


def oracle_trajectory(
    d: DerivedParams,
    kappa_mhz: float,
    nbar: float,
    state0: CovarianceState,
    t_grid_us: np.ndarray,
) -> OracleTrajectory:
    a, diff = drift_matrices(d, kappa_mhz, nbar)
    return evolve_covariance(a, diff, state0, t_grid_us)


def closed_form_vacuum_variances(delta_m_mhz: float, g_c: float, t_us) -> tuple:
    """Hand-derived lossless solution from vacuum (the analytic anchor).

    Solving dr/dt = A r with kappa = 0 gives the rotation-shear flow
        X1(t) = X1 cos(wt) + X2 sin(wt)/sqrt(u)
        X2(t) = X2 cos(wt) - X1 sqrt(u) sin(wt),
    u = 1 - g_c^2, w = delta_m sqrt(u); propagating the vacuum covariance
    0.5 I yields

        V11 = 0.5 [cos^2 + sin^2/u]
        V22 = 0.5 [cos^2 + u sin^2]
        V12 = 0.5 sin cos (1 - u)/sqrt(u).

    Valid on both sides of the critical point via the analytic continuation
    of cos/sin to imaginary w; at u = 0 it degenerates to the pure shear
    V11 = 0.5 (1 + (delta_m t)^2), V22 = 0.5, V12 = 0.5 delta_m t.
    Returns (v11, v22, v12) arrays.
    """
    t = np.asarray(t_us, dtype=float)
    delta = TWO_PI * delta_m_mhz
    u = 1.0 - g_c**2
    if u == 0.0:
        tau = delta * t
        return 0.5 * (1.0 + tau**2), 0.5 * np.ones_like(tau), 0.5 * tau
    w = delta * np.sqrt(complex(u))
    c = np.cos(w * t)
    s = np.sin(w * t)
    v11 = 0.5 * (c * c + s * s / u)
    v22 = 0.5 * (c * c + u * s * s)
    v12 = 0.5 * s * c * (1.0 - u) / np.sqrt(complex(u))
    for arr in (v11, v22, v12):
        if np.max(np.abs(np.asarray(arr).imag)) > 1e-9:
            raise AssertionError("closed form produced a complex variance")
    return v11.real, v22.real, v12.real


@dataclass
class ComparisonReport:
    """Per-field maximum absolute deviation between engine and oracle."""

    max_diff: dict[str, float]
    n_compared: int
    cap_index: int | None = None
    cap_time_ns: float | None = None
    cap_reason: str | None = None

    @property
    def worst(self) -> float:
        return max(self.max_diff.values())


def compare(engine_traj, oracle: OracleTrajectory, fock_dim: int | None = None) -> ComparisonReport:
    """Deviation report between an engine trajectory and the oracle.

    Grids must match.  If ``fock_dim`` is given, the window is capped where
    the oracle variance first exceeds fock_dim/4 (the truncated simulation
    cannot represent broader states) and the cap is recorded.
    """
    t_engine = np.asarray(engine_traj.times_ns) * 1e-3
    if len(t_engine) != len(oracle.times_us) or np.max(
        np.abs(t_engine - oracle.times_us)
    ) > 1e-9 * max(1.0, t_engine[-1] if len(t_engine) else 1.0):
        raise ValueError("engine and oracle time grids do not match")

    n = len(t_engine)
    cap_index = None
    cap_reason = None
    if fock_dim is not None:
        vmax = np.maximum(oracle.v11, oracle.v22)
        beyond = np.nonzero(vmax > fock_dim / 4.0)[0]
        if beyond.size:
            cap_index = int(beyond[0])
            cap_reason = (
                f"oracle variance {vmax[cap_index]:.3g} exceeds N/4 = {fock_dim / 4:.3g} "
                f"at t = {engine_traj.times_ns[cap_index]:.1f} ns"
            )
    stop = cap_index if cap_index is not None else n
    if stop == 0:
        raise ValueError("truncation validity window is empty")
    sl = slice(0, stop)
    max_diff = {
        "v11": float(np.max(np.abs(engine_traj.v11[sl] - oracle.v11[sl]))),
        "v22": float(np.max(np.abs(engine_traj.v22[sl] - oracle.v22[sl]))),
        "v12": float(np.max(np.abs(engine_traj.v12[sl] - oracle.v12[sl]))),
        "mean1": float(np.max(np.abs(engine_traj.mean1[sl] - oracle.means[sl, 0]))),
        "mean2": float(np.max(np.abs(engine_traj.mean2[sl] - oracle.means[sl, 1]))),
    }
    return ComparisonReport(
        max_diff=max_diff,
        n_compared=stop,
        cap_index=cap_index,
        cap_time_ns=float(engine_traj.times_ns[cap_index]) if cap_index is not None else None,
        cap_reason=cap_reason,
    )
