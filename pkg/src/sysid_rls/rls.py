"""Regularized recursive least squares over input/output regressors.

The regressor at time k for a fit order ``n`` stacks the negated past
outputs newest-first, then the inputs newest-first:

    phi[n, k] = [-y[k-1]; ...; -y[k-n]; u[k]; ...; u[k-n]]

so that exact data from a matching-order model satisfies
``y[k] = theta_true @ phi[n, k]``.  The cost after k samples is

    J(theta) = sum_i ||y_i - theta phi_i||^2
               + tr[(theta - theta0) P0^{-1} (theta - theta0)^T]

whose unique minimizer is tracked recursively via the covariance downdate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NumericalError, ValidationError
from .model_core import Trajectory

DEFAULT_P0_SCALE = 1e3


@dataclass(frozen=True, eq=False)
class RegressorSample:
    """One (regressor, output) pair."""

    phi: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float).reshape(-1)
        y = np.asarray(self.y, dtype=float).reshape(-1)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "y", y)


@dataclass(frozen=True, eq=False)
class RlsState:
    """Estimate theta (p x d), covariance P (d x d), step counter, and the
    optional running information matrix P_inv."""

    theta: np.ndarray
    P: np.ndarray
    k: int = 0
    P_inv: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.P.shape[0]

    def check(self, tol_sym: float = 1e-12, tol_inv: float = 1e-8) -> None:
        """On-demand invariant check: symmetry, positive definiteness, and
        (when tracked) consistency of P with P_inv."""
        asym = float(np.max(np.abs(self.P - self.P.T)))
        if asym > tol_sym * (1.0 + float(np.max(np.abs(self.P)))):
            raise NumericalError(f"covariance asymmetry {asym:.3e}")
        eigs = np.linalg.eigvalsh(self.P)
        if eigs[0] <= 0:
            raise NumericalError(f"covariance lost positive definiteness (min eig {eigs[0]:.3e})")
        if self.P_inv is not None:
            defect = float(np.max(np.abs(self.P @ self.P_inv - np.eye(self.dim))))
            if defect > tol_inv:
                raise NumericalError(f"P @ P_inv deviates from identity by {defect:.3e}")


def regressor_dim(order: int, p: int, m: int) -> int:
    return p * order + m * (order + 1)


def initial_state(order: int, p: int, m: int, theta0: np.ndarray | None = None,
                  P0: np.ndarray | None = None, p0_scale: float = DEFAULT_P0_SCALE,
                  track_information: bool = False) -> RlsState:
    """Fresh state: theta0 defaults to zeros, P0 to p0_scale * I."""
    d = regressor_dim(order, p, m)
    theta = np.zeros((p, d)) if theta0 is None else np.asarray(theta0, dtype=float).copy()
    if theta.shape != (p, d):
        raise ValidationError(f"theta0 has shape {theta.shape}, expected {(p, d)}")
    P = p0_scale * np.eye(d) if P0 is None else np.asarray(P0, dtype=float).copy()
    if P.shape != (d, d):
        raise ValidationError(f"P0 has shape {P.shape}, expected {(d, d)}")
    P_inv = spd_inverse(P) if track_information else None
    return RlsState(theta=theta, P=P, k=0, P_inv=P_inv)


def spd_inverse(A: np.ndarray) -> np.ndarray:
    """Inverse of a symmetric positive-definite matrix via Cholesky."""
    try:
        c = scipy.linalg.cho_factor(A)
    except scipy.linalg.LinAlgError as exc:
        raise NumericalError("matrix is not positive definite") from exc
    return scipy.linalg.cho_solve(c, np.eye(A.shape[0]))


def build_regressor(traj: Trajectory, k: int, order: int) -> RegressorSample:
    """Regressor/output pair at absolute time index k.

    Requires data back to ``k - order``; raises on window underflow or NaN
    input cells inside the window.
    """
    i = traj.index_of(k)
    if i < order:
        raise ValidationError(
            f"index {k} is too early for order {order} (needs {order} past samples)"
        )
    ys = traj.y[i - order:i][::-1]
    us = traj.u[i - order:i + 1][::-1]
    if not np.all(np.isfinite(us)):
        raise ValidationError(f"input window ending at {k} contains missing values")
    phi = np.concatenate([-ys.ravel(), us.ravel()])
    return RegressorSample(phi=phi, y=traj.y[i])


def regressor_matrix(traj: Trajectory, order: int, ks=None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized regressors: (Phi, Y, ks) with Phi[i] = phi[order, ks[i]].

    Defaults to every fully-windowed index.  Matches
    :func:`build_regressor` bit for bit.
    """
    if ks is None:
        ks = np.arange(traj.k0 + order, traj.k_last + 1)
    ks = np.asarray(ks, dtype=int)
    if ks.size == 0:
        raise ValidationError("no regressor indices available")
    idx = ks - traj.k0
    if idx.min() < order or idx.max() >= len(traj):
        raise ValidationError("requested indices fall outside the fully-windowed range")
    cols = [-traj.y[idx - lag] for lag in range(1, order + 1)]
    cols += [traj.u[idx - lag] for lag in range(0, order + 1)]
    Phi = np.hstack(cols)
    if not np.all(np.isfinite(Phi)):
        raise ValidationError("regressor windows contain missing input values")
    return Phi, traj.y[idx], ks


def valid_regressor_indices(traj: Trajectory, order: int) -> np.ndarray:
    """Fully-windowed indices whose input windows contain no missing values.

    Records imported from files may have empty (NaN) input cells; every
    window touching one is dropped.
    """
    finite = np.all(np.isfinite(traj.u), axis=1).astype(int)
    window = np.convolve(finite, np.ones(order + 1, dtype=int), mode="valid")
    ok = window == order + 1
    ks = traj.k0 + order + np.flatnonzero(ok[: len(traj) - order])
    if ks.size == 0:
        raise ValidationError(f"no index has a complete order-{order} input window")
    return ks


def _stack(samples) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(samples, tuple) and len(samples) == 2:
        Phi, Y = samples
        return np.asarray(Phi, dtype=float), np.asarray(Y, dtype=float)
    phis = [np.asarray(s.phi, dtype=float) for s in samples]
    ys = [np.asarray(s.y, dtype=float) for s in samples]
    if not phis:
        return np.zeros((0, 0)), np.zeros((0, 0))
    return np.vstack(phis), np.vstack(ys)


def residual(theta: np.ndarray, sample: RegressorSample) -> np.ndarray:
    """Prediction error y - theta @ phi."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape[1] != sample.phi.shape[0]:
        raise ValidationError(
            f"theta width {theta.shape[1]} does not match regressor length {sample.phi.shape[0]}"
        )
    return sample.y - theta @ sample.phi


def cost(theta_hat: np.ndarray, samples, theta0: np.ndarray, P0: np.ndarray) -> float:
    """Sum of squared residuals plus the P0-weighted prior penalty."""
    theta_hat = np.asarray(theta_hat, dtype=float)
    theta0 = np.asarray(theta0, dtype=float)
    Phi, Y = _stack(samples)
    data_term = 0.0
    if Phi.shape[0]:
        Z = Y - Phi @ theta_hat.T
        data_term = float(np.sum(Z * Z))
    E = theta_hat - theta0
    X = scipy.linalg.cho_solve(_cho(P0), E.T)
    return data_term + float(np.sum(E.T * X))


def _cho(P0: np.ndarray):
    try:
        return scipy.linalg.cho_factor(np.asarray(P0, dtype=float))
    except scipy.linalg.LinAlgError as exc:
        raise NumericalError("P0 must be symmetric positive definite") from exc


def batch_solve(samples, theta0: np.ndarray, P0: np.ndarray) -> np.ndarray:
    """Unique minimizer of :func:`cost` over all supplied samples.

    ``samples`` may be a sequence of :class:`RegressorSample` or a prestacked
    ``(Phi, Y)`` pair with Phi of shape (K, d) and Y of shape (K, p).  Solved
    by factorization of the regularized normal equations; the P0 term keeps
    them nonsingular even with no data.
    """
    theta0 = np.asarray(theta0, dtype=float)
    P0_inv = scipy.linalg.cho_solve(_cho(P0), np.eye(theta0.shape[1]))
    Phi, Y = _stack(samples)
    A = P0_inv.copy()
    B = theta0 @ P0_inv
    if Phi.shape[0]:
        A += Phi.T @ Phi
        B = B + Y.T @ Phi
    return scipy.linalg.solve(A, B.T, assume_a="pos").T


def rls_step(state: RlsState, sample: RegressorSample) -> RlsState:
    """One covariance downdate and coefficient update.

    The downdated covariance is re-symmetrized each step; with the
    information matrix tracked, ``P_inv`` accumulates ``phi phi^T``.
    """
    phi, y = sample.phi, sample.y
    if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(y))):
        raise ValidationError("sample contains non-finite values")
    if phi.shape[0] != state.dim:
        raise ValidationError(
            f"regressor length {phi.shape[0]} does not match state dimension {state.dim}"
        )
    P = state.P
    Pphi = P @ phi
    denom = 1.0 + float(phi @ Pphi)
    P_new = P - np.outer(Pphi, Pphi) / denom
    P_new = 0.5 * (P_new + P_new.T)
    z = y - state.theta @ phi
    theta_new = state.theta + np.outer(z, P_new @ phi)
    P_inv_new = None
    if state.P_inv is not None:
        P_inv_new = state.P_inv + np.outer(phi, phi)
    return RlsState(theta=theta_new, P=P_new, k=state.k + 1, P_inv=P_inv_new)


def run_rls(state: RlsState, samples) -> RlsState:
    """Fold :func:`rls_step` over a sample sequence."""
    for s in samples:
        state = rls_step(state, s)
    return state
