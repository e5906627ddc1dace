"""Persistent-excitation diagnostics for regressor sequences.

A sequence is weakly persistently exciting when the minimum eigenvalue of
the partial-sum Gram matrix diverges, and persistently exciting when the
running average Gram converges to a positive-definite limit.  Both notions
are asymptotic; the verdicts produced here are finite-data heuristics with
configurable thresholds and are labeled as such.

The reduced regressor pairs the oldest ``n`` outputs of an order ``n_hat``
window with the full input window:

    phi[n, n_hat, k] = [-y[k-n_hat+n-1]; ...; -y[k-n_hat]; u[k]; ...; u[k-n_hat]]

On data generated by a true order-n model the full order-n_hat regressor is
an exact linear image of this reduced one through the lift matrix, which is
the rank obstruction that makes overparameterized regressors fail weak
persistent excitation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .equivalence import build_lift_matrix
from .errors import ValidationError
from .model_core import IOModel, Trajectory

DEFAULT_PE_SLOPE_TOL = 1e-2
DEFAULT_GROWTH_RATIO = 1.2


@dataclass(frozen=True, eq=False)
class ExcitationReport:
    """Minimum-eigenvalue growth curve with heuristic excitation verdicts.

    ``min_eig_curve[i]`` is the minimum eigenvalue of the Gram partial sum
    after ``(i+1) * stride`` samples (nondecreasing).  ``gram_avg`` is the
    final running average; ``stabilization`` compares it against the
    half-sample average.
    """

    min_eig_curve: np.ndarray
    gram_avg: np.ndarray
    gram_avg_min_eig: float
    weak_pe: bool
    pe: bool
    window: tuple[int, int]
    stride: int
    weak_pe_threshold: float
    stabilization: float


def build_reduced_regressor(traj: Trajectory, k: int, n: int, n_hat: int) -> np.ndarray:
    """Reduced regressor of length ``p*n + m*(n_hat+1)`` at time index k."""
    if n_hat <= n:
        raise ValidationError(f"reduced regressor needs n_hat > n, got {n_hat} <= {n}")
    i = traj.index_of(k)
    if i < n_hat:
        raise ValidationError(f"index {k} is too early for an order-{n_hat} window")
    ys = traj.y[i - n_hat: i - n_hat + n][::-1]
    us = traj.u[i - n_hat: i + 1][::-1]
    if not np.all(np.isfinite(us)):
        raise ValidationError(f"input window ending at {k} contains missing values")
    return np.concatenate([-ys.ravel(), us.ravel()])


def reduced_regressor_matrix(traj: Trajectory, n: int, n_hat: int,
                             ks=None) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized reduced regressors, matching :func:`build_reduced_regressor`."""
    if n_hat <= n:
        raise ValidationError(f"reduced regressor needs n_hat > n, got {n_hat} <= {n}")
    if ks is None:
        ks = np.arange(traj.k0 + n_hat, traj.k_last + 1)
    ks = np.asarray(ks, dtype=int)
    if ks.size == 0:
        raise ValidationError("no regressor indices available")
    idx = ks - traj.k0
    if idx.min() < n_hat or idx.max() >= len(traj):
        raise ValidationError("requested indices fall outside the fully-windowed range")
    cols = [-traj.y[idx - lag] for lag in range(n_hat - n + 1, n_hat + 1)]
    cols += [traj.u[idx - lag] for lag in range(0, n_hat + 1)]
    Phi = np.hstack(cols)
    if not np.all(np.isfinite(Phi)):
        raise ValidationError("regressor windows contain missing input values")
    return Phi, ks


def lift_identity_check(traj: Trajectory, model: IOModel, n_hat: int,
                        k_range=None) -> float:
    """Max over k of the defect ||phi_full - M @ phi_reduced||.

    On data simulated exactly by ``model`` the defect is zero up to
    roundoff; a corrupted sample shows up in every window containing it.
    """
    from .rls import regressor_matrix

    lift = build_lift_matrix(model, n_hat)
    Phi_full, _, ks = regressor_matrix(traj, n_hat, k_range)
    Phi_red, _ = reduced_regressor_matrix(traj, model.n, n_hat, ks)
    defects = Phi_full - Phi_red @ lift.M.T
    return float(np.max(np.linalg.norm(defects, axis=1))) if len(ks) else 0.0


def _as_matrix(regressors) -> np.ndarray:
    try:
        Phi = np.asarray(regressors, dtype=float)
    except ValueError as exc:
        raise ValidationError(f"inconsistent regressor dimensions: {exc}") from exc
    if Phi.ndim == 1:
        Phi = Phi.reshape(-1, 1)
    if Phi.ndim != 2:
        raise ValidationError("regressors must form a 2-D array (time x dim)")
    if Phi.shape[0] == 0:
        raise ValidationError("regressor sequence is empty")
    return Phi


def excitation_report(regressors, pe_slope_tol: float = DEFAULT_PE_SLOPE_TOL,
                      weak_pe_threshold: float | None = None, stride: int = 1,
                      growth_ratio: float = DEFAULT_GROWTH_RATIO) -> ExcitationReport:
    """Partial-sum eigenvalue curve plus heuristic weak-PE / PE verdicts.

    weak PE: final min eigenvalue exceeds ``weak_pe_threshold`` (default
    ``10 * eps * trace`` of the final Gram) and has grown by at least
    ``growth_ratio`` since the half-way point.  PE: the running average Gram
    has min eigenvalue above the threshold scaled per sample and is
    Cauchy-stabilizing within ``pe_slope_tol`` relative Frobenius distance.
    """
    Phi = _as_matrix(regressors)
    K, d = Phi.shape
    gram = np.zeros((d, d))
    curve = []
    half_idx = max(1, K // 2)
    gram_half = None
    min_eig_half = 0.0
    for i in range(K):
        gram += np.outer(Phi[i], Phi[i])
        if (i + 1) % stride == 0 or i == K - 1:
            curve.append(float(np.linalg.eigvalsh(gram)[0]))
        if i + 1 == half_idx:
            gram_half = gram / half_idx
            min_eig_half = float(np.linalg.eigvalsh(gram)[0])
    min_eig_curve = np.asarray(curve)
    final_min_eig = float(min_eig_curve[-1])
    trace = float(np.trace(gram))
    if weak_pe_threshold is None:
        weak_pe_threshold = 10.0 * np.finfo(float).eps * max(trace, 1.0)
    still_growing = final_min_eig >= growth_ratio * min_eig_half or min_eig_half <= 0.0
    weak_pe = final_min_eig > weak_pe_threshold and still_growing

    gram_avg = gram / K
    gram_avg_min_eig = float(np.linalg.eigvalsh(gram_avg)[0])
    if gram_half is None:
        gram_half = gram_avg
    stabilization = float(
        np.linalg.norm(gram_avg - gram_half) / (1.0 + np.linalg.norm(gram_avg))
    )
    pe = gram_avg_min_eig > weak_pe_threshold / K and stabilization <= pe_slope_tol
    return ExcitationReport(
        min_eig_curve=min_eig_curve,
        gram_avg=gram_avg,
        gram_avg_min_eig=gram_avg_min_eig,
        weak_pe=bool(weak_pe),
        pe=bool(pe),
        window=(0, K),
        stride=stride,
        weak_pe_threshold=float(weak_pe_threshold),
        stabilization=stabilization,
    )


@dataclass(frozen=True, eq=False)
class GramLimit:
    """Estimated Gram limit with a stabilization diagnostic.

    ``stabilization`` is the relative Frobenius distance between the running
    averages at the full and half sample counts; small values indicate the
    limit estimate has settled.
    """

    C: np.ndarray
    stabilization: float
    samples: int


def estimate_gram_limit(regressors) -> GramLimit:
    """Final running-average Gram matrix of the outer products."""
    Phi = _as_matrix(regressors)
    K = Phi.shape[0]
    half = max(1, K // 2)
    C_full = (Phi.T @ Phi) / K
    C_half = (Phi[:half].T @ Phi[:half]) / half
    stab = float(np.linalg.norm(C_full - C_half) / (1.0 + np.linalg.norm(C_full)))
    return GramLimit(C=C_full, stabilization=stab, samples=K)
