"""Shared helpers: random stable models and independent test oracles."""

from __future__ import annotations

import numpy as np

from sysid_rls import IOModel, simulate


def random_stable_model(rng: np.random.Generator, n: int, p: int, m: int,
                        radius: float = 0.85) -> IOModel:
    """Random coefficients with the output dynamics scaled inside ``radius``.

    Scaling F_i by s**i scales every pole by s, so the draw keeps its
    direction structure while becoming stable.
    """
    F = [rng.uniform(-1.0, 1.0, (p, p)) for _ in range(n)]
    G = [rng.uniform(-1.0, 1.0, (p, m)) for _ in range(n + 1)]
    model = IOModel(n=n, p=p, m=m, F=F, G=G)
    rho = model.companion_spectral_radius()
    if n > 0 and rho > radius:
        s = radius / rho
        F = [F[i] * s ** (i + 1) for i in range(n)]
        model = IOModel(n=n, p=p, m=m, F=F, G=G)
    return model


def random_contraction(rng: np.random.Generator, p: int, radius: float = 0.8) -> np.ndarray:
    """Random (p, p) block with spectral radius at most ``radius``."""
    D = rng.uniform(-1.0, 1.0, (p, p))
    rho = float(np.max(np.abs(np.linalg.eigvals(D)))) if p > 0 else 0.0
    if rho > radius:
        D = D * (radius / rho)
    return D


def shared_protocol_outputs(base: IOModel, other: IOModel, ics: np.ndarray,
                            inputs: np.ndarray):
    """Outputs of both models under shared inputs and initial conditions.

    The higher-order model is seeded with the base model's first ``n_hat``
    outputs (which include the shared initial conditions), so any later
    disagreement is a genuine coefficient difference.
    """
    y_base = simulate(base, ics, inputs).y
    y_other = simulate(other, y_base[: other.n], inputs).y
    return y_base, y_other


def simulation_equivalence_oracle(a: IOModel, b: IOModel, rng: np.random.Generator,
                                  steps: int = 100, trials: int = 20,
                                  agree_tol: float = 1e-8,
                                  diverge_tol: float = 1e-4):
    """Brute-force verdict from output comparison.

    Returns True when every trial agrees within ``agree_tol`` (relative),
    False as soon as one trial diverges beyond ``diverge_tol``, and None if
    all trials land in between (ambiguous).
    """
    base, high = (a, b) if a.n <= b.n else (b, a)
    worst = 0.0
    for _ in range(trials):
        ics = rng.uniform(-1.0, 1.0, (base.n, base.p))
        inputs = rng.uniform(-1.0, 1.0, (steps, base.m))
        y_base, y_high = shared_protocol_outputs(base, high, ics, inputs)
        denom = 1.0 + np.linalg.norm(y_base, axis=1)
        rel = np.linalg.norm(y_base - y_high, axis=1) / denom
        trial_worst = float(np.max(rel[high.n:])) if steps > high.n else 0.0
        if trial_worst > diverge_tol:
            return False
        worst = max(worst, trial_worst)
    return True if worst <= agree_tol else None


def kkt_projected_limit(theta_true_lifted: np.ndarray, theta0: np.ndarray,
                        P0: np.ndarray, M: np.ndarray) -> np.ndarray:
    """Row-wise KKT solve of the constrained prior-penalty minimization.

    Independent route: assemble the full symmetric KKT system per coefficient
    row and solve it directly, instead of forming the oblique projector.
    """
    d, r = M.shape
    P0_inv = np.linalg.inv(P0)
    K = np.block([[P0_inv, M], [M.T, np.zeros((r, r))]])
    rows = []
    for i in range(theta0.shape[0]):
        rhs = np.concatenate([P0_inv @ theta0[i], M.T @ theta_true_lifted[i]])
        rows.append(np.linalg.solve(K, rhs)[:d])
    return np.vstack(rows)


def random_spd(rng: np.random.Generator, d: int, eig_lo: float = 0.5,
               eig_hi: float = 2.0) -> np.ndarray:
    """Random symmetric positive-definite matrix with bounded spectrum."""
    Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    eigs = rng.uniform(eig_lo, eig_hi, d)
    return (Q * eigs) @ Q.T
