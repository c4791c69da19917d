"""Kalman-Bucy filter with an Euler discretization."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NumericalInstabilityError, StructuralError
from ..polyalg import ModelSpec


@dataclass(frozen=True)
class GaussianBelief:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", np.atleast_1d(np.asarray(self.mean, dtype=float)))
        object.__setattr__(self, "cov", np.atleast_2d(np.asarray(self.cov, dtype=float)))

    def pdf(self, points) -> np.ndarray:
        x = np.atleast_2d(points) - self.mean
        L = np.linalg.cholesky(self.cov)
        z = np.linalg.solve(L, x.T)
        d = self.mean.shape[0]
        return np.exp(-0.5 * np.sum(z * z, axis=0) - np.log(np.diag(L)).sum() - 0.5 * d * np.log(2 * np.pi))


def kalman_bucy_step(belief: GaussianBelief, dy, dt, A, C, Q_eff, R_eff) -> GaussianBelief:
    """One Euler step of the Kalman-Bucy mean and Riccati equations."""
    if not dt > 0:
        raise StructuralError("dt must be positive")
    m, P = belief.mean, belief.cov
    A, C = np.atleast_2d(A), np.atleast_2d(C)
    Q_eff, R_eff = np.atleast_2d(Q_eff), np.atleast_2d(R_eff)
    dy = np.atleast_1d(np.asarray(dy, dtype=float))
    gain = P @ C.T @ np.linalg.inv(R_eff)
    m_new = m + A @ m * dt + gain @ (dy - C @ m * dt)
    P_new = P + (A @ P + P @ A.T + Q_eff - gain @ C @ P) * dt
    P_new = 0.5 * (P_new + P_new.T)
    if np.linalg.eigvalsh(P_new).min() < -1e-10:
        raise NumericalInstabilityError("Kalman-Bucy covariance lost positive semi-definiteness")
    return GaussianBelief(m_new, P_new)


def linear_system(model: ModelSpec):
    """(A, C, Q_eff, R_eff) of a model with linear drift/observation and constant dispersion."""
    d = model.state_dim
    for p in list(model.drift) + list(model.observation):
        if any(sum(i) > 1 for i in p.terms) or p.coefficient((0,) * d) != 0.0:
            raise StructuralError("Kalman-Bucy needs a linear model without offsets")
    if not model.is_constant_dispersion():
        raise StructuralError("Kalman-Bucy needs a constant dispersion")

    def row(p):
        return [p.coefficient(tuple(int(k == j) for k in range(d))) for j in range(d)]

    A = np.array([row(f) for f in model.drift])
    C = np.array([row(h) for h in model.observation])
    sigma = model.eval_dispersion(np.zeros((1, d)))[0]
    return A, C, sigma @ model.process_spectral_density @ sigma.T, np.diag(model.noise_variances)


class KalmanBucy:
    def __init__(self, model: ModelSpec):
        self.A, self.C, self.Q, self.R = linear_system(model)

    def step(self, belief: GaussianBelief, dy, dt) -> GaussianBelief:
        return kalman_bucy_step(belief, dy, dt, self.A, self.C, self.Q, self.R)

    def run(self, belief: GaussianBelief, path, stride: int = 1):
        out = [belief]
        for k, dy in enumerate(path.increments):
            belief = self.step(belief, dy, path.dt)
            if (k + 1) % stride == 0:
                out.append(belief)
        return out
