"""Euler-Maruyama simulation of the state and measurement processes."""
from __future__ import annotations

import numpy as np

from ..polyalg import ModelSpec
from ..projfilter import MeasurementPath


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator for one named stream of a seeded experiment."""
    ss = np.random.SeedSequence(seed, spawn_key=(stream,))
    return np.random.Generator(np.random.Philox(ss))


STREAM_SIMULATION = 0
STREAM_PARTICLES = 1


def simulate_sde(model: ModelSpec, x0, dt: float, n_steps: int, rng: np.random.Generator):
    """Simulate ``n_steps`` Euler-Maruyama steps.

    Returns ``(states, path)`` where ``states`` has shape (n_steps + 1, d_x)
    and ``path`` holds dy_k = h(x_k) dt + sqrt(R dt) xi_k.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    d = model.state_dim
    x = np.array(x0, dtype=float).reshape(d)
    Lq = np.linalg.cholesky(model.process_spectral_density) if model.noise_dim else np.zeros((0, 0))
    r_sd = np.sqrt(model.noise_variances * dt)
    sqdt = np.sqrt(dt)
    states = np.empty((n_steps + 1, d))
    incs = np.empty((n_steps, model.obs_dim))
    states[0] = x
    const_sigma = model.eval_dispersion(x[None])[0] if model.is_constant_dispersion() else None
    for k in range(n_steps):
        xi_w = rng.standard_normal(model.noise_dim)
        xi_v = rng.standard_normal(model.obs_dim)
        xx = x[None]
        incs[k] = model.eval_observation(xx)[0] * dt + r_sd * xi_v
        sigma = const_sigma if const_sigma is not None else model.eval_dispersion(xx)[0]
        x = x + model.eval_drift(xx)[0] * dt + sigma @ (Lq @ xi_w) * sqdt
        states[k + 1] = x
    return states, MeasurementPath(dt, incs)
