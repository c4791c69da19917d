"""Pure numpy implementations of the compiled kernels in ``_core.pyx``."""
import numpy as np


def lse_dual2(stats, log_base, signs, theta, q):
    """Forward-mode value, gradient and leading Hessian block of

        psi(theta~) = log sum_j sign_j exp(log_base_j + stats_j . theta~)

    at theta~ = (theta, 0, ..., 0). Each node term is linear in theta~
    (gradient stats_j, zero Hessian); exp and the running sum propagate
    (e, e s_j, e s_j s_j^T) and the final log applies
    (G/S, H/S - G G^T / S^2). Signs come from negative quadrature weights;
    a non-positive sum yields NaN.
    """
    p = stats.shape[1]
    m = theta.shape[0]
    t = log_base + stats[:, :m] @ theta if m else np.array(log_base, dtype=float)
    shift = t.max()
    if not np.isfinite(shift):
        return shift, np.full(p, np.nan), np.full((q, q), np.nan)
    e = signs * np.exp(t - shift)
    S = e.sum()
    if not S > 0:
        return np.nan, np.full(p, np.nan), np.full((q, q), np.nan)
    G = e @ stats
    sq = stats[:, :q]
    H = (sq.T * e) @ sq
    grad = G / S
    gq = grad[:q]
    hess = H / S - np.outer(gq, gq)
    return shift + np.log(S), grad, 0.5 * (hess + hess.T)


def systematic_resample(weights, u):
    """Indices drawn by systematic resampling with offset ``u`` in [0, 1)."""
    n = weights.shape[0]
    cdf = np.cumsum(weights)
    cdf /= cdf[-1]
    points = (u + np.arange(n)) / n
    idx = np.searchsorted(cdf, points, side="right")
    return np.minimum(idx, n - 1)


def fp_step_1d(p, drift, alpha, dx, dt, reflecting):
    """One explicit Euler step of dp/dt = -(f p)' + 1/2 (alpha p)'' in flux form.

    Absorbing boundaries pin both end nodes to zero. Reflecting ones set the
    outer face fluxes to zero and give the end nodes half-width cells, which
    conserves the trapezoidal mass exactly.
    """
    F = drift * p
    G = alpha * p
    J = 0.5 * (F[:-1] + F[1:]) - 0.5 * (G[1:] - G[:-1]) / dx
    out = p.copy()
    out[1:-1] -= dt / dx * (J[1:] - J[:-1])
    if reflecting:
        out[0] -= 2.0 * dt / dx * J[0]
        out[-1] += 2.0 * dt / dx * J[-1]
    else:
        out[0] = 0.0
        out[-1] = 0.0
    return out
