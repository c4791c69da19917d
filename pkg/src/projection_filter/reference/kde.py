"""Gaussian kernel density estimates of weighted particle ensembles on a grid."""
from __future__ import annotations

import numpy as np

from ..errors import DegeneracyError
from .grid import DensityGrid
from .particle import ParticleEnsemble

COV_JITTER = 1e-12
CHUNK = 2048


def bandwidth_factor(ens: ParticleEnsemble) -> np.ndarray:
    """Scott factor N^(-1/(d+4)) times the Cholesky factor of the weighted covariance."""
    n, d = ens.positions.shape
    cov = ens.cov()
    try:
        L = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        L = np.linalg.cholesky(cov + COV_JITTER * np.eye(d))
    return n ** (-1.0 / (d + 4)) * L


def kde_density(ens: ParticleEnsemble, axes) -> DensityGrid:
    n, d = ens.positions.shape
    if n < 2:
        raise DegeneracyError("kernel density estimate needs at least two particles")
    grid = DensityGrid.zeros(axes)
    H = bandwidth_factor(ens)
    Hinv = np.linalg.inv(H)
    zp = ens.positions @ Hinv.T
    zg = grid.points() @ Hinv.T
    keep = ens.weights > 0
    zp, w = zp[keep], ens.weights[keep]
    pn = np.sum(zp * zp, axis=1)
    out = np.empty(zg.shape[0])
    for s in range(0, zg.shape[0], CHUNK):
        z = zg[s:s + CHUNK]
        d2 = np.sum(z * z, axis=1)[:, None] + pn[None, :] - 2.0 * z @ zp.T
        out[s:s + CHUNK] = np.exp(-0.5 * np.maximum(d2, 0.0)) @ w
    out /= (2 * np.pi) ** (d / 2) * abs(np.linalg.det(H))
    g = DensityGrid(grid.axes, out.reshape(grid.shape))
    if not g.mass() > 0:
        # every kernel is narrower than the grid spacing: put the mass on the nearest nodes
        idx = np.rint((ens.positions - [a[0] for a in grid.axes]) / grid.spacing).astype(int)
        idx = np.clip(idx, 0, np.array(grid.shape) - 1)
        vals = np.zeros(grid.shape)
        np.add.at(vals, tuple(idx.T), ens.weights)
        g = DensityGrid(grid.axes, vals)
    return g.normalized()
