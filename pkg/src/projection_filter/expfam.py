"""Exponential families with monomial statistics evaluated by quadrature.

The log-partition function is computed on the canonical cube,

    psi(theta) = log int exp(c(phi(u))^T theta) |phi'(u)| du,

by a fixed quadrature grid. Every node contributes ``log_base_j + c~_j^T theta~``
to a log-sum-exp, so the node statistics and ``log_base`` are computed once
(:func:`prepare`) and each evaluation is a single sweep over the nodes. The
gradient over the extended statistics gives their expectations (extension
coordinates are held at zero), and the Hessian block over the natural
parameters is the Fisher matrix.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import softmax

from . import kernels
from .errors import DomainError, IntegrabilityError, StructuralError
from .polyalg import StatisticsBasis, eval_monomials, unit_index
from .quadrature import QuadratureGrid

BOUNDARY_PROBE = 1.0 - 1e-6


@dataclass(frozen=True)
class Bijection:
    """Increasing smooth map from (-1, 1) onto the real line."""

    kind: str = "arctanh"
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("arctanh", "algebraic", "tan"):
            raise DomainError(f"unknown bijection {self.kind!r}")
        if not self.scale > 0:
            raise DomainError(f"bijection scale must be positive, got {self.scale}")

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        s = self.scale
        if self.kind == "arctanh":
            return s * np.arctanh(u)
        if self.kind == "algebraic":
            return s * u / ((1.0 - u) * (1.0 + u))
        return s * np.tan(0.5 * np.pi * u)

    def derivative(self, u):
        u = np.asarray(u, dtype=float)
        s = self.scale
        one_minus = (1.0 - u) * (1.0 + u)
        if self.kind == "arctanh":
            return s / one_minus
        if self.kind == "algebraic":
            return s * (1.0 + u * u) / one_minus ** 2
        return s * np.pi / (2.0 * np.cos(0.5 * np.pi * u) ** 2)

    def log_derivative(self, u):
        u = np.asarray(u, dtype=float)
        log_one_minus = np.log1p(-u) + np.log1p(u)
        if self.kind == "arctanh":
            return np.log(self.scale) - log_one_minus
        if self.kind == "algebraic":
            return np.log(self.scale) + np.log1p(u * u) - 2.0 * log_one_minus
        return np.log(self.scale * np.pi / 2.0) - 2.0 * np.log(np.cos(0.5 * np.pi * u))

    def inverse(self, x):
        x = np.asarray(x, dtype=float) / self.scale
        if self.kind == "arctanh":
            return np.tanh(x)
        if self.kind == "algebraic":
            # root of x u^2 + u - x = 0 inside (-1, 1)
            with np.errstate(divide="ignore", invalid="ignore"):
                u = 2.0 * x / (1.0 + np.sqrt(1.0 + 4.0 * x * x))
            return u
        return 2.0 / np.pi * np.arctan(x)


@dataclass(frozen=True, eq=False)
class PreparedManifold:
    basis: StatisticsBasis
    bijections: tuple
    grid: QuadratureGrid
    node_states: np.ndarray
    node_stats: np.ndarray
    log_base: np.ndarray
    signs: np.ndarray  # sign of each quadrature weight; sparse grids have negative ones

    @property
    def m(self) -> int:
        return self.basis.m

    @property
    def p(self) -> int:
        return self.basis.m + self.basis.m_h

    @property
    def dim(self) -> int:
        return self.basis.dim

    def __len__(self):
        return self.node_stats.shape[0]


@dataclass(frozen=True)
class MomentData:
    psi: float
    eta: np.ndarray
    eta_tilde: np.ndarray
    fisher: np.ndarray


def prepare(basis: StatisticsBasis, bijection, grid: QuadratureGrid) -> PreparedManifold:
    """Evaluate the extended statistics and log-weights at every node once."""
    d = basis.dim
    if grid.dim != d:
        raise StructuralError(f"grid dimension {grid.dim} != state dimension {d}")
    if isinstance(bijection, Bijection):
        bijections = (bijection,) * d
    else:
        bijections = tuple(bijection)
        if len(bijections) != d:
            raise StructuralError(f"need {d} bijections, got {len(bijections)}")
    u = grid.nodes
    states = np.column_stack([b(u[:, k]) for k, b in enumerate(bijections)])
    stats = eval_monomials(states, basis.extended)
    signs = np.sign(grid.weights)
    with np.errstate(divide="ignore"):
        log_base = np.log(np.abs(grid.weights))
    for k, b in enumerate(bijections):
        log_base = log_base + b.log_derivative(u[:, k])
    if grid.weight_function == "chebyshev":
        # the rule integrates f w with w = (1 - u^2)^(-1/2); divide w back out
        for k in range(d):
            log_base = log_base + 0.5 * (np.log1p(-u[:, k]) + np.log1p(u[:, k]))
    bad = ~(np.isfinite(stats).all(axis=1) & np.isfinite(states).all(axis=1) & ~np.isnan(log_base))
    if bad.any():
        j = int(np.flatnonzero(bad)[0])
        raise DomainError(f"node {j} at {u[j].tolist()} maps to a non-finite statistic")
    for arr in (states, stats, log_base, signs):
        arr.setflags(write=False)
    return PreparedManifold(basis, bijections, grid, states, np.ascontiguousarray(stats),
                            np.ascontiguousarray(log_base), np.ascontiguousarray(signs))


def _probe_points(man: PreparedManifold) -> np.ndarray:
    d = man.dim
    dirs = np.array([v for v in itertools.product((-1.0, 0.0, 1.0), repeat=d) if any(v)])
    u = BOUNDARY_PROBE * dirs
    return np.column_stack([b(u[:, k]) for k, b in enumerate(man.bijections)])


def check_integrable(man: PreparedManifold, theta) -> None:
    """Reject parameters whose unnormalized density grows toward the cube boundary.

    Quadrature sums stay finite even when the true integral diverges, so a
    finite value alone does not prove integrability. The exponent
    ``c(x)^T theta`` is compared at points mapped from just inside each face
    and corner of the cube against its maximum over the nodes; a polynomial
    exponent that is larger out there than anywhere on the grid is rising
    along that ray.
    """
    theta = np.asarray(theta, dtype=float)
    probes = _probe_points(man)
    with np.errstate(over="ignore", invalid="ignore"):
        outer = eval_monomials(probes, man.basis.natural) @ theta
        inner = man.node_stats[:, : man.m] @ theta
    if np.any(np.isnan(outer)) or np.max(outer) > np.max(inner):
        raise IntegrabilityError(f"exp(c(x)^T theta) is not integrable at theta={theta.tolist()}", theta)


def log_partition(man: PreparedManifold, theta, backend=None, check=True) -> MomentData:
    """psi, eta, eta~ and the Fisher matrix at ``theta`` by one AD sweep over nodes."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (man.m,):
        raise StructuralError(f"theta must have shape ({man.m},), got {theta.shape}")
    with np.errstate(over="ignore", invalid="ignore"):
        psi, grad, hess = kernels.lse_dual2(man.node_stats, man.log_base, theta, man.m,
                                              signs=man.signs, backend=backend)
    if not np.isfinite(psi) or not np.all(np.isfinite(grad)) or not np.all(np.isfinite(hess)):
        raise IntegrabilityError(f"log-partition is not finite at theta={theta.tolist()}", theta)
    if check:
        check_integrable(man, theta)
    return MomentData(float(psi), grad[: man.m].copy(), grad, hess)


def log_partition_closed_form(man: PreparedManifold, theta) -> MomentData:
    """Softmax-weighted mean and centered covariance of the node statistics.

    Independent of the AD sweep; kept as a cross-check.
    """
    theta = np.asarray(theta, dtype=float)
    t = man.log_base + man.node_stats[:, : man.m] @ theta
    shift = np.max(t)
    total = np.sum(man.signs * np.exp(t - shift))
    psi = shift + np.log(total)
    w = man.signs * softmax(t) * (np.sum(np.exp(t - shift)) / total)
    eta_tilde = w @ man.node_stats
    centered = man.node_stats[:, : man.m] - eta_tilde[: man.m]
    fisher = (centered.T * w) @ centered
    return MomentData(float(psi), eta_tilde[: man.m].copy(), eta_tilde, fisher)


def log_partition_dual(man: PreparedManifold, theta):
    """The same quantity built from generic :class:`~.autodiff.Dual2` scalars.

    One Dual2 per node, so only practical for small grids; used to check the
    kernels against the primitive propagation rules.
    """
    from . import autodiff as ad

    theta = np.asarray(theta, dtype=float)
    full = np.concatenate([theta, np.zeros(man.p - man.m)])
    seeds = ad.variables(full, q=man.m)
    terms = [ad.dot(seeds, row) + lb for row, lb in zip(man.node_stats, man.log_base)]
    if np.all(man.signs > 0):
        return ad.log_sum_exp(terms)
    shift = max(t.value for t in terms)
    total = ad.lift_const(0.0, man.p, man.m)
    for t, sg in zip(terms, man.signs):
        total = ad.add(total, ad.scale(ad.exp(t - shift), float(sg)))
    return ad.log(total) + shift


def density_at(man: PreparedManifold, theta, points, moments: MomentData | None = None) -> np.ndarray:
    """exp(c(x)^T theta - psi(theta)) at ``points`` of shape (n, d)."""
    theta = np.asarray(theta, dtype=float)
    if moments is None:
        moments = log_partition(man, theta)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != man.dim:
        pts = pts.reshape(-1, man.dim)
    with np.errstate(over="ignore"):
        return np.exp(eval_monomials(pts, man.basis.natural) @ theta - moments.psi)


def gaussian_to_natural(mean, cov, basis: StatisticsBasis) -> np.ndarray:
    """Natural parameters of N(mean, cov) in ``basis``; higher statistics get 0."""
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    d = basis.dim
    if mean.shape != (d,) or cov.shape != (d, d):
        raise StructuralError("mean/cov do not match the state dimension")
    P = np.linalg.inv(cov)
    Pm = P @ mean
    theta = np.zeros(basis.m)
    pos = {idx: i for i, idx in enumerate(basis.natural)}

    def put(idx, value):
        if idx not in pos:
            if value == 0.0:
                return
            raise StructuralError(f"basis lacks monomial {idx} needed for a Gaussian")
        theta[pos[idx]] = value

    for i in range(d):
        if unit_index(d, i) not in pos and Pm[i] != 0.0:
            raise StructuralError(f"basis lacks monomial {unit_index(d, i)} needed for a Gaussian")
        put(unit_index(d, i), Pm[i])
        if unit_index(d, i, 2) not in pos:
            raise StructuralError(f"basis lacks monomial {unit_index(d, i, 2)} needed for a Gaussian")
        put(unit_index(d, i, 2), -0.5 * P[i, i])
        for j in range(i + 1, d):
            e = [0] * d
            e[i] = e[j] = 1
            put(tuple(e), -P[i, j])
    return theta


def natural_to_gaussian(theta, basis: StatisticsBasis):
    """Inverse of :func:`gaussian_to_natural` for a purely quadratic exponent."""
    theta = np.asarray(theta, dtype=float)
    d = basis.dim
    P = np.zeros((d, d))
    b = np.zeros(d)
    for idx, th in zip(basis.natural, theta):
        deg = sum(idx)
        if deg == 1:
            b[idx.index(1)] = th
        elif deg == 2:
            nz = [k for k, e in enumerate(idx) if e]
            if len(nz) == 1:
                P[nz[0], nz[0]] = -2.0 * th
            else:
                P[nz[0], nz[1]] = P[nz[1], nz[0]] = -th
        elif th != 0.0:
            raise StructuralError("theta has non-zero coefficients beyond degree 2")
    cov = np.linalg.inv(P)
    return cov @ b, cov
