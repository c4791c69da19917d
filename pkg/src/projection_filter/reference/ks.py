"""Finite-difference solvers for the Kushner-Stratonovich equation.

Each step applies the Fokker-Planck operator (explicit Euler or
Crank-Nicolson), then the multiplicative measurement gain

    p <- p (1 + (h - E h)^T R^{-1} (dy - E h dt)),

clamps negative values and renormalizes on the grid. The operator is in
flux form with central differences. Absorbing boundaries hold the outermost
nodes at zero; reflecting ones close the outer faces and give the end nodes
half-width cells, so the trapezoidal mass is conserved exactly.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .. import kernels
from ..errors import CapabilityError, ConfigError, NumericalInstabilityError, StructuralError
from ..polyalg import ModelSpec, zero_index
from .grid import DensityGrid

log = logging.getLogger(__name__)

NEGATIVE_TOLERANCE = 1e-8


def _axis_ops(n: int, dx: float, reflecting: bool):
    """1-D flux-divergence matrices for advection (-(g)') and diffusion (g'')."""
    widths = np.full(n, dx)
    if reflecting:
        widths[[0, -1]] = 0.5 * dx
    # face operators: avg and gradient on the n-1 interior faces
    avg = sp.diags([np.full(n - 1, 0.5), np.full(n - 1, 0.5)], [0, 1], shape=(n - 1, n))
    grad = sp.diags([np.full(n - 1, -1.0 / dx), np.full(n - 1, 1.0 / dx)], [0, 1], shape=(n - 1, n))
    # divergence of face values into nodes, closed outer faces
    div = sp.diags([np.full(n - 1, 1.0), np.full(n - 1, -1.0)], [0, -1], shape=(n, n - 1))
    div = sp.diags(1.0 / widths) @ div
    adv = (-div @ avg).tocsr()
    lap = (div @ grad).tocsr()
    central = sp.diags([np.full(n - 1, -0.5 / dx), np.full(n - 1, 0.5 / dx)], [-1, 1], shape=(n, n)).tolil()
    central[0, :] = 0
    central[n - 1, :] = 0
    return adv, lap, central.tocsr()


def _kron_axis(mat, axis: int, shape) -> sp.csr_matrix:
    out = sp.identity(1, format="csr")
    for k, n in enumerate(shape):
        out = sp.kron(out, mat if k == axis else sp.identity(n, format="csr"), format="csr")
    return out


@dataclass
class KSDiagnostics:
    steps: int = 0
    clamped_steps: int = 0
    min_value: float = 0.0
    max_boundary_mass: float = 0.0
    mass_errors: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "steps": self.steps,
            "clamped_steps": self.clamped_steps,
            "min_value": self.min_value,
            "max_boundary_mass": self.max_boundary_mass,
            "max_mass_error": max(self.mass_errors, default=0.0),
        }


class KSSolver:
    """Kushner-Stratonovich solver on a fixed grid for a time-invariant model.

    ``scheme`` is ``"explicit"`` or ``"cn"``. The explicit scheme checks the
    diffusion number dt * sum_k max(alpha_kk) / (2 dx_k^2) against
    ``max_ratio`` at construction.
    """

    def __init__(self, model: ModelSpec, axes, dt: float, scheme: str = "explicit",
                 boundary: str = "absorbing", max_ratio: float = 0.5, backend=None):
        if scheme not in ("explicit", "cn"):
            raise ConfigError(f"unknown scheme {scheme!r}", "scheme")
        if boundary not in ("absorbing", "reflecting"):
            raise ConfigError(f"unknown boundary {boundary!r}", "boundary")
        if not dt > 0:
            raise ConfigError("must be positive", "dt")
        self.template = DensityGrid.zeros(axes)
        if self.template.dim != model.state_dim:
            raise StructuralError("grid dimension does not match the model")
        self.model = model.normalized()
        self.raw_model = model
        self.dt = float(dt)
        self.scheme = scheme
        self.reflecting = boundary == "reflecting"
        self.backend = backend
        self.diagnostics = KSDiagnostics()

        pts = self.template.points()
        d = self.template.dim
        self.h = self.model.eval_observation(pts)  # (N, d_y)
        self.f = self.model.eval_drift(pts)
        alpha_polys = self.model.alpha()
        self.alpha = np.empty((pts.shape[0], d, d))
        for k in range(d):
            for l in range(d):
                a = alpha_polys[k][l]
                self.alpha[:, k, l] = a(pts) if not a.is_zero() else 0.0
        cross = [(k, l) for k in range(d) for l in range(k + 1, d) if np.any(self.alpha[:, k, l] != 0.0)]
        if cross and self.reflecting:
            raise CapabilityError("reflecting boundaries do not support correlated diffusion")
        dx = self.template.spacing
        self.ratio = self.dt * sum(0.5 * np.max(self.alpha[:, k, k]) / dx[k] ** 2 for k in range(d))
        if scheme == "explicit" and self.ratio > max_ratio:
            raise ConfigError(f"diffusion number {self.ratio:.4g} exceeds the stability limit {max_ratio}", "dt")

        self._use_kernel = d == 1 and scheme == "explicit"
        if not self._use_kernel:
            self.operator = self._assemble(cross)
        if scheme == "cn":
            eye = sp.identity(self.operator.shape[0], format="csc")
            try:
                self._lu = splu((eye - 0.5 * self.dt * self.operator).tocsc())
            except RuntimeError as err:
                raise NumericalInstabilityError(f"Crank-Nicolson factorization failed: {err}") from err
            self._rhs = (eye + 0.5 * self.dt * self.operator).tocsr()
        self._boundary = self._boundary_mask()

    def _assemble(self, cross) -> sp.csr_matrix:
        shape = self.template.shape
        dx = self.template.spacing
        N = int(np.prod(shape))
        L = sp.csr_matrix((N, N))
        central = []
        for k, n in enumerate(shape):
            adv, lap, c = _axis_ops(n, dx[k], self.reflecting)
            central.append(c)
            L = L + _kron_axis(adv, k, shape) @ sp.diags(self.f[:, k])
            L = L + 0.5 * _kron_axis(lap, k, shape) @ sp.diags(self.alpha[:, k, k])
        for k, l in cross:
            L = L + _kron_axis(central[k], k, shape) @ _kron_axis(central[l], l, shape) @ sp.diags(self.alpha[:, k, l])
        if not self.reflecting:
            L = sp.diags((~self._boundary_mask()).astype(float)) @ L
        return L.tocsr()

    def _boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.template.shape, dtype=bool)
        for k in range(self.template.dim):
            idx = [slice(None)] * self.template.dim
            idx[k] = 0
            mask[tuple(idx)] = True
            idx[k] = -1
            mask[tuple(idx)] = True
        return mask.ravel()

    def prepare(self, grid: DensityGrid) -> DensityGrid:
        if not grid.same_axes(self.template):
            raise StructuralError("grid axes differ from the solver axes")
        v = grid.values.ravel().copy()
        if not self.reflecting:
            v[self._boundary] = 0.0
        return DensityGrid(grid.axes, v.reshape(grid.shape)).normalized()

    def propagate(self, values: np.ndarray) -> np.ndarray:
        """Fokker-Planck step only, on flattened values."""
        if self._use_kernel:
            return kernels.fp_step_1d(values, self.f[:, 0], self.alpha[:, 0, 0], self.template.spacing[0],
                                      self.dt, self.reflecting, backend=self.backend)
        if self.scheme == "explicit":
            return values + self.dt * (self.operator @ values)
        return self._lu.solve(self._rhs @ values)

    def gain(self, values: np.ndarray, dy) -> np.ndarray:
        dy = self.raw_model.scale_increments(np.atleast_1d(dy))
        mass = self.template.integrate(values)
        Eh = np.array([self.template.integrate(values * self.h[:, j]) for j in range(self.h.shape[1])]) / mass
        return values * (1.0 + (self.h - Eh) @ (dy - Eh * self.dt))

    def step(self, grid: DensityGrid, dy) -> DensityGrid:
        v = self.gain(self.propagate(grid.values.ravel()), dy)
        if not np.all(np.isfinite(v)):
            raise NumericalInstabilityError(f"non-finite density after step {self.diagnostics.steps}")
        vmin = float(v.min())
        diag = self.diagnostics
        diag.steps += 1
        if vmin < -NEGATIVE_TOLERANCE * max(float(v.max()), 1.0):
            diag.clamped_steps += 1
            if diag.clamped_steps == 1:
                log.warning("negative density %.3g clamped at step %d", vmin, diag.steps)
        diag.min_value = min(diag.min_value, vmin)
        v = np.maximum(v, 0.0)
        out = DensityGrid(grid.axes, v.reshape(grid.shape)).normalized()
        diag.mass_errors.append(abs(out.mass() - 1.0))
        bv = out.values.ravel() * self._boundary
        diag.max_boundary_mass = max(diag.max_boundary_mass, float(np.max(bv)) if bv.size else 0.0)
        return out

    def run(self, grid0: DensityGrid, path, stride: int = 1, keep=None) -> "GridTrajectory":
        """Run over ``path``; moments of every recorded step are kept, grids only when ``keep(k)``."""
        if abs(path.dt - self.dt) > 1e-12 * self.dt:
            raise StructuralError(f"path dt {path.dt} differs from solver dt {self.dt}")
        grid = self.prepare(grid0)
        traj = GridTrajectory(self.template)
        traj.record(0.0, grid, keep is None or keep(0))
        for k, dy in enumerate(path.increments):
            grid = self.step(grid, dy)
            if (k + 1) % stride == 0:
                traj.record((k + 1) * path.dt, grid, keep is None or keep(k + 1))
        return traj


class GridTrajectory:
    """Time series of grid densities; moments up to degree 4 cached per record."""

    def __init__(self, template: DensityGrid):
        self.template = template
        self._times = []
        self._values = []
        self.snapshots = {}
        self._monomials = _monomials_upto(template.dim, 4)
        self._mono_vals = np.column_stack([np.prod(template.points() ** np.array(i), axis=1)
                                           for i in self._monomials])
        self._moments = []

    def record(self, t: float, grid: DensityGrid, keep: bool) -> None:
        self._times.append(t)
        v = grid.values.ravel()
        self._moments.append([self.template.integrate(v * self._mono_vals[:, j]) for j in range(len(self._monomials))])
        if keep:
            self.snapshots[len(self._times) - 1] = grid

    @property
    def times(self) -> np.ndarray:
        return np.array(self._times)

    def __len__(self):
        return len(self._times)

    def grid(self, i: int) -> DensityGrid:
        try:
            return self.snapshots[i]
        except KeyError:
            raise CapabilityError(f"no density snapshot kept for record {i}") from None

    def expectation(self, index) -> np.ndarray:
        index = tuple(index)
        try:
            j = self._monomials.index(index)
        except ValueError:
            raise CapabilityError(f"moment {index} not tracked by the grid solver") from None
        return np.array([m[j] for m in self._moments])


def _monomials_upto(d: int, degree: int) -> list:
    import itertools

    return [i for i in itertools.product(range(degree + 1), repeat=d) if sum(i) <= degree and i != zero_index(d)]


def ks_fd_step_explicit(grid: DensityGrid, dy, dt, model: ModelSpec, boundary="absorbing", max_ratio=0.5):
    return KSSolver(model, grid.axes, dt, "explicit", boundary, max_ratio).step(grid, dy)


def ks_cn_step(grid: DensityGrid, dy, dt, model: ModelSpec, boundary="absorbing"):
    return KSSolver(model, grid.axes, dt, "cn", boundary).step(grid, dy)
