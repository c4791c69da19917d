"""Propagation of the natural parameters of an EM(c*) projection filter.

    d theta = g(theta)^{-1} [a0 + b0 eta + (A0 + eta bh^T) eta~] dt + lambda dy

with Euler-Maruyama steps (Heun on the drift as an option). The diffusion
coefficient ``lambda`` is constant, so the Stratonovich and Ito forms agree.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import CapabilityError, SingularFisherError, StepFailure, StructuralError
from .expfam import MomentData, PreparedManifold, log_partition
from .polyalg import CoefficientSet

log = logging.getLogger(__name__)

JITTER_START = 1e-10
JITTER_MAX = 1e-6


@dataclass(frozen=True)
class FilterState:
    time: float
    theta: np.ndarray
    moments: MomentData


@dataclass(frozen=True)
class MeasurementPath:
    dt: float
    increments: np.ndarray  # (n_t, d_y)

    def __post_init__(self):
        inc = np.asarray(self.increments, dtype=float)
        if inc.ndim == 1:
            inc = inc[:, None]
        if not self.dt > 0:
            raise StructuralError(f"dt must be positive, got {self.dt}")
        if not np.all(np.isfinite(inc)):
            raise StructuralError("measurement increments must be finite")
        object.__setattr__(self, "increments", inc)

    def __len__(self):
        return self.increments.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(len(self) + 1)

    def coarsen(self, factor: int) -> "MeasurementPath":
        """Sum consecutive increments so the path fits a step ``factor`` times larger."""
        n = len(self) // factor
        inc = self.increments[: n * factor].reshape(n, factor, -1).sum(axis=1)
        return MeasurementPath(self.dt * factor, inc)


def solve_fisher(fisher: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve g x = rhs by Cholesky, escalating diagonal jitter on failure."""
    try:
        return cho_solve(cho_factor(fisher), rhs)
    except LinAlgError:
        pass
    norm = np.linalg.norm(fisher, 2)
    jitter = JITTER_START * norm
    eye = np.eye(fisher.shape[0])
    while jitter <= JITTER_MAX * norm * (1 + 1e-12):
        try:
            x = cho_solve(cho_factor(fisher + jitter * eye), rhs)
            log.debug("Fisher factorization needed jitter %.3g", jitter)
            return x
        except LinAlgError:
            jitter *= 10.0
    raise SingularFisherError(f"Fisher matrix not positive definite even with jitter {JITTER_MAX} * |g|")


def drift(state: FilterState, coeffs: CoefficientSet) -> np.ndarray:
    """g^{-1} (a0 + b0 eta + M eta~) at the cached moments of ``state``."""
    md = state.moments
    return solve_fisher(md.fisher, coeffs.drift_rhs(md.eta, md.eta_tilde))


class ProjectionFilter:
    """Projection filter for a polynomial model on a prepared manifold.

    ``coeffs`` come from :func:`~.polyalg.assemble_coefficients` and carry the
    scaling of raw measurement increments. ``integrability="probe"`` rejects
    parameters whose density grows toward the boundary of the state space
    (see :func:`~.expfam.check_integrable`); ``"finite"`` only requires the
    quadrature sums to stay finite.
    """

    def __init__(self, coeffs: CoefficientSet, manifold: PreparedManifold, scheme: str = "euler", backend=None,
                 integrability: str = "probe"):
        if scheme not in ("euler", "heun"):
            raise ValueError(f"unknown scheme {scheme!r}")
        if integrability not in ("probe", "finite"):
            raise ValueError(f"unknown integrability check {integrability!r}")
        self.integrability = integrability
        if coeffs.a0.shape[0] != manifold.m or coeffs.A0.shape[1] != manifold.p:
            raise StructuralError("coefficient set does not match the manifold basis")
        self.coeffs = coeffs
        self.manifold = manifold
        self.scheme = scheme
        self.backend = backend
        self.max_residual = 0.0
        self.min_fisher_eigenvalue = np.inf  # over every state the drift was evaluated at

    def moments(self, theta) -> MomentData:
        return log_partition(self.manifold, theta, backend=self.backend, check=self.integrability == "probe")

    def initial_state(self, theta0, time: float = 0.0) -> FilterState:
        theta0 = np.array(theta0, dtype=float)
        return FilterState(time, theta0, self.moments(theta0))

    def drift(self, state: FilterState) -> np.ndarray:
        md = state.moments
        self.min_fisher_eigenvalue = min(self.min_fisher_eigenvalue, float(np.linalg.eigvalsh(md.fisher)[0]))
        rhs = self.coeffs.drift_rhs(md.eta, md.eta_tilde)
        x = solve_fisher(md.fisher, rhs)
        scale = np.linalg.norm(rhs)
        if scale > 0:
            self.max_residual = max(self.max_residual, np.linalg.norm(md.fisher @ x - rhs) / scale)
        return x

    def _scaled(self, dy) -> np.ndarray:
        return self.coeffs.scale_increments(dy)

    def step(self, state: FilterState, dy, dt: float) -> FilterState:
        if dt < 0:
            raise StructuralError("dt must be non-negative")
        dy = self._scaled(dy)
        if dt == 0.0 and not np.any(dy):
            return state
        noise = self.coeffs.lam @ dy
        theta = state.theta
        try:
            f0 = self.drift(state)
            theta = state.theta + f0 * dt + noise
            if self.scheme == "heun":
                mid = FilterState(state.time + dt, theta, self.moments(theta))
                theta = state.theta + 0.5 * (f0 + self.drift(mid)) * dt + noise
            md = self.moments(theta)
        except ArithmeticError as err:  # not integrable, or Fisher singular
            raise StepFailure(str(err), theta=theta) from err
        return FilterState(state.time + dt, theta, md)

    def run(self, theta0, path: MeasurementPath, stride: int = 1, t0: float = 0.0) -> "Trajectory":
        state = self.initial_state(theta0, t0)
        traj = Trajectory(self.manifold.basis)
        traj.append(state)
        for k, dy in enumerate(path.increments):
            try:
                state = self.step(state, dy, path.dt)
            except StepFailure as err:
                err.step = k
                err.args = (f"step {k}: {err.args[0]}",)
                err.trajectory = traj
                raise
            # index-based time stamps keep solvers on identical clocks
            state = replace(state, time=t0 + (k + 1) * path.dt)
            if (k + 1) % stride == 0:
                traj.append(state)
        return traj


def step(state: FilterState, dy, dt: float, coeffs: CoefficientSet, man: PreparedManifold) -> FilterState:
    return ProjectionFilter(coeffs, man).step(state, dy, dt)


def run(theta0, path: MeasurementPath, coeffs: CoefficientSet, man: PreparedManifold, stride: int = 1):
    return ProjectionFilter(coeffs, man).run(theta0, path, stride)


@dataclass
class Trajectory:
    """Recorded filter states; arrays are built on demand."""

    basis: object
    states: list = field(default_factory=list)

    def append(self, state: FilterState) -> None:
        self.states.append(state)

    def __len__(self):
        return len(self.states)

    def __getitem__(self, i):
        return self.states[i]

    @property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.states])

    @property
    def thetas(self) -> np.ndarray:
        return np.array([s.theta for s in self.states])

    @property
    def etas(self) -> np.ndarray:
        return np.array([s.moments.eta for s in self.states])

    @property
    def eta_tildes(self) -> np.ndarray:
        return np.array([s.moments.eta_tilde for s in self.states])

    @property
    def psis(self) -> np.ndarray:
        return np.array([s.moments.psi for s in self.states])

    def expectation(self, index) -> np.ndarray:
        """E[x^index] over time, read from the cached extended moments."""
        pos = self.basis.position(tuple(index))
        if pos is None:
            raise CapabilityError(f"moment {tuple(index)} is not an extended statistic of this filter")
        return np.array([s.moments.eta_tilde[pos] for s in self.states])

    def to_csv(self, path) -> None:
        m = len(self.basis.natural)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time"] + [f"theta{i + 1}" for i in range(m)] + [f"eta{i + 1}" for i in range(m)] + ["psi"])
            for s in self.states:
                w.writerow([repr(float(s.time))] + [repr(float(v)) for v in s.theta]
                           + [repr(float(v)) for v in s.moments.eta] + [repr(float(s.moments.psi))])
