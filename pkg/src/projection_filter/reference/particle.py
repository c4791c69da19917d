"""Bootstrap particle filter with systematic resampling."""
from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..errors import CapabilityError, DegeneracyError, StructuralError
from ..polyalg import ModelSpec


@dataclass(frozen=True, eq=False)
class ParticleEnsemble:
    positions: np.ndarray  # (N_p, d_x)
    weights: np.ndarray  # (N_p,), sums to one

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.positions, dtype=float))
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (x.shape[0],):
            raise StructuralError("one weight per particle required")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise StructuralError("weights must be non-negative and sum to one")
        object.__setattr__(self, "positions", x)
        object.__setattr__(self, "weights", w)

    @classmethod
    def sample_gaussian(cls, mean, cov, n: int, rng: np.random.Generator) -> "ParticleEnsemble":
        mean = np.atleast_1d(np.asarray(mean, dtype=float))
        L = np.linalg.cholesky(np.atleast_2d(cov))
        x = mean + rng.standard_normal((n, mean.shape[0])) @ L.T
        return cls(x, np.full(n, 1.0 / n))

    def __len__(self):
        return self.positions.shape[0]

    @property
    def ess(self) -> float:
        return 1.0 / float(np.sum(self.weights ** 2))

    def expectation(self, index) -> float:
        mono = np.prod(self.positions ** np.asarray(index, dtype=float), axis=1)
        return float(self.weights @ mono)

    def mean(self) -> np.ndarray:
        return self.weights @ self.positions

    def cov(self) -> np.ndarray:
        c = self.positions - self.mean()
        return (c.T * self.weights) @ c

    def to_csv(self, path) -> None:
        d = self.positions.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{k + 1}" for k in range(d)] + ["weight"])
            for x, wt in zip(self.positions, self.weights):
                w.writerow([repr(float(v)) for v in x] + [repr(float(wt))])


def systematic_resample(weights, u: float, backend=None) -> np.ndarray:
    """Ancestor indices; ``u`` in [0, 1) is the single uniform offset."""
    w = np.asarray(weights, dtype=float)
    if not 0.0 <= u < 1.0:
        raise ValueError("u must lie in [0, 1)")
    if w.ndim != 1 or w.size == 0 or np.any(w < 0) or not w.sum() > 0:
        raise DegeneracyError("cannot resample from these weights")
    return kernels.systematic_resample(w, u, backend=backend)


def particle_filter_step(ens: ParticleEnsemble, dy, dt: float, model: ModelSpec, rng: np.random.Generator,
                         resample: str = "ess", backend=None) -> ParticleEnsemble:
    """Reweight by the continuous-time likelihood of ``dy``, resample, then propagate.

    ``resample`` is ``"ess"`` (when ESS < N_p/2), ``"always"`` or ``"never"``.
    """
    if not dt > 0:
        raise StructuralError("dt must be positive")
    x, w = ens.positions, ens.weights
    n = x.shape[0]
    if model.obs_dim:
        h = model.eval_observation(x)
        rinv = 1.0 / model.noise_variances
        dy = np.atleast_1d(np.asarray(dy, dtype=float))
        with np.errstate(divide="ignore"):
            logw = np.log(w) + (h * rinv) @ dy - 0.5 * dt * np.einsum("ij,j,ij->i", h, rinv, h)
        shift = np.max(logw)
        if not np.isfinite(shift):
            raise DegeneracyError("all particle log-weights are non-finite")
        w = np.exp(logw - shift)
        total = w.sum()
        if not total > 0 or not np.isfinite(total):
            raise DegeneracyError("all particle weights vanished")
        w = w / total
    do_resample = resample == "always" or (resample == "ess" and 1.0 / np.sum(w ** 2) < 0.5 * n)
    if do_resample:
        idx = systematic_resample(w, float(rng.random()), backend=backend)
        x = x[idx]
        w = np.full(n, 1.0 / n)
    x = x + model.eval_drift(x) * dt + _diffuse(model, x, dt, rng)
    return ParticleEnsemble(x, w / w.sum())


def _diffuse(model: ModelSpec, x, dt, rng) -> np.ndarray:
    n = x.shape[0]
    if model.noise_dim == 0:
        return np.zeros_like(x)
    Lq = np.linalg.cholesky(model.process_spectral_density)
    xi = rng.standard_normal((n, model.noise_dim)) @ Lq.T * np.sqrt(dt)
    if model.is_constant_dispersion():
        sigma = model.eval_dispersion(x[:1])[0]
        return xi @ sigma.T
    return np.einsum("nka,na->nk", model.eval_dispersion(x), xi)


class ParticleTrajectory:
    """Recorded ensemble moments (all monomials up to degree 4); ensembles only when kept."""

    def __init__(self, dim: int, degree: int = 4):
        self._times = []
        self.ensembles = {}
        self._monomials = [i for i in itertools.product(range(degree + 1), repeat=dim) if 0 < sum(i) <= degree]
        self._moments = []

    def record(self, t, ens: ParticleEnsemble, keep: bool) -> None:
        self._times.append(t)
        if keep:
            self.ensembles[len(self._times) - 1] = ens
        self._moments.append([ens.expectation(i) for i in self._monomials])

    @property
    def times(self) -> np.ndarray:
        return np.array(self._times)

    def __len__(self):
        return len(self._times)

    def ensemble(self, i: int) -> ParticleEnsemble:
        try:
            return self.ensembles[i]
        except KeyError:
            raise CapabilityError(f"no ensemble kept for record {i}") from None

    def expectation(self, index) -> np.ndarray:
        index = tuple(index)
        try:
            j = self._monomials.index(index)
        except ValueError:
            raise CapabilityError(f"moment {index} not tracked by the particle filter") from None
        return np.array([m[j] for m in self._moments])


def run_particle_filter(ens: ParticleEnsemble, path, model: ModelSpec, rng, stride: int = 1,
                        resample: str = "ess", keep=None, backend=None) -> ParticleTrajectory:
    traj = ParticleTrajectory(ens.positions.shape[1])
    traj.record(0.0, ens, keep is None or keep(0))
    for k, dy in enumerate(path.increments):
        ens = particle_filter_step(ens, dy, path.dt, model, rng, resample, backend)
        if (k + 1) % stride == 0:
            traj.record((k + 1) * path.dt, ens, keep is None or keep(k + 1))
    return traj
