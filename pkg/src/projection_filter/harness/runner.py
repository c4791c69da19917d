"""Run one configured experiment and write its artifacts.

All solvers consume the same simulated measurement path. Each records at
multiples of ``record_interval``, so record ``i`` of every solver refers to
time ``i * record_interval``.
"""
from __future__ import annotations

import csv
import json
import logging
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy
from scipy.interpolate import RegularGridInterpolator

from .. import __version__, kernels
from ..errors import StepFailure
from ..expfam import density_at, prepare
from ..metrics import ComparisonTrace, hellinger, moment_trace
from ..polyalg import assemble_coefficients, eval_monomials
from ..projfilter import ProjectionFilter
from ..quadrature import gauss_chebyshev, halton, smolyak
from ..reference import (DensityGrid, GaussianBelief, KalmanBucy, KSSolver, ParticleEnsemble, STREAM_PARTICLES,
                         STREAM_SIMULATION, kde_density, make_rng, run_particle_filter, simulate_sde)
from .config import ExperimentConfig, FilterConfig

log = logging.getLogger(__name__)


@dataclass
class SolverResult:
    name: str
    kind: str
    status: str = "ok"
    error: str | None = None
    step: int | None = None
    wall_clock: float = 0.0
    source: object = None  # has .times and .expectation(index)
    density: object = None  # record index -> DensityGrid on the comparison axes
    diagnostics: dict = field(default_factory=dict)
    files: list = field(default_factory=list)
    beliefs: list | None = None

    def manifest(self) -> dict:
        out = {"kind": self.kind, "status": self.status, "wall_clock_s": round(self.wall_clock, 3)}
        if self.error:
            out["error"] = self.error
            out["step"] = self.step
        if self.diagnostics:
            out["diagnostics"] = self.diagnostics
        return out


def build_grid(fc: FilterConfig, dim: int, sizes: dict):
    if fc.rule == "gauss_chebyshev":
        if dim != 1:
            from ..errors import ConfigError

            raise ConfigError("Gauss-Chebyshev grids are one-dimensional", f"filter.{fc.name}.rule")
        return gauss_chebyshev(fc.nodes)
    if fc.rule == "halton":
        count = sizes[fc.count.split(":", 1)[1]] if isinstance(fc.count, str) else fc.count
        return halton(dim, count)
    return smolyak(fc.rule, dim, fc.level, elide_boundary=fc.elide_boundary)


def build_grids(cfg: ExperimentConfig) -> dict:
    """Quadrature grid of every filter; ``match:`` counts resolved after the others."""
    d = cfg.model.state_dim
    grids, sizes = {}, {}
    for fc in sorted(cfg.filters, key=lambda f: isinstance(f.count, str)):
        grids[fc.name] = build_grid(fc, d, sizes)
        sizes[fc.name] = len(grids[fc.name])
    return grids


def _on_axes(g: DensityGrid, axes) -> DensityGrid:
    """Linear interpolation of a grid density onto other axes, renormalized."""
    if g.axes == tuple(axes):
        return g
    target = DensityGrid.zeros(axes)
    interp = RegularGridInterpolator(g.coords(), g.values, bounds_error=False, fill_value=0.0)
    return DensityGrid(target.axes, np.maximum(interp(target.points()), 0.0)).normalized()


def _from_pdf(pdf, axes) -> DensityGrid:
    target = DensityGrid.zeros(axes)
    return DensityGrid(target.axes, pdf(target.points())).normalized()


def _run_filter(cfg, fc, grid, basis, coeffs, path, backend) -> SolverResult:
    res = SolverResult(fc.name, "projection_filter")
    man = prepare(basis, fc.bijection, grid)
    pf = ProjectionFilter(coeffs, man, scheme=fc.scheme, backend=backend, integrability=fc.integrability)
    try:
        traj = pf.run(cfg.theta0, path, stride=cfg.stride(cfg.dt))
    except StepFailure as err:
        res.status, res.error, res.step = "failed", str(err), err.step
        res.source = getattr(err, "trajectory", None)
        traj = None
    except ArithmeticError as err:  # initial state not integrable
        res.status, res.error, res.step = "failed", str(err), 0
        traj = None
    # the last accepted state never enters a drift evaluation, so include it explicitly
    last = traj[-1] if traj is not None else None
    min_eig = pf.min_fisher_eigenvalue
    if last is not None:
        min_eig = min(min_eig, float(np.linalg.eigvalsh(last.moments.fisher)[0]))
    res.diagnostics = {"nodes": len(grid), "max_fisher_residual": pf.max_residual,
                       "min_fisher_eigenvalue": min_eig if np.isfinite(min_eig) else None}
    if traj is None:
        return res
    res.source = traj
    res.density = lambda i, axes: _from_pdf(lambda x: density_at(man, traj[i].theta, x, traj[i].moments), axes)
    return res


def _initial_grid(cfg, axes) -> DensityGrid:
    if cfg.initial_mean is not None:
        belief = GaussianBelief(cfg.initial_mean, cfg.initial_cov)
        return DensityGrid.from_function(axes, belief.pdf)
    natural = cfg.natural
    return DensityGrid.from_function(axes, lambda x: np.exp(eval_monomials(x, natural) @ cfg.theta0))


def _run_baseline(cfg, bc, path, index, backend) -> SolverResult:
    res = SolverResult(bc.name, bc.type)
    solver = None
    factor = int(round(bc.dt / cfg.dt))
    bpath = path.coarsen(factor) if factor > 1 else path
    stride = cfg.stride(bc.dt)
    try:
        if bc.type in ("ks_explicit", "ks_cn"):
            solver = KSSolver(cfg.model, bc.axes, bc.dt, "explicit" if bc.type == "ks_explicit" else "cn",
                              bc.boundary, bc.max_ratio, backend=backend)
            traj = solver.run(_initial_grid(cfg, bc.axes), bpath, stride=stride, keep=lambda k: True)
            res.diagnostics = solver.diagnostics.as_dict()
            res.diagnostics["diffusion_number"] = solver.ratio
            res.density = lambda i, axes: _on_axes(traj.grid(i), axes)
        elif bc.type == "particle":
            rng = make_rng(cfg.seed, STREAM_PARTICLES + index)
            ens = ParticleEnsemble.sample_gaussian(cfg.initial_mean, cfg.initial_cov, bc.particles, rng)
            traj = run_particle_filter(ens, bpath, cfg.model, rng, stride=stride, resample=bc.resample,
                                       keep=lambda k: True, backend=backend)
            res.density = lambda i, axes: kde_density(traj.ensemble(i), axes)
        else:
            kb = KalmanBucy(cfg.model)
            beliefs = kb.run(GaussianBelief(cfg.initial_mean, cfg.initial_cov), bpath, stride=stride)
            traj = _BeliefTrajectory(beliefs, bc.dt * stride)
            res.density = lambda i, axes: _from_pdf(beliefs[i].pdf, axes)
            res.beliefs = beliefs
    except (ArithmeticError, RuntimeError) as err:
        res.status, res.error = "failed", str(err)
        res.step = solver.diagnostics.steps if solver is not None else None
        return res
    res.source = traj
    return res


class _BeliefTrajectory:
    def __init__(self, beliefs, interval):
        self.beliefs = beliefs
        self.interval = interval

    @property
    def times(self):
        return self.interval * np.arange(len(self.beliefs))

    def expectation(self, index):
        from ..errors import CapabilityError

        index = tuple(index)
        out = []
        for b in self.beliefs:
            deg = sum(index)
            nz = [k for k, e in enumerate(index) for _ in range(e)]
            if deg == 1:
                out.append(b.mean[nz[0]])
            elif deg == 2:
                i, j = nz
                out.append(b.cov[i, j] + b.mean[i] * b.mean[j])
            else:
                raise CapabilityError(f"Gaussian beliefs report moments up to degree 2, not {index}")
        return np.array(out)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) for v in r])


def _tag(index) -> str:
    return "-".join(str(e) for e in index)


def run_experiment(cfg: ExperimentConfig, out_dir, threads: int = 1, backend=None) -> tuple:
    """Run everything in ``cfg``; returns ``(manifest, exit_code)``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t_start = time.perf_counter()
    files = []

    rng = make_rng(cfg.seed, STREAM_SIMULATION)
    states, path = simulate_sde(cfg.model, cfg.x0, cfg.dt, cfg.n_steps, rng)
    times = path.times
    _write_csv(out / "measurements.csv", ["time"] + [f"dy{k + 1}" for k in range(cfg.model.obs_dim)],
               np.column_stack([times[1:], path.increments]))
    _write_csv(out / "states.csv", ["time"] + [f"x{k + 1}" for k in range(cfg.model.state_dim)],
               np.column_stack([times, states]))
    files += ["measurements.csv", "states.csv"]

    basis, coeffs = assemble_coefficients(cfg.model, cfg.natural)
    grids = build_grids(cfg)

    jobs = []
    for fc in cfg.filters:
        jobs.append(lambda fc=fc: _run_filter(cfg, fc, grids[fc.name], basis, coeffs, path, backend))
    for j, bc in enumerate(cfg.baselines):
        jobs.append(lambda bc=bc, j=j: _run_baseline(cfg, bc, path, j, backend))

    def timed(job):
        t0 = time.perf_counter()
        r = job()
        r.wall_clock = time.perf_counter() - t0
        return r

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(timed, jobs))
        by_name = {r.name: r for r in results}
        for r in results:
            files += _write_solver_files(cfg, r, out)
        pairs = []
        if cfg.reference and by_name[cfg.reference].status == "ok":
            pairs += [(r.name, cfg.reference) for r in results if r.name != cfg.reference and r.status == "ok"]
        pairs += [p for p in cfg.pairs if all(by_name[n].status == "ok" for n in p) and p not in pairs]
        axes_at = _comparison_axes(cfg, by_name)
        summary = {}
        for fnames, stats in pool.map(lambda p: _compare(cfg, by_name[p[0]], by_name[p[1]], axes_at, out), pairs):
            files += fnames
            summary.update(stats)
        files += _write_snapshots(cfg, results, axes_at, out)

    failed = [r for r in results if r.status != "ok"]
    manifest = {
        "name": cfg.name,
        "config_sha256": cfg.sha256,
        "seed": cfg.seed,
        "versions": {
            "projection_filter": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "kernel_backend": backend or kernels.BACKEND,
        },
        "threads": threads,
        "dt": cfg.dt,
        "t_end": cfg.t_end,
        "solvers": {r.name: r.manifest() for r in results},
        "summary": dict(sorted(summary.items())),
        "files": sorted(files + [f for r in results for f in r.files]),
        "wall_clock_s": round(time.perf_counter() - t_start, 3),
        "status": "failed" if failed else "ok",
    }
    with open(out / "config.cfg", "w") as fh:
        fh.write(cfg.text)
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest, (3 if failed else 0)


class _Truncated:
    def __init__(self, source, n):
        self.source, self.n = source, n

    @property
    def times(self):
        return self.source.times[: self.n]

    def expectation(self, index):
        return self.source.expectation(index)[: self.n]


def _stats(trace: ComparisonTrace) -> dict:
    v = trace.values
    return {"max": float(v.max()), "median": float(np.median(v)), "final": float(v[-1])}


def _comparison_axes(cfg, by_name):
    """Record index -> axes for density comparisons."""
    if cfg.compare_window is None:
        return lambda i: cfg.compare_axes
    half, n = cfg.compare_window
    beliefs = by_name[cfg.reference].beliefs

    def axes(i):
        b = beliefs[i]
        sd = np.sqrt(np.diag(b.cov))
        return tuple((float(m - half * s), float(m + half * s), n) for m, s in zip(b.mean, sd))

    return axes


def _write_solver_files(cfg, r, out) -> list:
    if r.kind == "projection_filter" and r.source is not None:
        r.source.to_csv(out / f"trajectory_{r.name}.csv")
        r.files.append(f"trajectory_{r.name}.csv")
    if r.status == "ok" and cfg.moments:
        cols, header = [], ["time"]
        for idx in cfg.moments:
            try:
                cols.append(r.source.expectation(idx))
            except ValueError:
                continue
            header.append(f"E[x^{_tag(idx)}]")
        if cols:
            _write_csv(out / f"moments_{r.name}.csv", header, np.column_stack([r.source.times] + cols))
            r.files.append(f"moments_{r.name}.csv")
    return []


def _compare(cfg, ra, rb, axes_at, out):
    a, b = ra.name, rb.name
    files, summary = [], {}
    n = min(len(ra.source.times), len(rb.source.times))
    t = ra.source.times[:n]
    if ra.density is not None and rb.density is not None:
        values = []
        for i in range(n):
            ax = axes_at(i)
            values.append(hellinger(ra.density(i, ax), rb.density(i, ax)))
        trace = ComparisonTrace(t, values, (a, b))
        fname = f"hellinger_{a}_vs_{b}.csv"
        trace.to_csv(out / fname)
        files.append(fname)
        summary[f"hellinger/{a}/{b}"] = _stats(trace)
    for idx in cfg.moments:
        try:
            mt = moment_trace(_Truncated(ra.source, n), _Truncated(rb.source, n), idx, (a, b))
        except ValueError:
            continue
        fname = f"moment_{a}_vs_{b}_{_tag(idx)}.csv"
        mt.to_csv(out / fname)
        files.append(fname)
        summary[f"moment/{a}/{b}/{_tag(idx)}"] = _stats(mt)
    return files, summary


def _write_snapshots(cfg, results, axes_at, out) -> list:
    for r in results:
        if r.status != "ok" or r.density is None:
            continue
        rec_times = r.source.times
        for ts in cfg.snapshot_times:
            hits = np.flatnonzero(np.abs(rec_times - ts) < 0.5 * cfg.record_interval)
            if hits.size:
                i = int(hits[0])
                if axes_at(i) is None:
                    continue
                fname = f"density_{r.name}_t{ts:.4f}.csv"
                r.density(i, axes_at(i)).to_csv(out / fname)
                r.files.append(fname)
    return []
