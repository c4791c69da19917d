"""Experiment configuration: INI text to a validated :class:`ExperimentConfig`.

Sections and keys::

    [experiment]   name, seed, dt, t_end, record_interval, x0, snapshot_times
    [model]        state_dim, drift.K, dispersion.K.A, process_noise,
                   observation.K, observation_noise
    [statistics]   natural
    [initial]      theta | mean + cov
    [filter.NAME]  bijection, scale, rule, nodes | level | count, elide_boundary,
                   scheme, integrability
    [baseline.NAME] type = ks_explicit | ks_cn | particle | kalman_bucy, dt, axes,
                   boundary, max_ratio, particles, resample
    [compare]      reference, axes | window, pairs, moments

``compare.window = K N`` replaces fixed comparison axes by N-point axes
spanning K standard deviations around a Kalman-Bucy reference at each record.

Polynomials use the ``coeff@e1,...,ed`` term syntax with ``;`` between
terms. Multi-index lists use ``;`` between indices and ``,`` inside one.
Matrices use ``;`` between rows and whitespace between entries. Axes are
``lo hi count`` triples separated by ``;``. Indices K and A count from 1.
"""
from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import AssumptionError, ConfigError, StructuralError
from ..expfam import Bijection
from ..polyalg import ModelSpec, Polynomial, StatisticsBasis, assemble_coefficients

RULES = ("gauss_chebyshev", "gauss_patterson", "clenshaw_curtis", "halton")
BASELINES = ("ks_explicit", "ks_cn", "particle", "kalman_bucy")


@dataclass(frozen=True)
class FilterConfig:
    name: str
    bijection: Bijection
    rule: str
    nodes: int | None = None  # gauss_chebyshev
    level: int | None = None  # sparse grids
    count: int | str | None = None  # halton: integer or "match:<filter>"
    elide_boundary: bool = False
    scheme: str = "euler"
    integrability: str = "probe"


@dataclass(frozen=True)
class BaselineConfig:
    name: str
    type: str
    dt: float
    axes: tuple | None = None
    boundary: str = "absorbing"
    max_ratio: float = 0.5
    particles: int = 10000
    resample: str = "ess"


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    seed: int
    dt: float
    t_end: float
    record_interval: float
    x0: np.ndarray
    snapshot_times: tuple
    model: ModelSpec
    natural: tuple
    theta0: np.ndarray | None
    initial_mean: np.ndarray | None
    initial_cov: np.ndarray | None
    filters: tuple
    baselines: tuple
    reference: str | None
    compare_axes: tuple | None
    pairs: tuple
    moments: tuple
    compare_window: tuple | None = None
    text: str = field(repr=False, default="")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.text.encode()).hexdigest()

    def solver_names(self) -> list:
        return [f.name for f in self.filters] + [b.name for b in self.baselines]

    def stride(self, solver_dt: float) -> int:
        return int(round(self.record_interval / solver_dt))


def _parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cp.optionxform = str
    return cp


def read_config(path, overrides=()) -> configparser.ConfigParser:
    cp = _parser()
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError(f"cannot read {path}: {err}", "config") from err
    try:
        cp.read_string(text, source=str(path))
    except configparser.Error as err:
        raise ConfigError(str(err), "config") from err
    apply_overrides(cp, overrides)
    return cp


def apply_overrides(cp: configparser.ConfigParser, overrides) -> None:
    """``section.key=value``; the section is everything before the last dot."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value", "override")
        key, value = item.split("=", 1)
        if "." not in key:
            raise ConfigError(f"override key {key!r} needs a section", "override")
        section, option = key.rsplit(".", 1)
        if not cp.has_section(section):
            cp.add_section(section)
        cp.set(section, option, value.strip())


def config_text(cp: configparser.ConfigParser) -> str:
    """Canonical text of the parsed configuration, used for hashing."""
    lines = []
    for s in cp.sections():
        lines.append(f"[{s}]")
        lines.extend(f"{k} = {v}" for k, v in cp.items(s))
    return "\n".join(lines) + "\n"


class _Section:
    def __init__(self, cp, name):
        if not cp.has_section(name):
            raise ConfigError("missing section", name)
        self.name = name
        self.data = dict(cp.items(name))
        self.used = set()

    def has(self, key) -> bool:
        return key in self.data

    def raw(self, key, default=None, required=True):
        self.used.add(key)
        if key not in self.data:
            if default is not None or not required:
                return default
            raise ConfigError("missing value", f"{self.name}.{key}")
        return self.data[key]

    def _convert(self, key, fn, default, required):
        value = self.raw(key, default, required)
        if value is None or not isinstance(value, str):
            return value
        try:
            return fn(value)
        except (ValueError, StructuralError) as err:
            raise ConfigError(f"cannot parse {value!r}: {err}", f"{self.name}.{key}") from err

    def float(self, key, default=None, required=True, positive=False) -> float:
        v = self._convert(key, float, default, required)
        if positive and v is not None and not v > 0:
            raise ConfigError("must be positive", f"{self.name}.{key}")
        return v

    def int(self, key, default=None, required=True) -> int:
        return self._convert(key, int, default, required)

    def bool(self, key, default=False) -> bool:
        v = self.raw(key, None, required=False)
        if v is None:
            return default
        if v.lower() in ("1", "true", "yes", "on"):
            return True
        if v.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"not a boolean: {v!r}", f"{self.name}.{key}")

    def vector(self, key, default=None, required=True):
        return self._convert(key, parse_vector, default, required)

    def matrix(self, key, default=None, required=True):
        return self._convert(key, parse_matrix, default, required)

    def choice(self, key, options, default=None):
        v = self.raw(key, default)
        if v not in options:
            raise ConfigError(f"{v!r} is not one of {', '.join(options)}", f"{self.name}.{key}")
        return v

    def check_unused(self):
        extra = sorted(set(self.data) - self.used)
        if extra:
            raise ConfigError(f"unknown key(s) {', '.join(extra)}", self.name)


def parse_vector(text: str) -> np.ndarray:
    return np.array([float(t) for t in text.replace(",", " ").split()])


def parse_matrix(text: str) -> np.ndarray:
    rows = [parse_vector(r) for r in text.split(";") if r.strip()]
    if len({len(r) for r in rows}) != 1:
        raise ValueError("matrix rows have unequal length")
    return np.array(rows)


def parse_indices(text: str) -> tuple:
    out = []
    for part in text.split(";"):
        part = part.strip()
        if part:
            out.append(tuple(int(e) for e in part.split(",")))
    return tuple(out)


def parse_axes(text: str) -> tuple:
    axes = []
    for part in text.split(";"):
        if not part.strip():
            continue
        lo, hi, n = part.split()
        lo, hi, n = float(lo), float(hi), int(n)
        if not hi > lo or n < 3:
            raise ValueError(f"bad axis {part.strip()!r}")
        axes.append((lo, hi, n))
    return tuple(axes)


def _poly(sec: _Section, key: str, dim: int) -> Polynomial:
    text = sec.raw(key, "0")
    try:
        return Polynomial.parse(text, dim)
    except StructuralError as err:
        raise AssumptionError(f"{sec.name}.{key}: not a polynomial term list ({err})") from err


def _model(cp) -> ModelSpec:
    sec = _Section(cp, "model")
    d = sec.int("state_dim")
    if d is None or d < 1:
        raise ConfigError("must be at least 1", "model.state_dim")
    drift = [_poly(sec, f"drift.{k + 1}", d) for k in range(d)]
    dw = 0
    for key in sec.data:
        if key.startswith("dispersion."):
            try:
                _, row, col = key.split(".")
                if not 1 <= int(row) <= d:
                    raise ValueError
                dw = max(dw, int(col))
            except ValueError:
                raise ConfigError("expected dispersion.<row>.<col> within the state dimension", f"model.{key}") from None
    dispersion = [[_poly(sec, f"dispersion.{k + 1}.{a + 1}", d) for a in range(dw)] for k in range(d)]
    Q = sec.matrix("process_noise", required=False)
    if Q is None:
        Q = np.eye(dw)
    dy = 0
    for key in sec.data:
        if key.startswith("observation."):
            try:
                dy = max(dy, int(key.split(".", 1)[1]))
            except ValueError:
                raise ConfigError("expected observation.<k>", f"model.{key}") from None
    observation = [_poly(sec, f"observation.{k + 1}", d) for k in range(dy)]
    R = sec.vector("observation_noise", required=False)
    sec.check_unused()
    try:
        return ModelSpec(tuple(drift), tuple(tuple(r) for r in dispersion), Q, tuple(observation), R)
    except StructuralError as err:
        raise ConfigError(str(err), "model") from err


def _filter(cp, section: str) -> FilterConfig:
    sec = _Section(cp, section)
    name = section.split(".", 1)[1]
    kind = sec.choice("bijection", ("arctanh", "algebraic", "tan"), "arctanh")
    scale = sec.float("scale", 1.0, positive=True)
    rule = sec.choice("rule", RULES)
    nodes = level = count = None
    if rule == "gauss_chebyshev":
        nodes = sec.int("nodes")
    elif rule == "halton":
        raw = sec.raw("count")
        count = raw if raw.startswith("match:") else sec.int("count")
    else:
        level = sec.int("level")
    out = FilterConfig(
        name=name,
        bijection=Bijection(kind, scale),
        rule=rule,
        nodes=nodes,
        level=level,
        count=count,
        elide_boundary=sec.bool("elide_boundary"),
        scheme=sec.choice("scheme", ("euler", "heun"), "euler"),
        integrability=sec.choice("integrability", ("probe", "finite"), "probe"),
    )
    sec.check_unused()
    return out


def _baseline(cp, section: str, dt_default: float, dim: int) -> BaselineConfig:
    sec = _Section(cp, section)
    name = section.split(".", 1)[1]
    kind = sec.choice("type", BASELINES)
    dt = sec.float("dt", dt_default, positive=True)
    axes = None
    if kind in ("ks_explicit", "ks_cn"):
        axes = sec._convert("axes", parse_axes, None, True)
        if len(axes) != dim:
            raise ConfigError(f"{len(axes)} axes for a {dim}-dimensional state", f"{section}.axes")
    out = BaselineConfig(
        name=name,
        type=kind,
        dt=dt,
        axes=axes,
        boundary=sec.choice("boundary", ("absorbing", "reflecting"), "absorbing"),
        max_ratio=sec.float("max_ratio", 0.5, positive=True),
        particles=sec.int("particles", 10000),
        resample=sec.choice("resample", ("ess", "always", "never"), "ess"),
    )
    if out.particles < 2:
        raise ConfigError("need at least two particles", f"{section}.particles")
    sec.check_unused()
    return out


def parse_config(cp: configparser.ConfigParser) -> ExperimentConfig:
    """Build and cross-validate an :class:`ExperimentConfig`; errors name the field."""
    exp = _Section(cp, "experiment")
    model = _model(cp)
    d = model.state_dim
    name = exp.raw("name", "experiment")
    seed = exp.int("seed")
    if seed < 0 or seed >= 2 ** 64:
        raise ConfigError("must be an unsigned 64-bit integer", "experiment.seed")
    dt = exp.float("dt", positive=True)
    t_end = exp.float("t_end", positive=True)
    record_interval = exp.float("record_interval", dt, positive=True)
    x0 = exp.vector("x0", np.zeros(d))
    if np.shape(x0) != (d,):
        raise ConfigError(f"needs {d} entries", "experiment.x0")
    snaps = exp.vector("snapshot_times", np.zeros(0))
    exp.check_unused()
    if abs(t_end / dt - round(t_end / dt)) > 1e-6:
        raise ConfigError("t_end must be a multiple of dt", "experiment.t_end")

    stats = _Section(cp, "statistics")
    try:
        natural = stats._convert("natural", parse_indices, None, True)
        StatisticsBasis(natural)
    except StructuralError as err:
        raise AssumptionError(f"statistics.natural: {err}") from err
    stats.check_unused()
    if any(len(i) != d for i in natural):
        raise ConfigError(f"multi-indices must have {d} entries", "statistics.natural")
    # the span condition on h is checked by the symbolic assembly
    try:
        basis, _ = assemble_coefficients(model, natural)
    except AssumptionError as err:
        raise AssumptionError(f"model.observation: {err}") from err

    init = _Section(cp, "initial")
    theta0 = mean = cov = None
    if init.has("theta"):
        theta0 = init.vector("theta")
        if theta0.shape != (len(natural),):
            raise ConfigError(f"needs {len(natural)} entries", "initial.theta")
    else:
        mean = init.vector("mean")
        cov = init.matrix("cov")
        if mean.shape != (d,) or cov.shape != (d, d):
            raise ConfigError("mean/cov do not match the state dimension", "initial")
        if not np.allclose(cov, cov.T) or np.linalg.eigvalsh(cov).min() <= 0:
            raise ConfigError("covariance must be symmetric positive definite", "initial.cov")
    init.check_unused()

    filters = tuple(_filter(cp, s) for s in cp.sections() if s.startswith("filter."))
    baselines = tuple(_baseline(cp, s, dt, d) for s in cp.sections() if s.startswith("baseline."))
    names = [f.name for f in filters] + [b.name for b in baselines]
    if len(set(names)) != len(names):
        raise ConfigError("solver names must be unique", "filter/baseline")
    if theta0 is None and any(True for _ in filters):
        from ..expfam import gaussian_to_natural

        try:
            theta0 = gaussian_to_natural(mean, cov, basis)
        except StructuralError as err:
            raise ConfigError(str(err), "initial") from err
    if mean is None and any(b.type in ("particle", "kalman_bucy") for b in baselines):
        raise ConfigError("particle and Kalman-Bucy baselines need a Gaussian mean/cov", "initial")
    for f in filters:
        if isinstance(f.count, str):
            target = f.count.split(":", 1)[1]
            if target not in [g.name for g in filters] or target == f.name:
                raise ConfigError(f"no other filter named {target!r}", f"filter.{f.name}.count")
    for b in baselines:
        ratio = b.dt / dt
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ConfigError("must be a positive integer multiple of experiment.dt", f"baseline.{b.name}.dt")
        if b.type == "kalman_bucy":
            from ..reference.kalman import linear_system

            try:
                linear_system(model)
            except StructuralError as err:
                raise ConfigError(str(err), f"baseline.{b.name}.type") from err
    for sdt, who in [(dt, "experiment.dt")] + [(b.dt, f"baseline.{b.name}.dt") for b in baselines]:
        k = record_interval / sdt
        if abs(k - round(k)) > 1e-9:
            raise ConfigError(f"record_interval is not a multiple of {who}", "experiment.record_interval")

    comp = _Section(cp, "compare") if cp.has_section("compare") else None
    reference = compare_axes = window = None
    pairs = moments = ()
    if comp is not None:
        reference = comp.raw("reference", required=False)
        if reference is not None and reference not in names:
            raise ConfigError(f"no solver named {reference!r}", "compare.reference")
        compare_axes = comp._convert("axes", parse_axes, None, False)
        window = comp.vector("window", required=False)
        if window is not None:
            if compare_axes is not None:
                raise ConfigError("give either axes or window", "compare.window")
            if window.shape != (2,) or not window[0] > 0 or window[1] < 3 or window[1] != int(window[1]):
                raise ConfigError("expected a positive half-width and a point count >= 3", "compare.window")
            ref = next((b for b in baselines if b.name == reference), None)
            if ref is None or ref.type != "kalman_bucy":
                raise ConfigError("a moving window needs a kalman_bucy reference", "compare.window")
            window = (float(window[0]), int(window[1]))
        if compare_axes is None and window is None and reference is not None:
            ref = next((b for b in baselines if b.name == reference), None)
            compare_axes = ref.axes if ref is not None else None
        if compare_axes is not None and len(compare_axes) != d:
            raise ConfigError(f"{len(compare_axes)} axes for a {d}-dimensional state", "compare.axes")
        raw_pairs = comp.raw("pairs", "", required=False)
        pairs = tuple(tuple(p.strip().split(":")) for p in raw_pairs.split(",") if p.strip())
        for p in pairs:
            if len(p) != 2 or any(n not in names for n in p):
                raise ConfigError(f"pair {':'.join(p)!r} does not name two solvers", "compare.pairs")
        moments = comp._convert("moments", parse_indices, (), False)
        if any(len(i) != d for i in moments):
            raise ConfigError(f"multi-indices must have {d} entries", "compare.moments")
        comp.check_unused()
        if (reference or pairs) and compare_axes is None and window is None:
            raise ConfigError("densities need comparison axes", "compare.axes")

    return ExperimentConfig(
        name=name, seed=seed, dt=dt, t_end=t_end, record_interval=record_interval, x0=x0,
        snapshot_times=tuple(float(t) for t in snaps), model=model, natural=tuple(natural), theta0=theta0,
        initial_mean=mean, initial_cov=cov, filters=filters, baselines=baselines, reference=reference,
        compare_axes=compare_axes, pairs=pairs, moments=tuple(moments), compare_window=window, text=config_text(cp),
    )


def load_config(path, overrides=()) -> ExperimentConfig:
    return parse_config(read_config(path, overrides))


def bundled_config(name: str) -> Path:
    """Path of a configuration shipped with the package (``cubic_sensor`` etc.)."""
    base = Path(__file__).resolve().parent.parent / "configs"
    p = base / (name if name.endswith(".cfg") else f"{name}.cfg")
    if not p.exists():
        raise ConfigError(f"no bundled config {name!r}", "config")
    return p
