import json
from pathlib import Path

import numpy as np
import pytest

from projection_filter.errors import AssumptionError, ConfigError
from projection_filter.harness import build_grids, bundled_config, load_config, run_experiment
from projection_filter.harness.cli import main

INVALID = sorted((Path(bundled_config("cubic_sensor")).parent / "invalid").glob("*.cfg"))

SMALL = """
[experiment]
name = small
seed = 7
dt = 1e-3
t_end = 0.05
record_interval = 0.01
x0 = 0.5
snapshot_times = 0.02 0.05

[model]
state_dim = 1
drift.1 = -1@1
dispersion.1.1 = 1@0
observation.1 = 1@1
observation_noise = 0.25

[statistics]
natural = 1; 2

[initial]
mean = 0
cov = 1

[filter.pf]
bijection = arctanh
scale = 2
rule = gauss_chebyshev
nodes = 32

[baseline.kb]
type = kalman_bucy

[baseline.grid]
type = ks_cn
axes = -6 6 241

[compare]
reference = kb
axes = -6 6 241
pairs = pf:grid
moments = 1; 2
"""


@pytest.fixture
def small_cfg(tmp_path):
    p = tmp_path / "small.cfg"
    p.write_text(SMALL)
    return p


@pytest.mark.parametrize("name", ["cubic_sensor", "linear2d", "vanderpol", "vanderpol_desk"])
def test_bundled_configs_validate(name):
    cfg = load_config(bundled_config(name))
    grids = build_grids(cfg)
    assert set(grids) == {f.name for f in cfg.filters}


def test_bundled_grid_sizes():
    grids = build_grids(load_config(bundled_config("linear2d")))
    for level, n in [(3, 49), (4, 129), (5, 321), (6, 769)]:
        assert len(grids[f"spg{level}"]) == n
        assert len(grids[f"qmc{n}"]) == n
    assert len(build_grids(load_config(bundled_config("vanderpol")))["pf"]) == 4097


def test_overrides_change_values_and_hash(small_cfg):
    a = load_config(small_cfg)
    b = load_config(small_cfg, ["experiment.seed=8", "filter.pf.nodes=16"])
    assert (a.seed, b.seed) == (7, 8)
    assert b.filters[0].nodes == 16
    assert a.sha256 != b.sha256
    with pytest.raises(ConfigError):
        load_config(small_cfg, ["noequals"])


def test_unknown_keys_and_bad_values_are_rejected(small_cfg):
    with pytest.raises(ConfigError):
        load_config(small_cfg, ["experiment.dt=-1"])
    with pytest.raises(ConfigError):
        load_config(small_cfg, ["filter.pf.rule=simpson"])
    with pytest.raises(ConfigError):
        load_config(small_cfg, ["baseline.kb.type=magic"])


def test_assumption_violations_raise():
    with pytest.raises(AssumptionError):
        load_config([p for p in INVALID if "nonpolynomial_drift" in p.name][0])


@pytest.mark.parametrize("path", INVALID, ids=lambda p: p.stem)
def test_invalid_configs_exit_with_code_2(path, capsys):
    assert main(["validate", str(path)]) == 2
    assert "invalid" in capsys.readouterr().err


def test_validate_prints_summary(capsys):
    assert main(["validate", "cubic_sensor"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["steps"] == 14000 and "fd" in out["solvers"]


def test_unavailable_level_is_invalid(capsys):
    assert main(["validate", "linear2d", "--override", "filter.spg6.level=12"]) == 2


def test_grids_command(tmp_path, capsys):
    assert main(["grids", "--rule", "gauss_patterson", "--dim", "2", "--level", "3"]) == 0
    cap = capsys.readouterr()
    lines = cap.out.strip().splitlines()
    assert lines[0] == "x1,x2,weight" and len(lines) == 50
    assert cap.err.strip() == "49 nodes"
    assert main(["grids", "--rule", "halton", "--dim", "2", "--count", "10", "--out", str(tmp_path / "h.csv")]) == 0
    assert len((tmp_path / "h.csv").read_text().splitlines()) == 11


def test_small_run_writes_artifacts(small_cfg, tmp_path):
    cfg = load_config(small_cfg)
    manifest, code = run_experiment(cfg, tmp_path / "a")
    assert code == 0
    out = tmp_path / "a"
    for name in ["measurements.csv", "states.csv", "trajectory_pf.csv", "moments_grid.csv",
                 "hellinger_pf_vs_kb.csv", "hellinger_pf_vs_grid.csv", "config.cfg", "manifest.json",
                 "density_pf_t0.0500.csv"]:
        assert (out / name).exists(), name
    on_disk = json.loads((out / "manifest.json").read_text())
    assert on_disk["config_sha256"] == cfg.sha256
    assert on_disk["seed"] == 7
    assert {"numpy", "scipy", "python", "kernel_backend"} <= set(on_disk["versions"])
    assert all(s["status"] == "ok" for s in on_disk["solvers"].values())
    h = np.loadtxt(out / "hellinger_pf_vs_kb.csv", delimiter=",", skiprows=1)
    assert h.shape == (6, 2) and h[:, 1].max() < 0.05


def test_reruns_are_byte_identical(small_cfg, tmp_path):
    cfg = load_config(small_cfg)
    run_experiment(cfg, tmp_path / "a")
    run_experiment(cfg, tmp_path / "b", threads=3)
    for f in sorted((tmp_path / "a").glob("*.csv")):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes(), f.name


def test_solver_failure_gives_exit_code_3(tmp_path, capsys):
    # the level-3 grid has negative weights; its Fisher matrix loses definiteness mid-run
    code = main(["run", "linear2d", "--out", str(tmp_path), "--override", "experiment.t_end=0.4"])
    assert code == 3
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    spg3 = manifest["solvers"]["spg3"]
    assert spg3["status"] == "failed" and spg3["step"] > 0
    assert manifest["solvers"]["spg5"]["status"] == "ok"
    partial = (tmp_path / "trajectory_spg3.csv").read_text().splitlines()
    assert 1 < len(partial) <= spg3["step"] // 10 + 2
