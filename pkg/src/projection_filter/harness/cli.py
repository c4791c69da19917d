"""``projfilter`` command line: run, validate, grids."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..errors import AssumptionError, CapabilityError, ConfigError, StructuralError
from ..quadrature import gauss_chebyshev, halton, smolyak
from .config import bundled_config, load_config
from .runner import build_grids, run_experiment

EXIT_OK, EXIT_INVALID, EXIT_SOLVER = 0, 2, 3
VALIDATION_ERRORS = (ConfigError, AssumptionError, StructuralError, CapabilityError)


def _resolve(name: str) -> Path:
    p = Path(name)
    return p if p.exists() else bundled_config(name)


def _load(args):
    overrides = list(args.override)
    if getattr(args, "seed", None) is not None:
        overrides.append(f"experiment.seed={args.seed}")
    cfg = load_config(_resolve(args.config), overrides)
    build_grids(cfg)  # rule/level combinations are checked here, before any computation
    return cfg


def _cmd_run(args) -> int:
    cfg = _load(args)
    out = Path(args.out) if args.out else Path("out") / cfg.name
    manifest, code = run_experiment(cfg, out, threads=args.threads, backend=args.backend)
    for name, info in manifest["solvers"].items():
        line = f"{name:>16s}  {info['status']:6s}  {info['wall_clock_s']:9.2f} s"
        if info["status"] != "ok":
            line += f"  {info.get('error')}"
        print(line)
    for key, stats in sorted(manifest["summary"].items()):
        print(f"{key}: max {stats['max']:.3e}  median {stats['median']:.3e}")
    print(f"artifacts in {out}")
    return code


def _cmd_validate(args) -> int:
    cfg = _load(args)
    print(json.dumps({"name": cfg.name, "config_sha256": cfg.sha256, "solvers": cfg.solver_names(),
                      "steps": cfg.n_steps}, indent=2))
    return EXIT_OK


def _cmd_grids(args) -> int:
    if args.rule == "gauss_chebyshev":
        if args.dim != 1:
            raise ConfigError("Gauss-Chebyshev grids are one-dimensional", "--dim")
        grid = gauss_chebyshev(args.count or args.level)
    elif args.rule == "halton":
        if not args.count:
            raise ConfigError("halton needs --count", "--count")
        grid = halton(args.dim, args.count)
    else:
        grid = smolyak(args.rule, args.dim, args.level)
    if args.out:
        grid.to_csv(args.out)
    else:
        w = sys.stdout
        w.write(",".join([f"x{k + 1}" for k in range(grid.dim)] + ["weight"]) + "\n")
        for x, wt in zip(grid.nodes, grid.weights):
            w.write(",".join(repr(float(v)) for v in [*x, wt]) + "\n")
    print(f"{len(grid)} nodes", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="projfilter", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", help="config file, or the name of a bundled config")
        p.add_argument("--override", action="append", default=[], metavar="SECTION.KEY=VALUE")
        p.add_argument("--seed", type=int)

    run = sub.add_parser("run", help="run an experiment")
    common(run)
    run.add_argument("--out", help="output directory (default out/<name>)")
    run.add_argument("--threads", type=int, default=1)
    run.add_argument("--backend", choices=("cython", "numpy"))
    run.set_defaults(fn=_cmd_run)

    val = sub.add_parser("validate", help="parse and cross-check a config")
    common(val)
    val.set_defaults(fn=_cmd_validate)

    grids = sub.add_parser("grids", help="dump a quadrature grid as CSV")
    grids.add_argument("--rule", required=True,
                       choices=("gauss_patterson", "clenshaw_curtis", "gauss_chebyshev", "halton"))
    grids.add_argument("--dim", type=int, default=1)
    grids.add_argument("--level", type=int, default=1)
    grids.add_argument("--count", type=int)
    grids.add_argument("--out")
    grids.set_defaults(fn=_cmd_grids)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.fn(args)
    except VALIDATION_ERRORS as err:
        print(f"invalid: {err}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
