"""Command-line front end: ``stirap-lab {run,sweep,analyze,list}``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure (an
``error.json`` with the diagnostic is written to the output directory).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
import traceback
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .config import ScenarioConfig, analyze, load_config, run_config, run_sweep
from .errors import (ConfigurationError, NumericInputError, StiffnessError,
                     UnsupportedAnalysisError)
from .output import write_json, write_svg_plot, write_table
from .protocols import plateau_width

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
THREADS_ENV = "STIRAP_LAB_THREADS"


def scenario_dir():
    return resources.files("stirap_lab") / "scenarios"


def bundled_scenarios():
    """Sorted ``{id: path}`` of the shipped scenario configs."""
    out = {}
    for entry in scenario_dir().iterdir():
        if entry.name.endswith(".json"):
            out[entry.name[:-5]] = Path(str(entry))
    return dict(sorted(out.items()))


def resolve_config(ref):
    """A config file path, or the id of a bundled scenario."""
    if os.path.exists(ref):
        return load_config(ref)
    scenarios = bundled_scenarios()
    if ref in scenarios:
        return load_config(scenarios[ref])
    raise ConfigurationError(f"{ref}: no such file or bundled scenario id "
                             f"(known: {', '.join(scenarios)})")


def _default_threads():
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigurationError(f"{THREADS_ENV}: expected an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigurationError(f"{THREADS_ENV}: must be >= 1")
    return n


class _Run:
    """Collects emitted files and writes the run summary."""

    def __init__(self, out, cfg, deterministic):
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.cfg = cfg
        self.deterministic = deterministic
        self.files = []
        self.start = time.perf_counter()

    def path(self, name):
        self.files.append(name)
        return self.out / name

    def finish(self, scalars, extra=None):
        manifest = [{"name": n, "bytes": (self.out / n).stat().st_size}
                    for n in sorted(self.files)]
        summary = {
            "config_hash": self.cfg.hash(),
            "scenario": self.cfg.id,
            "version": __version__,
            "wall_time": None if self.deterministic else time.perf_counter() - self.start,
            "scalars": dict(sorted(scalars.items())),
            "files": manifest,
        }
        if extra:
            summary.update(extra)
        write_json(self.out / "summary.json", summary)
        return summary


def _trajectory_outputs(run, cfg, result):
    traj = getattr(result, "trajectory", None)
    if traj is None:
        return
    if "trajectory_csv" in cfg.outputs:
        traj.to_csv(run.path("trajectory.csv"))
    if "plot_svg" in cfg.outputs:
        series = [(f"P{lv.index}", traj.populations[:, k])
                  for k, lv in enumerate(traj.scheme.levels)]
        write_svg_plot(run.path("populations.svg"), traj.times, series,
                       xlabel=traj.coordinate, ylabel="population", title=cfg.id)


def _scalars(result):
    return {k: v for k, v in result.scalars.items()}


def cmd_run(args):
    cfg = resolve_config(args.config)
    if cfg.sweep is not None and not args.ignore_sweep:
        return cmd_sweep(args, cfg)
    run = _Run(args.out, cfg, args.seedless)
    try:
        result = run_config(cfg, threads=args.threads)
    except (StiffnessError, NumericInputError, ArithmeticError, FloatingPointError) as exc:
        return _numeric_failure(run, exc)
    _trajectory_outputs(run, cfg, result)
    if "adiabaticity_csv" in cfg.outputs:
        _write_adiabaticity(run, cfg)
    extra = {}
    arrays = getattr(result, "arrays", None)
    if arrays and "gate_map" in arrays:
        M = np.asarray(arrays["gate_map"])
        extra["gate_map"] = [[[float(z.real), float(z.imag)] for z in row] for row in M]
    run.finish(_scalars(result), extra)
    print(json.dumps({"scenario": cfg.id, "scalars": dict(sorted(result.scalars.items()))},
                     default=float, sort_keys=True))
    return EXIT_OK


def _write_adiabaticity(run, cfg):
    report, glob = analyze(cfg)
    cols = ["t", "theta", "phi", "eps_plus", "eps_minus", "ratio"]
    write_table(run.path("adiabaticity.csv"), cols, np.column_stack([report[c] for c in cols]))
    return report, glob


def cmd_sweep(args, cfg=None):
    cfg = cfg or resolve_config(args.config)
    if cfg.sweep is None:
        raise ConfigurationError(f"{args.config}: sweep: config has no sweep block")
    run = _Run(args.out, cfg, args.seedless)

    def progress(done, total):
        if not args.quiet:
            print(f"\r{done}/{total}", end="", file=sys.stderr, flush=True)

    try:
        sweep = run_sweep(cfg, threads=args.threads, progress=progress)
    except (StiffnessError, NumericInputError, ArithmeticError, FloatingPointError) as exc:
        return _numeric_failure(run, exc)
    if not args.quiet:
        print(file=sys.stderr)
    header, rows = sweep.rows()
    write_table(run.path("sweep.csv"), header, rows)
    grid = sweep.grid
    scalars = {"points": float(grid.size), "max": float(np.nanmax(grid)),
               "min": float(np.nanmin(grid))}
    if sweep.axis2 is None:
        if sweep.observable == "efficiency":
            scalars["plateau_width_0.99"] = plateau_width(sweep.axis1[1], grid)
    if "plot_svg" in cfg.outputs:
        if sweep.axis2 is None:
            series = [(sweep.observable, grid)]
        else:
            idx = np.unique(np.linspace(0, grid.shape[0] - 1, min(6, grid.shape[0])).astype(int))
            series = [(f"{sweep.axis2[0]}={sweep.axis2[1][j]:.3g}", grid[j]) for j in idx]
        write_svg_plot(run.path("sweep.svg"), sweep.axis1[1], series, xlabel=sweep.axis1[0],
                       ylabel=sweep.observable, title=cfg.id)
    run.finish(scalars, {"observable": sweep.observable})
    print(json.dumps({"scenario": cfg.id, "scalars": scalars}, sort_keys=True))
    return EXIT_OK


def cmd_analyze(args):
    cfg = resolve_config(args.config)
    run = _Run(args.out, cfg, args.seedless)
    report, glob = _write_adiabaticity(run, cfg)
    run.finish({k: float(v) for k, v in glob.items()})
    print(json.dumps({"scenario": cfg.id, "global": glob}, default=float, sort_keys=True))
    return EXIT_OK


def cmd_list(args):
    for sid, path in bundled_scenarios().items():
        cfg = load_config(path)
        tags = ",".join(cfg.tags)
        crit = f"criterion {cfg.criterion}" if cfg.criterion is not None else "-"
        print(f"{sid:18s} {crit:13s} [{tags}] {cfg.description}")
    return EXIT_OK


def _numeric_failure(run, exc):
    info = {"error": type(exc).__name__, "message": str(exc),
            "t": getattr(exc, "t", None), "scenario": run.cfg.id}
    write_json(run.out / "error.json", info)
    print(f"numerical failure: {exc}", file=sys.stderr)
    return EXIT_NUMERIC


def build_parser():
    parser = argparse.ArgumentParser(prog="stirap-lab", description=(
        "Simulate adiabatic population transfer in few-level systems."))
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, sweep_flag=False):
        p.add_argument("config", help="scenario JSON file or bundled scenario id")
        p.add_argument("--out", default="out", help="output directory (default: out)")
        p.add_argument("--threads", type=int, default=None,
                       help=f"worker threads (default: ${THREADS_ENV} or 1)")
        p.add_argument("--seedless", "--deterministic", dest="seedless", action="store_true",
                       help="omit wall time so repeated runs give byte-identical files")
        p.add_argument("--quiet", action="store_true", help="no progress on stderr")
        if sweep_flag:
            p.add_argument("--ignore-sweep", action="store_true",
                           help="run the base point of a config that has a sweep block")

    common(sub.add_parser("run", help="run one scenario"), sweep_flag=True)
    common(sub.add_parser("sweep", help="run a scenario's sweep block"))
    common(sub.add_parser("analyze", help="adiabaticity report, no propagation"))
    sub.add_parser("list", help="list bundled scenarios")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"run": cmd_run, "sweep": cmd_sweep, "analyze": cmd_analyze, "list": cmd_list}
    try:
        if getattr(args, "threads", 1) is None:
            args.threads = _default_threads()
        if getattr(args, "threads", 1) < 1:
            raise ConfigurationError("--threads: must be >= 1")
        return handlers[args.command](args)
    except (ConfigurationError, UnsupportedAnalysisError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StiffnessError, NumericInputError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except Exception:  # pragma: no cover - unexpected bugs still surface with a trace
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
