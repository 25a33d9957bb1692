"""JSON scenario configuration: parsing, validation, round-trip and execution.

A scenario selects either a named protocol (``protocol``) or a raw
propagation (``scheme`` + ``pulses`` + ``window`` + ``initial_state``), and
may add a ``sweep`` block whose axes name numeric entries by dotted path,
e.g. ``protocol.params.delay`` or ``pulses.entries.P.peak``.
"""

from __future__ import annotations

import copy
import hashlib
import inspect
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import protocols as proto
from .adiabatic import adiabaticity_report, global_adiabaticity
from .errors import ConfigurationError, UnsupportedAnalysisError
from .linkage import LevelScheme, lambda_scheme
from .propagator import (DiagonalEnsemble, IntegratorConfig, evolve_diagonal_ensemble,
                         parallel_map, propagate)
from .pulses import PulseSchedule, fractional_pair, pulse_from_dict

OUTPUT_KINDS = ("trajectory_csv", "summary_json", "adiabaticity_csv", "plot_svg")
DEFAULT_OUTPUTS = ("summary_json", "trajectory_csv")


def _stirap(params, config, threads):
    return proto.run_stirap(proto.StirapParams(**params), config)


def _vstirap(params, config, threads):
    params = dict(params)
    if "drive" in params:
        params["drive"] = pulse_from_dict(params["drive"], "protocol.params.drive")
    return proto.run_vstirap(config=config, **params)


def _composite(params, config, threads):
    return proto.run_composite(config=config, **params)


def _with_threads(fn):
    return lambda params, config, threads: fn(config=config, threads=threads, **params)


def _plain(fn):
    return lambda params, config, threads: fn(config=config, **params)


PROTOCOLS = {
    "stirap": (_stirap, proto.StirapParams),
    "fractional": (_plain(proto.run_fractional), proto.run_fractional),
    "bstirap": (_plain(proto.run_bstirap), proto.run_bstirap),
    "sastirap": (_plain(proto.run_sastirap), proto.run_sastirap),
    "rotation_gate": (_plain(proto.run_rotation_gate), proto.run_rotation_gate),
    "tripod_gate": (_plain(proto.run_tripod_gate), proto.run_tripod_gate),
    "composite": (_composite, proto.run_composite),
    "vstirap": (_vstirap, proto.run_vstirap),
    "spatial_coupler": (_plain(proto.run_spatial_coupler), proto.run_spatial_coupler),
    "nonreciprocity": (_with_threads(proto.run_nonreciprocity), proto.run_nonreciprocity),
}


def _accepted_params(name):
    target = PROTOCOLS[name][1]
    sig = inspect.signature(target)
    return {k for k in sig.parameters if k not in ("config", "threads")}


def _number(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError(f"{path}: expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigurationError(f"{path}: must be finite")
    return float(value)


def _parse_state(data, path="initial_state"):
    if isinstance(data, bool):
        raise ConfigurationError(f"{path}: expected a level position, vector or ensemble")
    if isinstance(data, int):
        return data
    if isinstance(data, dict):
        if set(data) != {"ensemble"}:
            raise ConfigurationError(f"{path}: object form must be {{'ensemble': [...]}}")
        try:
            return DiagonalEnsemble(tuple(_number(w, f"{path}.ensemble[{i}]")
                                          for i, w in enumerate(data["ensemble"])))
        except ConfigurationError as exc:
            raise ConfigurationError(f"{path}: {exc}") from None
    if isinstance(data, list):
        vec = []
        for i, x in enumerate(data):
            if isinstance(x, list) and len(x) == 2:
                vec.append(complex(_number(x[0], f"{path}[{i}]"), _number(x[1], f"{path}[{i}]")))
            else:
                vec.append(complex(_number(x, f"{path}[{i}]")))
        return np.array(vec)
    raise ConfigurationError(f"{path}: expected a level position, vector or ensemble")


def _state_to_json(state):
    if isinstance(state, DiagonalEnsemble):
        return {"ensemble": list(state.weights)}
    if isinstance(state, (int, np.integer)):
        return int(state)
    return [[float(c.real), float(c.imag)] for c in state]


def get_path(data, path):
    node = data
    for part in path.split("."):
        if isinstance(node, dict) and part in node:
            node = node[part]
        elif isinstance(node, list) and part.isdigit() and int(part) < len(node):
            node = node[int(part)]
        else:
            raise ConfigurationError(f"sweep path {path!r} does not exist in the config")
    return node


def set_path(data, path, value):
    parts = path.split(".")
    node = get_path(data, ".".join(parts[:-1])) if len(parts) > 1 else data
    last = parts[-1]
    if isinstance(node, list):
        node[int(last)] = value
    else:
        node[last] = value


def _parse_sweep(data, raw):
    path = "sweep"
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: must be an object")
    axes = data.get("axes")
    if not isinstance(axes, list) or not axes:
        raise ConfigurationError(f"{path}.axes: need at least one axis")
    if len(axes) > 2:
        raise ConfigurationError(f"{path}.axes: at most two axes are supported")
    parsed = []
    for i, ax in enumerate(axes):
        ap = f"{path}.axes[{i}]"
        if not isinstance(ax, dict):
            raise ConfigurationError(f"{ap}: must be an object")
        paths = ax.get("paths", [ax["path"]] if "path" in ax else None)
        if not paths or not all(isinstance(p, str) for p in paths):
            raise ConfigurationError(f"{ap}: needs 'path' or 'paths'")
        for p in paths:
            if p.startswith("sweep"):
                raise ConfigurationError(f"{ap}: cannot sweep the sweep block")
            target = get_path(raw, p)
            if isinstance(target, bool) or not isinstance(target, (int, float)):
                raise ConfigurationError(f"{ap}: {p!r} is not a numeric parameter")
        if "values" in ax:
            values = [_number(v, f"{ap}.values[{j}]") for j, v in enumerate(ax["values"])]
        elif "linspace" in ax:
            lin = ax["linspace"]
            if not (isinstance(lin, list) and len(lin) == 3):
                raise ConfigurationError(f"{ap}.linspace: expected [start, stop, count]")
            count = lin[2]
            if isinstance(count, bool) or not isinstance(count, int) or count < 1:
                raise ConfigurationError(f"{ap}.linspace: count must be a positive integer")
            values = [float(v) for v in np.linspace(_number(lin[0], ap), _number(lin[1], ap),
                                                   count)]
        else:
            raise ConfigurationError(f"{ap}: needs 'values' or 'linspace'")
        if not values:
            raise ConfigurationError(f"{ap}: axis has no values")
        name = ax.get("name", paths[0].split(".")[-1])
        parsed.append({"name": str(name), "paths": list(paths), "values": values})
    observable = data.get("observable", "efficiency")
    if not isinstance(observable, str):
        raise ConfigurationError(f"{path}.observable: must be a string")
    return {"axes": parsed, "observable": observable}


@dataclass
class ScenarioConfig:
    id: str = ""
    description: str = ""
    tags: tuple = ()
    criterion: Optional[int] = None
    scheme: Optional[LevelScheme] = None
    schedule: Optional[PulseSchedule] = None
    window: Optional[tuple] = None
    mode: str = "time"
    initial_state: object = None
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    protocol: Optional[dict] = None
    sweep: Optional[dict] = None
    outputs: tuple = DEFAULT_OUTPUTS

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigurationError("config: top level must be a JSON object")
        known = {"id", "description", "tags", "criterion", "scheme", "pulses", "window",
                 "initial_state", "integrator", "protocol", "sweep", "outputs"}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigurationError(f"{unknown[0]}: unknown config key")
        has_protocol = "protocol" in data
        raw_keys = [k for k in ("scheme", "pulses", "window", "initial_state") if k in data]
        if has_protocol and raw_keys:
            raise ConfigurationError(
                f"{raw_keys[0]}: a config selects either 'protocol' or a raw propagation")
        if not has_protocol and len(raw_keys) != 4:
            missing = [k for k in ("scheme", "pulses", "window", "initial_state")
                       if k not in data]
            raise ConfigurationError(f"{missing[0]}: required for a raw propagation "
                                     "(or give 'protocol')")
        cfg = cls(id=str(data.get("id", "")), description=str(data.get("description", "")),
                  tags=tuple(str(t) for t in data.get("tags", ())))
        crit = data.get("criterion")
        if crit is not None and (isinstance(crit, bool) or not isinstance(crit, int)):
            raise ConfigurationError("criterion: must be an integer")
        cfg.criterion = crit
        integ = data.get("integrator", {})
        if not isinstance(integ, dict):
            raise ConfigurationError("integrator: must be an object")
        try:
            cfg.integrator = IntegratorConfig.from_dict(integ)
        except ConfigurationError as exc:
            raise ConfigurationError(f"integrator: {exc}") from None
        if has_protocol:
            cfg.protocol = cls._parse_protocol(data["protocol"])
        else:
            cfg._parse_raw(data)
        outputs = data.get("outputs", list(DEFAULT_OUTPUTS))
        if not isinstance(outputs, list):
            raise ConfigurationError("outputs: must be a list")
        for i, o in enumerate(outputs):
            if o not in OUTPUT_KINDS:
                raise ConfigurationError(f"outputs[{i}]: unknown output {o!r}")
        cfg.outputs = tuple(outputs)
        if "sweep" in data:
            cfg.sweep = _parse_sweep(data["sweep"], cfg.to_dict(include_sweep=False))
        return cfg

    @staticmethod
    def _parse_protocol(data):
        if not isinstance(data, dict) or "name" not in data:
            raise ConfigurationError("protocol: needs a 'name'")
        name = data["name"]
        if name not in PROTOCOLS:
            raise ConfigurationError(f"protocol.name: unknown protocol {name!r}; "
                                     f"choose from {sorted(PROTOCOLS)}")
        params = data.get("params", {})
        if not isinstance(params, dict):
            raise ConfigurationError("protocol.params: must be an object")
        allowed = _accepted_params(name)
        for key in params:
            if key not in allowed:
                raise ConfigurationError(f"protocol.params.{key}: not a parameter of {name!r}")
        return {"name": name, "params": copy.deepcopy(params)}

    def _parse_raw(self, data):
        try:
            self.scheme = LevelScheme.from_dict(data["scheme"])
        except ConfigurationError as exc:
            msg = str(exc)
            raise ConfigurationError(msg if msg.startswith("scheme") else f"scheme: {msg}") from None
        except (TypeError, AttributeError):
            raise ConfigurationError("scheme: must be an object") from None
        if not isinstance(data["pulses"], dict):
            raise ConfigurationError("pulses: must be an object")
        self.schedule = PulseSchedule.from_dict(data["pulses"])
        for c in self.scheme.couplings:
            if c.pulse_id not in self.schedule:
                raise ConfigurationError(f"scheme.couplings: pulse id {c.pulse_id!r} is not "
                                         "defined under pulses.entries")
        win = data["window"]
        if not isinstance(win, dict):
            raise ConfigurationError("window: must be an object with start/end")
        start = _number(win.get("start"), "window.start")
        end = _number(win.get("end"), "window.end")
        if not end > start:
            raise ConfigurationError("window.end: must exceed window.start")
        mode = win.get("mode", "time")
        if mode not in ("time", "spatial"):
            raise ConfigurationError("window.mode: must be 'time' or 'spatial'")
        self.window, self.mode = (start, end), mode
        state = _parse_state(data["initial_state"])
        n = self.scheme.dimension
        if isinstance(state, int) and not 0 <= state < n:
            raise ConfigurationError(f"initial_state: level position {state} out of range")
        if isinstance(state, np.ndarray) and state.size != n:
            raise ConfigurationError(f"initial_state: expected {n} amplitudes")
        if isinstance(state, DiagonalEnsemble) and len(state.weights) != n:
            raise ConfigurationError(f"initial_state.ensemble: expected {n} weights")
        self.initial_state = state

    def to_dict(self, include_sweep=True):
        out = {"id": self.id, "description": self.description, "tags": list(self.tags)}
        if self.criterion is not None:
            out["criterion"] = self.criterion
        if self.protocol is not None:
            out["protocol"] = copy.deepcopy(self.protocol)
        else:
            out["scheme"] = self.scheme.to_dict()
            out["pulses"] = self.schedule.to_dict()
            out["window"] = {"start": self.window[0], "end": self.window[1], "mode": self.mode}
            out["initial_state"] = _state_to_json(self.initial_state)
        out["integrator"] = self.integrator.to_dict()
        out["outputs"] = list(self.outputs)
        if include_sweep and self.sweep is not None:
            out["sweep"] = {"axes": [dict(name=a["name"], paths=list(a["paths"]),
                                          values=list(a["values"])) for a in self.sweep["axes"]],
                            "observable": self.sweep["observable"]}
        return out

    def canonical_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def hash(self):
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()


def load_config(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ConfigurationError(f"{path}: file not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON at line {exc.lineno} column "
                                 f"{exc.colno}: {exc.msg}") from None
    try:
        return ScenarioConfig.from_dict(data)
    except ConfigurationError as exc:
        raise ConfigurationError(f"{path}: {exc}") from None


@dataclass
class RawResult:
    """Outcome of a raw propagation (single state or diagonal ensemble)."""

    scalars: dict
    trajectory: object = None
    schedule: object = None


def run_raw(cfg: ScenarioConfig, threads=1):
    t0, t1 = cfg.window
    if isinstance(cfg.initial_state, DiagonalEnsemble):
        res = evolve_diagonal_ensemble(cfg.scheme, cfg.schedule, cfg.initial_state, t0, t1,
                                       cfg.integrator, threads)
        scalars = {"entropy_before": res.entropy_before, "entropy_after": res.entropy_after,
                   "spectrum_error": float(np.abs(res.final_spectrum
                                                  - res.initial_spectrum).max()),
                   "max_final_population": float(res.final_populations.max()),
                   "max_initial_weight": float(max(cfg.initial_state.weights))}
        for lv, p in zip(cfg.scheme.levels, res.final_populations):
            scalars[f"P{lv.index}_final"] = float(p)
        return RawResult(scalars)
    traj = propagate(cfg.scheme, cfg.schedule, t0, t1, cfg.initial_state, cfg.integrator,
                     coordinate="z" if cfg.mode == "spatial" else "t")
    scalars = {"norm_final": float(traj.norm_sq[-1]), "total_loss": traj.total_loss,
               "closure_error": float(traj.norm_sq[-1] + traj.total_loss - traj.norm_sq[0])}
    for k, lv in enumerate(cfg.scheme.levels):
        scalars[f"P{lv.index}_final"] = float(traj.populations[-1, k])
        scalars[f"P{lv.index}_peak"] = float(traj.populations[:, k].max())
        scalars[f"loss_{lv.index}"] = float(traj.loss_per_level[-1, k])
    return RawResult(scalars, traj, cfg.schedule)


def run_config(cfg: ScenarioConfig, threads=1):
    """Run a non-sweep config; returns an object with ``scalars`` and ``trajectory``."""
    if cfg.protocol is not None:
        fn = PROTOCOLS[cfg.protocol["name"]][0]
        try:
            return fn(cfg.protocol["params"], cfg.integrator, threads)
        except TypeError as exc:
            raise ConfigurationError(f"protocol.params: {exc}") from None
    return run_raw(cfg, threads)


def run_sweep(cfg: ScenarioConfig, threads=1, progress=None):
    """Evaluate the sweep observable on every grid point (points run in parallel)."""
    base = cfg.to_dict(include_sweep=False)
    axes = cfg.sweep["axes"]
    observable = cfg.sweep["observable"]
    ax1 = axes[0]
    ax2 = axes[1] if len(axes) > 1 else None
    points = [(v2, v1) for v2 in (ax2["values"] if ax2 else [None]) for v1 in ax1["values"]]

    def point_config(point):
        v2, v1 = point
        data = copy.deepcopy(base)
        for p in ax1["paths"]:
            set_path(data, p, v1)
        if ax2:
            for p in ax2["paths"]:
                set_path(data, p, v2)
        return ScenarioConfig.from_dict(data)

    configs = [point_config(p) for p in points]
    done = [0]

    def evaluate(c):
        res = run_config(c, threads=1)
        if observable not in res.scalars:
            raise ConfigurationError(f"sweep.observable: {observable!r} is not produced; "
                                     f"available: {sorted(res.scalars)}")
        done[0] += 1
        if progress is not None:
            progress(done[0], len(configs))
        return res.scalars[observable]

    values = parallel_map(evaluate, configs, threads)
    if ax2:
        grid = np.array(values).reshape(len(ax2["values"]), len(ax1["values"]))
        return proto.SweepResult(observable, (ax1["name"], np.array(ax1["values"])), grid,
                                 (ax2["name"], np.array(ax2["values"])))
    return proto.SweepResult(observable, (ax1["name"], np.array(ax1["values"])),
                             np.array(values))


def analysis_system(cfg: ScenarioConfig):
    """``(scheme, schedule, (t0, t1))`` for configs whose dynamics are a Lambda pulse pair."""
    if cfg.protocol is None:
        return cfg.scheme, cfg.schedule, cfg.window
    name, params = cfg.protocol["name"], cfg.protocol["params"]
    if name in ("stirap", "bstirap", "sastirap"):
        if name == "stirap":
            sp = proto.StirapParams(**params)
        else:
            sig = inspect.signature(PROTOCOLS[name][1]).parameters
            full = {k: v.default for k, v in sig.items() if k not in ("config", "with_cd")}
            full.update({k: v for k, v in params.items() if k != "with_cd"})
            delay = -abs(full["delay"]) if name == "bstirap" else full["delay"]
            sp = proto.StirapParams(full["peak"], full["peak"], full["width"], delay,
                                    full.get("Delta", 0.0), 0.0, full.get("gamma2", 0.0))
        scheme, schedule = proto.stirap_system(sp)
        return scheme, schedule, sp.window()
    if name == "fractional":
        sig = inspect.signature(proto.run_fractional).parameters
        full = {k: v.default for k, v in sig.items() if k != "config"}
        full.update(params)
        P, S = fractional_pair(full["peak"], full["width"], full["delay"], full["theta_fs"])
        half = 0.5 * full["delay"] + proto.GAUSSIAN_CUTOFF * full["width"]
        return lambda_scheme(), PulseSchedule({"P": P, "S": S}), (-half, half)
    raise UnsupportedAnalysisError(f"protocol {name!r} has no single Lambda pulse pair "
                                   "to analyse")


def analyze(cfg: ScenarioConfig, samples=None):
    """Adiabaticity report on an even grid plus the global pulse-area scalar."""
    scheme, schedule, (t0, t1) = analysis_system(cfg)
    samples = samples or cfg.integrator.sample_count
    times = np.linspace(t0, t1, samples)
    report = adiabaticity_report(scheme, schedule, times)
    glob = global_adiabaticity(schedule, scheme, t0, t1)
    scalars = {"global_area": glob.area, "overlap_duration": glob.duration,
               "mean_rms": glob.mean_rms, "empty_overlap": glob.empty}
    return report, scalars
