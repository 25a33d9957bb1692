"""Canned experiments: STIRAP variants, sweeps, gates and spatial analogs.

Every protocol returns a :class:`ProtocolResult` whose ``scalars`` are plain
floats and whose ``notes`` record the parameters used.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .adiabatic import coupling_amplitudes
from .errors import ConfigurationError
from .linkage import (Coupling, LevelScheme, Level, cavity_lambda_scheme, lambda_scheme,
                      tripod_scheme)
from .pulses import (GAUSSIAN_CUTOFF, PulseSchedule, PulseShape, cavity_vacuum_pulse,
                     composite_sequence, counterdiabatic, fractional_pair, pulse_pair)
from .propagator import (IntegratorConfig, Trajectory, parallel_map, propagate,
                         propagate_spatial)

PROBABILITY_SLACK = 1e-9
LEAKAGE_FLAG = 1e-2


@dataclass
class ProtocolResult:
    label: str
    scalars: dict
    trajectory: Optional[Trajectory] = None
    notes: dict = field(default_factory=dict)
    arrays: dict = field(default_factory=dict)

    def to_dict(self):
        out = {"label": self.label, "scalars": dict(sorted(self.scalars.items())),
               "notes": self.notes}
        for key, val in sorted(self.arrays.items()):
            val = np.asarray(val)
            if np.iscomplexobj(val):
                out[key] = np.stack([val.real, val.imag], axis=-1).tolist()
            else:
                out[key] = val.tolist()
        return out


@dataclass
class SweepResult:
    observable: str
    axis1: tuple
    grid: np.ndarray
    axis2: Optional[tuple] = None

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        shape = (len(self.axis1[1]),) if self.axis2 is None else (
            len(self.axis2[1]), len(self.axis1[1]))
        if self.grid.shape != shape:
            raise ConfigurationError(f"sweep grid shape {self.grid.shape} != axes {shape}")

    def rows(self):
        """``(axis2, axis1, value)`` rows with axis1 varying fastest."""
        name1, vals1 = self.axis1
        if self.axis2 is None:
            return [name1, self.observable], [(x, v) for x, v in zip(vals1, self.grid)]
        name2, vals2 = self.axis2
        rows = [(y, x, self.grid[j, i]) for j, y in enumerate(vals2)
                for i, x in enumerate(vals1)]
        return [name2, name1, self.observable], rows


@dataclass(frozen=True)
class StirapParams:
    """Gaussian Lambda-STIRAP parameters; ``delay > 0`` is Stokes first."""

    peak_P: float = 50.0
    peak_S: float = 50.0
    width: float = 1.0
    delay: float = 1.1
    Delta: float = 0.0
    delta: float = 0.0
    gamma2: float = 0.0
    center: float = 0.0
    pad: float = GAUSSIAN_CUTOFF

    def __post_init__(self):
        if not self.width > 0:
            raise ConfigurationError("width must be > 0")
        if self.peak_P < 0 or self.peak_S < 0:
            raise ConfigurationError("peaks must be >= 0")

    def window(self):
        half = 0.5 * abs(self.delay) + self.pad * self.width
        return self.center - half, self.center + half

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _check_probabilities(label, scalars, keys):
    for key in keys:
        val = scalars[key]
        if not (math.isfinite(val) and -PROBABILITY_SLACK <= val <= 1 + PROBABILITY_SLACK):
            raise ArithmeticError(f"{label}: {key}={val} is not a probability")


def _lambda_summary(label, traj, schedule, params, extra=None):
    pops = traj.populations
    # the ratio minimum only counts samples where the couplings are on
    amp_p, amp_s = coupling_amplitudes(traj.scheme, schedule, traj.times)
    rms = np.hypot(np.abs(amp_p), np.abs(amp_s))
    on = rms >= 1e-2 * rms.max() if rms.max() > 0 else np.zeros(rms.shape, bool)
    finite_ratio = traj.adiabaticity_trace[on & np.isfinite(traj.adiabaticity_trace)]
    overlap = traj.dark_overlap_trace[np.isfinite(traj.dark_overlap_trace)]
    scalars = {
        "efficiency": float(pops[-1, 2] / traj.norm_sq[0]),
        "P1_final": float(pops[-1, 0]),
        "P2_final": float(pops[-1, 1]),
        "peak_P2": float(pops[:, 1].max()),
        "loss": traj.total_loss,
        "norm_final": float(traj.norm_sq[-1]),
        "closure_error": float(traj.norm_sq[-1] + traj.total_loss - traj.norm_sq[0]),
        "min_adiabaticity_ratio": float(finite_ratio.min()) if finite_ratio.size else math.inf,
        "min_dark_overlap": float(overlap.min()) if overlap.size else math.nan,
    }
    scalars.update(extra or {})
    _check_probabilities(label, scalars, ("efficiency", "P1_final", "P2_final", "peak_P2"))
    return ProtocolResult(label, scalars, traj, {"params": params})


def stirap_system(params: StirapParams):
    P, S = pulse_pair(params.peak_P, params.peak_S, params.width, params.delay, params.center)
    scheme = lambda_scheme(params.Delta, params.delta, params.gamma2)
    return scheme, PulseSchedule({"P": P, "S": S})


def run_stirap(params: StirapParams = StirapParams(), config=None, label="stirap"):
    """Population transfer 1 -> 3 for one pulse pair (any delay sign)."""
    scheme, schedule = stirap_system(params)
    t0, t1 = params.window()
    traj = propagate(scheme, schedule, t0, t1, 0, config)
    return _lambda_summary(label, traj, schedule, params.to_dict())


def _efficiency(params, config):
    scheme, schedule = stirap_system(params)
    t0, t1 = params.window()
    cfg = replace(config or IntegratorConfig(), sample_count=2)
    traj = propagate(scheme, schedule, t0, t1, 0, cfg, diagnostics=False)
    return float(traj.populations[-1, 2] / traj.norm_sq[0])


def delay_sweep(base: StirapParams, delays, config=None, threads=1):
    """Efficiency versus delay; negative delays are pump first (intuitive order)."""
    delays = [float(d) for d in delays]
    if not delays:
        raise ConfigurationError("delay sweep needs at least one delay")
    eff = parallel_map(lambda d: _efficiency(replace(base, delay=d), config), delays, threads)
    return SweepResult("efficiency", ("delay", np.array(delays)), np.array(eff))


def delay_intensity_map(base: StirapParams, delays, peak_scales, config=None, threads=1):
    """Efficiency grid over delay (columns) and a common scale of both peak Rabi frequencies (rows)."""
    delays = [float(d) for d in delays]
    scales = [float(s) for s in peak_scales]
    if not delays or not scales:
        raise ConfigurationError("delay-intensity map needs nonempty axes")
    points = [(s, d) for s in scales for d in delays]
    eff = parallel_map(
        lambda p: _efficiency(replace(base, peak_P=base.peak_P * p[0],
                                      peak_S=base.peak_S * p[0], delay=p[1]), config),
        points, threads)
    grid = np.array(eff).reshape(len(scales), len(delays))
    return SweepResult("efficiency", ("delay", np.array(delays)), grid,
                       ("peak_scale", np.array(scales)))


def plateau_width(delays, efficiency, threshold=0.99):
    """Length of the contiguous run of delays around the best point with efficiency >= threshold."""
    delays = np.asarray(delays, dtype=float)
    eff = np.asarray(efficiency, dtype=float)
    k = int(np.argmax(eff))
    if eff[k] < threshold:
        return 0.0
    lo = hi = k
    while lo > 0 and eff[lo - 1] >= threshold:
        lo -= 1
    while hi < eff.size - 1 and eff[hi + 1] >= threshold:
        hi += 1
    return float(delays[hi] - delays[lo])


def _wrap(angle):
    return (angle + math.pi) % (2 * math.pi) - math.pi


def run_fractional(peak=100.0, width=1.0, delay=2.0, theta_fs=math.pi / 4, config=None):
    """Half-way transfer; compares populations and phase with the dark-state prediction.

    The dark state ``cos(theta) psi1 - sin(theta) psi3`` predicts
    ``P1 = cos^2``, ``P3 = sin^2`` and a relative phase ``arg(c3/c1) = pi``.
    """
    P, S = fractional_pair(peak, width, delay, theta_fs)
    schedule = PulseSchedule({"P": P, "S": S})
    half = 0.5 * delay + GAUSSIAN_CUTOFF * width
    traj = propagate(lambda_scheme(), schedule, -half, half, 0, config)
    c = traj.final_state
    phase = cmath.phase(c[2] / c[0]) if abs(c[0]) > 0 and abs(c[2]) > 0 else math.nan
    extra = {
        "theta_fs": theta_fs,
        "P3_final": float(abs(c[2]) ** 2),
        "P1_predicted": math.cos(theta_fs) ** 2,
        "P3_predicted": math.sin(theta_fs) ** 2,
        "relative_phase": phase,
        "relative_phase_predicted": math.pi,
        "phase_error": abs(_wrap(phase - math.pi)) if math.isfinite(phase) else math.nan,
    }
    notes = {"params": {"peak": peak, "width": width, "delay": delay, "theta_fs": theta_fs}}
    res = _lambda_summary("fractional", traj, schedule, notes["params"], extra)
    res.arrays["final_amplitudes"] = c
    return res


def run_bstirap(peak=50.0, width=1.0, delay=1.1, gamma2=0.0, Delta=0.0, config=None):
    """Intuitive-order (pump first) passage via a bright state.

    Reports the efficiency at ``gamma2`` and at zero decay. On single-photon
    resonance the lossless efficiency depends on the pulse area; a detuning
    ``Delta`` makes the bright-state passage adiabatic.
    """
    base = StirapParams(peak, peak, width, -abs(delay), Delta, 0.0, gamma2)
    res = run_stirap(base, config, label="bstirap")
    res.scalars["efficiency_lossless"] = (res.scalars["efficiency"] if gamma2 == 0
                                          else _efficiency(replace(base, gamma2=0.0), config))
    res.scalars["efficiency_at_gamma"] = res.scalars["efficiency"]
    return res


def run_sastirap(peak=2.0, width=1.0, delay=1.1, with_cd=True, config=None):
    """STIRAP with and without the counterdiabatic 1-3 pulse.

    ``efficiency`` is the branch selected by ``with_cd``; both branches are
    reported as ``efficiency_plain`` and ``efficiency_cd``.
    """
    params = StirapParams(peak, peak, width, delay)
    scheme, schedule = stirap_system(params)
    t0, t1 = params.window()
    P, S = schedule["P"], schedule["S"]
    cd_scheme = scheme.with_coupling(Coupling(0, 2, "CD"))
    cd_schedule = schedule.with_entries(CD=counterdiabatic(P, S, t0, t1))
    plain = propagate(scheme, schedule, t0, t1, 0, config)
    cd = propagate(cd_scheme, cd_schedule, t0, t1, 0, config, diagnostics=False)
    traj = cd if with_cd else plain
    e_plain = float(plain.populations[-1, 2])
    e_cd = float(cd.populations[-1, 2])
    scalars = {"efficiency": e_cd if with_cd else e_plain, "efficiency_plain": e_plain,
               "efficiency_cd": e_cd, "peak_P2": float(traj.populations[:, 1].max()),
               "closure_error": float(traj.norm_sq[-1] + traj.total_loss - 1)}
    _check_probabilities("sastirap", scalars, ("efficiency", "efficiency_plain", "efficiency_cd"))
    return ProtocolResult("sastirap", scalars, traj,
                          {"params": dict(params.to_dict(), with_cd=with_cd)})


def _gate_map(scheme, schedule, t0, t1, qubit, config):
    """Columns: final qubit amplitudes for each qubit basis input; plus full final states."""
    finals = [propagate(scheme, schedule, t0, t1, q, config, diagnostics=False)
              for q in qubit]
    full = np.array([tr.final_state for tr in finals]).T
    return full[list(qubit)], full, finals


def gate_metrics(M):
    """Unitarity deviation and rotation angle of a 2x2 map.

    The rotation angle is half the eigenphase difference, so
    ``[[cos a, sin a], [-sin a, cos a]]`` has angle ``a`` (in [0, pi/2]).
    """
    M = np.asarray(M, dtype=complex)
    unitarity = float(np.abs(M.conj().T @ M - np.eye(2)).max())
    lam = np.linalg.eigvals(M)
    angle = 0.5 * abs(cmath.phase(lam[0] / lam[1])) if np.all(np.abs(lam) > 0) else math.nan
    return unitarity, angle


def rotation(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, s], [-s, c]])


def rotation_gate_schedule(alpha, peak=50.0, width=1.0, delay=1.1, spacing=None,
                           relative_phase=math.pi):
    """Two fractional processes whose dark state sweeps ``pi/2 - alpha -> pi/2 -> pi/2 + alpha``.

    The first (inverted) process starts with both pulses in the ratio
    ``P/S = cot(alpha)`` and ends pump-only; the second starts pump-only and
    ends with ``|P/S| = cot(alpha)``. ``relative_phase`` is added to the
    second process's pump; with the default ``pi`` the bright-channel
    rotations of the two pump-only stretches cancel and the map on
    ``{psi1, psi3}`` is ``[[cos 2a, sin 2a], [-sin 2a, cos 2a]]``. With zero
    relative phase the two rotations add, and population leaks out of the
    qubit into the intermediate level.
    """
    if not 0 < alpha < math.pi / 2 + 1e-12:
        raise ConfigurationError("alpha must lie in (0, pi/2]")
    if spacing is None:
        spacing = delay + 2 * GAUSSIAN_CUTOFF * width
    c1, c2 = -0.5 * spacing, 0.5 * spacing
    ca, sa = math.cos(alpha), math.sin(alpha)

    def g(center, amp, phase=0.0):
        return PulseShape("Gaussian", peak * abs(amp), center, width,
                          phase + (math.pi if amp < 0 else 0.0))

    P = PulseShape("Sum", components=(
        g(c1 + 0.5 * delay, 1.0), g(c1 - 0.5 * delay, ca),
        g(c2 - 0.5 * delay, 1.0, relative_phase), g(c2 + 0.5 * delay, ca, relative_phase)))
    S = PulseShape("Sum", components=(g(c1 - 0.5 * delay, sa), g(c2 + 0.5 * delay, sa)))
    half = 0.5 * spacing + 0.5 * delay + GAUSSIAN_CUTOFF * width
    return PulseSchedule({"P": P, "S": S}), (-half, half)


def _gate_result(label, M, full, finals, target_angle, qubit, input_state, notes, ideal):
    unitarity, angle = gate_metrics(M)
    target_folded = abs(target_angle - math.pi * round(target_angle / math.pi))
    leak = [1.0 - float(np.sum(np.abs(M[:, k]) ** 2)) for k in range(2)]
    other = [k for k in range(full.shape[0]) if k not in qubit]
    intermediate = max(float(np.abs(full[k, j]) ** 2) for k in other for j in range(2))
    fidelity = abs(np.trace(ideal.conj().T @ M)) / 2
    scalars = {
        "unitarity_deviation": unitarity,
        "rotation_angle": angle,
        "target_angle": target_angle,
        "angle_error": abs(angle - target_folded),
        "gate_fidelity": float(fidelity),
        "leakage": max(leak),
        "intermediate_population": intermediate,
        "leakage_flag": float(max(leak) > LEAKAGE_FLAG),
    }
    traj = finals[0]
    if input_state is not None:
        psi = np.asarray(input_state, dtype=complex)
        out = M @ psi
        scalars["output_P_a"] = float(abs(out[0]) ** 2)
        scalars["output_P_b"] = float(abs(out[1]) ** 2)
    res = ProtocolResult(label, scalars, traj, notes)
    res.arrays["gate_map"] = M
    return res


def run_rotation_gate(alpha, peak=100.0, width=1.0, delay=2.0, input_state=None,
                      relative_phase=math.pi, config=None):
    """Rotation by ``2 alpha`` on ``{psi1, psi3}`` from two fractional processes.

    The 2x2 map is rebuilt from two basis-state propagations; the result
    flags leakage above 1e-2.
    """
    schedule, (t0, t1) = rotation_gate_schedule(alpha, peak, width, delay,
                                                relative_phase=relative_phase)
    M, full, finals = _gate_map(lambda_scheme(), schedule, t0, t1, (0, 2), config)
    notes = {"params": {"alpha": alpha, "peak": peak, "width": width, "delay": delay,
                        "relative_phase": relative_phase}}
    return _gate_result("rotation_gate", M, full, finals, 2 * alpha, (0, 2), input_state, notes,
                        rotation(2 * alpha))


def tripod_gate_schedule(chi, phi, peak=50.0, width=1.0, delay=1.1, spacing=None,
                         control=True):
    """Two tripod-STIRAP halves: ``b -> psi4`` and back with control phase ``phi``.

    Each half is a counterintuitive pair of the control pulse and a common
    pump/Stokes envelope with ``P/S = tan(chi)``; the halves are ``spacing``
    apart so the two control pulses never overlap.
    """
    if spacing is None:
        spacing = delay + 2 * GAUSSIAN_CUTOFF * width
    c1, c2 = -0.5 * spacing, 0.5 * spacing

    def lobes(scale, phase2=0.0, first=0.0, second=0.0):
        return PulseShape("Sum", components=(
            PulseShape("Gaussian", peak * scale, c1 + first, width),
            PulseShape("Gaussian", peak * scale, c2 + second, width, phase2)))

    P = lobes(math.sin(chi), first=0.5 * delay, second=-0.5 * delay)
    S = lobes(math.cos(chi), first=0.5 * delay, second=-0.5 * delay)
    C = lobes(1.0 if control else 0.0, phi, first=-0.5 * delay, second=0.5 * delay)
    half = 0.5 * spacing + 0.5 * delay + GAUSSIAN_CUTOFF * width
    return PulseSchedule({"P": P, "S": S, "C": C}), (-half, half)


def run_tripod_gate(alpha, chi=math.pi / 4, peak=50.0, width=1.0, delay=1.1,
                    input_state=None, control=True, config=None):
    """Tripod gate ``1 - (1 - e^{i phi}) |b><b|`` with ``b = sin(chi) psi1 + cos(chi) psi3``.

    The control phase is ``phi = 4 alpha`` so the map's rotation angle (half
    its eigenphase difference) is ``2 alpha``. Level 3 is the ancilla.
    """
    phi = 4 * alpha
    schedule, (t0, t1) = tripod_gate_schedule(chi, phi, peak, width, delay, control=control)
    M, full, finals = _gate_map(tripod_scheme(), schedule, t0, t1, (0, 2), config)
    notes = {"params": {"alpha": alpha, "chi": chi, "phi": phi, "peak": peak, "width": width,
                        "delay": delay, "control": control}}
    b = np.array([math.sin(chi), math.cos(chi)])
    ideal = np.eye(2) - (1 - cmath.exp(1j * phi)) * np.outer(b, b)
    res = _gate_result("tripod_gate", M, full, finals, 2 * alpha, (0, 2), input_state, notes,
                       ideal)
    res.scalars["ancilla_final"] = max(float(abs(full[3, j]) ** 2) for j in range(2))
    return res


def run_composite(n_pairs=3, phases=None, peak=50.0, width=1.0, delay=1.1, spacing=None,
                  config=None):
    """Train of alternating-order STIRAP pairs; odd counts end in psi3, even in psi1."""
    if n_pairs < 1:
        raise ConfigurationError("n_pairs must be >= 1")
    phases = [(0.0, 0.0)] * n_pairs if phases is None else [tuple(p) for p in phases]
    if len(phases) != n_pairs:
        raise ConfigurationError("need one (phi_P, phi_S) pair per STIRAP pair")
    schedule = composite_sequence(peak, peak, width, delay, phases, spacing)
    step = spacing if spacing is not None else delay + 2 * GAUSSIAN_CUTOFF * width
    half_pair = 0.5 * delay + GAUSSIAN_CUTOFF * width
    t0, t1 = -half_pair, (n_pairs - 1) * step + half_pair
    traj = propagate(lambda_scheme(), schedule, t0, t1, 0, config)
    target = 2 if n_pairs % 2 else 0
    pops = traj.final_populations
    scalars = {"efficiency": float(pops[2]), "P1_final": float(pops[0]),
               "P2_final": float(pops[1]), "parity_target": float(target),
               "parity_error": float(1 - pops[target]), "n_pairs": float(n_pairs)}
    return ProtocolResult("composite", scalars, traj,
                          {"params": {"n_pairs": n_pairs, "phases": phases, "peak": peak,
                                      "width": width, "delay": delay, "spacing": step}})


def run_vstirap(g=1.0, kappa=0.1, gamma=0.1, drive=None, t0=None, t1=None, config=None):
    """Single-photon emission from an atom-cavity Lambda system.

    The default drive is a slow Gaussian (peak ``20 g``, width ``20 / g``)
    and the window runs long enough after it for the cavity to empty.
    """
    if drive is None:
        drive = PulseShape("Gaussian", 20.0 * g, 0.0, 20.0 / g)
    sup = drive.support()
    if t0 is None:
        t0 = sup[0] if sup else 0.0
    if t1 is None:
        t1 = (sup[1] if sup else 0.0) + (10.0 / kappa if kappa > 0 else 0.0)
    scheme = cavity_lambda_scheme(g, kappa, gamma)
    schedule = PulseSchedule({"D": drive, "cavity": cavity_vacuum_pulse(g)})
    traj = propagate(scheme, schedule, t0, t1, 0, config)
    emission = float(traj.loss_per_level[-1, 2])
    gamma_loss = float(traj.loss_per_level[-1, 1])
    residual = float(traj.norm_sq[-1])
    omega = np.abs(schedule.evaluate("D", traj.times))
    dark = np.stack([2 * g * np.ones_like(omega), np.zeros_like(omega), -omega], axis=1)
    dark /= np.linalg.norm(dark, axis=1)[:, None]
    overlap = np.abs(np.einsum("ij,ij->i", dark, traj.amplitudes)) ** 2
    alive = traj.norm_sq > 1e-6
    fidelity = overlap[alive] / traj.norm_sq[alive]
    scalars = {"emission_probability": emission, "gamma_loss": gamma_loss,
               "residual_norm": residual, "closure_error": emission + gamma_loss + residual - 1,
               "min_dark_fidelity": float(fidelity.min()) if fidelity.size else math.nan}
    _check_probabilities("vstirap", scalars, ("emission_probability", "gamma_loss",
                                              "residual_norm"))
    res = ProtocolResult("vstirap", scalars, traj,
                         {"params": {"g": g, "kappa": kappa, "gamma": gamma,
                                     "drive": drive.to_dict(), "t0": t0, "t1": t1}})
    res.arrays["dark_overlap"] = overlap
    return res


def three_channel_scheme(loss_B=0.0, loss_all=0.0):
    """Channels A, B, C as levels 0, 1, 2; ``P`` couples A-B and ``S`` couples B-C."""
    levels = (Level(0, 0.0, loss_all, "A"), Level(1, 0.0, loss_all + loss_B, "B"),
              Level(2, 0.0, loss_all, "C"))
    return LevelScheme(levels, (Coupling(0, 1, "P"), Coupling(1, 2, "S")), "three_channel")


def run_spatial_coupler(peak=100.0, width=1.0, delay=1.1, loss=0.0, source=0, config=None):
    """Three-guide adiabatic coupler over ``z``; B-C coupling precedes A-B for A -> C transfer."""
    P, S = pulse_pair(peak, peak, width, delay)
    half = 0.5 * abs(delay) + GAUSSIAN_CUTOFF * width
    traj = propagate_spatial(three_channel_scheme(loss_all=loss),
                             PulseSchedule({"P": P, "S": S}), -half, half, source, config)
    target = 2 - source if source != 1 else 1
    pops = traj.populations
    scalars = {"transfer": float(pops[-1, target]), "middle_peak": float(pops[:, 1].max()),
               "intensity_final": float(traj.norm_sq[-1]),
               "transfer_ratio": float(pops[-1, target] / traj.norm_sq[-1])}
    return ProtocolResult("spatial_coupler", scalars, traj,
                          {"params": {"peak": peak, "width": width, "delay": delay,
                                      "loss": loss, "source": source}})


def _one_way(peak, width, delay, loss_B, config):
    P, S = pulse_pair(peak, peak, width, delay)
    schedule = PulseSchedule({"P": P, "S": S})
    scheme = three_channel_scheme(loss_B)
    half = 0.5 * abs(delay) + GAUSSIAN_CUTOFF * width
    fwd = propagate_spatial(scheme, schedule, -half, half, 0, config)
    bwd = propagate_spatial(scheme, schedule, -half, half, 2, config)
    return fwd, bwd


def nonreciprocity_scan(peak=100.0, width=1.0, loss_B=10.0, delays=None, config=None,
                        threads=1):
    """Coarse scan of the profile offset; picks the delay maximising ``min(forward, 1 - backward)``."""
    delays = np.linspace(0.25, 3.0, 12) * width if delays is None else np.asarray(delays, float)
    cfg = replace(config or IntegratorConfig(), sample_count=2)

    def score(d):
        f, b = _one_way(peak, width, d, loss_B, cfg)
        return f.populations[-1, 2], b.populations[-1, 0]

    results = parallel_map(score, list(delays), threads)
    fwd = np.array([r[0] for r in results])
    bwd = np.array([r[1] for r in results])
    best = int(np.argmax(np.minimum(fwd, 1 - bwd)))
    return float(delays[best]), delays, fwd, bwd


def run_nonreciprocity(peak=100.0, width=1.0, loss_B=10.0, delay=None, direction="forward",
                       config=None, threads=1):
    """One-way transfer through a lossy middle channel.

    Forward: input A, B-C coupling first, so the dark channel carries A to C.
    Backward: input C with the same spatial structure, which is pump-first
    for C and drives the lossy B. ``delay=None`` runs
    :func:`nonreciprocity_scan` to choose the operating point.
    """
    if direction not in ("forward", "backward"):
        raise ConfigurationError("direction must be 'forward' or 'backward'")
    notes = {"peak": peak, "width": width, "loss_B": loss_B, "direction": direction}
    if delay is None:
        delay, scanned, _, _ = nonreciprocity_scan(peak, width, loss_B, config=config,
                                                   threads=threads)
        notes["scanned_delays"] = [float(x) for x in scanned]
    notes["delay"] = float(delay)
    fwd, bwd = _one_way(peak, width, delay, loss_B, config)
    forward = float(fwd.populations[-1, 2])
    backward = float(bwd.populations[-1, 0])
    scalars = {"forward_to_C": forward, "backward_to_A": backward,
               "backward_dissipated_B": float(bwd.loss_per_level[-1, 1]),
               "forward_dissipated_B": float(fwd.loss_per_level[-1, 1]),
               "asymmetry_ratio": forward / max(backward, 1e-300), "delay": float(delay)}
    scalars["efficiency"] = forward if direction == "forward" else backward
    return ProtocolResult("nonreciprocity", scalars,
                          fwd if direction == "forward" else bwd, {"params": notes})
