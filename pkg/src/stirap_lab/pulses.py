"""Pulse envelopes, schedules and the standard pulse-pair builders."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Sequence, Union

import numpy as np
from scipy.interpolate import CubicSpline

from . import _kernel
from .errors import ConfigurationError, NumericInputError, OrderingError

KINDS = {
    "Gaussian": _kernel.GAUSSIAN,
    "SinSquared": _kernel.SIN_SQUARED,
    "Constant": _kernel.CONSTANT,
    "Square": _kernel.SQUARE,
}
# Gaussian tails are cut here when estimating a pulse's support.
GAUSSIAN_CUTOFF = 6.0


@dataclass(frozen=True)
class PulseShape:
    """Analytic complex envelope ``peak * f((t - center) / width) * exp(i phase)``.

    ``kind`` is one of ``Gaussian`` (``exp(-x**2)``, ``width`` is the 1/e
    half-width), ``SinSquared`` (``width`` is the full base), ``Constant``,
    ``Square`` (``width`` is the duration) or ``Sum``. A ``Sum`` adds its
    ``components`` and multiplies the result by ``exp(i phase)``; its own peak,
    center and width are ignored.
    """

    kind: str
    peak: float = 0.0
    center: float = 0.0
    width: float = 1.0
    phase: float = 0.0
    components: tuple = ()

    def __post_init__(self):
        if self.kind == "Sum":
            if not self.components:
                raise ConfigurationError("Sum pulse needs at least one component")
            object.__setattr__(self, "components", tuple(self.components))
            for comp in self.components:
                if not isinstance(comp, PulseShape):
                    raise ConfigurationError("Sum components must be PulseShape")
        elif self.kind not in KINDS:
            raise ConfigurationError(f"unknown pulse kind {self.kind!r}")
        else:
            for name in ("peak", "center", "width", "phase"):
                if not math.isfinite(getattr(self, name)):
                    raise NumericInputError(f"pulse {name} must be finite")
            if self.peak < 0:
                raise ConfigurationError("pulse peak must be >= 0 (use phase for sign)")
            if self.kind != "Constant" and self.width <= 0:
                raise ConfigurationError("pulse width must be > 0")

    def leaves(self, phase=0.0):
        """Flatten into ``(kind_code, peak, center, width, total_phase)`` tuples."""
        if self.kind == "Sum":
            out = []
            for comp in self.components:
                out.extend(comp.leaves(phase + self.phase))
            return out
        return [(KINDS[self.kind], self.peak, self.center, self.width, phase + self.phase)]

    def evaluate(self, t):
        """Complex amplitude at ``t`` (scalar or array)."""
        return _sum_leaves(self.leaves(), t, derivative=False)

    def rate(self, t):
        """Time derivative of :meth:`evaluate`."""
        return _sum_leaves(self.leaves(), t, derivative=True)

    def support(self):
        """Interval outside which the pulse is negligible, or ``None`` if unbounded."""
        lo, hi = math.inf, -math.inf
        for kind, _, center, width, _ in self.leaves():
            if kind == _kernel.CONSTANT:
                return None
            half = GAUSSIAN_CUTOFF * width if kind == _kernel.GAUSSIAN else 0.5 * width
            lo, hi = min(lo, center - half), max(hi, center + half)
        return lo, hi

    def scaled(self, factor):
        """Copy with the amplitude multiplied by a real ``factor`` (sign goes into phase)."""
        extra = math.pi if factor < 0 else 0.0
        factor = abs(factor)
        if self.kind == "Sum":
            comps = tuple(c.scaled(factor) for c in self.components)
            return PulseShape("Sum", phase=self.phase + extra, components=comps)
        return PulseShape(self.kind, self.peak * factor, self.center, self.width,
                          self.phase + extra)

    def shifted(self, dt):
        if self.kind == "Sum":
            return PulseShape("Sum", phase=self.phase,
                              components=tuple(c.shifted(dt) for c in self.components))
        return PulseShape(self.kind, self.peak, self.center + dt, self.width, self.phase)

    def mirrored(self, t_mid):
        """Time-reversed and conjugated copy: ``f(t) -> conj(f(2 t_mid - t))``."""
        if self.kind == "Sum":
            return PulseShape("Sum", phase=-self.phase,
                              components=tuple(c.mirrored(t_mid) for c in self.components))
        return PulseShape(self.kind, self.peak, 2 * t_mid - self.center, self.width,
                          -self.phase)

    def to_dict(self):
        if self.kind == "Sum":
            return {"kind": "Sum", "phase": self.phase,
                    "components": [c.to_dict() for c in self.components]}
        return {"kind": self.kind, "peak": self.peak, "center": self.center,
                "width": self.width, "phase": self.phase}


def _sum_leaves(leaves, t, derivative):
    ts = np.asarray(t, dtype=float)
    flat = np.atleast_1d(ts).ravel()
    total = np.zeros(flat.size, dtype=complex)
    fn = _kernel.envelope_rate_array if derivative else _kernel.envelope_array
    for kind, peak, center, width, phase in leaves:
        total += fn(kind, peak, center, width, flat) * np.exp(1j * phase)
    if ts.ndim == 0:
        return complex(total[0])
    return total.reshape(ts.shape)


@dataclass(frozen=True, eq=False)
class NumericPulse:
    """Sampled complex envelope, cubic-spline interpolated, zero outside the samples."""

    times: np.ndarray
    values: np.ndarray
    phase: float = 0.0
    _spline: CubicSpline = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        times = np.array(self.times, dtype=float)
        values = np.array(self.values, dtype=complex)
        if times.ndim != 1 or times.shape != values.shape:
            raise ConfigurationError("numeric pulse needs matching 1-D times and values")
        if times.size < 4:
            raise ConfigurationError("numeric pulse needs at least 4 samples")
        if not np.all(np.isfinite(times)) or not np.all(np.isfinite(values)):
            raise NumericInputError("numeric pulse samples must be finite")
        if np.any(np.diff(times) <= 0):
            raise ConfigurationError("numeric pulse times must be strictly increasing")
        times.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_spline", CubicSpline(times, values))

    @property
    def knots(self):
        return self._spline.x

    @property
    def coefficients(self):
        return np.ascontiguousarray(self._spline.c, dtype=complex)

    def evaluate(self, t):
        ts = np.asarray(t, dtype=float)
        vals = _kernel.spline_array(self.knots, self.coefficients,
                                    np.atleast_1d(ts).ravel(), False)
        vals = vals * np.exp(1j * self.phase)
        return complex(vals[0]) if ts.ndim == 0 else vals.reshape(ts.shape)

    def rate(self, t):
        ts = np.asarray(t, dtype=float)
        vals = _kernel.spline_array(self.knots, self.coefficients,
                                    np.atleast_1d(ts).ravel(), True)
        vals = vals * np.exp(1j * self.phase)
        return complex(vals[0]) if ts.ndim == 0 else vals.reshape(ts.shape)

    def integral(self, a=None, b=None):
        """Exact integral of the interpolant (phase included)."""
        a = self.times[0] if a is None else a
        b = self.times[-1] if b is None else b
        return complex(self._spline.integrate(a, b)) * np.exp(1j * self.phase)

    def support(self):
        return float(self.times[0]), float(self.times[-1])

    def shifted(self, dt):
        return NumericPulse(self.times + dt, self.values, self.phase)

    def mirrored(self, t_mid):
        return NumericPulse((2 * t_mid - self.times)[::-1], np.conj(self.values)[::-1],
                            -self.phase)

    def to_csv(self, path):
        """Write ``t, re, im`` rows (phase folded into the values)."""
        vals = self.values * np.exp(1j * self.phase)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["t", "re", "im"])
            for t, v in zip(self.times, vals):
                writer.writerow([format(t, ".17g"), format(v.real, ".17g"),
                                 format(v.imag, ".17g")])

    @classmethod
    def from_csv(cls, path):
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1] + 1j * data[:, 2])

    def to_dict(self):
        return {"kind": "Numeric", "phase": self.phase,
                "samples": [[float(t), [float(v.real), float(v.imag)]]
                            for t, v in zip(self.times, self.values)]}


Pulse = Union[PulseShape, NumericPulse]


class PulseSchedule:
    """Immutable map from pulse id to envelope; pulses are evaluated at ``t - time_origin``."""

    def __init__(self, entries: Mapping[str, Pulse], time_origin: float = 0.0):
        for key, pulse in entries.items():
            if not isinstance(pulse, (PulseShape, NumericPulse)):
                raise ConfigurationError(f"pulse {key!r} is not a pulse object")
        if not math.isfinite(time_origin):
            raise NumericInputError("time_origin must be finite")
        self._entries = MappingProxyType(dict(entries))
        self.time_origin = float(time_origin)

    @property
    def entries(self):
        return self._entries

    def __contains__(self, pulse_id):
        return pulse_id in self._entries

    def __getitem__(self, pulse_id):
        try:
            return self._entries[pulse_id]
        except KeyError:
            raise ConfigurationError(f"unresolved pulse id {pulse_id!r}") from None

    def __eq__(self, other):
        if not isinstance(other, PulseSchedule):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __repr__(self):
        return f"PulseSchedule({sorted(self._entries)}, time_origin={self.time_origin})"

    def evaluate(self, pulse_id, t):
        return self[pulse_id].evaluate(np.asarray(t, dtype=float) - self.time_origin)

    def rate(self, pulse_id, t):
        return self[pulse_id].rate(np.asarray(t, dtype=float) - self.time_origin)

    def with_entries(self, **entries):
        merged = dict(self._entries)
        merged.update(entries)
        return PulseSchedule(merged, self.time_origin)

    def support(self):
        """Union of the pulses' supports (absolute time) or ``None`` if any is unbounded."""
        lo, hi = math.inf, -math.inf
        for pulse in self._entries.values():
            sup = pulse.support()
            if sup is None:
                return None
            lo, hi = min(lo, sup[0]), max(hi, sup[1])
        if lo > hi:
            return None
        return lo + self.time_origin, hi + self.time_origin

    def mirrored(self, t0, t1):
        """Schedule whose pulses are ``conj(f(t0 + t1 - t))``: time-reversal partner."""
        mid = 0.5 * (t0 + t1) - self.time_origin
        return PulseSchedule({k: p.mirrored(mid) for k, p in self._entries.items()},
                             self.time_origin)

    def to_dict(self):
        return {"time_origin": self.time_origin,
                "entries": {k: self._entries[k].to_dict() for k in sorted(self._entries)}}

    @classmethod
    def from_dict(cls, data):
        entries = data.get("entries")
        if not isinstance(entries, dict):
            raise ConfigurationError("pulses.entries must be an object")
        return cls({k: pulse_from_dict(v, f"pulses.entries.{k}") for k, v in entries.items()},
                   data.get("time_origin", 0.0))


def pulse_from_dict(data, path="pulse"):
    if not isinstance(data, dict) or "kind" not in data:
        raise ConfigurationError(f"{path}: pulse needs a 'kind'")
    kind = data["kind"]
    try:
        if kind == "Sum":
            comps = tuple(pulse_from_dict(c, f"{path}.components[{i}]")
                          for i, c in enumerate(data["components"]))
            return PulseShape("Sum", phase=float(data.get("phase", 0.0)), components=comps)
        if kind == "Numeric":
            samples = data["samples"]
            times = [float(s[0]) for s in samples]
            values = [complex(s[1][0], s[1][1]) if isinstance(s[1], (list, tuple))
                      else complex(float(s[1])) for s in samples]
            return NumericPulse(times, values, float(data.get("phase", 0.0)))
        return PulseShape(kind, float(data.get("peak", 0.0)), float(data.get("center", 0.0)),
                          float(data.get("width", 1.0)), float(data.get("phase", 0.0)))
    except ConfigurationError as exc:
        raise ConfigurationError(f"{path}: {exc}") from None
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ConfigurationError(f"{path}: malformed pulse ({exc})") from None


def evaluate(shape: Pulse, t):
    """Complex amplitude ``Omega(t) exp(i phi)`` of a single pulse."""
    return shape.evaluate(t)


def gaussian(peak, center, width, phase=0.0):
    return PulseShape("Gaussian", peak, center, width, phase)


def pulse_pair(peak_P, peak_S, width, delay, center=0.0):
    """Gaussian pump/Stokes pair; ``delay > 0`` puts Stokes first (counterintuitive).

    Negative delays give the intuitive order, zero gives coincident pulses.
    """
    if width <= 0:
        raise ConfigurationError("width must be > 0")
    P = PulseShape("Gaussian", peak_P, center + 0.5 * delay, width)
    S = PulseShape("Gaussian", peak_S, center - 0.5 * delay, width)
    return P, S


def counterintuitive_pair(peak_P, peak_S, width, delay, center=0.0, intuitive=False):
    """Stokes-before-pump Gaussian pair separated by ``delay``.

    ``intuitive=True`` swaps the order (pump first) for the same positive delay.
    """
    if not delay > 0:
        raise OrderingError("delay must be > 0; pass intuitive=True for pump-first order")
    return pulse_pair(peak_P, peak_S, width, -delay if intuitive else delay, center)


def fractional_pair(peak, width, delay, theta_fs, center=0.0):
    """Pair whose mixing angle ends at ``theta_fs`` instead of pi/2.

    The pump is scaled by ``sin(theta_fs)`` and the Stokes pulse gets a
    ``cos(theta_fs)`` copy of the pump's Gaussian, so the pulses die out with
    the fixed ratio ``P/S = tan(theta_fs)``.
    """
    if not 0 < theta_fs <= math.pi / 2:
        raise ConfigurationError("theta_fs must lie in (0, pi/2]")
    if theta_fs == math.pi / 2:
        return counterintuitive_pair(peak, peak, width, delay, center)
    if width <= 0:
        raise ConfigurationError("width must be > 0")
    late = center + 0.5 * delay
    P = PulseShape("Gaussian", peak * math.sin(theta_fs), late, width)
    S = PulseShape("Sum", components=(
        PulseShape("Gaussian", peak, center - 0.5 * delay, width),
        PulseShape("Gaussian", peak * math.cos(theta_fs), late, width),
    ))
    return P, S


def mixing_angle(P, S, t):
    """``atan2(|P|, |S|)`` in [0, pi/2] for two pulses on a common time grid."""
    return np.arctan2(np.abs(P.evaluate(t)), np.abs(S.evaluate(t)))


def _magnitude_and_rate(pulse, t):
    amp = np.asarray(pulse.evaluate(t), dtype=complex)
    der = np.asarray(pulse.rate(t), dtype=complex)
    mag = np.abs(amp)
    with np.errstate(invalid="ignore", divide="ignore"):
        dmag = np.where(mag > 0, (np.conj(amp) * der).real / np.where(mag > 0, mag, 1.0), 0.0)
    return mag, dmag


def theta_rate_from_envelopes(p, dp, s, ds):
    """Quotient-rule ``d theta/dt = (S P' - P S') / (P^2 + S^2)``; 0 where both vanish."""
    p, dp, s, ds = (np.asarray(x, dtype=float) for x in (p, dp, s, ds))
    m = np.maximum(p, s)
    safe = np.where(m > 0, m, 1.0)
    pn, sn, dpn, dsn = p / safe, s / safe, dp / safe, ds / safe
    denom = np.where(m > 0, pn * pn + sn * sn, 1.0)
    return np.where(m > 0, (sn * dpn - pn * dsn) / denom, 0.0)


def five_point_derivative(fn, t, step):
    t = np.asarray(t, dtype=float)
    return (fn(t - 2 * step) - 8 * fn(t - step) + 8 * fn(t + step) - fn(t + 2 * step)) / (12 * step)


def theta_rate(P, S, t, step=None):
    """Mixing-angle rate for a pump/Stokes pair.

    Analytic for :class:`PulseShape` pairs; otherwise a 5-point central
    difference of the mixing angle with ``step`` (default: window / 1e6).
    """
    t = np.asarray(t, dtype=float)
    if isinstance(P, PulseShape) and isinstance(S, PulseShape):
        p, dp = _magnitude_and_rate(P, t)
        s, ds = _magnitude_and_rate(S, t)
        return theta_rate_from_envelopes(p, dp, s, ds)
    if step is None:
        sups = [x.support() for x in (P, S) if x.support() is not None]
        if sups:
            span = max(b for _, b in sups) - min(a for a, _ in sups)
        else:
            span = float(np.ptp(t)) if t.size > 1 else 1.0
        step = span / 1e6
    return five_point_derivative(lambda x: mixing_angle(P, S, x), t, step)


def counterdiabatic(P, S, t0=None, t1=None, samples=8001):
    """Counterdiabatic 1-3 pulse for a pump/Stokes pair.

    Returns a :class:`NumericPulse` with amplitude ``2 i dtheta/dt``: magnitude
    ``2 |dtheta/dt|`` at constant quadrature phase. Used on the 1-3 leg with
    strength 1 it adds ``+-i dtheta/dt`` off-diagonals that cancel the
    dark-bright nonadiabatic coupling. Where both pulses vanish the rate is 0.
    """
    if t0 is None or t1 is None:
        sups = [x.support() for x in (P, S)]
        if any(s is None for s in sups):
            raise ConfigurationError("unbounded pulses: pass t0 and t1 explicitly")
        t0 = min(s[0] for s in sups) if t0 is None else t0
        t1 = max(s[1] for s in sups) if t1 is None else t1
    if not t1 > t0:
        raise ConfigurationError("counterdiabatic window needs t1 > t0")
    grid = np.linspace(t0, t1, samples)
    rate = theta_rate(P, S, grid)
    return NumericPulse(grid, 2j * rate)


def composite_sequence(peak_P, peak_S, width, delay, phases: Sequence, spacing=None,
                       center=0.0):
    """Train of STIRAP pairs with per-pair phases ``(phi_P, phi_S)``.

    Pair ``k`` is centred at ``center + k * spacing``. Even-indexed pairs
    (first, third, ...) are Stokes-first and drive 1->3; odd-indexed pairs are
    pump-first and drive 3->1. Returns a schedule with ids ``P`` and ``S``.
    """
    phases = list(phases)
    if not phases:
        raise ConfigurationError("composite sequence needs at least one pair")
    if not delay > 0 or width <= 0:
        raise ConfigurationError("composite pairs need delay > 0 and width > 0")
    extent = abs(delay) + 2 * GAUSSIAN_CUTOFF * width
    if spacing is None:
        spacing = extent
    if len(phases) > 1 and spacing < extent:
        raise ConfigurationError(
            f"pair windows overlap: spacing {spacing} < pair extent {extent}")
    p_parts, s_parts = [], []
    for k, pair_phases in enumerate(phases):
        phi_p, phi_s = (float(x) for x in pair_phases)
        signed = delay if k % 2 == 0 else -delay
        P, S = pulse_pair(peak_P, peak_S, width, signed, center + k * spacing)
        p_parts.append(PulseShape(P.kind, P.peak, P.center, P.width, phi_p))
        s_parts.append(PulseShape(S.kind, S.peak, S.center, S.width, phi_s))
    return PulseSchedule({
        "P": PulseShape("Sum", components=tuple(p_parts)),
        "S": PulseShape("Sum", components=tuple(s_parts)),
    })


def cavity_vacuum_pulse(g):
    """Constant ``2g`` envelope for the cavity leg (assembly halves it to ``g``)."""
    if not g > 0:
        raise ConfigurationError("cavity coupling g must be > 0")
    return PulseShape("Constant", 2.0 * g)
