"""Dressed-state analysis of the three-level Lambda system.

For two-photon resonance the mixing angles, eigenvalues and dressed states
have closed forms; off two-photon resonance the frame is obtained from a
numerical Hermitian eigensolve.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, UndefinedAngleError, UnsupportedAnalysisError
from .linkage import LevelScheme, assemble_hamiltonian
from .pulses import PulseSchedule, five_point_derivative, theta_rate_from_envelopes


@dataclass(frozen=True)
class AdiabaticFrame:
    theta: float
    phi: float
    eps_plus: float
    eps_zero: float
    eps_minus: float
    Phi_plus: np.ndarray
    Phi_0: np.ndarray
    Phi_minus: np.ndarray
    omega_rms: float


def mixing_angles(omega_P, omega_S, Delta):
    """Return ``(theta, phi)`` with ``tan theta = P/S`` and ``tan 2phi = Omega_rms/Delta``.

    ``theta`` is taken from magnitudes and lies in [0, pi/2]; ``phi`` is in
    [0, pi/2] with ``phi = pi/4`` on single-photon resonance.

    Raises
    ------
    UndefinedAngleError
        If both couplings are zero.
    """
    p, s = abs(omega_P), abs(omega_S)
    if p == 0 and s == 0:
        raise UndefinedAngleError("mixing angle undefined when both couplings vanish")
    rms = math.hypot(p, s)
    return math.atan2(p, s), 0.5 * math.atan2(rms, Delta)


def eigenvalues(omega_P, omega_S, Delta):
    """Closed-form ``(eps_plus, eps_zero, eps_minus)`` for two-photon resonance."""
    rms2 = omega_P ** 2 + omega_S ** 2
    root = math.sqrt(Delta * Delta + rms2)
    return 0.5 * (Delta + root), 0.0, 0.5 * (Delta - root)


def dressed_states(omega_P, omega_S, Delta):
    theta, phi = mixing_angles(omega_P, omega_S, Delta)
    st, ct = math.sin(theta), math.cos(theta)
    sp, cp = math.sin(phi), math.cos(phi)
    plus = np.array([st * sp, cp, ct * sp])
    dark = np.array([ct, 0.0, -st])
    minus = np.array([st * cp, -sp, ct * cp])
    return plus, dark, minus


def adiabatic_frame(omega_P, omega_S, Delta, delta=0.0):
    """Full :class:`AdiabaticFrame` at one instant.

    With ``delta != 0`` the eigenvalues and vectors come from ``numpy.linalg.eigh``
    (sorted high to low, each vector's largest component made real positive);
    the angles still follow the resonant definitions.
    """
    theta, phi = mixing_angles(omega_P, omega_S, Delta)
    rms = math.hypot(omega_P, omega_S)
    if delta == 0:
        ep, e0, em = eigenvalues(omega_P, omega_S, Delta)
        plus, dark, minus = dressed_states(omega_P, omega_S, Delta)
        return AdiabaticFrame(theta, phi, ep, e0, em, plus, dark, minus, rms)
    p, s = abs(omega_P), abs(omega_S)
    h = np.array([[0, 0.5 * p, 0], [0.5 * p, Delta, 0.5 * s], [0, 0.5 * s, delta]], float)
    vals, vecs = np.linalg.eigh(h)
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    for k in range(3):
        j = int(np.argmax(np.abs(vecs[:, k])))
        if vecs[j, k] < 0:
            vecs[:, k] = -vecs[:, k]
    return AdiabaticFrame(theta, phi, vals[0], vals[1], vals[2], vecs[:, 0], vecs[:, 1],
                          vecs[:, 2], rms)


def dark_overlap(state, frame: AdiabaticFrame):
    """Probability ``|<Phi_0|psi>|^2`` (not renormalised)."""
    psi = np.asarray(state, dtype=complex)[:3]
    return float(abs(np.dot(frame.Phi_0, psi)) ** 2)


def _legs(scheme):
    legs = scheme.lambda_legs()
    if legs is None:
        raise UnsupportedAnalysisError(
            f"analysis needs a three-level 0-1-2 Lambda scheme, got {scheme.label!r}")
    return legs


def coupling_amplitudes(scheme: LevelScheme, schedule: PulseSchedule, t):
    """Complex pump and Stokes Rabi frequencies (scale and static phase applied)."""
    pump, stokes = _legs(scheme)
    t = np.asarray(t, dtype=float)
    p = pump.strength_scale * np.exp(1j * pump.static_phase) * schedule.evaluate(pump.pulse_id, t)
    s = (stokes.strength_scale * np.exp(1j * stokes.static_phase)
         * schedule.evaluate(stokes.pulse_id, t))
    return p, s


def _envelopes_and_rates(scheme, schedule, t):
    pump, stokes = _legs(scheme)
    out = []
    for leg in (pump, stokes):
        amp = np.asarray(schedule.evaluate(leg.pulse_id, t), dtype=complex)
        der = np.asarray(schedule.rate(leg.pulse_id, t), dtype=complex)
        mag = np.abs(amp)
        safe = np.where(mag > 0, mag, 1.0)
        dmag = np.where(mag > 0, (np.conj(amp) * der).real / safe, 0.0)
        k = abs(leg.strength_scale)
        out.extend([k * mag, k * dmag])
    return out


def theta_trace(scheme, schedule, t):
    p, _, s, _ = _envelopes_and_rates(scheme, schedule, np.asarray(t, dtype=float))
    return np.arctan2(p, s)


def theta_rate(scheme, schedule, t, method="analytic", step=None):
    """Mixing-angle rate ``d theta/dt`` along a schedule.

    ``method="analytic"`` uses the quotient rule with exact envelope
    derivatives (spline derivatives for sampled pulses);
    ``method="difference"`` is a 5-point central difference with ``step``
    (default: window / 1e6).
    """
    t = np.asarray(t, dtype=float)
    if method == "analytic":
        p, dp, s, ds = _envelopes_and_rates(scheme, schedule, t)
        return theta_rate_from_envelopes(p, dp, s, ds)
    if method != "difference":
        raise ConfigurationError(f"unknown derivative method {method!r}")
    if step is None:
        sup = schedule.support()
        span = (sup[1] - sup[0]) if sup is not None else max(float(np.ptp(t)), 1.0)
        step = span / 1e6
    return five_point_derivative(lambda x: theta_trace(scheme, schedule, x), t, step)


def local_adiabaticity(schedule, scheme, t, method="analytic"):
    """Ratio ``Omega_rms / |d theta/dt|``; ``inf`` where the angle is stationary."""
    t = np.asarray(t, dtype=float)
    p, _, s, _ = _envelopes_and_rates(scheme, schedule, t)
    rate = np.abs(theta_rate(scheme, schedule, t, method))
    rms = np.hypot(p, s)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(rate > 0, rms / np.where(rate > 0, rate, 1.0), np.inf)
    return float(ratio) if ratio.ndim == 0 else ratio


@dataclass(frozen=True)
class GlobalAdiabaticity:
    area: float
    duration: float
    empty: bool

    @property
    def mean_rms(self):
        return self.area / self.duration if self.duration > 0 else 0.0


def global_adiabaticity(schedule, scheme, t0=None, t1=None, samples=20001,
                        rel_threshold=1e-6):
    """Integrated ``Omega_rms`` over the window where both couplings are on.

    "On" means above ``rel_threshold`` times the largest coupling seen on the
    grid. An empty overlap returns zero area with ``empty=True`` and a warning.
    """
    if t0 is None or t1 is None:
        sup = schedule.support()
        if sup is None:
            raise ConfigurationError("unbounded pulses: pass t0 and t1")
        t0 = sup[0] if t0 is None else t0
        t1 = sup[1] if t1 is None else t1
    grid = np.linspace(t0, t1, samples)
    p, _, s, _ = _envelopes_and_rates(scheme, schedule, grid)
    eps = rel_threshold * max(p.max(), s.max())
    mask = (p > eps) & (s > eps)
    if not mask.any():
        warnings.warn("pump and Stokes never overlap; global adiabaticity is zero",
                      RuntimeWarning, stacklevel=2)
        return GlobalAdiabaticity(0.0, 0.0, True)
    rms = np.where(mask, np.hypot(p, s), 0.0)
    area = float(np.trapezoid(rms, grid))
    dt = grid[1] - grid[0]
    duration = float(mask.sum() - 1) * dt if mask.all() else float(mask.sum()) * dt
    return GlobalAdiabaticity(area, duration, False)


def dark_state_vectors(scheme, schedule, t):
    """Normalised dark states ``(S, 0, -conj(P)) / Omega_rms`` for complex couplings.

    Rows are NaN where both couplings vanish.
    """
    p, s = coupling_amplitudes(scheme, schedule, np.asarray(t, dtype=float))
    p, s = np.atleast_1d(p), np.atleast_1d(s)
    norm = np.hypot(np.abs(p), np.abs(s))
    with np.errstate(divide="ignore", invalid="ignore"):
        vec = np.stack([s / norm, np.zeros_like(s), -np.conj(p) / norm], axis=-1)
    vec[norm == 0] = np.nan
    return vec


def adiabaticity_report(scheme, schedule, times):
    """Columns ``t, theta, phi, eps_plus, eps_minus, ratio`` on a time grid."""
    times = np.asarray(times, dtype=float)
    pump, _ = _legs(scheme)
    Delta = scheme.levels[1].detuning
    p, _, s, _ = _envelopes_and_rates(scheme, schedule, times)
    rms = np.hypot(p, s)
    theta = np.where(rms > 0, np.arctan2(p, s), np.nan)
    phi = np.where(rms > 0, 0.5 * np.arctan2(rms, Delta), np.nan)
    root = np.sqrt(Delta * Delta + rms * rms)
    return {
        "t": times,
        "theta": theta,
        "phi": phi,
        "eps_plus": 0.5 * (Delta + root),
        "eps_minus": 0.5 * (Delta - root),
        "ratio": local_adiabaticity(schedule, scheme, times),
    }


def hamiltonian_dark_residual(scheme, schedule, t):
    """``||H Phi_0|| / ||H||`` at ``t`` using the assembled matrix."""
    h = assemble_hamiltonian(scheme, schedule, t)
    vec = dark_state_vectors(scheme, schedule, t)[0]
    return float(np.linalg.norm(h @ vec) / np.linalg.norm(h))
