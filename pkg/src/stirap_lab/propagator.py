"""Time (or distance) evolution under an assembled, possibly lossy Hamiltonian."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernel
from .adiabatic import dark_state_vectors, local_adiabaticity, theta_trace
from .errors import (ConfigurationError, NumericInputError, StiffnessError,
                     UnsupportedAnalysisError)
from .linkage import CAVITY_LABEL, LevelScheme
from .output import write_table
from .pulses import NumericPulse, PulseSchedule

METHODS = ("rk45", "rk4")


@dataclass(frozen=True)
class IntegratorConfig:
    """Integrator settings.

    ``max_step=None`` caps the step at 1/200 of the window so that short
    pulses inside a long window cannot be stepped over. ``rk4_substeps`` is
    the number of fixed RK4 steps between output samples.
    """

    method: str = "rk45"
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: Optional[float] = None
    sample_count: int = 1000
    max_steps: int = 5_000_000
    rk4_substeps: int = 20

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigurationError(f"integrator method must be one of {METHODS}")
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ConfigurationError("integrator tolerances must be > 0")
        if self.sample_count < 2:
            raise ConfigurationError("sample_count must be >= 2")
        if self.max_step is not None and not self.max_step > 0:
            raise ConfigurationError("max_step must be > 0")
        if self.rk4_substeps < 1 or self.max_steps < 1:
            raise ConfigurationError("rk4_substeps and max_steps must be >= 1")

    def to_dict(self):
        return {"method": self.method, "rel_tol": self.rel_tol, "abs_tol": self.abs_tol,
                "max_step": self.max_step, "sample_count": self.sample_count,
                "max_steps": self.max_steps, "rk4_substeps": self.rk4_substeps}

    @classmethod
    def from_dict(cls, data):
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigurationError(f"integrator: {exc}") from None


@dataclass(frozen=True, eq=False)
class CompiledSystem:
    """Flat arrays describing ``H(t)`` for the compiled kernel."""

    n: int
    diag: np.ndarray
    gammas: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    kinds: np.ndarray
    params: np.ndarray
    nidx: np.ndarray
    knots: np.ndarray
    coefs: np.ndarray
    kstarts: np.ndarray
    cstarts: np.ndarray
    counts: np.ndarray

    @classmethod
    def build(cls, scheme: LevelScheme, schedule: PulseSchedule):
        rows, cols, kinds, params, nidx = [], [], [], [], []
        knots, coefs, kstarts, cstarts, counts = [], [], [], [], []
        kpos = cpos = 0
        origin = schedule.time_origin
        for c in scheme.couplings:
            pulse = schedule[c.pulse_id]
            i, j = scheme.position(c.source), scheme.position(c.target)
            if isinstance(pulse, NumericPulse):
                x, co = pulse.knots, pulse.coefficients
                kstarts.append(kpos)
                cstarts.append(cpos)
                counts.append(x.size - 1)
                knots.append(x)
                coefs.append(co)
                kpos += x.size
                cpos += co.shape[1]
                rows.append(i)
                cols.append(j)
                kinds.append(_kernel.NUMERIC)
                params.append([0.0, 0.0, 1.0, pulse.phase + c.static_phase,
                               c.strength_scale, origin])
                nidx.append(len(counts) - 1)
                continue
            for kind, peak, center, width, phase in pulse.leaves():
                rows.append(i)
                cols.append(j)
                kinds.append(kind)
                params.append([peak, center, width, phase + c.static_phase,
                               c.strength_scale, origin])
                nidx.append(-1)
        return cls(
            n=scheme.dimension,
            diag=np.ascontiguousarray(scheme.diagonal(), dtype=complex),
            gammas=np.ascontiguousarray(scheme.decay_rates(), dtype=float),
            rows=np.array(rows, dtype=np.int64),
            cols=np.array(cols, dtype=np.int64),
            kinds=np.array(kinds, dtype=np.int64),
            params=np.array(params, dtype=float).reshape(-1, 6),
            nidx=np.array(nidx, dtype=np.int64),
            knots=np.concatenate(knots) if knots else np.zeros(1),
            coefs=(np.ascontiguousarray(np.concatenate(coefs, axis=1), dtype=complex) if coefs
                   else np.zeros((4, 1), complex)),
            kstarts=np.array(kstarts or [0], dtype=np.int64),
            cstarts=np.array(cstarts or [0], dtype=np.int64),
            counts=np.array(counts or [0], dtype=np.int64),
        )

    def _arrays(self):
        return (self.n, self.diag, self.gammas, self.rows, self.cols, self.kinds, self.params,
                self.nidx, self.knots, self.coefs, self.kstarts, self.cstarts, self.counts)

    def hamiltonian(self, t):
        n, diag, _, *rest = self._arrays()
        return _kernel.hamiltonian_at(float(t), n, diag, *rest)


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    amplitudes: np.ndarray
    loss_per_level: np.ndarray
    scheme: LevelScheme
    theta_trace: Optional[np.ndarray] = None
    dark_overlap_trace: Optional[np.ndarray] = None
    adiabaticity_trace: Optional[np.ndarray] = None
    n_accepted: int = 0
    n_rejected: int = 0
    coordinate: str = "t"
    populations: np.ndarray = field(init=False)
    norm_sq: np.ndarray = field(init=False)

    def __post_init__(self):
        pops = np.abs(self.amplitudes) ** 2
        object.__setattr__(self, "populations", pops)
        object.__setattr__(self, "norm_sq", pops.sum(axis=1))

    @property
    def final_state(self):
        return self.amplitudes[-1].copy()

    @property
    def final_populations(self):
        return self.populations[-1].copy()

    @property
    def total_loss(self):
        return float(self.loss_per_level[-1].sum())

    def population(self, level):
        return self.populations[:, self.scheme.position(level)]

    def to_csv(self, path):
        n = self.amplitudes.shape[1]
        idx = [lv.index for lv in self.scheme.levels]
        header = [self.coordinate]
        header += [f"{part}_c{k}" for k in idx for part in ("re", "im")]
        header += [f"P{k}" for k in idx]
        header += ["norm_sq", "theta", "dark_overlap", "adiabaticity_ratio"]
        nan = np.full(self.times.size, np.nan)
        cols = [self.times]
        for k in range(n):
            cols += [self.amplitudes[:, k].real, self.amplitudes[:, k].imag]
        cols += [self.populations[:, k] for k in range(n)]
        cols += [self.norm_sq,
                 nan if self.theta_trace is None else self.theta_trace,
                 nan if self.dark_overlap_trace is None else self.dark_overlap_trace,
                 nan if self.adiabaticity_trace is None else self.adiabaticity_trace]
        write_table(path, header, np.column_stack(cols))


def _initial_state(psi0, n):
    if isinstance(psi0, (int, np.integer)):
        if not 0 <= psi0 < n:
            raise ConfigurationError(f"initial level position {psi0} out of range")
        vec = np.zeros(n, complex)
        vec[psi0] = 1.0
        return vec
    vec = np.array(psi0, dtype=complex).ravel()
    if vec.size != n:
        raise ConfigurationError(f"initial state has {vec.size} entries, scheme has {n} levels")
    if not np.all(np.isfinite(vec)):
        raise NumericInputError("initial state must be finite")
    norm = float(np.vdot(vec, vec).real)
    if norm == 0:
        raise ConfigurationError("initial state has zero norm")
    if norm > 1 + 1e-12:
        raise ConfigurationError(f"initial state norm^2 {norm} exceeds 1")
    return vec


def _check_finite_hamiltonian(system, t0, t1):
    for t in (t0, 0.5 * (t0 + t1), t1):
        if not np.all(np.isfinite(system.hamiltonian(t))):
            raise NumericInputError(f"Hamiltonian is not finite at t={t}")


def _diagnostics(scheme, schedule, times, amps):
    if scheme.lambda_legs() is None:
        return None, None, None
    theta = theta_trace(scheme, schedule, times)
    dark = dark_state_vectors(scheme, schedule, times)
    overlap = np.abs(np.einsum("ij,ij->i", np.conj(dark), amps[:, :3])) ** 2
    ratio = local_adiabaticity(schedule, scheme, times)
    undefined = ~np.isfinite(dark[:, 0])
    theta = np.where(undefined, np.nan, theta)
    ratio = np.where(undefined, np.nan, ratio)
    return theta, overlap, ratio


def propagate(scheme: LevelScheme, schedule: PulseSchedule, t0, t1, psi0,
              config: Optional[IntegratorConfig] = None, diagnostics=True,
              coordinate="t"):
    """Solve ``i dpsi/dt = H(t) psi`` from ``t0`` to ``t1``.

    Parameters
    ----------
    psi0 : int or array_like
        Initial amplitudes, or a Hamiltonian row index for a basis state.
        ``||psi0||^2`` must lie in (0, 1].
    diagnostics : bool
        Attach mixing-angle, dark-overlap and adiabaticity traces for
        three-level Lambda schemes.

    Raises
    ------
    StiffnessError
        Step size underflow (or step budget exhausted); carries ``.t``.
    NumericInputError
        Non-finite Hamiltonian or state.
    """
    config = config or IntegratorConfig()
    t0, t1 = float(t0), float(t1)
    if not (math.isfinite(t0) and math.isfinite(t1)):
        raise NumericInputError("integration bounds must be finite")
    if not t1 > t0:
        raise ConfigurationError("propagation needs t1 > t0")
    n = scheme.dimension
    vec = _initial_state(psi0, n)
    system = CompiledSystem.build(scheme, schedule)
    _check_finite_hamiltonian(system, t0, t1)
    y0 = np.concatenate([vec, np.zeros(n, complex)])
    n_arr = system._arrays()
    if config.method == "rk45":
        max_step = config.max_step if config.max_step is not None else (t1 - t0) / 200
        out, n_acc, n_rej, status, t_fail = _kernel.integrate_dopri(
            t0, t1, y0, config.sample_count, config.rel_tol, config.abs_tol, max_step,
            config.max_steps, *n_arr)
    else:
        out, n_acc, n_rej, status, t_fail = _kernel.integrate_rk4(
            t0, t1, y0, config.sample_count, config.rk4_substeps, *n_arr)
    if status == _kernel.STATUS_NONFINITE:
        raise NumericInputError(f"state became non-finite near t={t_fail}")
    if status == _kernel.STATUS_STIFF:
        raise StiffnessError(f"step size underflow at t={t_fail}", t_fail)
    if status == _kernel.STATUS_MAX_STEPS:
        raise StiffnessError(f"step budget of {config.max_steps} exhausted at t={t_fail}",
                             t_fail)
    times = np.linspace(t0, t1, config.sample_count)
    times[-1] = t1
    amps = out[:, :n].copy()
    losses = out[:, n:].real.copy()
    theta = overlap = ratio = None
    if diagnostics:
        theta, overlap, ratio = _diagnostics(scheme, schedule, times, amps)
    return Trajectory(times, amps, losses, scheme, theta, overlap, ratio, int(n_acc),
                      int(n_rej), coordinate)


def propagate_spatial(scheme, schedule, z0, z1, a0, config=None, diagnostics=True):
    """Coupled-mode propagation with distance ``z`` as the evolution parameter.

    Mode amplitudes obey ``i da/dz = H(z) a``; pulses are coupling profiles
    over ``z`` and a level's ``decay_rate`` is the amplitude damping per unit
    length.
    """
    return propagate(scheme, schedule, z0, z1, a0, config, diagnostics, coordinate="z")


def transfer_efficiency(traj: Trajectory, target_level):
    """Final population of ``target_level`` divided by the initial norm squared."""
    pos = traj.scheme.position(target_level)
    return float(traj.populations[-1, pos] / traj.norm_sq[0])


def time_reversed(scheme: LevelScheme, schedule: PulseSchedule, t0, t1):
    """Scheme and schedule that undo a lossless propagation over ``[t0, t1]``.

    Propagating ``conj(psi(t1))`` under the returned pair over the same window
    and conjugating the result gives back ``psi(t0)``.
    """
    return scheme.conjugated(), schedule.mirrored(t0, t1)


def parallel_map(fn, items, threads=1):
    """Apply ``fn`` to ``items`` on a thread pool; results keep the input order."""
    items = list(items)
    if threads is None or threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class DiagonalEnsemble:
    weights: tuple

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0 or not np.all(np.isfinite(w)):
            raise ConfigurationError("ensemble weights must be a finite 1-D sequence")
        if np.any(w < 0):
            raise ConfigurationError("ensemble weights must be >= 0")
        if abs(w.sum() - 1) > 1e-9:
            raise ConfigurationError(f"ensemble weights sum to {w.sum()}, not 1")
        object.__setattr__(self, "weights", tuple(float(x) for x in w))


@dataclass(frozen=True)
class EnsembleResult:
    initial_spectrum: np.ndarray
    final_spectrum: np.ndarray
    entropy_before: float
    entropy_after: float
    final_density: np.ndarray

    @property
    def final_populations(self):
        return self.final_density.diagonal().real.copy()


def von_neumann_entropy(weights):
    """``-sum w ln w`` with ``0 ln 0 = 0``; tiny negative eigenvalue noise is clipped."""
    w = np.asarray(weights, dtype=float)
    if np.any(w < -1e-12):
        raise ConfigurationError("entropy needs nonnegative weights")
    w = np.clip(w, 0.0, None)
    nz = w[w > 0]
    return float(-(nz * np.log(nz)).sum())


def evolve_diagonal_ensemble(scheme, schedule, ensemble: DiagonalEnsemble, t0, t1,
                             config=None, threads=1):
    """Evolve ``rho = sum_i w_i |i><i|`` under a lossless scheme.

    Raises
    ------
    UnsupportedAnalysisError
        If any level decays: the spectrum is conserved only for unitary
        evolution.
    """
    if not scheme.is_lossless:
        raise UnsupportedAnalysisError("diagonal-ensemble evolution requires zero decay")
    w = np.asarray(ensemble.weights)
    n = scheme.dimension
    if w.size != n:
        raise ConfigurationError(f"ensemble has {w.size} weights, scheme has {n} levels")
    config = config or IntegratorConfig(sample_count=2)
    members = [i for i in range(n) if w[i] > 0]
    finals = parallel_map(
        lambda i: propagate(scheme, schedule, t0, t1, i, config, diagnostics=False).final_state,
        members, threads)
    rho = np.zeros((n, n), complex)
    for i, psi in zip(members, finals):
        rho += w[i] * np.outer(psi, np.conj(psi))
    spectrum = np.sort(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)))[::-1]
    return EnsembleResult(np.sort(w)[::-1], spectrum, von_neumann_entropy(w),
                          von_neumann_entropy(spectrum), rho)


def _cavity_level(traj, kappa):
    if traj.scheme.label != CAVITY_LABEL:
        raise ConfigurationError(
            f"photon emission needs a {CAVITY_LABEL!r} trajectory, got {traj.scheme.label!r}")
    pos = traj.scheme.position(2)
    rate = traj.scheme.levels[pos].decay_rate
    if abs(rate - kappa) > 1e-12 * max(1.0, abs(kappa)):
        raise ConfigurationError(f"kappa {kappa} does not match the scheme's {rate}")
    return pos


def photon_emission_probability(traj: Trajectory, kappa):
    """Probability that the photon left the cavity, ``2 kappa int |c_g1|^2 dt``.

    Taken from the integrator's loss accumulator for ``|g,1>``, which is exact
    to integrator tolerance; :func:`emission_trapezoid` gives the sampled
    estimate.
    """
    return float(traj.loss_per_level[-1, _cavity_level(traj, kappa)])


def emission_trapezoid(traj: Trajectory, kappa):
    """Trapezoid-rule ``2 kappa int |c_g1|^2 dt`` on the trajectory's samples."""
    pos = _cavity_level(traj, kappa)
    return float(2 * kappa * np.trapezoid(traj.populations[:, pos], traj.times))


def compiled_hamiltonian(scheme, schedule, t):
    """Hamiltonian as seen by the compiled kernel (used to cross-check assembly)."""
    return CompiledSystem.build(scheme, schedule).hamiltonian(t)


__all__ = [
    "IntegratorConfig", "CompiledSystem", "Trajectory", "propagate", "propagate_spatial",
    "transfer_efficiency", "time_reversed", "parallel_map", "DiagonalEnsemble",
    "EnsembleResult", "von_neumann_entropy", "evolve_diagonal_ensemble",
    "photon_emission_probability", "emission_trapezoid", "compiled_hamiltonian",
]
