"""Level schemes and assembly of the rotating-wave Hamiltonian.

Units: hbar = 1. Detunings, couplings and decay rates are angular
frequencies; decay enters as ``-i * gamma_k`` on the diagonal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NumericInputError
from .pulses import PulseSchedule


@dataclass(frozen=True)
class Level:
    index: int
    detuning: float = 0.0
    decay_rate: float = 0.0
    name: str = ""

    def __post_init__(self):
        if not isinstance(self.index, (int, np.integer)) or self.index < 0:
            raise ConfigurationError(f"level index must be a nonnegative int, got {self.index!r}")
        if not (math.isfinite(self.detuning) and math.isfinite(self.decay_rate)):
            raise NumericInputError(f"level {self.index}: detuning/decay must be finite")
        if self.decay_rate < 0:
            raise ConfigurationError(f"level {self.index}: decay_rate must be >= 0")

    def to_dict(self):
        d = {"index": int(self.index), "detuning": self.detuning, "decay_rate": self.decay_rate}
        if self.name:
            d["name"] = self.name
        return d


@dataclass(frozen=True)
class Coupling:
    """Pulsed coupling between two levels, stored with ``source < target``.

    Assembly writes ``0.5 * strength_scale * pulse(t) * exp(i static_phase)``
    at ``(source, target)`` and its conjugate at ``(target, source)``.
    """

    source: int
    target: int
    pulse_id: str
    static_phase: float = 0.0
    strength_scale: float = 1.0

    def __post_init__(self):
        if self.source == self.target:
            raise ConfigurationError("a coupling must join two different levels")
        if self.source > self.target:
            raise ConfigurationError(
                f"coupling ({self.source},{self.target}) must be given with from < to")
        if not (math.isfinite(self.static_phase) and math.isfinite(self.strength_scale)):
            raise NumericInputError("coupling phase/scale must be finite")

    def to_dict(self):
        return {"from": int(self.source), "to": int(self.target), "pulse_id": self.pulse_id,
                "static_phase": self.static_phase, "strength_scale": self.strength_scale}


@dataclass(frozen=True)
class LevelScheme:
    levels: tuple
    couplings: tuple
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(self.levels))
        object.__setattr__(self, "couplings", tuple(self.couplings))
        if len(self.levels) < 2:
            raise ConfigurationError("a level scheme needs at least 2 levels")
        indices = [lv.index for lv in self.levels]
        if len(set(indices)) != len(indices):
            raise ConfigurationError("level indices must be unique")
        pairs = set()
        for c in self.couplings:
            if c.source not in indices or c.target not in indices:
                raise ConfigurationError(
                    f"coupling ({c.source},{c.target}) references a missing level")
            if (c.source, c.target) in pairs:
                raise ConfigurationError(f"duplicate coupling ({c.source},{c.target})")
            pairs.add((c.source, c.target))

    @property
    def dimension(self):
        return len(self.levels)

    def position(self, index):
        """Row of the Hamiltonian that holds level ``index``."""
        for pos, lv in enumerate(self.levels):
            if lv.index == index:
                return pos
        raise ConfigurationError(f"no level with index {index}")

    def diagonal(self):
        return np.array([lv.detuning - 1j * lv.decay_rate for lv in self.levels])

    def decay_rates(self):
        return np.array([lv.decay_rate for lv in self.levels])

    @property
    def is_lossless(self):
        return all(lv.decay_rate == 0 for lv in self.levels)

    def coupling(self, source, target):
        for c in self.couplings:
            if (c.source, c.target) == (source, target):
                return c
        return None

    def lambda_legs(self):
        """``(pump, stokes)`` couplings if this is a three-level 0-1-2 chain, else ``None``."""
        if self.dimension != 3 or [lv.index for lv in self.levels] != [0, 1, 2]:
            return None
        pump, stokes = self.coupling(0, 1), self.coupling(1, 2)
        if pump is None or stokes is None:
            return None
        return pump, stokes

    def with_coupling(self, coupling):
        return LevelScheme(self.levels, self.couplings + (coupling,), self.label)

    def with_levels(self, levels):
        return LevelScheme(levels, self.couplings, self.label)

    def conjugated(self):
        """Scheme whose assembled matrix is the complex conjugate (lossless only)."""
        if not self.is_lossless:
            raise ConfigurationError("conjugating a lossy scheme would turn decay into gain")
        couplings = tuple(Coupling(c.source, c.target, c.pulse_id, -c.static_phase,
                                   c.strength_scale) for c in self.couplings)
        return LevelScheme(self.levels, couplings, self.label)

    def to_dict(self):
        return {"label": self.label, "levels": [lv.to_dict() for lv in self.levels],
                "couplings": [c.to_dict() for c in self.couplings]}

    @classmethod
    def from_dict(cls, data):
        try:
            levels = [Level(int(lv["index"]), float(lv.get("detuning", 0.0)),
                            float(lv.get("decay_rate", 0.0)), str(lv.get("name", "")))
                      for lv in data["levels"]]
            couplings = [Coupling(int(c["from"]), int(c["to"]), str(c["pulse_id"]),
                                  float(c.get("static_phase", 0.0)),
                                  float(c.get("strength_scale", 1.0)))
                         for c in data.get("couplings", [])]
        except ConfigurationError as exc:
            raise ConfigurationError(f"scheme: {exc}") from None
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"scheme: malformed entry ({exc})") from None
        return cls(levels, couplings, str(data.get("label", "")))


def assemble_hamiltonian(scheme: LevelScheme, schedule: PulseSchedule, t):
    """Instantaneous N x N complex Hamiltonian at time ``t``."""
    if not math.isfinite(t):
        raise NumericInputError("t must be finite")
    h = np.diag(scheme.diagonal()).astype(complex)
    for c in scheme.couplings:
        amp = complex(schedule.evaluate(c.pulse_id, t))
        if not (math.isfinite(amp.real) and math.isfinite(amp.imag)):
            raise NumericInputError(f"pulse {c.pulse_id!r} is not finite at t={t}")
        a = 0.5 * c.strength_scale * amp * np.exp(1j * c.static_phase)
        i, j = scheme.position(c.source), scheme.position(c.target)
        h[i, j] += a
        h[j, i] += np.conj(a)
    return h


def _check_rates(*rates):
    for r in rates:
        if not math.isfinite(r):
            raise NumericInputError("rates must be finite")
        if r < 0:
            raise ConfigurationError("decay rates must be >= 0")


def lambda_scheme(Delta=0.0, delta=0.0, gamma2=0.0, pump="P", stokes="S", label="lambda"):
    """Three-level chain 0-1-2 with diagonal ``(0, Delta, delta)`` and decay on level 1."""
    _check_rates(gamma2)
    levels = (Level(0), Level(1, Delta, gamma2), Level(2, delta))
    return LevelScheme(levels, (Coupling(0, 1, pump), Coupling(1, 2, stokes)), label)


def ladder_scheme(Delta=0.0, delta=0.0, gamma2=0.0, pump="P", stokes="S"):
    """Ladder layout; in the rotating frame it has the same matrix as the Lambda."""
    return lambda_scheme(Delta, delta, gamma2, pump, stokes, label="ladder")


def tripod_scheme(detunings=(0.0, 0.0, 0.0, 0.0), gammas=(0.0, 0.0, 0.0, 0.0),
                  pump="P", stokes="S", control="C"):
    """Four levels: pump 0-1, Stokes 2-1 and control 3-1 all meet the excited level 1."""
    if len(detunings) != 4 or len(gammas) != 4:
        raise ConfigurationError("tripod needs 4 detunings and 4 decay rates")
    _check_rates(*gammas)
    levels = tuple(Level(i, float(d), float(g)) for i, (d, g) in enumerate(zip(detunings, gammas)))
    couplings = (Coupling(0, 1, pump), Coupling(1, 2, stokes), Coupling(1, 3, control))
    return LevelScheme(levels, couplings, "tripod")


def chain_scheme(detunings, gammas=None, pulse_ids=None, scales=None, label="chain"):
    """Nearest-neighbour chain; link ``k`` joins levels ``k`` and ``k+1``."""
    n = len(detunings)
    gammas = [0.0] * n if gammas is None else list(gammas)
    pulse_ids = [f"L{k}" for k in range(n - 1)] if pulse_ids is None else list(pulse_ids)
    scales = [1.0] * (n - 1) if scales is None else list(scales)
    if len(gammas) != n or len(pulse_ids) != n - 1 or len(scales) != n - 1:
        raise ConfigurationError("chain needs n detunings/gammas and n-1 pulse ids/scales")
    _check_rates(*gammas)
    levels = tuple(Level(k, float(d), float(g)) for k, (d, g) in enumerate(zip(detunings, gammas)))
    couplings = tuple(Coupling(k, k + 1, pid, 0.0, float(s))
                      for k, (pid, s) in enumerate(zip(pulse_ids, scales)))
    return LevelScheme(levels, couplings, label)


CAVITY_LABEL = "cavity_lambda"
CAVITY_PULSE_ID = "cavity"


def cavity_lambda_scheme(g, kappa, gamma, Delta_C=0.0, Delta_D=0.0, drive="D"):
    """Single-excitation atom-cavity Lambda in the basis ``(|e,0>, |x,0>, |g,1>)``.

    The drive couples ``|e,0>-|x,0>``; the vacuum leg ``|x,0>-|g,1>`` refers to
    the pulse id ``"cavity"``, which must hold ``cavity_vacuum_pulse(g)`` (a
    constant ``2g``). ``|x,0>`` decays at ``gamma``, ``|g,1>`` at ``kappa``.
    """
    if not (math.isfinite(g) and g > 0):
        raise ConfigurationError("cavity coupling g must be > 0")
    _check_rates(kappa, gamma)
    levels = (Level(0, Delta_D, 0.0, "e0"), Level(1, 0.0, gamma, "x0"),
              Level(2, Delta_C, kappa, "g1"))
    couplings = (Coupling(0, 1, drive), Coupling(1, 2, CAVITY_PULSE_ID))
    return LevelScheme(levels, couplings, CAVITY_LABEL)


def rabi_from_dipole(d, E):
    """Rabi frequency ``-d E / hbar`` with hbar = 1."""
    return -d * E
