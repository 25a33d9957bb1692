import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stirap_lab.errors import ConfigurationError, NumericInputError
from stirap_lab.linkage import (Coupling, Level, LevelScheme, assemble_hamiltonian,
                                cavity_lambda_scheme, chain_scheme, lambda_scheme,
                                ladder_scheme, rabi_from_dipole, tripod_scheme)
from stirap_lab.propagator import compiled_hamiltonian
from stirap_lab.pulses import (NumericPulse, PulseSchedule, PulseShape, cavity_vacuum_pulse,
                               gaussian, pulse_pair)


def _off_schedule():
    return PulseSchedule({"P": gaussian(0.0, 0.0, 1.0), "S": gaussian(0.0, 0.0, 1.0),
                          "C": gaussian(0.0, 0.0, 1.0)})


def test_lambda_diagonal_examples():
    sched = _off_schedule()
    np.testing.assert_array_equal(assemble_hamiltonian(lambda_scheme(), sched, 0.0),
                                  np.zeros((3, 3)))
    assert assemble_hamiltonian(lambda_scheme(Delta=5.0), sched, 0.0)[1, 1] == 5.0
    assert assemble_hamiltonian(lambda_scheme(delta=0.3), sched, 0.0)[2, 2] == 0.3
    h = assemble_hamiltonian(lambda_scheme(gamma2=0.7), sched, 0.0)
    assert h[1, 1] == -0.7j
    assert h[0, 0] == 0 and h[2, 2] == 0


def test_lambda_offdiagonal_half_rabi():
    P, S = pulse_pair(4.0, 2.0, 1.0, 0.0)
    h = assemble_hamiltonian(lambda_scheme(), PulseSchedule({"P": P, "S": S}), 0.0)
    assert h[0, 1] == pytest.approx(2.0)
    assert h[1, 2] == pytest.approx(1.0)
    assert h[0, 2] == 0
    np.testing.assert_allclose(h, h.conj().T)


def test_ladder_matches_lambda_matrix():
    sched = PulseSchedule({"P": gaussian(1.0, 0.0, 1.0), "S": gaussian(2.0, 0.5, 1.0)})
    a = assemble_hamiltonian(lambda_scheme(1.0, 0.2, 0.3), sched, 0.3)
    b = assemble_hamiltonian(ladder_scheme(1.0, 0.2, 0.3), sched, 0.3)
    np.testing.assert_array_equal(a, b)


def test_tripod_layout():
    sched = PulseSchedule({"P": gaussian(1.0, 0.0, 1.0), "S": gaussian(1.0, 0.0, 1.0),
                           "C": gaussian(1.0, 0.0, 1.0)})
    h = assemble_hamiltonian(tripod_scheme(), sched, 0.0)
    assert h.shape == (4, 4)
    mask = np.abs(h) > 0
    assert mask[0, 1] and mask[1, 2] and mask[1, 3]
    assert mask.sum() == 6
    only_p = PulseSchedule({"P": gaussian(1.0, 0.0, 1.0), "S": gaussian(0.0, 0.0, 1.0),
                            "C": gaussian(0.0, 0.0, 1.0)})
    h = assemble_hamiltonian(tripod_scheme(), only_p, 0.0)
    assert np.count_nonzero(h) == 2


def test_static_phase_and_scale():
    scheme = LevelScheme((Level(0), Level(1)), (Coupling(0, 1, "X", math.pi / 2, 3.0),))
    sched = PulseSchedule({"X": PulseShape("Constant", 2.0)})
    h = assemble_hamiltonian(scheme, sched, 0.0)
    assert h[0, 1] == pytest.approx(3j)
    assert h[1, 0] == pytest.approx(-3j)


def test_scheme_validation():
    with pytest.raises(ConfigurationError):
        Level(0, decay_rate=-1.0)
    with pytest.raises(NumericInputError):
        Level(0, detuning=float("inf"))
    with pytest.raises(ConfigurationError):
        Coupling(1, 1, "P")
    with pytest.raises(ConfigurationError):
        Coupling(2, 1, "P")
    with pytest.raises(ConfigurationError):
        LevelScheme((Level(0), Level(0)), ())
    with pytest.raises(ConfigurationError):
        LevelScheme((Level(0),), ())
    with pytest.raises(ConfigurationError):
        LevelScheme((Level(0), Level(1)), (Coupling(0, 2, "P"),))
    with pytest.raises(ConfigurationError):
        LevelScheme((Level(0), Level(1)), (Coupling(0, 1, "P"), Coupling(0, 1, "Q")))


def test_unknown_pulse_id_at_assembly():
    with pytest.raises(ConfigurationError):
        assemble_hamiltonian(lambda_scheme(), PulseSchedule({"P": gaussian(1, 0, 1)}), 0.0)


def test_scheme_dict_roundtrip():
    s = chain_scheme([0.0, 1.0, -0.5, 2.0], [0.0, 0.1, 0.0, 0.3], ["a", "b", "c"], [1, 2, 0.5])
    assert LevelScheme.from_dict(s.to_dict()) == s


def test_cavity_scheme_examples():
    g = 1.0
    scheme = cavity_lambda_scheme(g, 0.0, 0.0)
    sched = PulseSchedule({"D": PulseShape("Constant", 2.0), "cavity": cavity_vacuum_pulse(g)})
    h = assemble_hamiltonian(scheme, sched, 0.0)
    np.testing.assert_allclose(h, h.conj().T)
    # drive 2 and vacuum leg 2g map onto the pump/Stokes pair: eps = +-sqrt(8)/2
    ev = np.sort(np.linalg.eigvalsh(h))
    np.testing.assert_allclose(ev, [-math.sqrt(2), 0.0, math.sqrt(2)], atol=1e-12)
    # no drive: the zero-energy state is |e,0>
    sched0 = PulseSchedule({"D": PulseShape("Constant", 0.0), "cavity": cavity_vacuum_pulse(g)})
    vals, vecs = np.linalg.eigh(assemble_hamiltonian(scheme, sched0, 0.0))
    dark = vecs[:, np.argmin(np.abs(vals))]
    assert abs(dark[0]) == pytest.approx(1.0)
    lossy = assemble_hamiltonian(cavity_lambda_scheme(1.0, 0.2, 0.1), sched, 0.0)
    assert lossy[1, 1] == -0.1j and lossy[2, 2] == -0.2j


def test_rabi_from_dipole():
    assert rabi_from_dipole(0.0, 5.0) == 0
    assert rabi_from_dipole(1.0, 1.0) == -1.0
    assert rabi_from_dipole(-2.0, 3.0) == 6.0


@given(st.floats(-3, 3), st.floats(0, 2), st.floats(-2, 2), st.floats(-6, 6))
@settings(max_examples=40, deadline=None)
def test_kernel_hamiltonian_matches_assembly(Delta, gamma, phase, t):
    tt = np.linspace(-6, 6, 50)
    scheme = LevelScheme((Level(0), Level(1, Delta, gamma), Level(2, 0.1), Level(3, -0.4)),
                         (Coupling(0, 1, "P", 0.3), Coupling(1, 2, "S", 0.0, 2.0),
                          Coupling(1, 3, "N", -1.1, 0.5)))
    sched = PulseSchedule({
        "P": PulseShape("Sum", components=(gaussian(3.0, -1.0, 1.0, phase),
                                           PulseShape("SinSquared", 1.0, 0.5, 4.0))),
        "S": PulseShape("Square", 2.0, 0.0, 3.0, 0.2),
        "N": NumericPulse(tt, np.cos(tt) + 1j * np.sin(2 * tt)),
    })
    np.testing.assert_allclose(compiled_hamiltonian(scheme, sched, t),
                               assemble_hamiltonian(scheme, sched, t), atol=1e-13)
