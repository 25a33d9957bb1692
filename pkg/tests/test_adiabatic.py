import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stirap_lab.adiabatic import (adiabatic_frame, adiabaticity_report, dark_overlap,
                                  dark_state_vectors, dressed_states, eigenvalues,
                                  global_adiabaticity, hamiltonian_dark_residual,
                                  local_adiabaticity, mixing_angles, theta_rate)
from stirap_lab.errors import UndefinedAngleError, UnsupportedAnalysisError
from stirap_lab.linkage import lambda_scheme, tripod_scheme
from stirap_lab.pulses import NumericPulse, PulseSchedule, PulseShape, gaussian, pulse_pair


def _h(p, s, Delta, delta=0.0):
    return np.array([[0, p / 2, 0], [p / 2, Delta, s / 2], [0, s / 2, delta]], float)


def test_mixing_angle_examples():
    assert mixing_angles(0.0, 1.0, 0.0)[0] == 0.0
    assert mixing_angles(1.0, 1.0, 0.0)[0] == pytest.approx(math.pi / 4)
    assert mixing_angles(0.3, 2.0, 0.0)[1] == pytest.approx(math.pi / 4)
    with pytest.raises(UndefinedAngleError):
        mixing_angles(0.0, 0.0, 1.0)


def test_eigenvalue_examples():
    ep, e0, em = eigenvalues(2.0, 2.0, 0.0)
    assert (ep, e0, em) == pytest.approx((math.sqrt(2), 0.0, -math.sqrt(2)))
    assert eigenvalues(0.0, 0.0, 1.5) == (1.5, 0.0, 0.0)
    rms = 4.0
    assert eigenvalues(rms, 0.0, 3.0) == pytest.approx((4.0, 0.0, -1.0))


def test_dark_state_examples():
    np.testing.assert_allclose(dressed_states(0.0, 1.0, 0.0)[1], [1, 0, 0], atol=1e-16)
    np.testing.assert_allclose(dressed_states(1.0, 0.0, 0.0)[1], [0, 0, -1], atol=1e-16)
    r = 1 / math.sqrt(2)
    np.testing.assert_allclose(dressed_states(1.0, 1.0, 0.0)[1], [r, 0, -r])


@given(st.floats(0.01, 100), st.floats(0.01, 100), st.floats(-50, 50))
@settings(max_examples=200, deadline=None)
def test_frame_against_eigensolve(p, s, Delta):
    frame = adiabatic_frame(p, s, Delta)
    h = _h(p, s, Delta)
    num = np.sort(np.linalg.eigvalsh(h))[::-1]
    ana = np.array([frame.eps_plus, frame.eps_zero, frame.eps_minus])
    scale = np.abs(h).max()
    np.testing.assert_allclose(ana, num, atol=1e-12 * scale)
    for vec, eps in ((frame.Phi_plus, frame.eps_plus), (frame.Phi_0, 0.0),
                     (frame.Phi_minus, frame.eps_minus)):
        assert np.linalg.norm(h @ vec - eps * vec) <= 1e-12 * scale
    basis = np.stack([frame.Phi_plus, frame.Phi_0, frame.Phi_minus])
    np.testing.assert_allclose(basis @ basis.T, np.eye(3), atol=1e-12)
    assert frame.Phi_0[1] == 0.0


def test_frame_off_two_photon_resonance():
    frame = adiabatic_frame(1.0, 2.0, 0.5, delta=0.3)
    h = _h(1.0, 2.0, 0.5, 0.3)
    for vec, eps in ((frame.Phi_plus, frame.eps_plus), (frame.Phi_0, frame.eps_zero),
                     (frame.Phi_minus, frame.eps_minus)):
        np.testing.assert_allclose(h @ vec, eps * vec, atol=1e-12)
        assert vec[np.argmax(np.abs(vec))] > 0
    assert frame.eps_plus >= frame.eps_zero >= frame.eps_minus


def test_dark_overlap_examples():
    frame = adiabatic_frame(1.0, 1.0, 0.0)
    assert dark_overlap(frame.Phi_0, frame) == pytest.approx(1.0)
    assert dark_overlap([0, 1, 0], frame) == 0.0
    assert dark_overlap(np.array([1, 0, 1]) / math.sqrt(2), frame) == pytest.approx(0.0,
                                                                                    abs=1e-16)


def _rotating_pair(A=5.0, c=0.8, t0=-1.0, t1=3.0, n=4001):
    t = np.linspace(t0, t1, n)
    return PulseSchedule({"P": NumericPulse(t, A * np.sin(c * t + 1.0)),
                          "S": NumericPulse(t, A * np.cos(c * t + 1.0))})


def test_local_ratio_constant_for_rotating_pair():
    A, c = 5.0, 0.8
    sched = _rotating_pair(A, c)
    t = np.linspace(-0.5, 0.5, 21)
    np.testing.assert_allclose(theta_rate(lambda_scheme(), sched, t), c, rtol=1e-9)
    np.testing.assert_allclose(local_adiabaticity(sched, lambda_scheme(), t), A / c, rtol=1e-9)


def test_local_ratio_infinite_without_pump():
    sched = PulseSchedule({"P": gaussian(0.0, 0.0, 1.0), "S": gaussian(1.0, 0.0, 1.0)})
    ratio = local_adiabaticity(sched, lambda_scheme(), np.linspace(-3, 3, 13))
    assert np.all(np.isinf(ratio))


def test_theta_rate_methods_agree():
    P, S = pulse_pair(50.0, 50.0, 1.0, 1.1)
    sched = PulseSchedule({"P": P, "S": S})
    t = np.linspace(-2.5, 2.5, 51)
    a = theta_rate(lambda_scheme(), sched, t)
    d = theta_rate(lambda_scheme(), sched, t, method="difference")
    np.testing.assert_allclose(a, d, atol=1e-7)
    ratio = local_adiabaticity(sched, lambda_scheme(), t)
    assert ratio.min() > 10


def test_global_area_examples():
    omega, T = 3.0, 4.0
    half = omega / math.sqrt(2)
    const = PulseSchedule({"P": PulseShape("Square", half, 0.0, T),
                           "S": PulseShape("Square", half, 0.0, T)})
    res = global_adiabaticity(const, lambda_scheme(), -3.0, 3.0, samples=60001)
    assert res.area == pytest.approx(omega * T, rel=1e-3)
    P, S = pulse_pair(50.0, 50.0, 1.0, 1.0)
    assert global_adiabaticity(PulseSchedule({"P": P, "S": S}), lambda_scheme()).area > 10
    P, S = pulse_pair(50.0, 50.0, 1.0, 40.0)
    with pytest.warns(RuntimeWarning):
        res = global_adiabaticity(PulseSchedule({"P": P, "S": S}), lambda_scheme(), -30, 30)
    assert res.empty and res.area == 0


def test_dark_state_vectors_nan_when_dark():
    sched = PulseSchedule({"P": gaussian(1.0, 0.0, 0.1), "S": gaussian(1.0, 0.0, 0.1)})
    vecs = dark_state_vectors(lambda_scheme(), sched, np.array([0.0, 50.0]))
    assert np.all(np.isfinite(vecs[0]))
    assert np.all(np.isnan(vecs[1]))


def test_report_columns_and_residual():
    P, S = pulse_pair(50.0, 50.0, 1.0, 1.1)
    sched = PulseSchedule({"P": P, "S": S})
    t = np.linspace(-3, 3, 101)
    rep = adiabaticity_report(lambda_scheme(), sched, t)
    assert set(rep) >= {"t", "theta", "phi", "eps_plus", "eps_minus", "ratio"}
    assert rep["theta"][0] < 0.1 and rep["theta"][-1] > math.pi / 2 - 0.1
    res = [hamiltonian_dark_residual(lambda_scheme(), sched, x) for x in t[1:-1]]
    assert max(res) < 1e-12


def test_non_lambda_scheme_rejected():
    sched = PulseSchedule({"P": gaussian(1, 0, 1), "S": gaussian(1, 0, 1),
                           "C": gaussian(1, 0, 1)})
    with pytest.raises(UnsupportedAnalysisError):
        theta_rate(tripod_scheme(), sched, 0.0)
