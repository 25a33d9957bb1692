import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stirap_lab.errors import ConfigurationError, NumericInputError, OrderingError
from stirap_lab.pulses import (NumericPulse, PulseSchedule, PulseShape, composite_sequence,
                               counterdiabatic, counterintuitive_pair, five_point_derivative,
                               fractional_pair, gaussian, mixing_angle, pulse_from_dict,
                               pulse_pair, theta_rate)


def test_gaussian_values():
    g = gaussian(1.0, 0.0, 1.0)
    assert g.evaluate(0.0) == pytest.approx(1.0)
    assert g.evaluate(1.0) == pytest.approx(math.exp(-1.0), rel=1e-15)
    assert g.evaluate(1.0) == pytest.approx(0.36787944117144233)


def test_constant_with_phase_pi_is_negative():
    c = PulseShape("Constant", 2.0, phase=math.pi)
    for t in (-3.0, 0.0, 17.5):
        assert complex(c.evaluate(t)) == pytest.approx(-2.0, abs=1e-15)


def test_other_kinds():
    s = PulseShape("SinSquared", 3.0, 1.0, 2.0)
    assert s.evaluate(1.0) == pytest.approx(3.0)
    assert s.evaluate(0.0) == pytest.approx(0.0, abs=1e-15)
    assert s.evaluate(2.5) == 0
    sq = PulseShape("Square", 1.5, 0.0, 2.0)
    assert sq.evaluate(0.9) == pytest.approx(1.5)
    assert sq.evaluate(1.1) == 0


def test_invalid_pulses_rejected():
    with pytest.raises(ConfigurationError):
        PulseShape("Lorentzian", 1.0)
    with pytest.raises(ConfigurationError):
        PulseShape("Gaussian", -1.0)
    with pytest.raises(NumericInputError):
        PulseShape("Gaussian", float("nan"))
    with pytest.raises(ConfigurationError):
        PulseShape("Sum")


@given(st.floats(-5, 5), st.floats(0.2, 3), st.floats(-4, 4))
@settings(max_examples=60, deadline=None)
def test_gaussian_rate_matches_difference(center, width, t):
    g = gaussian(2.0, center, width, phase=0.3)
    fd = five_point_derivative(g.evaluate, t, 1e-4)
    assert complex(g.rate(t)) == pytest.approx(complex(fd), abs=1e-8)


def test_sum_phase_and_components():
    a, b = gaussian(1.0, -1.0, 1.0), gaussian(2.0, 1.0, 1.0)
    s = PulseShape("Sum", components=(a, b), phase=math.pi / 2)
    t = np.linspace(-3, 3, 7)
    np.testing.assert_allclose(s.evaluate(t), 1j * (a.evaluate(t) + b.evaluate(t)), atol=1e-15)


def test_pulse_pair_order():
    P, S = pulse_pair(1.0, 1.0, 1.0, 2.0)
    assert S.center < P.center
    P, S = counterintuitive_pair(1.0, 1.0, 1.0, 2.0, intuitive=True)
    assert P.center < S.center
    with pytest.raises(OrderingError):
        counterintuitive_pair(1.0, 1.0, 1.0, -1.0)


def test_mixing_angle_examples():
    P, S = pulse_pair(1.0, 1.0, 1.0, 2.0)
    assert mixing_angle(P, S, 0.0) == pytest.approx(math.pi / 4)
    P, S = pulse_pair(1.0, 1.0, 1.0, 0.0)
    np.testing.assert_allclose(mixing_angle(P, S, np.linspace(-3, 3, 11)), math.pi / 4)
    P, S = pulse_pair(0.0, 1.0, 1.0, 2.0)
    np.testing.assert_array_equal(mixing_angle(P, S, np.linspace(-3, 3, 11)), 0.0)


def test_fractional_pair_limits():
    P, S = fractional_pair(1.0, 1.0, 2.0, math.pi / 2)
    P0, S0 = counterintuitive_pair(1.0, 1.0, 1.0, 2.0)
    assert P == P0 and S == S0
    P, S = fractional_pair(1.0, 1.0, 2.0, math.pi / 4)
    late = 5.0
    assert abs(P.evaluate(late)) / abs(S.evaluate(late)) == pytest.approx(1.0, rel=1e-6)
    with pytest.raises(ConfigurationError):
        fractional_pair(1.0, 1.0, 2.0, 0.0)


def test_numeric_pulse_spline():
    t = np.linspace(-3, 3, 401)
    g = gaussian(1.0, 0.0, 1.0)
    n = NumericPulse(t, g.evaluate(t))
    x = np.linspace(-2.5, 2.5, 37)
    np.testing.assert_allclose(n.evaluate(x), g.evaluate(x), atol=1e-7)
    np.testing.assert_allclose(n.rate(x), g.rate(x), atol=1e-5)
    assert n.evaluate(3.5) == 0
    assert n.integral().real == pytest.approx(math.sqrt(math.pi), abs=1e-4)
    assert n.support() == (-3.0, 3.0)
    with pytest.raises(ConfigurationError):
        NumericPulse([0, 1, 2], [0, 1, 0])
    with pytest.raises(ConfigurationError):
        NumericPulse([0, 2, 1, 3], [0, 1, 0, 1])
    with pytest.raises(NumericInputError):
        NumericPulse([0, 1, 2, 3], [0, np.inf, 0, 1])


def test_numeric_pulse_csv_roundtrip(tmp_path):
    t = np.linspace(0, 1, 9)
    n = NumericPulse(t, np.exp(1j * t) * t)
    path = tmp_path / "p.csv"
    n.to_csv(path)
    back = NumericPulse.from_csv(path)
    np.testing.assert_array_equal(back.times, n.times)
    np.testing.assert_array_equal(back.values, n.values)


def test_schedule_dict_roundtrip():
    t = np.linspace(0, 2, 6)
    sched = PulseSchedule({
        "P": gaussian(3.0, 1.0, 0.5, 0.2),
        "S": PulseShape("Sum", components=(gaussian(1.0, 0.0, 1.0), gaussian(2.0, 2.0, 1.0))),
        "N": NumericPulse(t, t ** 2 + 0.5j),
    }, time_origin=0.5)
    assert PulseSchedule.from_dict(sched.to_dict()) == sched


def test_pulse_from_dict_errors_name_path():
    with pytest.raises(ConfigurationError, match="pulses.entries.P"):
        pulse_from_dict({"kind": "Gaussian", "peak": "x"}, "pulses.entries.P")


def test_mirrored_schedule_is_conjugated_reflection():
    sched = PulseSchedule({"P": gaussian(1.0, 1.0, 1.0, 0.4)})
    m = sched.mirrored(-2.0, 6.0)
    for t in (-1.0, 0.5, 3.0):
        assert complex(m.evaluate("P", t)) == pytest.approx(
            np.conj(complex(sched.evaluate("P", 4.0 - t))))


def test_counterdiabatic_rotating_pair():
    # theta = c t exactly, so the pulse magnitude is the constant 2c
    A, c = 3.0, 0.7
    t = np.linspace(0.0, 2.0, 801)
    P = NumericPulse(t, A * np.sin(c * t))
    S = NumericPulse(t, A * np.cos(c * t))
    cd = counterdiabatic(P, S, 0.1, 1.9, samples=201)
    x = np.linspace(0.2, 1.8, 9)
    np.testing.assert_allclose(np.abs(cd.evaluate(x)), 2 * c, rtol=1e-6)
    np.testing.assert_allclose(np.angle(cd.evaluate(x)), math.pi / 2, atol=1e-12)


def test_counterdiabatic_zero_pump():
    P, S = pulse_pair(0.0, 1.0, 1.0, 1.0)
    cd = counterdiabatic(P, S)
    assert np.max(np.abs(cd.values)) == 0


def test_counterdiabatic_gaussian_peak_matches_difference():
    P, S = pulse_pair(2.0, 2.0, 1.0, 1.1)
    cd = counterdiabatic(P, S)
    t = np.linspace(-3, 3, 6001)
    fd = five_point_derivative(lambda x: mixing_angle(P, S, x), t, 1e-5)
    assert np.max(np.abs(cd.evaluate(t))) == pytest.approx(2 * np.max(np.abs(fd)), rel=1e-6)


def test_theta_rate_analytic_vs_difference():
    P, S = pulse_pair(50.0, 50.0, 1.0, 1.1)
    t = np.linspace(-2, 2, 41)
    analytic = theta_rate(P, S, t)
    fd = five_point_derivative(lambda x: mixing_angle(P, S, x), t, 1e-5)
    np.testing.assert_allclose(analytic, fd, atol=1e-8)


def test_composite_sequence_layout():
    sched = composite_sequence(1.0, 1.0, 1.0, 1.1, [(0, 0), (0.5, 0), (0, 0)])
    P = sched["P"]
    assert len(P.components) == 3
    assert P.components[1].phase == 0.5
    centers_P = [c.center for c in P.components]
    centers_S = [c.center for c in sched["S"].components]
    assert centers_S[0] < centers_P[0]
    assert centers_P[1] < centers_S[1]
    with pytest.raises(ConfigurationError):
        composite_sequence(1.0, 1.0, 1.0, 1.1, [(0, 0), (0, 0)], spacing=1.0)
