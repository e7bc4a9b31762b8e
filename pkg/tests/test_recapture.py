import math

import pytest
from hypothesis import given, strategies as st

from ionfountain.constants import CA40, HBAR, OMEGA_Z
from ionfountain.dynamics import ESCAPED, MAX_TIME, PULSE_OFF, IonState
from ionfountain.fields import default_stack
from ionfountain.recapture import LOST, RECAPTURED, RecaptureCriterion, classify, residual_energy, trap_depth


def state(z, v):
    return IonState(6.3e-6, z, v)


@pytest.mark.parametrize("z,v,verdict", [
    (50e-6, 30.0, RECAPTURED),
    (150e-6, 0.0, LOST),
    (100e-6, 50.0, RECAPTURED),
    (-100e-6, -50.0, RECAPTURED),
    (0.0, 50.0001, LOST),
    (-100.01e-6, 0.0, LOST),
])
def test_box_verdicts(z, v, verdict):
    assert classify(state(z, v)).verdict == verdict


@pytest.mark.parametrize("reason", [ESCAPED, MAX_TIME, "numerical-blowup"])
def test_only_pulse_off_can_recapture(reason):
    o = classify(state(0.0, 0.0), reason=reason)
    assert o.verdict == LOST and o.reason == reason


def test_residual_energy_at_rest():
    assert residual_energy(state(0.0, 0.0)) == (0.0, 0.0)


def test_residual_energy_kinetic():
    e, n = residual_energy(state(0.0, 50.0), CA40, OMEGA_Z)
    assert e == pytest.approx(0.5 * CA40.mass * 2500.0)
    assert e == pytest.approx(8.30e-23, rel=2e-3)
    assert n == pytest.approx(e / (HBAR * 2 * math.pi * 147e3))
    assert n == pytest.approx(8.5e5, rel=1e-2)


def test_residual_energy_potential():
    e, _ = residual_energy(state(100e-6, 0.0))
    assert e == pytest.approx(2.83e-22, rel=2e-3)


def test_residual_energy_rejects_bad_omega():
    with pytest.raises(ValueError):
        residual_energy(state(0, 0), CA40, 0.0)


def test_outcome_reports_energy():
    o = classify(state(50e-6, 30.0))
    assert o.recaptured
    assert o.energy == pytest.approx(residual_energy(state(50e-6, 30.0))[0])
    assert o.reason == PULSE_OFF


def test_criterion_validation():
    with pytest.raises(ValueError):
        RecaptureCriterion(0.0, 50.0)
    with pytest.raises(ValueError):
        RecaptureCriterion(mode="fuzzy")


@given(
    z=st.floats(-300e-6, 300e-6), v=st.floats(-150.0, 150.0),
    d=st.floats(1e-6, 300e-6), s=st.floats(1.0, 150.0),
    fd=st.floats(0.1, 1.0), fs=st.floats(0.1, 1.0),
)
def test_shrinking_bounds_is_monotone(z, v, d, s, fd, fs):
    wide = classify(state(z, v), RecaptureCriterion(d, s))
    narrow = classify(state(z, v), RecaptureCriterion(d * fd, s * fs))
    assert not (narrow.recaptured and not wide.recaptured)


def test_trap_depth_of_static_well():
    depth, z_min = trap_depth(default_stack(), {"seg6": -0.6})
    assert abs(z_min) < 5e-6
    assert 0.0 < depth <= 0.6


def test_energy_mode():
    crit = RecaptureCriterion(mode="energy")
    stack, volts = default_stack(), {"seg6": -0.6}
    depth, _ = trap_depth(stack, volts)
    v_edge = math.sqrt(2 * CA40.charge * depth / CA40.mass)
    # far outside the instantaneous box yet bound in the restored well
    slow = classify(state(0.0, 0.5 * v_edge), crit, stack=stack, voltages=volts)
    assert slow.recaptured and 0.5 * v_edge > 50.0
    fast = classify(state(0.0, 1.01 * v_edge), crit, stack=stack, voltages=volts)
    assert not fast.recaptured
    with pytest.raises(ValueError):
        classify(state(0, 0), crit)
