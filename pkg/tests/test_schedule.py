import numpy as np
import pytest

from qsdsim.schedule import MeasurementSchedule, coupling_at, strength_to_amplitude


def test_amplitude_from_strength():
    assert strength_to_amplitude(1.0, 2.0) == 1.0
    assert strength_to_amplitude(32.0, 2.0) == np.sqrt(32.0)
    assert strength_to_amplitude(0.0, 5.0) == 0.0


def test_strength_round_trip():
    for m, t in [(0.125, 2.0), (8.0, 0.5), (32.0, 2.0)]:
        sched = MeasurementSchedule.from_strengths(t, m, m / 2)
        assert abs(sched.strength_z - m) <= 1e-12 * m
        assert abs(sched.strength_x - m / 2) <= 1e-12 * m


def test_coupling_boxes():
    sched = MeasurementSchedule(period=2.0, a_max=3.0, b_max=0.5)
    assert coupling_at(sched, 0.0) == (3.0, 0.0)
    assert coupling_at(sched, 0.999) == (3.0, 0.0)
    assert coupling_at(sched, 1.0) == (0.0, 0.5)  # boundary opens the x window
    assert coupling_at(sched, 1.999) == (0.0, 0.5)
    assert coupling_at(sched, 2.0) == (3.0, 0.0)  # periodic
    assert coupling_at(sched, 3.0) == (0.0, 0.5)  # t = 3T/2


def test_invalid():
    with pytest.raises(ValueError):
        MeasurementSchedule(period=0.0, a_max=1.0, b_max=1.0)
    with pytest.raises(ValueError):
        MeasurementSchedule(period=1.0, a_max=-1.0, b_max=1.0)
    with pytest.raises(ValueError):
        strength_to_amplitude(-1.0, 1.0)
    with pytest.raises(ValueError):
        coupling_at(MeasurementSchedule(1.0, 1.0, 1.0), -0.1)
