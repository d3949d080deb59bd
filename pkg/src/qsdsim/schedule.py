"""Alternating box-function measurement schedule.

The two system-environment couplings a(t) (z channel) and b(t) (x channel)
are box functions with common period T: a is active on [nT, nT + T/2) and b
on [nT + T/2, (n+1)T).  A boundary instant belongs to the interval it opens.
Measurement strengths are defined from amplitude and period as
M = amplitude^2 * T / 2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["MeasurementSchedule", "strength_to_amplitude", "coupling_at"]


def strength_to_amplitude(strength: float, period: float) -> float:
    """Amplitude giving measurement strength ``strength`` over a half-period."""
    if strength < 0:
        raise ValueError(f"strength must be >= 0, got {strength}")
    if period <= 0:
        raise ValueError(f"period must be > 0, got {period}")
    return float(np.sqrt(2.0 * strength / period))


@dataclass(frozen=True)
class MeasurementSchedule:
    """Box-function couplings: z window first, then x, repeating with period T."""

    period: float
    a_max: float
    b_max: float

    def __post_init__(self) -> None:
        if self.period <= 0:
            raise ValueError(f"period must be > 0, got {self.period}")
        if self.a_max < 0 or self.b_max < 0:
            raise ValueError("coupling amplitudes must be >= 0")

    @classmethod
    def from_strengths(cls, period: float, m_z: float, m_x: float) -> "MeasurementSchedule":
        return cls(
            period=period,
            a_max=strength_to_amplitude(m_z, period),
            b_max=strength_to_amplitude(m_x, period),
        )

    @property
    def strength_z(self) -> float:
        return self.a_max**2 * self.period / 2.0

    @property
    def strength_x(self) -> float:
        return self.b_max**2 * self.period / 2.0


def coupling_at(schedule: MeasurementSchedule, t: float) -> tuple[float, float]:
    """Couplings (a, b) at time t >= 0."""
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    phase = t - schedule.period * np.floor(t / schedule.period)
    if phase < schedule.period / 2.0:
        return (schedule.a_max, 0.0)
    return (0.0, schedule.b_max)
