"""Validated parameter containers shared by every engine in the package.

Units: hbar = 1 throughout, so every frequency doubles as an energy.  The
atomic level energies are -omega1, -omega2, +omega3 with omega3 implied by
the zero-mean convention, which is why only omega1 and omega2 appear here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


def _require_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class SystemParams:
    """Static model parameters: two lower-level frequencies, two cavity mode
    frequencies, and the two transition-mode coupling strengths."""

    omega1: float = 0.5
    omega2: float = 0.25
    Omega1: float = 1.25
    Omega2: float = 1.0
    g1: float = 0.05
    g2: float = 0.05

    def __post_init__(self):
        for name in ("omega1", "omega2", "Omega1", "Omega2", "g1", "g2"):
            object.__setattr__(self, name, _require_finite(name, getattr(self, name)))
        if self.Omega1 <= 0:
            raise ValueError(f"Omega1 > 0 required, got {self.Omega1}")
        if self.Omega2 <= 0:
            raise ValueError(f"Omega2 > 0 required, got {self.Omega2}")
        if self.g1 < 0:
            raise ValueError(f"g1 >= 0 required, got {self.g1}")
        if self.g2 < 0:
            raise ValueError(f"g2 >= 0 required, got {self.g2}")

    def replace(self, **kwargs) -> "SystemParams":
        fields = dict(
            omega1=self.omega1, omega2=self.omega2,
            Omega1=self.Omega1, Omega2=self.Omega2,
            g1=self.g1, g2=self.g2,
        )
        fields.update(kwargs)
        return SystemParams(**fields)


@dataclass(frozen=True)
class DriveParams:
    """Sinusoidal modulation of the upper-lower-2 level pair.

    theta = amplitude / frequency is always derived, never stored, so the
    three quantities can never fall out of sync.
    """

    amplitude: float
    frequency: float

    def __post_init__(self):
        object.__setattr__(self, "amplitude", _require_finite("amplitude", self.amplitude))
        object.__setattr__(self, "frequency", _require_finite("frequency", self.frequency))
        if self.amplitude < 0:
            raise ValueError(f"drive amplitude >= 0 required, got {self.amplitude}")
        if self.frequency <= 0:
            raise ValueError(f"drive frequency > 0 required, got {self.frequency}")

    @property
    def theta(self) -> float:
        return self.amplitude / self.frequency

    @classmethod
    def from_theta(cls, theta: float, frequency: float) -> "DriveParams":
        return cls(amplitude=theta * frequency, frequency=frequency)
