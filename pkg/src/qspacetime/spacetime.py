"""Space-time coordinate labels shared by the swapping timelines and the radar simulator."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True, order=True)
class SpacetimeLabel:
    """Three spatial coordinates and a time coordinate, with c = 1."""

    x1: float = 0.0
    x2: float = 0.0
    x3: float = 0.0
    x4: float = 0.0

    def __post_init__(self):
        for name in ("x1", "x2", "x3", "x4"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v}")
            object.__setattr__(self, name, v)

    @property
    def t(self) -> float:
        return self.x4

    @property
    def spatial(self) -> tuple[float, float, float]:
        return (self.x1, self.x2, self.x3)

    @classmethod
    def at(cls, position, t: float) -> "SpacetimeLabel":
        """Label from a 1-, 2- or 3-component position and a time."""
        pos = [float(p) for p in position] + [0.0] * (3 - len(position))
        return cls(pos[0], pos[1], pos[2], t)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x1, self.x2, self.x3, self.x4)
