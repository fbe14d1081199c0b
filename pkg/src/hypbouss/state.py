"""The coupled (velocity surrogate, temperature) state and its product norm."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import RadialField, RadialGrid, lp_norm

__all__ = ["StateVector", "product_norm"]


@dataclass
class StateVector:
    """Pair (u, theta): radial velocity surrogate and temperature."""

    u: RadialField
    theta: RadialField

    def __post_init__(self):
        if self.u.grid is not self.theta.grid:
            raise ValueError("state slots must share one grid")

    @property
    def grid(self) -> RadialGrid:
        return self.u.grid

    @classmethod
    def zeros(cls, grid: RadialGrid) -> "StateVector":
        return cls(RadialField.zeros(grid), RadialField.zeros(grid))

    def copy(self) -> "StateVector":
        return StateVector(self.u.copy(), self.theta.copy())

    def __add__(self, other: "StateVector") -> "StateVector":
        return StateVector(self.u + other.u, self.theta + other.theta)

    def __sub__(self, other: "StateVector") -> "StateVector":
        return StateVector(self.u - other.u, self.theta - other.theta)

    def __mul__(self, a) -> "StateVector":
        return StateVector(self.u * float(a), self.theta * float(a))

    __rmul__ = __mul__


def product_norm(s: StateVector, p) -> float:
    """max of the slot Lp norms (the product-space norm used throughout)."""
    return max(lp_norm(s.u, p), lp_norm(s.theta, p))
