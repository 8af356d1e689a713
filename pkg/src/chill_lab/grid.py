"""Uniform one-dimensional grid shared by the operator and PDE modules."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BC_MODES = ("reflect", "onesided")


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid on [-L, L] with N points.

    ``bc='reflect'`` mirrors values across the end points (u_x = u_xxx = 0);
    ``bc='onesided'`` switches to one-sided stencils at the edges.
    """
    L: float
    N: int
    bc: str = "reflect"

    def __post_init__(self):
        if self.N < 64:
            raise ValueError(f"grid needs at least 64 points, got {self.N}")
        if self.L <= 0:
            raise ValueError("half-width L must be positive")
        if self.bc not in BC_MODES:
            raise ValueError(f"bc must be one of {BC_MODES}")

    @property
    def dx(self) -> float:
        return 2.0 * self.L / (self.N - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(-self.L, self.L, self.N)

    def refined(self) -> "Grid1D":
        """Same interval with half the spacing."""
        return Grid1D(self.L, 2 * self.N - 1, self.bc)

    @classmethod
    def with_spacing(cls, L: float, dx: float, bc: str = "reflect") -> "Grid1D":
        return cls(L, int(round(2 * L / dx)) + 1, bc)
