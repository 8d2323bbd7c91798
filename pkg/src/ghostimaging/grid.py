"""Uniform sampling grids shared by all modules."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridMismatch, InvalidParams


@dataclass(frozen=True)
class TransverseGrid:
    """Uniform 1D grid with positions ``(i - n//2) * spacing``.

    The sample at index ``n//2`` sits exactly at the origin, which keeps the
    FFT centring (``ifftshift``) and the mirror map ``x -> -x`` exact.
    """

    n_points: int
    spacing: float

    def __post_init__(self):
        if int(self.n_points) < 2:
            raise InvalidParams(f"grid needs at least 2 points, got {self.n_points}")
        if not self.spacing > 0:
            raise InvalidParams(f"grid spacing must be > 0, got {self.spacing}")
        object.__setattr__(self, "n_points", int(self.n_points))
        object.__setattr__(self, "spacing", float(self.spacing))

    @classmethod
    def covering(cls, half_width: float, spacing: float) -> "TransverseGrid":
        """Smallest even-sized grid with the given spacing spanning ``[-half_width, half_width]``."""
        n = 2 * int(np.ceil(half_width / spacing)) + 2
        return cls(n, spacing)

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.n_points) - self.n_points // 2) * self.spacing

    @property
    def extent(self) -> float:
        return self.n_points * self.spacing

    @property
    def half_width(self) -> float:
        return float(np.max(np.abs(self.x)))

    @property
    def origin_index(self) -> int:
        return self.n_points // 2

    def index_of(self, position: float) -> int:
        """Index of the grid point nearest to ``position``."""
        return int(np.clip(np.rint(position / self.spacing) + self.n_points // 2, 0, self.n_points - 1))

    def same_as(self, other: "TransverseGrid", rtol: float = 1e-12) -> bool:
        return self.n_points == other.n_points and abs(self.spacing - other.spacing) <= rtol * self.spacing


TimeGrid = TransverseGrid


def require_same_grid(*grids: TransverseGrid) -> TransverseGrid:
    first = grids[0]
    for g in grids[1:]:
        if not first.same_as(g):
            raise GridMismatch(f"grids differ: {first} vs {g}")
    return first


def default_time_grid(coherence_time: float) -> TimeGrid:
    """Time grid of extent 8*T0 and step T0/8 (64 samples)."""
    return TimeGrid(64, coherence_time / 8.0)
