"""Object transmittance masks sampled on a transverse grid."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .errors import ConfigError, InvalidParams
from .grid import TransverseGrid


@dataclass(frozen=True, eq=False)
class MaskSpec:
    """Sampled field transmittance ``T(x)`` with ``|T| <= 1``."""

    grid: TransverseGrid
    values: np.ndarray
    name: str = "custom"

    def __post_init__(self):
        values = np.array(self.values, dtype=complex)
        if values.shape != (self.grid.n_points,):
            raise InvalidParams(f"mask has {values.shape} samples, grid has {self.grid.n_points}")
        if np.max(np.abs(values), initial=0.0) > 1.0 + 1e-12:
            raise InvalidParams("mask transmittance magnitude exceeds 1")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def intensity(self) -> np.ndarray:
        """``|T(x)|^2``."""
        return np.abs(self.values) ** 2

    @property
    def effective_area(self) -> float:
        """``A_T = sum |T|^2 dx`` (a length for 1D masks)."""
        return float(np.sum(self.intensity) * self.grid.spacing)

    def mirrored(self) -> "MaskSpec":
        """``T(-x)``; exact because the grid is symmetric about index ``n//2``."""
        n = self.grid.n_points
        idx = (2 * (n // 2) - np.arange(n)) % n
        values = self.values[idx].copy()
        if n % 2 == 0:
            values[0] = 0.0  # -x_0 lies off the grid
        return MaskSpec(self.grid, values, f"{self.name} (mirrored)")


def empty_mask(grid: TransverseGrid) -> MaskSpec:
    return MaskSpec(grid, np.zeros(grid.n_points), "empty")


def uniform_mask(grid: TransverseGrid) -> MaskSpec:
    return MaskSpec(grid, np.ones(grid.n_points), "uniform")


def point_mask(grid: TransverseGrid, position: float = 0.0) -> MaskSpec:
    """Single open grid cell nearest ``position``."""
    values = np.zeros(grid.n_points)
    values[grid.index_of(position)] = 1.0
    return MaskSpec(grid, values, f"point@{position:g}")


def slit_mask(grid: TransverseGrid, width: float, center: float = 0.0) -> MaskSpec:
    """Binary slit; a cell is open when its centre lies within ``width / 2`` of ``center``."""
    return cells_mask(grid, [center], width, name=f"slit({width:g})@{center:g}")


def double_slit_mask(grid: TransverseGrid, width: float, separation: float, center: float = 0.0) -> MaskSpec:
    return cells_mask(
        grid, [center - separation / 2, center + separation / 2], width, name=f"double_slit({width:g},{separation:g})"
    )


def cells_mask(grid: TransverseGrid, centers: Iterable[float], width: float, name: str = "cells") -> MaskSpec:
    """Union of binary slits of equal ``width`` centred on ``centers``."""
    if not width > 0:
        raise InvalidParams("slit width must be positive")
    x = grid.x
    open_ = np.zeros(grid.n_points, dtype=bool)
    half = width / 2.0
    for c in centers:
        # half-open interval so a width of m cells opens exactly m cells
        open_ |= (x - c >= -half - 1e-9 * grid.spacing) & (x - c < half - 1e-9 * grid.spacing)
    return MaskSpec(grid, open_.astype(float), name)


def gaussian_mask(grid: TransverseGrid, radius: float, center: float = 0.0) -> MaskSpec:
    """Amplitude transmittance ``exp(-(x - c)^2 / radius^2)``."""
    return MaskSpec(grid, np.exp(-((grid.x - center) ** 2) / radius**2), f"gaussian({radius:g})@{center:g}")


def _read_tokens(data: bytes, count: int, start: int):
    """Read ``count`` whitespace-separated ASCII integers, skipping ``#`` comments."""
    tokens = []
    pos = start
    n = len(data)
    while len(tokens) < count and pos < n:
        c = data[pos : pos + 1]
        if c == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            end = pos
            while end < n and not data[end : end + 1].isspace() and data[end : end + 1] != b"#":
                end += 1
            tokens.append(int(data[pos:end]))
            pos = end
    if len(tokens) < count:
        raise ValueError("truncated image data")
    return tokens, pos


def load_bitmap(path) -> np.ndarray:
    """Read a transmittance bitmap as a 2D array of values in ``[0, 1]``.

    Supports netpbm P1/P4 (bitmaps, 1 = black = opaque), P2/P5 (graymaps,
    scaled by maxval) and plain text grids of numbers in ``[0, 1]``.
    """
    path = Path(path)
    data = path.read_bytes()
    magic = data[:2]
    try:
        if magic in (b"P1", b"P2", b"P4", b"P5"):
            nheader = 2 if magic in (b"P1", b"P4") else 3
            header, pos = _read_tokens(data, nheader, 2)
            width, height = header[0], header[1]
            if magic == b"P1":
                bits, _ = _read_tokens(data, width * height, pos)
                return 1.0 - np.array(bits, dtype=float).reshape(height, width)
            if magic == b"P4":
                pos += 1
                row_bytes = (width + 7) // 8
                raw = np.frombuffer(data[pos : pos + row_bytes * height], dtype=np.uint8).reshape(height, row_bytes)
                bits = np.unpackbits(raw, axis=1)[:, :width]
                return 1.0 - bits.astype(float)
            maxval = header[2]
            if magic == b"P2":
                vals, _ = _read_tokens(data, width * height, pos)
                return np.array(vals, dtype=float).reshape(height, width) / maxval
            pos += 1
            dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
            raw = np.frombuffer(data[pos : pos + dtype.itemsize * width * height], dtype=dtype)
            return raw.reshape(height, width).astype(float) / maxval
        arr = np.loadtxt(path, ndmin=2)
    except (ValueError, IndexError) as exc:
        raise ConfigError("mask.path", f"cannot parse bitmap {path}: {exc}") from exc
    if arr.min() < 0 or arr.max() > 1:
        raise ConfigError("mask.path", "text bitmap values must lie in [0, 1]")
    return arr.astype(float)


def bitmap_mask(grid: TransverseGrid, image: np.ndarray, pixel_pitch: float, row: Optional[int] = None) -> MaskSpec:
    """1D mask from one row (default: the middle row) of a 2D bitmap.

    The row is centred on the origin and sampled with nearest-neighbour lookup
    at ``pixel_pitch`` metres per pixel; positions off the bitmap are opaque.
    """
    image = np.asarray(image, dtype=float)
    if image.ndim == 1:
        line = image
    else:
        line = image[image.shape[0] // 2 if row is None else row]
    width = line.shape[0]
    idx = np.floor(grid.x / pixel_pitch + width / 2.0).astype(int)
    inside = (idx >= 0) & (idx < width)
    values = np.zeros(grid.n_points)
    values[inside] = line[idx[inside]]
    return MaskSpec(grid, np.clip(values, 0.0, 1.0), "bitmap")
