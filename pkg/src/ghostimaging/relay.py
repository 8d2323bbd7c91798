"""Ghost imaging with the bucket detector a distance ``L_R`` behind the object.

The signal arm is relayed onto the pinhole plane by a thin lens
(``1/d1 + 1/d2 = 1/f``), so the pinhole at ``x1`` sees the source-plane field
at ``M x1``.  The bucket-plane cross-correlation is the Fresnel transform of
the masked object-plane correlation,

    |K'(x1, x2)| = |M| sqrt(k0 / 2 pi L_R) |sum_x' exp(-i k0 (2 x2 x' - x'^2) / 2 L_R) K(M x1, x') T(x') dx'|

and the image integrates ``|K'|^2`` over the bucket.  The bucket-plane grid is
the FFT-reciprocal grid of the object grid, ``dx2 = 2 pi L_R / (k0 N dx)``, so
discrete Parseval holds exactly: a bucket covering the whole grid gives
``C'(x1) = M^2 C(M x1)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import InvalidParams, SamplingTooCoarse
from .grid import TransverseGrid, require_same_grid
from .imaging import DetectionSetup, ImageScan
from .masks import MaskSpec
from .source_models import CorrelationKernel, Flavor

LARGE_BUCKET_FACTOR = 8.0


@dataclass(frozen=True)
class RelayConfig:
    """Object-to-bucket distance ``L_R`` and thin-lens relay ``d1``, ``d2``, ``f`` (all metres)."""

    L_R: float
    d1: float
    d2: float
    f: float

    def __post_init__(self):
        for name in ("L_R", "d1", "d2", "f"):
            if not getattr(self, name) > 0:
                raise InvalidParams(f"{name} must be positive")
        lhs = 1.0 / self.d1 + 1.0 / self.d2
        if abs(lhs - 1.0 / self.f) > 1e-9 * (1.0 / self.f):
            raise InvalidParams(f"lens law violated: 1/d1 + 1/d2 = {lhs:.12g}, 1/f = {1 / self.f:.12g}")

    @classmethod
    def from_magnification(cls, L_R: float, f: float, magnification: float) -> "RelayConfig":
        """Relay with ``M = -d2/d1`` (``magnification`` must be negative)."""
        if not magnification < 0:
            raise InvalidParams("a single thin lens relay has negative magnification")
        m = -magnification
        return cls(L_R, f * (1 + m) / m, f * (1 + m), f)

    @property
    def magnification(self) -> float:
        return -self.d2 / self.d1

    @property
    def compensating_delay_length(self) -> float:
        """Path difference ``L_R - d1 - d2`` removed by the post-detection delay."""
        return self.L_R - self.d1 - self.d2


def bucket_grid(object_grid: TransverseGrid, config: RelayConfig, k0: float, pad: int = 2) -> TransverseGrid:
    n = pad * object_grid.n_points
    return TransverseGrid(n, 2 * np.pi * config.L_R / (k0 * n * object_grid.spacing))


def _check_chirp(object_grid: TransverseGrid, config: RelayConfig, k0: float) -> None:
    chirp = k0 * object_grid.spacing**2 / (2 * config.L_R)
    if chirp > np.pi / 4:
        raise SamplingTooCoarse(f"Fresnel chirp k0 dx^2 / 2 L_R = {chirp:.3g} exceeds pi/4")


def _fresnel_rows(rows: np.ndarray, object_grid: TransverseGrid, config: RelayConfig, k0: float, pad: int):
    """``sqrt(k0 / 2 pi L_R) sum_x' exp(-i k0 (2 x2 x' - x'^2) / 2 L_R) rows(x') dx'`` on the bucket grid."""
    n = object_grid.n_points
    npad = pad * n
    x = object_grid.x
    chirp = np.exp(1j * k0 * x**2 / (2 * config.L_R))
    buf = np.zeros((rows.shape[0], npad), dtype=complex)
    lo = npad // 2 - n // 2
    buf[:, lo : lo + n] = rows * chirp
    spec = np.fft.fftshift(np.fft.fft(np.fft.ifftshift(buf, axes=1), axis=1), axes=1)
    return np.sqrt(k0 / (2 * np.pi * config.L_R)) * object_grid.spacing * spec


def relay_detection_correlation(
    object_kernel: CorrelationKernel,
    mask: MaskSpec,
    config: RelayConfig,
    k0: float,
    pad: int = 2,
):
    """``|K'(x1, x2)|`` for pinholes at ``x1 = x / M`` (one per object-grid point).

    Returns ``(magnitude, pinhole_positions, bucket_grid)``; row ``i`` of the
    magnitude belongs to ``pinhole_positions[i] = object_grid.x[i] / M``.
    """
    grid = require_same_grid(object_kernel.grid, mask.grid)
    _check_chirp(grid, config, k0)
    m = config.magnification
    rows = object_kernel.values * mask.values[None, :]
    values = abs(m) * np.abs(_fresnel_rows(rows, grid, config, k0, pad))
    return values, grid.x / m, bucket_grid(grid, config, k0, pad)


def bucket_plane_intensity(
    auto_kernel: CorrelationKernel, mask: MaskSpec, config: RelayConfig, k0: float, pad: int = 2
) -> np.ndarray:
    """Mean photon-flux density ``K22'(x2, x2)`` of the masked signal field at the bucket plane."""
    grid = require_same_grid(auto_kernel.grid, mask.grid)
    _check_chirp(grid, config, k0)
    masked = np.conj(mask.values)[:, None] * auto_kernel.values * mask.values[None, :]
    # F B F^H diagonal: transform columns, then rows of the conjugate
    half = _fresnel_rows(masked, grid, config, k0, pad)  # B F^T, rows indexed by x
    full = _fresnel_rows(np.conj(half).T, grid, config, k0, pad)  # conj(F) B^H F^T
    return np.real(np.diag(np.conj(full)))


def _e2_radius_rms(x: np.ndarray, intensity: np.ndarray) -> float:
    w = np.clip(intensity, 0.0, None)
    total = w.sum()
    if not total > 0:
        return 0.0
    mean = np.sum(w * x) / total
    return 2.0 * float(np.sqrt(np.sum(w * (x - mean) ** 2) / total))


def relay_image(
    auto_kernel: CorrelationKernel,
    mask: MaskSpec,
    config: RelayConfig,
    k0: float,
    setup: DetectionSetup,
    constants,
    pi_cross: Optional[CorrelationKernel] = None,
    ps_cross: Optional[CorrelationKernel] = None,
    bucket_half_width: Union[float, str, None] = "large",
    pad: int = 2,
) -> ImageScan:
    """Ghost image through the relay, scanned at ``x1 = x / M`` and returned in ascending order.

    ``bucket_half_width="large"`` uses ``8 x`` the rms-derived e^-2 radius of
    the bucket-plane intensity (capped at the bucket grid); ``None`` uses the
    whole bucket grid.  Object-plane kernels are source-plane kernels
    propagated to the object; ``setup`` supplies ``q``, ``eta``, ``A1``.
    """
    grid = require_same_grid(auto_kernel.grid, mask.grid)
    cn, cp = constants
    m = config.magnification
    bgrid = bucket_grid(grid, config, k0, pad)
    x2 = bgrid.x
    intensity = bucket_plane_intensity(auto_kernel, mask, config, k0, pad)
    if bucket_half_width == "large":
        bucket_half_width = LARGE_BUCKET_FACTOR * _e2_radius_rms(x2, intensity)
        bucket_half_width = min(bucket_half_width, bgrid.half_width) or None
    if bucket_half_width is None:
        bucket = np.ones(bgrid.n_points)
    else:
        bucket = (np.abs(x2) <= float(bucket_half_width)).astype(float)
    weight = bucket * bgrid.spacing

    def term(kernel, constant, flavor):
        if kernel is None or constant == 0.0:
            return np.zeros(grid.n_points)
        if kernel.flavor is not flavor:
            raise InvalidParams(f"expected a {flavor.value} kernel")
        mag, _, _ = relay_detection_correlation(kernel, mask, config, k0, pad)
        return constant * (mag**2 @ weight)

    pi_term = term(pi_cross, cn, Flavor.PHASE_INSENSITIVE)
    ps_term = term(ps_cross, cp, Flavor.PHASE_SENSITIVE)
    bucket_flux = float(np.sum(intensity * weight))
    c0 = setup.scale * m**2 * auto_kernel.diagonal * bucket_flux
    positions = grid.x / m
    order = np.argsort(positions)
    return ImageScan(
        positions=positions[order],
        background=c0[order],
        pi_term=pi_term[order],
        ps_term=ps_term[order],
        Cn=cn,
        Cp=cp,
        meta={
            "magnification": m,
            "bucket_half_width": None if bucket_half_width is None else float(bucket_half_width),
            "bucket_grid_half_width": bgrid.half_width,
        },
    )
