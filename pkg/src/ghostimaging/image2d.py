"""Two-dimensional closed-form ghost images and 16-bit graymap output.

Every closed form has Gaussian kernels that factor over the two transverse
axes, so the 2D bucket integral is ``A_x (W |T|^2) A_y^T`` with 1D Gaussian
matrices ``A``.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import IntermediateRegime, InvalidParams
from .grid import TransverseGrid
from .imaging import DetectionSetup, preset_temporal, temporal_constants
from .propagation import fresnel_report
from .source_models import LOW_BRIGHTNESS_LIMIT, GaussianSchellParams, Preset, low_brightness_gain


def analytic_image_2d(
    preset,
    params: GaussianSchellParams,
    geom,
    transmittance: np.ndarray,
    grid: TransverseGrid,
    setup: DetectionSetup,
    regime=None,
):
    """``(background, image_term)`` on the square grid ``grid x grid``.

    ``transmittance`` is the complex amplitude mask with shape ``(n, n)``
    indexed ``[y, x]``.
    """
    preset = Preset(preset)
    T2 = np.abs(np.asarray(transmittance)) ** 2
    n = grid.n_points
    if T2.shape != (n, n):
        raise InvalidParams(f"2D mask must be {n}x{n}")
    if regime is None:
        if geom is None:
            regime = "near"
        else:
            report = fresnel_report(params, geom)
            regime = report.regime_pi if preset is Preset.THERMAL_MAX else report.regime_ps
    if regime == "intermediate":
        raise IntermediateRegime("closed-form images exist only in the near and far field")
    if regime == "near":
        a, rho = params.a0, params.rho0
    else:
        report = fresnel_report(params, geom)
        a, rho = report.aL, report.rhoL
    pi_t, ps_t = preset_temporal(preset, params)
    cn, cp = temporal_constants(pi_t, ps_t, setup)
    x = grid.x
    area = grid.spacing**2
    r2 = x[None, :] ** 2 + x[:, None] ** 2
    density = 2.0 * params.P / (np.pi * a**2)

    bucket = np.ones_like(T2)
    if setup.bucket_half_width is not None:
        bucket = (np.sqrt((x[None, :] - setup.bucket_center) ** 2 + x[:, None] ** 2) <= setup.bucket_half_width)
    weight = T2 * bucket * area
    auto = density * np.exp(-2.0 * r2 / a**2)
    background = setup.scale * auto * np.sum(auto * weight)

    quantum = preset is Preset.QUANTUM_PS_MAX and params.brightness < LOW_BRIGHTNESS_LIMIT
    if quantum:
        gain2 = low_brightness_gain(params) ** 2
        if regime == "near":
            A = np.exp(-2.0 * (x[:, None] - x[None, :]) ** 2 / rho**2)
            env = np.exp(-2.0 * r2 / a**2)
            amp = gain2 * cp * density**2
        else:
            A = np.exp(-((x[:, None] + x[None, :]) ** 2) / rho**2)
            env = np.exp(-r2 / a**2)
            amp = gain2 * cp * (params.P / (np.pi * a**2)) ** 2
    else:
        sign = 1.0 if (preset is not Preset.THERMAL_MAX and regime == "far") else -1.0
        A = np.exp(-((x[:, None] + sign * x[None, :]) ** 2) / rho**2)
        env = np.exp(-2.0 * r2 / a**2)
        amp = (cn if preset is Preset.THERMAL_MAX else cp) * density**2
    image = amp * env * (A @ (env * weight) @ A.T)
    return background, image


def mask_2d(spec: dict, grid: TransverseGrid, bitmap=None) -> np.ndarray:
    """Rasterize a mask description onto ``grid x grid`` (array indexed ``[y, x]``)."""
    x = grid.x
    X, Y = np.meshgrid(x, x)
    kind = spec["type"]
    if kind == "uniform":
        return np.ones_like(X)
    if kind == "point":
        out = np.zeros_like(X)
        out[grid.origin_index, grid.index_of(spec.get("position", 0.0))] = 1.0
        return out
    if kind in ("slit", "double_slit", "cells"):
        width = spec["width"]
        if kind == "slit":
            centers = [spec.get("center", 0.0)]
        elif kind == "double_slit":
            c, s = spec.get("center", 0.0), spec["separation"]
            centers = [c - s / 2, c + s / 2]
        else:
            centers = spec["centers"]
        out = np.zeros_like(X, dtype=bool)
        for c in centers:
            out |= (X - c >= -width / 2 - 1e-9 * grid.spacing) & (X - c < width / 2 - 1e-9 * grid.spacing)
        return out.astype(float)
    if kind == "gaussian":
        c = spec.get("center", 0.0)
        return np.exp(-((X - c) ** 2 + Y**2) / spec["radius"] ** 2)
    if kind == "bitmap":
        img = np.atleast_2d(bitmap)
        h, w = img.shape
        pitch = spec["pixel_pitch"]
        ix = np.floor(X / pitch + w / 2.0).astype(int)
        iy = np.floor(-Y / pitch + h / 2.0).astype(int)
        inside = (ix >= 0) & (ix < w) & (iy >= 0) & (iy < h)
        out = np.zeros_like(X)
        out[inside] = img[iy[inside], ix[inside]]
        return out
    raise InvalidParams(f"unknown mask type {kind!r}")


def write_pgm(path, image: np.ndarray) -> None:
    """Binary 16-bit graymap (P5, maxval 65535, big-endian), scaled so the maximum maps to 65535.

    Row 0 of the file is the top of the picture, i.e. the largest ``y``.
    """
    img = np.asarray(image, dtype=float)[::-1]
    peak = float(np.max(img))
    scaled = np.zeros_like(img) if peak <= 0 else np.clip(img / peak, 0.0, 1.0) * 65535.0
    data = np.rint(scaled).astype(">u2")
    h, w = data.shape
    with open(Path(path), "wb") as fh:
        fh.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        fh.write(data.tobytes())
