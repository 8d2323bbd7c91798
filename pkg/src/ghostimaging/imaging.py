"""Ghost-image formation from detection-plane correlations.

The photocurrent cross-correlation at pinhole position ``x1`` is

    C(x1) = C0(x1) + Cn sum_x |Kn(x1, x)|^2 |T(x)|^2 dx + Cp sum_x |Kp(x1, x)|^2 |T(x)|^2 dx

with the sum running over the bucket aperture.  ``C0`` is the product of
the mean photocurrents; ``Cn`` and ``Cp`` collect the temporal factors.  All
spatial quantities are 1D (per transverse dimension).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    BrightnessRegimeAmbiguous,
    GhostImagingError,
    IntermediateRegime,
    InvalidParams,
    NoPeak,
    RegionTooLarge,
)
from .grid import TransverseGrid, require_same_grid
from .masks import MaskSpec
from .propagation import (
    PropagationGeometry,
    fresnel_report,
    propagate_pi,
    propagate_ps,
)
from .source_models import (
    HIGH_BRIGHTNESS_LIMIT,
    LOW_BRIGHTNESS_LIMIT,
    CorrelationKernel,
    Flavor,
    GaussianSchellParams,
    Preset,
    SourceState,
    TemporalCorrelation,
    low_brightness_gain,
)

CONTRAST_REGION_FRACTION = 0.25


@dataclass(frozen=True)
class DetectionSetup:
    """Detector and correlator parameters.

    ``filter_width`` is the e^-2 duration ``Td`` of the Gaussian baseband
    filter.  ``pinhole_area`` is a length for 1D scans.  The bucket collects
    light over ``|x - bucket_center| <= bucket_half_width`` (whole grid when
    ``None``).
    """

    filter_width: float
    quantum_efficiency: float = 1.0
    pinhole_area: float = 1.0
    charge: float = 1.0
    bucket_half_width: Optional[float] = None
    bucket_center: float = 0.0

    def __post_init__(self):
        if not self.filter_width > 0:
            raise InvalidParams("filter width Td must be positive")
        if not 0 < self.quantum_efficiency <= 1:
            raise InvalidParams("quantum efficiency must lie in (0, 1]")
        if not self.pinhole_area > 0:
            raise InvalidParams("pinhole area must be positive")
        if self.bucket_half_width is not None and not self.bucket_half_width > 0:
            raise InvalidParams("bucket half width must be positive")

    @property
    def scale(self) -> float:
        """``q^2 eta^2 A1``."""
        return self.charge**2 * self.quantum_efficiency**2 * self.pinhole_area

    def bucket_indicator(self, grid: TransverseGrid) -> np.ndarray:
        if self.bucket_half_width is None:
            return np.ones(grid.n_points)
        return (np.abs(grid.x - self.bucket_center) <= self.bucket_half_width * (1 + 1e-12)).astype(float)


@dataclass(frozen=True, eq=False)
class ImageScan:
    """Ghost image sampled at the pinhole ``positions``; ``total = background + pi_term + ps_term``."""

    positions: np.ndarray
    background: np.ndarray
    pi_term: np.ndarray
    ps_term: np.ndarray
    Cn: float = 0.0
    Cp: float = 0.0
    stderr: Optional[np.ndarray] = None
    ac_coupled: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def total(self) -> np.ndarray:
        return self.background + self.pi_term + self.ps_term

    @property
    def image_term(self) -> np.ndarray:
        return self.pi_term + self.ps_term

    @property
    def grid(self) -> TransverseGrid:
        pos = np.asarray(self.positions)
        return TransverseGrid(len(pos), float(pos[1] - pos[0]))


@dataclass(frozen=True)
class ContrastReport:
    contrast: float
    spatial: float
    temporal: float
    kind: str
    approximated: bool = False

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class PSFMeasurement:
    e2_radius: float
    peak_position: float
    envelope_radius: Optional[float] = None

    def as_dict(self) -> dict:
        return dict(self.__dict__)


# --------------------------------------------------------------------------- temporal factors


def filter_response(t, filter_width: float):
    """Gaussian baseband impulse response ``sqrt(8 / (pi Td^2)) exp(-8 t^2 / Td^2)`` (unit area)."""
    t = np.asarray(t, dtype=float)
    return np.sqrt(8.0 / (np.pi * filter_width**2)) * np.exp(-8.0 * t**2 / filter_width**2)


def temporal_factor(temporal: TemporalCorrelation, filter_width: float) -> float:
    """``[|R|^2 * hB(t) * hB(-t)]_{t=0}`` in closed form: ``1 / sqrt(1 + Td^2 / (4 w^2))``."""
    return 1.0 / np.sqrt(1.0 + filter_width**2 / (4.0 * temporal.width**2))


def temporal_factor_numeric(temporal: TemporalCorrelation, filter_width: float, samples_per_width: int = 32) -> float:
    """Same quantity by discrete convolution of sampled ``hB`` and ``|R|^2``."""
    w, td = temporal.width, filter_width
    step = min(w, td) / samples_per_width
    half = 3.0 * td + 6.0 * w
    n = 2 * int(np.ceil(half / step)) + 1
    if n > 2**22:
        raise InvalidParams("filter width and coherence time differ by too much for numeric convolution")
    t = (np.arange(n) - n // 2) * step
    h = filter_response(t, td)
    m = 2 * n
    spec = np.fft.rfft(h, m)
    # autocorrelation A(tau) = sum_t h(t) h(t + tau) dt
    acorr = np.fft.irfft(spec * np.conj(spec), m) * step
    acorr = np.concatenate([acorr[-(n // 2) :], acorr[: n // 2 + 1]])
    r2 = np.abs(temporal(t)) ** 2
    return float(np.sum(r2 * acorr) * step)


def temporal_constants(
    pi_cross: Optional[TemporalCorrelation],
    ps_cross: Optional[TemporalCorrelation],
    setup: DetectionSetup,
    numeric: bool = False,
):
    """``(Cn, Cp) = q^2 eta^2 A1 [|R|^2 * hB * hB(-t)]_{t=0}``; an absent correlation gives 0."""
    factor = temporal_factor_numeric if numeric else temporal_factor
    cn = setup.scale * factor(pi_cross, setup.filter_width) if pi_cross is not None else 0.0
    cp = setup.scale * factor(ps_cross, setup.filter_width) if ps_cross is not None else 0.0
    return cn, cp


def source_constants(state: SourceState, setup: DetectionSetup, numeric: bool = False):
    return temporal_constants(state.temporal.get("pi_cross"), state.temporal.get("ps_cross"), setup, numeric)


# --------------------------------------------------------------------------- image formation


def _mask_weight(mask: MaskSpec, setup: DetectionSetup) -> np.ndarray:
    return mask.intensity * setup.bucket_indicator(mask.grid) * mask.grid.spacing


def background(
    auto_kernel: CorrelationKernel,
    mask: MaskSpec,
    setup: DetectionSetup,
    bucket_auto_kernel: Optional[CorrelationKernel] = None,
) -> np.ndarray:
    """``C0(x1) = q^2 eta^2 A1 K11(x1, x1) sum K22(x, x) |T(x)|^2 dx``.

    Temporal autocorrelations are normalized (``R(0) = 1``) and the filter has
    unit area, so neither enters.  ``bucket_auto_kernel`` defaults to ``auto_kernel``.
    """
    bucket_auto_kernel = auto_kernel if bucket_auto_kernel is None else bucket_auto_kernel
    require_same_grid(bucket_auto_kernel.grid, mask.grid)
    if auto_kernel.flavor is not Flavor.PHASE_INSENSITIVE:
        raise InvalidParams("background needs phase-insensitive auto-correlations")
    bucket_flux = float(np.sum(bucket_auto_kernel.diagonal * _mask_weight(mask, setup)))
    return setup.scale * auto_kernel.diagonal * bucket_flux


def _image_term(kernel: Optional[CorrelationKernel], weight: np.ndarray, constant: float, n: int) -> np.ndarray:
    if kernel is None or constant == 0.0:
        return np.zeros(n)
    return constant * (np.abs(kernel.values) ** 2 @ weight)


def ghost_image(
    auto_kernel: CorrelationKernel,
    mask: MaskSpec,
    setup: DetectionSetup,
    constants,
    pi_cross: Optional[CorrelationKernel] = None,
    ps_cross: Optional[CorrelationKernel] = None,
    ac_coupled: bool = False,
) -> ImageScan:
    """Ghost image from detection-plane kernels; rows of each kernel index the pinhole position.

    ``constants`` is ``(Cn, Cp)``.  With ``ac_coupled`` the correlator measures
    the cross-covariance and the background is reported as zero.
    """
    kernels = [k for k in (auto_kernel, pi_cross, ps_cross) if k is not None]
    require_same_grid(mask.grid, *(k.grid for k in kernels))
    if pi_cross is not None and pi_cross.flavor is not Flavor.PHASE_INSENSITIVE:
        raise InvalidParams("pi_cross must be a phase-insensitive kernel")
    if ps_cross is not None and ps_cross.flavor is not Flavor.PHASE_SENSITIVE:
        raise InvalidParams("ps_cross must be a phase-sensitive kernel")
    cn, cp = constants
    n = mask.grid.n_points
    weight = _mask_weight(mask, setup)
    c0 = np.zeros(n) if ac_coupled else background(auto_kernel, mask, setup)
    return ImageScan(
        positions=mask.grid.x,
        background=c0,
        pi_term=_image_term(pi_cross, weight, cn, n),
        ps_term=_image_term(ps_cross, weight, cp, n),
        Cn=cn,
        Cp=cp,
        ac_coupled=ac_coupled,
    )


def numeric_image(
    state: SourceState,
    geom: Optional[PropagationGeometry],
    mask: MaskSpec,
    setup: DetectionSetup,
    ac_coupled: bool = False,
    numeric_constants: bool = False,
) -> ImageScan:
    """Propagate every source kernel onto the mask grid and form the ghost image.

    ``geom=None`` images directly in the source plane.
    """
    def prop(kernel):
        if kernel is None or geom is None:
            if kernel is not None:
                require_same_grid(kernel.grid, mask.grid)
            return kernel
        if kernel.flavor is Flavor.PHASE_INSENSITIVE:
            return propagate_pi(kernel, geom, out_grid=mask.grid)
        return propagate_ps(kernel, geom, out_grid=mask.grid)

    auto = prop(state.auto_kernel)
    pi = auto if state.pi_cross is state.auto_kernel else prop(state.pi_cross)
    ps = prop(state.ps_cross)
    constants = source_constants(state, setup, numeric_constants)
    return ghost_image(auto, mask, setup, constants, pi, ps, ac_coupled)


# --------------------------------------------------------------------------- closed forms


def preset_temporal(preset: Preset, params: GaussianSchellParams):
    """``(pi_cross, ps_cross)`` temporal correlations of a canonical preset."""
    preset = Preset(preset)
    if preset is Preset.THERMAL_MAX:
        return TemporalCorrelation(params.T0, "pi_cross"), None
    if preset is Preset.CLASSICAL_PS_MAX:
        return None, TemporalCorrelation(params.T0, "ps_cross")
    b = params.brightness
    if b < LOW_BRIGHTNESS_LIMIT:
        return None, TemporalCorrelation(params.T0 / np.sqrt(2.0), "ps_cross")
    if b > HIGH_BRIGHTNESS_LIMIT:
        return None, TemporalCorrelation(params.T0, "ps_cross")
    raise BrightnessRegimeAmbiguous(f"brightness {b:.3g} lies between the low- and high-brightness limits")


def _image_regime(preset: Preset, params, geom) -> str:
    if geom is None:
        return "near"
    report = fresnel_report(params, geom)
    return report.regime_pi if preset is Preset.THERMAL_MAX else report.regime_ps


def analytic_image(
    preset,
    params: GaussianSchellParams,
    geom: Optional[PropagationGeometry],
    mask: MaskSpec,
    setup: DetectionSetup,
    regime: Optional[str] = None,
    ac_coupled: bool = False,
) -> ImageScan:
    """Closed-form near- or far-field ghost image of a canonical preset (1D).

    The regime follows from the Fresnel numbers unless given explicitly;
    ``geom=None`` means the source plane.  Bucket integrals are midpoint sums
    on the mask grid.
    """
    preset = Preset(preset)
    regime = regime or _image_regime(preset, params, geom)
    if regime == "intermediate":
        raise IntermediateRegime("closed-form images exist only in the near and far field")
    if regime not in ("near", "far"):
        raise InvalidParams(f"unknown regime {regime!r}")
    if regime == "far" and geom is None:
        raise InvalidParams("far-field images need a propagation geometry")

    pi_t, ps_t = preset_temporal(preset, params)
    cn, cp = temporal_constants(pi_t, ps_t, setup)
    x1 = mask.grid.x[:, None]
    x = mask.grid.x[None, :]
    weight = _mask_weight(mask, setup)

    if regime == "near":
        a, rho = params.a0, params.rho0
    else:
        report = fresnel_report(params, geom)
        a, rho = report.aL, report.rhoL
    density = 2.0 * params.P / (np.pi * a**2)  # 1D: (sqrt of the areal density)^2
    auto_diag = np.sqrt(density) * np.exp(-2.0 * mask.grid.x**2 / a**2)
    c0 = np.zeros(mask.grid.n_points) if ac_coupled else setup.scale * auto_diag * np.sum(auto_diag * weight)

    quantum_low = preset is Preset.QUANTUM_PS_MAX and params.brightness < LOW_BRIGHTNESS_LIMIT
    if quantum_low:
        gain2 = low_brightness_gain(params) ** 2
        if regime == "near":
            psf = np.exp(-2.0 * (x1 - x) ** 2 / rho**2)
            envelope = np.exp(-2.0 * (x1**2 + x**2) / a**2)
            term = gain2 * cp * density * (envelope * psf) @ weight
        else:
            psf = np.exp(-((x1 + x) ** 2) / rho**2)
            envelope = np.exp(-(x1**2 + x**2) / a**2)
            term = gain2 * cp * (params.P / (np.pi * a**2)) * (envelope * psf) @ weight
        pi_term, ps_term = np.zeros_like(term), term
    else:
        sign = -1.0 if (preset is Preset.THERMAL_MAX or regime == "near") else 1.0
        psf = np.exp(-((x1 + sign * x) ** 2) / rho**2)
        envelope = np.exp(-2.0 * (x1**2 + x**2) / a**2)
        term = density * (envelope * psf) @ weight
        if preset is Preset.THERMAL_MAX:
            pi_term, ps_term = cn * term, np.zeros_like(term)
        else:
            pi_term, ps_term = np.zeros_like(term), cp * term
    return ImageScan(
        positions=mask.grid.x,
        background=c0,
        pi_term=pi_term,
        ps_term=ps_term,
        Cn=cn,
        Cp=cp,
        ac_coupled=ac_coupled,
        meta={"regime": regime, "preset": preset.value},
    )


# --------------------------------------------------------------------------- measurements


def _refine_peak(x: np.ndarray, y: np.ndarray, i: int) -> float:
    """Vertex of the parabola through the log of the three samples around ``i``."""
    if 0 < i < len(y) - 1 and np.all(y[i - 1 : i + 2] > 0):
        l0, l1, l2 = np.log(y[i - 1 : i + 2])
        denom = l0 - 2 * l1 + l2
        if denom < 0:
            return float(x[i] + 0.5 * (x[1] - x[0]) * (l0 - l2) / denom)
    return float(x[i])


def _crossing(x: np.ndarray, y: np.ndarray, i: int, level: float, step: int) -> float:
    j = i
    while 0 <= j + step < len(y) and y[j + step] >= level:
        j += step
    k = j + step
    if not 0 <= k < len(y):
        raise NoPeak("image never falls to the e^-2 level inside the scan")
    ya, yb = y[j], y[k]
    if yb > 0:
        frac = (np.log(ya) - np.log(level)) / (np.log(ya) - np.log(yb))
    else:
        frac = (ya - level) / (ya - yb)
    return float(x[j] + frac * (x[k] - x[j]))


def e2_radius(x: np.ndarray, y: np.ndarray):
    """``(radius, peak_position)`` of a single-peaked profile at the ``e^-2`` level.

    Crossings are interpolated log-linearly and the two half-widths averaged.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if y.size == 0 or not np.max(y) > 0:
        raise NoPeak("image term is identically zero")
    i = int(np.argmax(y))
    peak = _refine_peak(x, y, i)
    level = y[i] * np.exp(-2.0)
    right = _crossing(x, y, i, level, +1)
    left = _crossing(x, y, i, level, -1)
    return 0.5 * (right - left), peak


def measure_psf(image: ImageScan, envelope_image: Optional[ImageScan] = None) -> PSFMeasurement:
    """PSF e^-2 radius and peak position from the image-bearing terms of a point-mask scan.

    ``envelope_image`` (a scan of a fully open mask) yields the field of view:
    its image term is the product of two identical envelope factors, so the
    envelope e^-2 radius is ``sqrt(2)`` times the measured one.
    """
    radius, peak = e2_radius(image.positions, image.image_term)
    envelope = None
    if envelope_image is not None:
        envelope = np.sqrt(2.0) * e2_radius(envelope_image.positions, envelope_image.image_term)[0]
    return PSFMeasurement(radius, peak, envelope)


def _region(positions: np.ndarray, params: GaussianSchellParams, half_width: Optional[float]) -> np.ndarray:
    limit = CONTRAST_REGION_FRACTION * params.a0
    half_width = limit if half_width is None else half_width
    if half_width > limit * (1 + 1e-12):
        raise RegionTooLarge(f"observation region half width {half_width:.4g} m exceeds a0/4 = {limit:.4g} m")
    return np.abs(positions) < half_width


def contrast(
    image: ImageScan,
    params: GaussianSchellParams,
    setup: DetectionSetup,
    region_half_width: Optional[float] = None,
) -> ContrastReport:
    """``(max_R C - min_R C) / C0(0)`` over ``R = {|x1| < region_half_width}`` (default ``a0/4``).

    The temporal factor is ``Cn / q^2 eta^2 A1`` (or ``Cp`` for phase-sensitive
    images) and the spatial factor is the ratio.
    """
    if image.ac_coupled:
        raise InvalidParams("contrast needs the background; rerun without AC coupling")
    positions = np.asarray(image.positions)
    inside = _region(positions, params, region_half_width)
    total = image.total[inside]
    c00 = float(np.interp(0.0, positions, image.background))
    if not c00 > 0:
        raise GhostImagingError("background at the origin is zero; contrast undefined")
    value = (float(np.max(total)) - float(np.min(total))) / c00
    if np.any(image.pi_term != 0) or image.Cp == 0:
        ct = image.Cn / setup.scale
    else:
        ct = image.Cp / setup.scale
    kind = image.meta.get("preset", "numeric")
    return ContrastReport(value, value / ct, ct, kind)


def contrast_closed_form(
    preset,
    params: GaussianSchellParams,
    mask: MaskSpec,
    setup: DetectionSetup,
    region_half_width: Optional[float] = None,
    binary_approximation: bool = False,
) -> ContrastReport:
    """Near-field contrast from the point-spread-degraded image of ``|T|^2``.

    Classical presets: ``Cs = (max I_c - min I_c) / A_T`` with
    ``I_c = |T|^2 * exp(-x^2 / rho0^2)``.  Low-brightness quantum preset:
    ``Cs = gain^2 (max I_q - min I_q) / A_T`` with ``I_q = |T|^2 * exp(-2 x^2 / rho0^2)``.
    ``binary_approximation`` replaces the classical spatial factor by ``rho0 / A_T``
    (the 1D form of the resolution-cell count estimate).
    """
    preset = Preset(preset)
    pi_t, ps_t = preset_temporal(preset, params)
    temporal = pi_t if pi_t is not None else ps_t
    ct = temporal_factor(temporal, setup.filter_width)
    area = mask.effective_area
    if not area > 0:
        raise InvalidParams("mask is opaque; contrast undefined")
    quantum = preset is Preset.QUANTUM_PS_MAX and params.brightness < LOW_BRIGHTNESS_LIMIT
    if binary_approximation:
        if quantum:
            raise InvalidParams("the binary-mask approximation is provided for classical presets only")
        cs = params.rho0 / area
        return ContrastReport(cs * ct, cs, ct, preset.value, approximated=True)

    x = mask.grid.x
    inside = _region(x, params, region_half_width)
    weight = _mask_weight(mask, setup)
    open_idx = np.nonzero(weight)[0]
    coeff = 2.0 if quantum else 1.0
    # I(x1) on the observation region only; chunked to bound memory
    values = np.empty(int(inside.sum()))
    rows = x[inside]
    for start in range(0, len(rows), 512):
        block = rows[start : start + 512, None]
        values[start : start + 512] = np.exp(-coeff * (block - x[open_idx]) ** 2 / params.rho0**2) @ weight[open_idx]
    cs = (values.max() - values.min()) / area
    if quantum:
        cs *= low_brightness_gain(params) ** 2
    return ContrastReport(cs * ct, cs, ct, preset.value)
