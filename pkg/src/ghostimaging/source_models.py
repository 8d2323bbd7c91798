"""Second-moment models of jointly Gaussian signal/reference sources.

The numeric kernels are one-dimensional: a transverse correlation is an
``N x N`` matrix ``K[i, j] = K(x_i, x_j)``.  A 1D Gaussian-Schell kernel carries
the per-dimension flux factor ``sqrt(2P / (pi a0^2))`` so that the product of
two transverse factors recovers the areal density ``2P / (pi a0^2)``.

Brightness-dependent quantities (correlation spectra, the classical and
quantum bounds, the low-brightness amplitude gain) are always computed for
the full two-transverse-dimension plus time state, because the quantum bound
depends on the absolute photon number per mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .errors import (
    BrightnessRegimeAmbiguous,
    GhostImagingError,
    GridMismatch,
    InvalidParams,
    NonPositiveSpectrum,
    NotLowBrightness,
    SamplingTooCoarse,
)
from .grid import TimeGrid, TransverseGrid, default_time_grid

LOW_BRIGHTNESS_LIMIT = 0.1
HIGH_BRIGHTNESS_LIMIT = 10.0
CLASSIFICATION_RTOL = 1e-9


class Flavor(str, Enum):
    PHASE_INSENSITIVE = "phase_insensitive"
    PHASE_SENSITIVE = "phase_sensitive"


class Classification(str, Enum):
    CLASSICAL_PI = "ClassicalPI"
    CLASSICAL_PS = "ClassicalPS"
    NONCLASSICAL_PS = "NonclassicalPS"
    INVALID = "Invalid"


class Preset(str, Enum):
    THERMAL_MAX = "thermal_max"
    CLASSICAL_PS_MAX = "classical_ps_max"
    QUANTUM_PS_MAX = "quantum_ps_max"


@dataclass(frozen=True)
class GaussianSchellParams:
    """Photon flux ``P`` [1/s], intensity radius ``a0`` [m], coherence radius ``rho0`` [m], coherence time ``T0`` [s]."""

    P: float
    a0: float
    rho0: float
    T0: float
    low_coherence_threshold: float = 0.2

    def __post_init__(self):
        for name in ("P", "a0", "rho0", "T0"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise InvalidParams(f"{name} must be a positive finite number, got {value}")

    @property
    def brightness(self) -> float:
        """Dimensionless source brightness ``P T0 rho0^2 / a0^2``."""
        return self.P * self.T0 * self.rho0**2 / self.a0**2

    @property
    def is_low_coherence(self) -> bool:
        return self.rho0 / self.a0 < self.low_coherence_threshold

    @property
    def flux_density(self) -> float:
        """Peak areal photon-flux density ``2P / (pi a0^2)``."""
        return 2.0 * self.P / (np.pi * self.a0**2)


@dataclass(frozen=True)
class TemporalCorrelation:
    """Gaussian temporal correlation ``R(tau) = exp(-tau^2 / (2 width^2))``, so ``R(0) = 1``."""

    width: float
    flavor: str = "pi_auto"
    form: str = "gaussian"

    def __post_init__(self):
        if not self.width > 0:
            raise InvalidParams(f"temporal width must be > 0, got {self.width}")
        if self.form != "gaussian":
            raise InvalidParams(f"unsupported temporal form {self.form!r}")
        if self.flavor not in ("pi_auto", "pi_cross", "ps_cross"):
            raise InvalidParams(f"unknown temporal flavor {self.flavor!r}")

    def __call__(self, tau):
        tau = np.asarray(tau, dtype=float)
        return np.exp(-(tau**2) / (2.0 * self.width**2))


@dataclass(frozen=True, eq=False)
class CorrelationKernel:
    """Sampled two-point spatial correlation ``K(x1, x2)`` on a single grid."""

    grid: TransverseGrid
    values: np.ndarray
    flavor: Flavor

    def __post_init__(self):
        values = np.array(self.values, dtype=complex)
        n = self.grid.n_points
        if values.shape != (n, n):
            raise GridMismatch(f"kernel shape {values.shape} does not match grid of {n} points")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "flavor", Flavor(self.flavor))

    @property
    def diagonal(self) -> np.ndarray:
        return np.real(np.diag(self.values)).copy()

    def scaled(self, factor: float) -> "CorrelationKernel":
        return CorrelationKernel(self.grid, self.values * factor, self.flavor)

    def with_flavor(self, flavor: Flavor) -> "CorrelationKernel":
        return CorrelationKernel(self.grid, self.values, flavor)

    def check(self, rtol: float = 1e-10, check_psd: bool = True) -> None:
        """Raise ``InvalidParams`` if the kernel breaks its flavor's structural invariants."""
        K = self.values
        scale = float(np.max(np.abs(K))) or 1.0
        if self.flavor is Flavor.PHASE_INSENSITIVE:
            asym = float(np.max(np.abs(K - K.conj().T)))
            if asym > rtol * scale:
                raise InvalidParams(f"phase-insensitive kernel is not Hermitian (deviation {asym:.3g})")
            if np.min(self.diagonal) < -rtol * scale:
                raise InvalidParams("phase-insensitive kernel has a negative diagonal")
            if check_psd:
                eig = np.linalg.eigvalsh(0.5 * (K + K.conj().T))
                if eig[0] < -rtol * max(eig[-1], 0.0):
                    raise InvalidParams(f"phase-insensitive kernel is not PSD (min eigenvalue {eig[0]:.3g})")
        else:
            asym = float(np.max(np.abs(K - K.T)))
            if asym > rtol * scale:
                raise InvalidParams(f"phase-sensitive kernel is not symmetric (deviation {asym:.3g})")


@dataclass(frozen=True, eq=False)
class CorrelationSpectrum:
    """Space-time correlation spectrum sampled on sorted ``(k, omega)`` grids."""

    k: np.ndarray
    omega: np.ndarray
    values: np.ndarray

    def same_grid(self, other: "CorrelationSpectrum") -> bool:
        return (
            self.values.shape == other.values.shape
            and np.allclose(self.k, other.k, rtol=1e-12, atol=0)
            and np.allclose(self.omega, other.omega, rtol=1e-12, atol=0)
        )


@dataclass(frozen=True, eq=False)
class SourceState:
    """Full second-moment description of the signal/reference pair plus its classification.

    Signal and reference share ``auto_kernel``; phase-sensitive auto-correlations
    are identically zero.  ``temporal`` maps ``"auto"``, ``"pi_cross"`` and
    ``"ps_cross"`` to the corresponding temporal factor (absent entries mean the
    cross-correlation is zero).
    """

    auto_kernel: CorrelationKernel
    pi_cross: Optional[CorrelationKernel]
    ps_cross: Optional[CorrelationKernel]
    temporal: dict
    classification: Classification
    spectra: dict = field(default_factory=dict)
    params: Optional[GaussianSchellParams] = None
    preset: Optional[Preset] = None
    amplitude_gain: float = 1.0
    notes: tuple = ()

    @property
    def grid(self) -> TransverseGrid:
        return self.auto_kernel.grid


def _check_sampling(grid: TransverseGrid, coherence_radius: float) -> None:
    if grid.spacing > coherence_radius / 4.0 * (1 + 1e-12):
        raise SamplingTooCoarse(
            f"grid spacing {grid.spacing:.4g} m exceeds coherence radius / 4 = {coherence_radius / 4:.4g} m"
        )


def gaussian_schell_value(params: GaussianSchellParams, r1, r2, dims: int = 2, coherence_factor: float = 2.0):
    """Closed-form Gaussian-Schell correlation at point pairs.

    ``r1`` and ``r2`` are arrays whose last axis has length ``dims`` (or plain
    arrays when ``dims == 1``).  The coherence term is
    ``exp(-|r2 - r1|^2 / (coherence_factor * rho0^2))``; the source model uses
    ``coherence_factor = 2``.
    """
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    if dims == 1:
        s1, s2, d = r1**2, r2**2, (r2 - r1) ** 2
    else:
        s1 = np.sum(r1**2, axis=-1)
        s2 = np.sum(r2**2, axis=-1)
        d = np.sum((r2 - r1) ** 2, axis=-1)
    amplitude = params.flux_density ** (dims / 2.0)
    return amplitude * np.exp(-(s1 + s2) / params.a0**2 - d / (coherence_factor * params.rho0**2))


def make_gaussian_schell_kernel(
    params: GaussianSchellParams, grid: TransverseGrid, flavor: Flavor = Flavor.PHASE_INSENSITIVE
) -> CorrelationKernel:
    """Sample the 1D Gaussian-Schell kernel on ``grid``.

    Raises ``SamplingTooCoarse`` when the grid spacing exceeds ``rho0 / 4``.
    """
    _check_sampling(grid, params.rho0)
    x = grid.x
    values = gaussian_schell_value(params, x[:, None], x[None, :], dims=1)
    kernel = CorrelationKernel(grid, values, flavor)
    if kernel.flavor is Flavor.PHASE_INSENSITIVE:
        kernel.check()
    return kernel


def low_brightness_gain(params: GaussianSchellParams) -> float:
    """Amplitude gain ``(2/pi)^(1/4) sqrt(a0^2 / (P T0 rho0^2))`` of the maximal quantum cross-correlation."""
    return (2.0 / np.pi) ** 0.25 / np.sqrt(params.brightness)


def low_brightness_ps_kernel(params: GaussianSchellParams, grid: TransverseGrid):
    """Maximal quantum phase-sensitive cross-correlation in the low-brightness limit.

    Returns ``(kernel, temporal, amplitude_gain)``.  Relative to the
    Gaussian-Schell source model the coherence exponent is ``|x2 - x1|^2 / rho0^2``
    (coherence radius shrinks by ``sqrt(2)``) and the temporal factor is
    ``exp(-tau^2 / T0^2)``.  The kernel values include the gain.
    """
    if params.brightness >= LOW_BRIGHTNESS_LIMIT:
        raise NotLowBrightness(
            f"brightness P*T0*rho0^2/a0^2 = {params.brightness:.3g} is not below {LOW_BRIGHTNESS_LIMIT}"
        )
    _check_sampling(grid, params.rho0)
    gain = low_brightness_gain(params)
    x = grid.x
    values = gain * gaussian_schell_value(params, x[:, None], x[None, :], dims=1, coherence_factor=1.0)
    kernel = CorrelationKernel(grid, values, Flavor.PHASE_SENSITIVE)
    temporal = TemporalCorrelation(params.T0 / np.sqrt(2.0), flavor="ps_cross")
    return kernel, temporal, gain


def correlation_spectrum(
    profile,
    grid: TransverseGrid,
    temporal: TemporalCorrelation,
    time_grid: Optional[TimeGrid] = None,
    amplitude: float = 1.0,
    transverse_dims: int = 1,
    check_positive: bool = False,
) -> CorrelationSpectrum:
    """Discrete Fourier transform of ``amplitude * G(x) R(tau)`` with physical scaling.

    ``g(k, Omega) = sum_x sum_tau G(x) R(tau) exp(-i k x + i Omega tau) dx dtau``.

    With ``transverse_dims=2`` the profile is read as one factor of a separable
    isotropic 2D profile ``G(x, y) = p(x) p(y)`` and the cut ``ky = 0`` is
    returned.  ``check_positive`` enforces the auto-spectrum requirement
    ``g >= 0`` (``NonPositiveSpectrum`` otherwise).
    """
    profile = np.asarray(profile, dtype=complex)
    if profile.shape != (grid.n_points,):
        raise GridMismatch("profile length does not match grid")
    if time_grid is None:
        time_grid = default_time_grid(temporal.width)
    tau = time_grid.x

    g_k = np.fft.fftshift(np.fft.fft(np.fft.ifftshift(profile))) * grid.spacing
    if transverse_dims == 2:
        g_k = g_k * np.sum(profile) * grid.spacing
    elif transverse_dims != 1:
        raise InvalidParams("transverse_dims must be 1 or 2")
    r = temporal(tau).astype(complex)
    # exp(+i Omega tau) convention: inverse FFT scaled back by n
    r_w = np.fft.fftshift(np.fft.ifft(np.fft.ifftshift(r))) * time_grid.n_points * time_grid.spacing

    k = np.fft.fftshift(np.fft.fftfreq(grid.n_points, grid.spacing)) * 2 * np.pi
    omega = np.fft.fftshift(np.fft.fftfreq(time_grid.n_points, time_grid.spacing)) * 2 * np.pi
    values = amplitude * np.outer(g_k, r_w)

    if check_positive:
        real = values.real
        peak = float(np.max(np.abs(values))) or 1.0
        if np.min(real) < -CLASSIFICATION_RTOL * peak:
            raise NonPositiveSpectrum(f"auto-spectrum has negative values (min {np.min(real):.3g})")
        values = np.maximum(real, 0.0)
    return CorrelationSpectrum(k, omega, values)


def _spectrum_values(s) -> np.ndarray:
    return s.values if isinstance(s, CorrelationSpectrum) else np.asarray(s)


def classify_state(gn, gn_cross=None, gp_cross=None, rel_tol: float = CLASSIFICATION_RTOL) -> Classification:
    """Classify a Gaussian state from its correlation spectra.

    * ``Invalid`` if ``|gn_cross| > gn`` or ``|gp_cross| > sqrt(gn (1 + gn))`` anywhere;
    * ``ClassicalPI`` if there is no phase-sensitive cross-spectrum;
    * ``ClassicalPS`` if ``|gp_cross| <= gn`` everywhere;
    * ``NonclassicalPS`` otherwise.

    Violations smaller than ``rel_tol`` times the largest spectral value are
    ignored (for the quantum bound that slack is applied to ``gn`` itself).
    """
    spectra = [s for s in (gn, gn_cross, gp_cross) if s is not None]
    shapes = {np.shape(_spectrum_values(s)) for s in spectra}
    if len(shapes) > 1:
        raise GridMismatch(f"spectra have different shapes: {sorted(shapes)}")
    if all(isinstance(s, CorrelationSpectrum) for s in spectra):
        for s in spectra[1:]:
            if not spectra[0].same_grid(s):
                raise GridMismatch("spectra are sampled on different (k, omega) grids")

    n = np.real(_spectrum_values(gn))
    tol = rel_tol * max(float(np.max(np.abs(_spectrum_values(s)))) for s in spectra)
    if np.min(n) < -tol:
        return Classification.INVALID
    n = np.maximum(n, 0.0)

    if gn_cross is not None and np.any(np.abs(_spectrum_values(gn_cross)) > n + tol):
        return Classification.INVALID
    if gp_cross is None:
        return Classification.CLASSICAL_PI

    p = np.abs(_spectrum_values(gp_cross))
    # the tolerance enters under the root: rounding noise of size tol in gn
    # becomes sqrt(tol) in the quantum bound
    if np.any(p > np.sqrt((n + tol) * (1.0 + n + tol)) + tol):
        return Classification.INVALID
    if np.any(p > n + tol):
        return Classification.NONCLASSICAL_PS
    return Classification.CLASSICAL_PS


def spectral_grids(params: GaussianSchellParams):
    """Transverse and time grids used for classification spectra.

    They span +-16 coherence radii/times, so truncation of the Gaussian
    correlations does not leak negative lobes into the spectra.
    """
    return TransverseGrid(256, params.rho0 / 8.0), TimeGrid(256, params.T0 / 8.0)


def _gaussian_profile(grid: TransverseGrid, radius: float, coherence_factor: float = 2.0) -> np.ndarray:
    return np.exp(-grid.x**2 / (coherence_factor * radius**2))


_EXPECTED = {
    Preset.THERMAL_MAX: Classification.CLASSICAL_PI,
    Preset.CLASSICAL_PS_MAX: Classification.CLASSICAL_PS,
    Preset.QUANTUM_PS_MAX: Classification.NONCLASSICAL_PS,
}


def make_source(
    preset, params: GaussianSchellParams, grid: TransverseGrid, time_grid: Optional[TimeGrid] = None
) -> SourceState:
    """Build one of the three canonical maximally cross-correlated sources.

    ``thermal_max`` takes the phase-insensitive cross-correlation equal to the
    auto-correlation; ``classical_ps_max`` does the same for the phase-sensitive
    cross-correlation; ``quantum_ps_max`` saturates the quantum bound, using the
    low-brightness closed form below brightness 0.1 and the classical form above
    brightness 10.  Brightness in ``[0.1, 10]`` raises ``BrightnessRegimeAmbiguous``.

    Kernels are sampled on ``grid``; the classification spectra use the
    dedicated grids of ``spectral_grids`` (``time_grid`` overrides the time axis).
    """
    preset = Preset(preset)
    sgrid, default_tgrid = spectral_grids(params)
    time_grid = default_tgrid if time_grid is None else time_grid
    auto = make_gaussian_schell_kernel(params, grid, Flavor.PHASE_INSENSITIVE)
    t_auto = TemporalCorrelation(params.T0, "pi_auto")
    temporal = {"auto": t_auto}

    # spectra of the full (2 transverse + time) state, used for classification
    gs_profile = _gaussian_profile(sgrid, params.rho0)
    gn = correlation_spectrum(
        gs_profile, sgrid, t_auto, time_grid, amplitude=params.flux_density, transverse_dims=2, check_positive=True
    )
    spectra = {"auto": gn}
    pi_cross = ps_cross = None
    gain = 1.0
    notes = []

    if preset is Preset.THERMAL_MAX:
        pi_cross = auto
        temporal["pi_cross"] = TemporalCorrelation(params.T0, "pi_cross")
        spectra["pi_cross"] = gn
    elif preset is Preset.CLASSICAL_PS_MAX:
        ps_cross = make_gaussian_schell_kernel(params, grid, Flavor.PHASE_SENSITIVE)
        temporal["ps_cross"] = TemporalCorrelation(params.T0, "ps_cross")
        spectra["ps_cross"] = gn
    else:
        b = params.brightness
        if LOW_BRIGHTNESS_LIMIT <= b <= HIGH_BRIGHTNESS_LIMIT:
            raise BrightnessRegimeAmbiguous(
                f"brightness {b:.3g} lies in [{LOW_BRIGHTNESS_LIMIT}, {HIGH_BRIGHTNESS_LIMIT}]; "
                "no closed form for the maximal quantum cross-correlation is available there"
            )
        if b < LOW_BRIGHTNESS_LIMIT:
            ps_cross, t_ps, gain = low_brightness_ps_kernel(params, grid)
            temporal["ps_cross"] = t_ps
            spectra["ps_cross"] = correlation_spectrum(
                _gaussian_profile(sgrid, params.rho0, coherence_factor=1.0),
                sgrid,
                t_ps,
                time_grid,
                amplitude=gain * params.flux_density,
                transverse_dims=2,
            )
        else:
            ps_cross = make_gaussian_schell_kernel(params, grid, Flavor.PHASE_SENSITIVE)
            temporal["ps_cross"] = TemporalCorrelation(params.T0, "ps_cross")
            n = gn.values
            spectra["ps_cross"] = CorrelationSpectrum(gn.k, gn.omega, np.sqrt(n * (1.0 + n)))
            notes.append(
                f"high brightness ({b:.3g}): classical phase-sensitive kernel used as the approximation "
                "to the maximal quantum cross-correlation"
            )

    classification = classify_state(gn, spectra.get("pi_cross"), spectra.get("ps_cross"))
    if classification is not _EXPECTED[preset]:
        raise GhostImagingError(f"preset {preset.value} classified as {classification.value}")
    return SourceState(
        auto_kernel=auto,
        pi_cross=pi_cross,
        ps_cross=ps_cross,
        temporal=temporal,
        classification=classification,
        spectra=spectra,
        params=params,
        preset=preset,
        amplitude_gain=gain,
        notes=tuple(notes),
    )


def make_custom_source(
    auto_kernel: CorrelationKernel,
    temporal: dict,
    spectra: dict,
    pi_cross: Optional[CorrelationKernel] = None,
    ps_cross: Optional[CorrelationKernel] = None,
) -> SourceState:
    """Assemble a user-defined state; it must classify as a valid state.

    ``spectra`` needs an ``"auto"`` entry and one entry per supplied cross kernel.
    """
    if auto_kernel.flavor is not Flavor.PHASE_INSENSITIVE:
        raise InvalidParams("auto kernel must be phase-insensitive")
    auto_kernel.check()
    for name, kernel in (("pi_cross", pi_cross), ("ps_cross", ps_cross)):
        if kernel is not None:
            if not kernel.grid.same_as(auto_kernel.grid):
                raise GridMismatch(f"{name} kernel grid differs from auto kernel grid")
            if name not in spectra or name not in temporal:
                raise InvalidParams(f"{name} kernel supplied without its spectrum and temporal factor")
    classification = classify_state(spectra["auto"], spectra.get("pi_cross"), spectra.get("ps_cross"))
    if classification is Classification.INVALID:
        raise InvalidParams("state violates the Cauchy-Schwarz or quantum bounds")
    return SourceState(auto_kernel, pi_cross, ps_cross, dict(temporal), classification, dict(spectra))
