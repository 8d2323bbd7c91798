"""Free-space propagation of phase-insensitive and phase-sensitive correlation kernels.

A kernel propagates through two applications of the discretized 1D Fresnel
operator ``H`` (``E_out = H E_in``):

* phase-insensitive  ``K_out = conj(H) K H^T``
* phase-sensitive    ``K_out = H K H^T``   (no conjugation)

Three discretizations of ``H`` are available.  ``"direct"`` samples the
Huygens-Fresnel Green's function on an arbitrary output grid; ``"transfer"``
applies the Fresnel transfer function by zero-padded FFT (same input and
output grid, accurate at short range); ``"chirp"`` is the chirp-FFT-chirp
factorization of the direct quadrature, whose output spacing is fixed to
``2 pi L / (k0 N dx)``.  Temporal correlations are never touched: propagation
only delays the fields in time.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import GridTooSmall, IntermediateRegime, InvalidParams, SamplingTooCoarse
from .grid import TransverseGrid
from .source_models import (
    LOW_BRIGHTNESS_LIMIT,
    CorrelationKernel,
    Flavor,
    GaussianSchellParams,
    low_brightness_gain,
    low_brightness_ps_kernel,
    make_gaussian_schell_kernel,
)

NEAR_FIELD_THRESHOLD = 10.0
FAR_FIELD_THRESHOLD = 0.1
FLUX_LOSS_LIMIT = 5e-3


@dataclass(frozen=True)
class PropagationGeometry:
    """Path length ``L`` [m] and centre wavenumber ``k0`` [rad/m]."""

    L: float
    k0: float

    def __post_init__(self):
        if not (self.L > 0 and self.k0 > 0):
            raise InvalidParams(f"L and k0 must be positive, got L={self.L}, k0={self.k0}")

    @classmethod
    def from_wavelength(cls, L: float, wavelength: float) -> "PropagationGeometry":
        return cls(L, 2 * np.pi / wavelength)


@dataclass(frozen=True)
class FresnelReport:
    D0: float
    Dcoh: float
    DN: float
    DF: float
    regime_pi: str
    regime_ps: str
    aL: float
    rhoL: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _regime(near_number: float, far_number: float) -> str:
    if near_number >= NEAR_FIELD_THRESHOLD:
        return "near"
    if far_number <= FAR_FIELD_THRESHOLD:
        return "far"
    return "intermediate"


def fresnel_report(params: GaussianSchellParams, geom: PropagationGeometry) -> FresnelReport:
    """Fresnel numbers and near/far classification of a Gaussian-Schell source at range ``L``.

    Phase-insensitive propagation is governed by ``D0 = k0 rho0 a0 / 2L``;
    phase-sensitive propagation is near field only when ``DN = k0 rho0^2 / 2L``
    is large and far field only when ``DF = k0 a0^2 / 2L`` is small.
    """
    k0, L = geom.k0, geom.L
    D0 = k0 * params.rho0 * params.a0 / (2 * L)
    DN = k0 * params.rho0**2 / (2 * L)
    DF = k0 * params.a0**2 / (2 * L)
    return FresnelReport(
        D0=D0,
        Dcoh=DF,
        DN=DN,
        DF=DF,
        regime_pi=_regime(D0, D0),
        regime_ps=_regime(min(DN, DF), max(DN, DF)),
        aL=2 * L / (k0 * params.rho0),
        rhoL=2 * L / (k0 * params.a0),
    )


def greens_function_1d(geom: PropagationGeometry, x):
    """1D Huygens-Fresnel Green's function ``sqrt(k0 / (i 2 pi L)) exp(i k0 (L + x^2 / 2L))``."""
    x = np.asarray(x, dtype=float)
    k0, L = geom.k0, geom.L
    return np.sqrt(k0 / (2j * np.pi * L)) * np.exp(1j * k0 * (L + x**2 / (2 * L)))


def transfer_function_limit(geom: PropagationGeometry, grid: TransverseGrid, pad: int = 2) -> float:
    """Largest range for which the sampled transfer-function chirp is alias free."""
    return pad * grid.n_points * grid.spacing**2 * geom.k0 / (2 * np.pi)


def chirp_output_grid(geom: PropagationGeometry, grid_in: TransverseGrid) -> TransverseGrid:
    return TransverseGrid(grid_in.n_points, 2 * np.pi * geom.L / (geom.k0 * grid_in.n_points * grid_in.spacing))


class FresnelOperator:
    """Discretized 1D Fresnel propagator from ``grid_in`` to ``grid_out``."""

    def __init__(self, geom: PropagationGeometry, grid_in: TransverseGrid, grid_out=None, method: str = "auto"):
        self.geom = geom
        self.grid_in = grid_in
        if method == "auto":
            if grid_out is None or grid_out.same_as(grid_in):
                if geom.L <= transfer_function_limit(geom, grid_in):
                    method = "transfer"
                else:
                    method = "direct"
            elif grid_out.same_as(chirp_output_grid(geom, grid_in)):
                method = "chirp"
            else:
                method = "direct"
        if method == "chirp":
            expected = chirp_output_grid(geom, grid_in)
            if grid_out is not None and not grid_out.same_as(expected):
                raise InvalidParams("chirp method fixes the output grid; pass grid_out=None or the chirp grid")
            grid_out = expected
        if grid_out is None:
            grid_out = grid_in
        if method == "transfer" and not grid_out.same_as(grid_in):
            raise InvalidParams("transfer-function method needs identical input and output grids")
        if method not in ("direct", "transfer", "chirp"):
            raise InvalidParams(f"unknown propagation method {method!r}")
        self.grid_out = grid_out
        self.method = method
        if method in ("direct", "chirp"):
            self._check_direct_sampling()

    def _check_direct_sampling(self):
        k0, L = self.geom.k0, self.geom.L
        span = self.grid_in.half_width
        if self.method == "direct":
            # the chirp-FFT path applies the output-side chirp exactly
            span += self.grid_out.half_width
        step = k0 * self.grid_in.spacing * span / L
        if step > np.pi:
            raise SamplingTooCoarse(
                f"Fresnel chirp phase step {step:.3g} rad per input sample exceeds pi; "
                "refine the input grid or shrink the output grid"
            )

    def matrix(self) -> np.ndarray:
        if self.method == "direct":
            dx = self.grid_out.x[:, None] - self.grid_in.x[None, :]
            return greens_function_1d(self.geom, dx) * self.grid_in.spacing
        return self.apply(np.eye(self.grid_in.n_points, dtype=complex))

    def apply(self, values: np.ndarray, axis: int = 0) -> np.ndarray:
        """Apply ``H`` along ``axis`` of ``values``."""
        v = np.moveaxis(np.asarray(values, dtype=complex), axis, 0)
        if self.method == "direct":
            out = np.tensordot(self.matrix(), v, axes=(1, 0))
        elif self.method == "transfer":
            out = self._apply_transfer(v)
        else:
            out = self._apply_chirp(v)
        return np.moveaxis(out, 0, axis)

    def _apply_transfer(self, v: np.ndarray) -> np.ndarray:
        n = self.grid_in.n_points
        pad = 2 * n
        lo = (pad - n) // 2
        buf = np.zeros((pad,) + v.shape[1:], dtype=complex)
        buf[lo : lo + n] = v
        k = 2 * np.pi * np.fft.fftfreq(pad, self.grid_in.spacing)
        tf = np.exp(1j * self.geom.k0 * self.geom.L) * np.exp(-1j * self.geom.L * k**2 / (2 * self.geom.k0))
        shape = (pad,) + (1,) * (v.ndim - 1)
        spec = np.fft.fft(np.fft.ifftshift(buf, axes=0), axis=0) * tf.reshape(shape)
        out = np.fft.fftshift(np.fft.ifft(spec, axis=0), axes=0)
        return out[lo : lo + n]

    def _apply_chirp(self, v: np.ndarray) -> np.ndarray:
        k0, L = self.geom.k0, self.geom.L
        x_in, x_out = self.grid_in.x, self.grid_out.x
        shape = (-1,) + (1,) * (v.ndim - 1)
        chirp_in = np.exp(1j * k0 * x_in**2 / (2 * L)).reshape(shape)
        pref = np.sqrt(k0 / (2j * np.pi * L)) * np.exp(1j * k0 * L) * self.grid_in.spacing
        chirp_out = (pref * np.exp(1j * k0 * x_out**2 / (2 * L))).reshape(shape)
        # centred DFT: F[j, i] = exp(-2 pi i (j - n/2)(i - n/2) / n)
        spec = np.fft.fftshift(np.fft.fft(np.fft.ifftshift(v * chirp_in, axes=0), axis=0), axes=0)
        return chirp_out * spec


def diffracted_half_width(kernel: CorrelationKernel, geom: PropagationGeometry) -> float:
    """Estimate of the half width (``2 a_L``-type) the propagated kernel occupies.

    Uses rms widths of the ``|K|^2`` marginals in space and spatial frequency and
    free-space spreading ``sigma_out^2 = sigma_x^2 + (L sigma_k / k0)^2``; for a
    Gaussian-Schell kernel the result is twice the output e^-2 intensity radius.
    """
    K = kernel.values
    x = kernel.grid.x
    p = np.abs(K) ** 2
    mx = p.sum(axis=1) + p.sum(axis=0)
    sigma_x = np.sqrt(np.sum(mx * x**2) / np.sum(mx))
    Kf = np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(K)))
    pk = np.abs(Kf) ** 2
    k = 2 * np.pi * np.fft.fftshift(np.fft.fftfreq(kernel.grid.n_points, kernel.grid.spacing))
    mk = pk.sum(axis=1) + pk.sum(axis=0)
    sigma_k = np.sqrt(np.sum(mk * k**2) / np.sum(mk))
    sigma_out = np.hypot(sigma_x, geom.L * sigma_k / geom.k0)
    return 4.0 * np.sqrt(2.0) * sigma_out


def auto_output_grid(kernel: CorrelationKernel, geom: PropagationGeometry, n_out: Optional[int] = None) -> TransverseGrid:
    """Output grid covering ``max(input extent, diffracted extent)``."""
    grid = kernel.grid
    n_out = grid.n_points if n_out is None else int(n_out)
    needed = 2.0 * diffracted_half_width(kernel, geom)
    if needed <= grid.extent and n_out == grid.n_points:
        return grid
    spacing = max(grid.spacing, needed / n_out)
    return TransverseGrid(n_out, spacing)


def _propagate(kernel, geom, flavor, out_grid, method, n_out):
    if kernel.flavor is not flavor:
        raise InvalidParams(f"expected a {flavor.value} kernel, got {kernel.flavor.value}")
    if out_grid is None and method != "chirp":
        out_grid = auto_output_grid(kernel, geom, n_out)
    op = FresnelOperator(geom, kernel.grid, out_grid, method)
    K = kernel.values
    M = op.apply(K.T, axis=0).T  # K H^T
    if flavor is Flavor.PHASE_INSENSITIVE:
        out = np.conj(op.apply(np.conj(M), axis=0))
        out = 0.5 * (out + out.conj().T)
        flux_in = np.sum(kernel.diagonal) * kernel.grid.spacing
        flux_out = np.sum(np.real(np.diag(out))) * op.grid_out.spacing
    else:
        out = op.apply(M, axis=0)
        out = 0.5 * (out + out.T)
        flux_in = np.sum(np.abs(K) ** 2) * kernel.grid.spacing**2
        flux_out = np.sum(np.abs(out) ** 2) * op.grid_out.spacing**2
    result = CorrelationKernel(op.grid_out, out, flavor)
    if flux_in > 0 and 1.0 - flux_out / flux_in > FLUX_LOSS_LIMIT:
        raise GridTooSmall(
            f"{100 * (1 - flux_out / flux_in):.2f}% of the flux falls outside the output grid "
            f"(half width {op.grid_out.half_width:.4g} m)"
        )
    result.check(rtol=1e-8)
    return result


def propagate_pi(
    kernel: CorrelationKernel,
    geom: PropagationGeometry,
    out_grid: Optional[TransverseGrid] = None,
    method: str = "auto",
    n_out: Optional[int] = None,
) -> CorrelationKernel:
    """Propagate a phase-insensitive kernel: ``K_out = conj(H) K H^T``.

    Raises ``GridTooSmall`` if more than 0.5% of the photon flux leaves the output grid.
    """
    return _propagate(kernel, geom, Flavor.PHASE_INSENSITIVE, out_grid, method, n_out)


def propagate_ps(
    kernel: CorrelationKernel,
    geom: PropagationGeometry,
    out_grid: Optional[TransverseGrid] = None,
    method: str = "auto",
    n_out: Optional[int] = None,
) -> CorrelationKernel:
    """Propagate a phase-sensitive kernel: ``K_out = H K H^T`` (no conjugation).

    The flux check uses the Hilbert-Schmidt norm, which free-space propagation conserves.
    """
    return _propagate(kernel, geom, Flavor.PHASE_SENSITIVE, out_grid, method, n_out)


def propagate(kernel: CorrelationKernel, geom: PropagationGeometry, **kwargs) -> CorrelationKernel:
    if kernel.flavor is Flavor.PHASE_INSENSITIVE:
        return propagate_pi(kernel, geom, **kwargs)
    return propagate_ps(kernel, geom, **kwargs)


def analytic_detection_kernel(
    params: GaussianSchellParams,
    geom: PropagationGeometry,
    grid: TransverseGrid,
    flavor: Flavor = Flavor.PHASE_INSENSITIVE,
    quantum: bool = False,
) -> CorrelationKernel:
    """Closed-form detection-plane cross-correlation magnitude (1D, real, non-negative).

    Near field returns the source kernel.  Far field returns the Gaussian-Schell
    form with intensity radius ``a_L = 2L / k0 rho0`` and coherence radius
    ``rho_L = 2L / k0 a0``, in the difference coordinate for phase-insensitive
    light and the sum coordinate for phase-sensitive light.  ``quantum=True``
    (phase-sensitive only) gives the low-brightness maximal quantum
    cross-correlation, whose far-field intensity radius is ``sqrt(2) a_L``;
    above brightness 10 the classical form is returned.
    """
    flavor = Flavor(flavor)
    report = fresnel_report(params, geom)
    regime = report.regime_pi if flavor is Flavor.PHASE_INSENSITIVE else report.regime_ps
    if regime == "intermediate":
        raise IntermediateRegime(
            f"{flavor.value} propagation is in the intermediate regime "
            f"(D0={report.D0:.3g}, DN={report.DN:.3g}, DF={report.DF:.3g})"
        )
    low_brightness = quantum and params.brightness < LOW_BRIGHTNESS_LIMIT
    if quantum and flavor is not Flavor.PHASE_SENSITIVE:
        raise InvalidParams("quantum detection kernels are phase-sensitive")

    if regime == "near":
        if low_brightness:
            return low_brightness_ps_kernel(params, grid)[0]
        return make_gaussian_schell_kernel(params, grid, flavor)

    x1 = grid.x[:, None]
    x2 = grid.x[None, :]
    aL, rhoL = report.aL, report.rhoL
    if low_brightness:
        gain = low_brightness_gain(params)
        amp = gain * np.sqrt(params.P / (np.pi * aL**2))
        values = amp * np.exp(-(x1**2 + x2**2) / (2 * aL**2) - (x1 + x2) ** 2 / (2 * rhoL**2))
    else:
        amp = np.sqrt(2 * params.P / (np.pi * aL**2))
        coh = (x2 - x1) if flavor is Flavor.PHASE_INSENSITIVE else (x2 + x1)
        values = amp * np.exp(-(x1**2 + x2**2) / aL**2 - coh**2 / (2 * rhoL**2))
    return CorrelationKernel(grid, values, flavor)
