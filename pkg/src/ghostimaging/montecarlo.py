"""Semiclassical Monte Carlo of ghost imaging with classical Gaussian light.

Classical fields are drawn from their Gaussian P-representation, converted
into photocurrents (inhomogeneous Poisson counts per time bin, filtered by the
Gaussian baseband response) and correlated.  The ensemble average of the
photocurrent product converges to the moment-factored analytic image, which
is what the tests check.

Every sample draws from its own RNG stream derived from ``(seed, sample
index)``, so results do not depend on evaluation order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .construction import ClassicalModalState, ModalDecomposition, field_maps
from .errors import InsufficientSamples, InvalidParams, NonclassicalState, RateOverflow
from .grid import TimeGrid, TransverseGrid, default_time_grid
from .imaging import DetectionSetup, ImageScan, filter_response
from .masks import MaskSpec
from .propagation import FresnelOperator, PropagationGeometry
from .source_models import Classification, SourceState, TemporalCorrelation

MIN_SAMPLES = 100
MAX_COUNTS_PER_BIN = 1e6
_FIELD_STREAM, _COUNT_STREAM = 0, 1


def sample_rng(seed: int, index: int, stream: int = _FIELD_STREAM) -> np.random.Generator:
    """Independent generator for one sample, keyed by ``(seed, index, stream)``."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(index), int(stream))))


def _complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Circular complex Gaussian with ``<|z|^2> = 1``."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def covariance_factor(cov: np.ndarray) -> np.ndarray:
    """``L`` with ``L L^H = cov`` for a Hermitian PSD matrix (tiny negative eigenvalues clipped)."""
    cov = 0.5 * (cov + cov.conj().T)
    w, v = np.linalg.eigh(cov)
    scale = max(float(w[-1]), 0.0)
    if w[0] < -1e-8 * scale:
        raise InvalidParams(f"covariance is not positive semidefinite (min eigenvalue {w[0]:.3g})")
    return v * np.sqrt(np.clip(w, 0.0, None))


def temporal_covariance(temporal: TemporalCorrelation, time_grid: TimeGrid) -> np.ndarray:
    t = time_grid.x
    return temporal(t[None, :] - t[:, None])


@dataclass(frozen=True, eq=False)
class FieldEnsemble:
    """Sampled signal and reference fields, shape ``(n_samples, n_x, n_t)``."""

    signal: np.ndarray
    reference: np.ndarray
    grid: TransverseGrid
    time_grid: Optional[TimeGrid]
    seed: int
    kind: str

    @property
    def n_samples(self) -> int:
        return self.signal.shape[0]


def sample_fields(
    state,
    n_samples: int,
    seed: int = 0,
    time_grid: Optional[TimeGrid] = None,
    decomp: Optional[ModalDecomposition] = None,
) -> FieldEnsemble:
    """Draw classical Gaussian field samples with the prescribed second moments.

    ``state`` is a ``SourceState`` (thermal or classical phase-sensitive) or a
    ``ClassicalModalState`` together with its ``decomp``.  A thermal source
    gives identical signal and reference samples; a classical phase-sensitive
    source gives complex-conjugate ones.  Nonclassical states have no proper
    P-representation and raise ``NonclassicalState``.
    """
    if n_samples < 1:
        raise InvalidParams("need at least one sample")
    if isinstance(state, ClassicalModalState):
        if decomp is None:
            raise InvalidParams("sampling a modal state needs its decomposition")
        return _sample_modal(state, decomp, n_samples, seed)
    if not isinstance(state, SourceState):
        raise InvalidParams("state must be a SourceState or ClassicalModalState")
    if state.classification is Classification.NONCLASSICAL_PS:
        raise NonclassicalState("a nonclassical state has no proper P-representation to sample")
    if state.classification is Classification.INVALID:
        raise InvalidParams("cannot sample an invalid state")
    if state.pi_cross is not None and state.ps_cross is not None:
        raise InvalidParams("sampling supports one cross-correlation type at a time")

    auto_t = state.temporal["auto"]
    if time_grid is None:
        time_grid = default_time_grid(auto_t.width)
    Lx = covariance_factor(state.auto_kernel.values.T)
    Lt = np.real(covariance_factor(temporal_covariance(auto_t, time_grid)))
    nx, nt = state.grid.n_points, time_grid.n_points
    signal = np.empty((n_samples, nx, nt), dtype=complex)
    for i in range(n_samples):
        z = _complex_normal(sample_rng(seed, i), (Lx.shape[1], Lt.shape[1]))
        signal[i] = Lx @ z @ Lt.T
    if state.ps_cross is not None:
        reference, kind = np.conj(signal), "classical_ps"
    elif state.pi_cross is not None:
        reference, kind = signal, "thermal"
    else:
        reference = np.empty_like(signal)
        for i in range(n_samples):
            z = _complex_normal(sample_rng(seed, i, 2), (Lx.shape[1], Lt.shape[1]))
            reference[i] = Lx @ z @ Lt.T
        kind = "independent"
    return FieldEnsemble(signal, reference, state.grid, time_grid, seed, kind)


def _sample_modal(state: ClassicalModalState, decomp: ModalDecomposition, n_samples: int, seed: int) -> FieldEnsemble:
    G_S, G_R = field_maps(state, decomp)
    m1, m2 = len(state.pop_S1), len(state.pop_S2)
    eta2 = np.asarray(state.cross_pi).real
    mu2 = np.asarray(state.cross_ps).real
    if not (np.allclose(state.pop_S1, eta2) and np.allclose(state.pop_R1, eta2)
            and np.allclose(state.pop_S2, mu2) and np.allclose(state.pop_R2, mu2)):
        raise InvalidParams("modal sampling supports states at the classical lower bounds only")
    signal = np.empty((n_samples, G_S.shape[0], 1), dtype=complex)
    reference = np.empty((n_samples, G_R.shape[0], 1), dtype=complex)
    for i in range(n_samples):
        rng = sample_rng(seed, i)
        z = _complex_normal(rng, m1)
        w = _complex_normal(rng, m2)
        a1 = np.sqrt(eta2) * z
        a2 = np.sqrt(mu2) * w
        alpha = np.concatenate([a1, a1, a2, np.conj(a2)])
        signal[i, :, 0] = G_S @ alpha
        reference[i, :, 0] = G_R @ alpha
    grid = TransverseGrid(max(G_S.shape[0], 2), 1.0)
    return FieldEnsemble(signal, reference, grid, None, seed, "modal")


def propagate_ensemble(
    ensemble: FieldEnsemble, geom: PropagationGeometry, out_grid: Optional[TransverseGrid] = None, method: str = "auto"
) -> FieldEnsemble:
    """Apply the Fresnel propagator to every field sample (both arms travel the same distance)."""
    op = FresnelOperator(geom, ensemble.grid, out_grid, method)
    signal = op.apply(ensemble.signal, axis=1)
    reference = op.apply(ensemble.reference, axis=1)
    return FieldEnsemble(signal, reference, op.grid_out, ensemble.time_grid, ensemble.seed, ensemble.kind)


def sample_correlations(ensemble: FieldEnsemble, t_index: Optional[int] = None):
    """Sample estimates ``(<E_S^* E_R>, <E_S E_R>, <E_S^* E_S>)`` at one time slice."""
    t = ensemble.signal.shape[2] // 2 if t_index is None else t_index
    s = ensemble.signal[:, :, t]
    r = ensemble.reference[:, :, t]
    n = ensemble.n_samples
    return s.conj().T @ r / n, s.T @ r / n, s.conj().T @ s / n


def fourth_moment_check(ensemble: FieldEnsemble, i: int, j: int, t_index: Optional[int] = None):
    """Compare ``<|E_S(x_i)|^2 |E_R(x_j)|^2>`` with its Gaussian moment-factored form.

    Returns ``(direct, factored, stderr)``; ``factored`` uses sampled second
    moments and ``stderr`` is the standard error of ``direct``.
    """
    t = ensemble.signal.shape[2] // 2 if t_index is None else t_index
    s = ensemble.signal[:, i, t]
    r = ensemble.reference[:, j, t]
    product = np.abs(s) ** 2 * np.abs(r) ** 2
    direct = float(np.mean(product))
    factored = float(
        np.mean(np.abs(s) ** 2) * np.mean(np.abs(r) ** 2)
        + np.abs(np.mean(np.conj(s) * r)) ** 2
        + np.abs(np.mean(s * r)) ** 2
    )
    stderr = float(np.std(product, ddof=1) / np.sqrt(len(product)))
    return direct, factored, stderr


@dataclass(frozen=True, eq=False)
class PhotocurrentRecord:
    """Filtered photocurrents per sample.

    ``pinhole`` has shape ``(n_samples, n_pinholes, n_t)`` and ``bucket`` shape
    ``(n_samples, n_t)``; ``pinhole_rate`` / ``bucket_rate`` are the photon
    rates ``eta mu(t)`` that drove the Poisson counts.
    """

    pinhole: np.ndarray
    bucket: np.ndarray
    pinhole_rate: np.ndarray
    bucket_rate: np.ndarray
    positions: np.ndarray
    time_grid: TimeGrid
    filter_width: float
    charge: float
    meta: dict = field(default_factory=dict)

    @property
    def n_samples(self) -> int:
        return self.pinhole.shape[0]

    def central_window(self) -> np.ndarray:
        """Time bins whose filter response lies entirely inside the record."""
        t = self.time_grid.x
        margin = 1.25 * self.filter_width
        keep = np.abs(t) <= t.max() - margin
        if not np.any(keep):
            raise InvalidParams("record is shorter than the filter response; lengthen the time grid")
        return keep


def _filter(counts: np.ndarray, time_grid: TimeGrid, filter_width: float) -> np.ndarray:
    """Linear convolution of per-bin counts with the impulse response, same length, along the last axis."""
    nt = time_grid.n_points
    kernel = filter_response(time_grid.x, filter_width)
    m = 2 * nt
    spec = np.fft.rfft(counts, m, axis=-1) * np.fft.rfft(kernel, m)
    full = np.fft.irfft(spec, m, axis=-1)
    start = nt // 2
    return full[..., start : start + nt]


def simulate_photocurrents(
    ensemble: FieldEnsemble,
    setup: DetectionSetup,
    mask: MaskSpec,
    pinhole_indices: Optional[Sequence[int]] = None,
    seed: Optional[int] = None,
    shot_noise: bool = True,
) -> PhotocurrentRecord:
    """Poisson photocurrents of the pinhole (reference arm) and bucket (signal arm behind the mask).

    Pinhole rate: ``eta A1 |E_R(x1, t)|^2``; bucket rate:
    ``eta sum |T(x) E_S(x, t)|^2 dx`` over the bucket aperture.  Counts per
    bin are Poisson with mean ``rate * dt``; currents are the counts filtered
    by ``hB`` and scaled by ``q``.  ``shot_noise=False`` filters the mean counts.
    """
    if ensemble.time_grid is None:
        raise InvalidParams("photocurrents need a time-resolved ensemble")
    if not ensemble.grid.same_as(mask.grid):
        raise InvalidParams("mask grid differs from the ensemble grid")
    tg = ensemble.time_grid
    dt = tg.spacing
    if dt > setup.filter_width / 8 * (1 + 1e-12):
        raise InvalidParams(f"time step {dt:.3g} s exceeds Td/8 = {setup.filter_width / 8:.3g} s")
    seed = ensemble.seed if seed is None else seed
    idx = np.arange(ensemble.grid.n_points) if pinhole_indices is None else np.asarray(pinhole_indices, dtype=int)
    eta = setup.quantum_efficiency
    weight = mask.intensity * setup.bucket_indicator(mask.grid) * mask.grid.spacing

    pin_rate = eta * setup.pinhole_area * np.abs(ensemble.reference[:, idx, :]) ** 2
    bucket_rate = eta * np.einsum("sxt,x->st", np.abs(ensemble.signal) ** 2, weight)
    peak = max(float(pin_rate.max(initial=0.0)), float(bucket_rate.max(initial=0.0))) * dt
    if peak > MAX_COUNTS_PER_BIN:
        raise RateOverflow(f"expected {peak:.3g} counts per time bin exceeds {MAX_COUNTS_PER_BIN:.0e}")

    if shot_noise:
        pin_counts = np.empty_like(pin_rate)
        bucket_counts = np.empty_like(bucket_rate)
        for i in range(ensemble.n_samples):
            rng = sample_rng(seed, i, _COUNT_STREAM)
            pin_counts[i] = rng.poisson(pin_rate[i] * dt)
            bucket_counts[i] = rng.poisson(bucket_rate[i] * dt)
    else:
        pin_counts = pin_rate * dt
        bucket_counts = bucket_rate * dt
    q = setup.charge
    return PhotocurrentRecord(
        pinhole=q * _filter(pin_counts, tg, setup.filter_width),
        bucket=q * _filter(bucket_counts, tg, setup.filter_width),
        pinhole_rate=pin_rate,
        bucket_rate=bucket_rate,
        positions=ensemble.grid.x[idx],
        time_grid=tg,
        filter_width=setup.filter_width,
        charge=q,
        meta={"kind": ensemble.kind, "seed": seed},
    )


def estimate_image(record: PhotocurrentRecord, cross: str = "pi") -> ImageScan:
    """Ensemble estimate of ``<i1(t) i2(t)>`` with per-position standard errors.

    Each sample contributes its time average over the central window; the
    image is the sample mean and ``stderr`` the standard error of that mean.
    The background is estimated as the product of the mean currents and the
    remainder is reported as the ``cross`` (``"pi"`` or ``"ps"``) term.
    """
    n = record.n_samples
    if n < MIN_SAMPLES:
        raise InsufficientSamples(f"{n} samples given, at least {MIN_SAMPLES} needed")
    if cross not in ("pi", "ps"):
        raise InvalidParams("cross must be 'pi' or 'ps'")
    keep = record.central_window()
    i1 = record.pinhole[:, :, keep]
    i2 = record.bucket[:, None, keep]
    per_sample = np.mean(i1 * i2, axis=2)
    total = per_sample.mean(axis=0)
    stderr = per_sample.std(axis=0, ddof=1) / np.sqrt(n)
    c0 = i1.mean(axis=(0, 2)) * i2.mean()
    term = total - c0
    zeros = np.zeros_like(total)
    return ImageScan(
        positions=record.positions,
        background=c0,
        pi_term=term if cross == "pi" else zeros,
        ps_term=term if cross == "ps" else zeros,
        stderr=stderr,
        meta={"n_samples": n, "estimate": True},
    )


def run_montecarlo(
    state: SourceState,
    mask: MaskSpec,
    setup: DetectionSetup,
    n_samples: int,
    seed: int = 0,
    geom: Optional[PropagationGeometry] = None,
    time_grid: Optional[TimeGrid] = None,
    shot_noise: bool = True,
) -> ImageScan:
    """Sample, (optionally) propagate onto the mask grid, detect and correlate."""
    ensemble = sample_fields(state, n_samples, seed, time_grid)
    if geom is not None:
        ensemble = propagate_ensemble(ensemble, geom, mask.grid)
    record = simulate_photocurrents(ensemble, setup, mask, shot_noise=shot_noise)
    return estimate_image(record, "ps" if state.ps_cross is not None else "pi")
