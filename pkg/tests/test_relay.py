import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ghostimaging import DetectionSetup, GaussianSchellParams, Preset, TransverseGrid, ghost_image, make_source
from ghostimaging.errors import InvalidParams, SamplingTooCoarse
from ghostimaging.imaging import source_constants
from ghostimaging.masks import double_slit_mask, gaussian_mask
from ghostimaging.relay import (
    RelayConfig,
    bucket_grid,
    bucket_plane_intensity,
    relay_detection_correlation,
    relay_image,
)

K0 = 2 * np.pi / 1e-6


def _state(preset=Preset.THERMAL_MAX, n=64):
    p = GaussianSchellParams(P=1.0, a0=1e-3, rho0=5e-5, T0=1.0)
    grid = TransverseGrid(n, p.rho0 / 4)
    return p, grid, make_source(preset, p, grid)


def test_lens_law_enforced():
    with pytest.raises(InvalidParams):
        RelayConfig(1.0, 0.2, 0.2, 0.2)
    r = RelayConfig(1.0, 0.2, 0.2, 0.1)
    assert r.magnification == -1.0
    assert r.compensating_delay_length == pytest.approx(0.6)


@pytest.mark.parametrize("m", [-0.5, -1.0, -3.0])
def test_from_magnification(m):
    r = RelayConfig.from_magnification(1.0, 0.05, m)
    assert r.magnification == pytest.approx(m)
    assert 1 / r.d1 + 1 / r.d2 == pytest.approx(1 / r.f)
    with pytest.raises(InvalidParams):
        RelayConfig.from_magnification(1.0, 0.05, 2.0)


def test_bucket_field_against_direct_sum():
    # oracle: the explicit Fresnel sum evaluated point by point
    p, grid, state = _state(n=32)
    config = RelayConfig(0.3, 0.2, 0.2, 0.1)
    mask = gaussian_mask(grid, 4 * p.rho0)
    mag, pin, bgrid = relay_detection_correlation(state.auto_kernel, mask, config, K0)
    x = grid.x
    K = state.auto_kernel.values
    for i in (3, 16, 30):
        for j in (5, 32, 60):
            x2 = bgrid.x[j]
            s = np.sum(np.exp(-1j * K0 * (2 * x2 * x - x**2) / (2 * config.L_R)) * K[i] * mask.values) * grid.spacing
            expected = abs(config.magnification) * np.sqrt(K0 / (2 * np.pi * config.L_R)) * abs(s)
            assert mag[i, j] == pytest.approx(expected, rel=1e-10)
    assert np.allclose(pin, x / config.magnification)


def test_bucket_intensity_conserves_flux():
    p, grid, state = _state()
    config = RelayConfig(0.3, 0.2, 0.2, 0.1)
    mask = double_slit_mask(grid, 2e-4, 8e-4)
    inten = bucket_plane_intensity(state.auto_kernel, mask, config, K0)
    bgrid = bucket_grid(grid, config, K0)
    flux_obj = np.sum(state.auto_kernel.diagonal * mask.intensity) * grid.spacing
    assert np.sum(inten) * bgrid.spacing == pytest.approx(flux_obj, rel=1e-12)


@settings(max_examples=10, deadline=None)
@given(m=st.sampled_from([-0.5, -1.0, -2.0, -4.0]), preset=st.sampled_from([Preset.THERMAL_MAX, Preset.CLASSICAL_PS_MAX]))
def test_whole_bucket_gives_scaled_direct_image(m, preset):
    p, grid, state = _state(preset)
    config = RelayConfig.from_magnification(0.3, 0.1, m)
    mask = gaussian_mask(grid, 3 * p.rho0, p.rho0)
    setup = DetectionSetup(filter_width=1.0)
    constants = source_constants(state, setup)
    scan = relay_image(state.auto_kernel, mask, config, K0, setup, constants, state.pi_cross, state.ps_cross, None)
    direct = ghost_image(state.auto_kernel, mask, setup, constants, state.pi_cross, state.ps_cross)
    order = np.argsort(grid.x / m)
    assert np.allclose(scan.positions, (grid.x / m)[order])
    assert np.allclose(scan.total, m**2 * direct.total[order], rtol=1e-12)


def test_small_bucket_collects_less():
    p, grid, state = _state()
    config = RelayConfig(0.3, 0.2, 0.2, 0.1)
    mask = double_slit_mask(grid, 2e-4, 6e-4)
    setup = DetectionSetup(filter_width=1.0)
    constants = source_constants(state, setup)
    full = relay_image(state.auto_kernel, mask, config, K0, setup, constants, state.pi_cross, None, None)
    bgrid = bucket_grid(grid, config, K0)
    small = relay_image(state.auto_kernel, mask, config, K0, setup, constants, state.pi_cross, None, bgrid.spacing * 4)
    assert np.all(small.pi_term <= full.pi_term * (1 + 1e-12))
    assert np.all(small.background < full.background)


def test_undersampled_chirp_refused():
    p, grid, state = _state(n=16)
    config = RelayConfig(1e-9, 2.0, 2.0, 1.0)
    with pytest.raises(SamplingTooCoarse):
        relay_detection_correlation(state.auto_kernel, gaussian_mask(grid, 1e-4), config, K0)
