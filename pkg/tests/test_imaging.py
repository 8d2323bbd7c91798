import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from ghostimaging import (
    DetectionSetup,
    GaussianSchellParams,
    Preset,
    TransverseGrid,
    analytic_image,
    contrast,
    contrast_closed_form,
    ghost_image,
    make_source,
    measure_psf,
    numeric_image,
)
from ghostimaging.errors import IntermediateRegime, InvalidParams, NoPeak, RegionTooLarge
from ghostimaging.imaging import (
    background,
    e2_radius,
    filter_response,
    source_constants,
    temporal_factor,
    temporal_factor_numeric,
)
from ghostimaging.masks import cells_mask, point_mask, slit_mask, uniform_mask
from ghostimaging.propagation import PropagationGeometry
from ghostimaging.source_models import TemporalCorrelation


def test_filter_has_unit_area():
    td = 3.0
    assert integrate.quad(lambda t: filter_response(t, td), -np.inf, np.inf)[0] == pytest.approx(1.0)


def test_temporal_factor_against_double_integral():
    # oracle: direct quadrature of the filtered correlation at zero lag
    w, td = 0.7, 1.9
    r2 = lambda tau: np.exp(-(tau**2) / w**2)
    val = integrate.dblquad(
        lambda s, t: filter_response(t, td) * filter_response(s, td) * r2(t - s), -6, 6, -6, 6, epsabs=1e-12
    )[0]
    assert temporal_factor(TemporalCorrelation(w), td) == pytest.approx(val, rel=1e-8)


@settings(max_examples=25, deadline=None)
@given(w=st.floats(0.05, 20.0), td=st.floats(0.05, 20.0))
def test_numeric_temporal_factor_matches_closed_form(w, td):
    t = TemporalCorrelation(w)
    assert abs(temporal_factor_numeric(t, td) - temporal_factor(t, td)) < 1e-6


def test_detection_setup_validation():
    for kwargs in ({"filter_width": 0}, {"filter_width": 1, "quantum_efficiency": 1.5},
                   {"filter_width": 1, "pinhole_area": -1}, {"filter_width": 1, "bucket_half_width": 0}):
        with pytest.raises(InvalidParams):
            DetectionSetup(**kwargs)
    s = DetectionSetup(filter_width=1, quantum_efficiency=0.5, pinhole_area=2, charge=3)
    assert s.scale == pytest.approx(9 * 0.25 * 2)


def test_point_mask_image_is_kernel_row(near_params):
    grid = TransverseGrid(64, near_params.rho0 / 4)
    state = make_source(Preset.THERMAL_MAX, near_params, grid)
    setup = DetectionSetup(filter_width=near_params.T0)
    mask = point_mask(grid, 2 * near_params.rho0)
    cn, cp = source_constants(state, setup)
    scan = ghost_image(state.auto_kernel, mask, setup, (cn, cp), state.pi_cross, state.ps_cross)
    j = grid.index_of(2 * near_params.rho0)
    K = state.auto_kernel.values
    assert np.allclose(scan.pi_term, cn * np.abs(K[:, j]) ** 2 * grid.spacing, rtol=1e-13)
    assert np.allclose(scan.background, setup.scale * K.diagonal().real * K[j, j].real * grid.spacing)
    assert np.all(scan.ps_term == 0)


def test_background_requires_pi_kernel(near_params):
    grid = TransverseGrid(16, near_params.rho0 / 4)
    state = make_source(Preset.CLASSICAL_PS_MAX, near_params, grid)
    with pytest.raises(InvalidParams):
        background(state.ps_cross, uniform_mask(grid), DetectionSetup(filter_width=1.0))


@pytest.mark.parametrize("preset", [Preset.THERMAL_MAX, Preset.CLASSICAL_PS_MAX, Preset.QUANTUM_PS_MAX])
def test_near_field_closed_form_equals_numeric(near_params, preset):
    grid = TransverseGrid(96, near_params.rho0 / 4)
    state = make_source(preset, near_params, grid)
    setup = DetectionSetup(filter_width=2 * near_params.T0)
    mask = slit_mask(grid, 3 * near_params.rho0, near_params.rho0)
    a = analytic_image(preset, near_params, None, mask, setup)
    n = numeric_image(state, None, mask, setup)
    assert np.allclose(a.total, n.total, rtol=1e-12, atol=0)


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=32, max_size=32), st.lists(st.floats(0.0, 1.0), min_size=32, max_size=32))
def test_image_is_linear_in_mask_intensity(t1, t2):
    p = GaussianSchellParams(P=1.0, a0=1.0, rho0=0.5, T0=1.0)
    grid = TransverseGrid(32, p.rho0 / 4)
    setup = DetectionSetup(filter_width=1.0)
    from ghostimaging.masks import MaskSpec

    i1 = analytic_image(Preset.THERMAL_MAX, p, None, MaskSpec(grid, np.sqrt(t1)), setup)
    i2 = analytic_image(Preset.THERMAL_MAX, p, None, MaskSpec(grid, np.sqrt(t2)), setup)
    s = analytic_image(Preset.THERMAL_MAX, p, None, MaskSpec(grid, np.sqrt((np.array(t1) + t2) / 2)), setup)
    assert np.allclose(s.total, (i1.total + i2.total) / 2, rtol=1e-12, atol=1e-14 * max(1e-300, np.abs(s.total).max()))
    assert np.all(s.image_term >= 0) and np.all(s.background >= 0)


def test_e2_radius_of_sampled_gaussian():
    x = np.linspace(-5, 5, 1001)
    r, peak = e2_radius(x, np.exp(-2 * (x - 0.3) ** 2 / 1.2**2))
    assert r == pytest.approx(1.2, rel=1e-6)
    assert peak == pytest.approx(0.3, abs=1e-9)
    with pytest.raises(NoPeak):
        e2_radius(x, np.zeros_like(x))
    with pytest.raises(NoPeak):
        e2_radius(x, np.ones_like(x))


def test_near_psf_and_quantum_psf(near_params):
    grid = TransverseGrid(256, near_params.rho0 / 4)
    setup = DetectionSetup(filter_width=near_params.T0)
    mask = point_mask(grid)
    c = measure_psf(analytic_image(Preset.THERMAL_MAX, near_params, None, mask, setup))
    q = measure_psf(analytic_image(Preset.QUANTUM_PS_MAX, near_params, None, mask, setup))
    assert c.e2_radius == pytest.approx(np.sqrt(2) * near_params.rho0, rel=0.05)
    assert q.e2_radius / c.e2_radius == pytest.approx(1 / np.sqrt(2), rel=0.05)


def test_far_field_thermal_is_upright_and_ps_is_inverted():
    p = GaussianSchellParams(P=1.0, a0=1e-3, rho0=1e-4, T0=1.0)
    geom = PropagationGeometry(L=100.0, k0=2 * np.pi / 1e-6)
    grid = TransverseGrid(256, 0.005)
    setup = DetectionSetup(filter_width=1.0)
    mask = point_mask(grid, 0.05)
    t = measure_psf(analytic_image(Preset.THERMAL_MAX, p, geom, mask, setup))
    s = measure_psf(analytic_image(Preset.CLASSICAL_PS_MAX, p, geom, mask, setup))
    assert t.peak_position > 0 > s.peak_position
    assert s.peak_position == pytest.approx(-t.peak_position, abs=1e-12)


def test_intermediate_regime_refused():
    p = GaussianSchellParams(P=1.0, a0=2e-3, rho0=1e-4, T0=1.0)
    grid = TransverseGrid(16, 1e-5)
    with pytest.raises(IntermediateRegime):
        analytic_image(Preset.THERMAL_MAX, p, PropagationGeometry(2.0, 1e7), point_mask(grid), DetectionSetup(1.0))


def test_ac_coupling_drops_background(near_params):
    grid = TransverseGrid(32, near_params.rho0 / 4)
    setup = DetectionSetup(filter_width=1.0)
    scan = analytic_image(Preset.THERMAL_MAX, near_params, None, uniform_mask(grid), setup, ac_coupled=True)
    assert np.all(scan.background == 0)
    with pytest.raises(InvalidParams):
        contrast(scan, near_params, setup)


def test_contrast_region_limit(near_params):
    grid = TransverseGrid(32, near_params.rho0 / 4)
    setup = DetectionSetup(filter_width=1.0)
    scan = analytic_image(Preset.THERMAL_MAX, near_params, None, uniform_mask(grid), setup)
    with pytest.raises(RegionTooLarge):
        contrast(scan, near_params, setup, region_half_width=near_params.a0)


def test_measured_contrast_matches_closed_form_for_isolated_cells():
    p = GaussianSchellParams(P=1.0, a0=1.0, rho0=1e-3, T0=1.0)
    grid = TransverseGrid(2048, p.rho0 / 8)
    setup = DetectionSetup(filter_width=1.0)
    mask = cells_mask(grid, [-2e-3, 0.0, 2e-3], p.rho0)
    scan = analytic_image(Preset.THERMAL_MAX, p, None, mask, setup)
    # keep the region small enough that the background is flat across it
    measured = contrast(scan, p, setup, region_half_width=5e-3)
    closed = contrast_closed_form(Preset.THERMAL_MAX, p, mask, setup, region_half_width=5e-3)
    assert measured.contrast == pytest.approx(closed.contrast, rel=1e-3)
    assert closed.temporal == pytest.approx(1 / np.sqrt(1 + 0.25))


def test_binary_approximation_value(near_params):
    grid = TransverseGrid(256, near_params.rho0 / 4)
    mask = slit_mask(grid, 10 * near_params.rho0)
    r = contrast_closed_form(Preset.THERMAL_MAX, near_params, mask, DetectionSetup(filter_width=near_params.T0), binary_approximation=True)
    assert r.approximated
    assert r.spatial == pytest.approx(near_params.rho0 / mask.effective_area)
