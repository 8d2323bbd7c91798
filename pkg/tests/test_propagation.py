import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from ghostimaging import Flavor, GaussianSchellParams, PropagationGeometry, TransverseGrid, fresnel_report
from ghostimaging.errors import GridTooSmall, IntermediateRegime, InvalidParams, SamplingTooCoarse
from ghostimaging.propagation import (
    FresnelOperator,
    analytic_detection_kernel,
    chirp_output_grid,
    greens_function_1d,
    propagate_pi,
    propagate_ps,
)
from ghostimaging.source_models import CorrelationKernel, make_gaussian_schell_kernel


def gaussian_beam(x, w, geom):
    """Closed-form 1D Fresnel integral of exp(-x^2/w^2)."""
    a = 1 / w**2 - 1j * geom.k0 / (2 * geom.L)
    beta = geom.k0 / (2 * geom.L)
    pref = np.sqrt(geom.k0 / (2j * np.pi * geom.L)) * np.exp(1j * geom.k0 * geom.L)
    return pref * np.sqrt(np.pi / a) * np.exp(1j * beta * x**2 - beta**2 * x**2 / a)


def test_fresnel_numbers():
    p = GaussianSchellParams(P=1.0, a0=2e-3, rho0=1e-4, T0=1.0)
    geom = PropagationGeometry(L=2.0, k0=1e7)
    r = fresnel_report(p, geom)
    assert r.D0 == pytest.approx(1e7 * 1e-4 * 2e-3 / 4)
    assert r.DN == pytest.approx(1e7 * 1e-8 / 4)
    assert r.DF == pytest.approx(1e7 * 4e-6 / 4)
    assert r.aL == pytest.approx(4 / (1e7 * 1e-4))
    assert r.rhoL == pytest.approx(4 / (1e7 * 2e-3))
    assert r.regime_pi == "intermediate"
    assert fresnel_report(p, PropagationGeometry(1e-3, 1e7)).regime_pi == "near"
    assert fresnel_report(p, PropagationGeometry(1e3, 1e7)).regime_pi == "far"


def test_wavelength_constructor():
    assert PropagationGeometry.from_wavelength(1.0, 1e-6).k0 == pytest.approx(2 * np.pi / 1e-6)


def test_greens_function_against_numerical_quadrature():
    # oracle: adaptive quadrature of the Fresnel integral of a Gaussian
    geom = PropagationGeometry(L=0.5, k0=50.0)
    w = 0.2
    g = lambda xp, x: greens_function_1d(geom, x - xp) * np.exp(-xp**2 / w**2)
    for x in (0.0, 0.13, -0.4):
        re = integrate.quad(lambda t: g(t, x).real, -2, 2, limit=400)[0]
        im = integrate.quad(lambda t: g(t, x).imag, -2, 2, limit=400)[0]
        assert re + 1j * im == pytest.approx(gaussian_beam(np.array(x), w, geom), rel=1e-8)


@pytest.mark.parametrize("method", ["direct", "transfer", "chirp"])
def test_operator_methods_reproduce_gaussian_beam(method):
    geom = PropagationGeometry(L=0.02, k0=2000.0) if method == "transfer" else PropagationGeometry(L=1.0, k0=200.0)
    w = 0.1
    grid = TransverseGrid(256, w / 16)
    op = FresnelOperator(geom, grid, None if method != "direct" else TransverseGrid(128, 0.01), method)
    out = op.apply(np.exp(-grid.x**2 / w**2))
    expected = gaussian_beam(op.grid_out.x, w, geom)
    assert op.method == method
    assert np.max(np.abs(out - expected)) < 1e-6 * np.max(np.abs(expected))


def test_chirp_grid_spacing():
    geom = PropagationGeometry(L=3.0, k0=7.0)
    grid = TransverseGrid(64, 0.5)
    assert chirp_output_grid(geom, grid).spacing == pytest.approx(2 * np.pi * 3.0 / (7.0 * 64 * 0.5))


def test_operator_rejects_undersampled_chirp():
    geom = PropagationGeometry(L=1e-3, k0=1e6)
    grid = TransverseGrid(64, 1e-3)
    with pytest.raises(SamplingTooCoarse):
        FresnelOperator(geom, grid, TransverseGrid(64, 2e-3), "direct")


def test_transfer_requires_same_grid():
    geom = PropagationGeometry(L=1.0, k0=1.0)
    with pytest.raises(InvalidParams):
        FresnelOperator(geom, TransverseGrid(8, 1.0), TransverseGrid(8, 2.0), "transfer")


def _coherent_kernel(field, grid, flavor):
    if flavor is Flavor.PHASE_INSENSITIVE:
        return CorrelationKernel(grid, np.outer(field.conj(), field), flavor)
    return CorrelationKernel(grid, np.outer(field, field), flavor)


@pytest.mark.parametrize("flavor", list(Flavor))
def test_kernel_of_coherent_field_propagates_like_the_field(flavor):
    geom = PropagationGeometry(L=1.0, k0=200.0)
    grid = TransverseGrid(128, 0.1 / 16)
    field = np.exp(-grid.x**2 / 0.1**2 + 1j * 30 * grid.x)
    out_grid = TransverseGrid(128, 0.01)
    prop = propagate_pi if flavor is Flavor.PHASE_INSENSITIVE else propagate_ps
    k_out = prop(_coherent_kernel(field, grid, flavor), geom, out_grid=out_grid)
    e_out = FresnelOperator(geom, grid, out_grid).apply(field)
    expected = _coherent_kernel(e_out, out_grid, flavor).values
    assert np.max(np.abs(k_out.values - expected)) < 1e-12 * np.max(np.abs(expected))


@settings(max_examples=15, deadline=None)
@given(L=st.floats(0.2, 5.0), ratio=st.floats(0.1, 0.5))
def test_flux_conserved_by_pi_propagation(L, ratio):
    p = GaussianSchellParams(P=1.0, a0=0.1, rho0=0.1 * ratio, T0=1.0)
    geom = PropagationGeometry(L=L, k0=100.0)
    k = make_gaussian_schell_kernel(p, TransverseGrid(96, p.rho0 / 4))
    out = propagate_pi(k, geom)
    flux_in = np.sum(k.diagonal) * k.grid.spacing
    flux_out = np.sum(out.diagonal) * out.grid.spacing
    assert flux_out == pytest.approx(flux_in, rel=5e-3)
    assert np.allclose(out.values, out.values.conj().T)


def test_ps_propagation_is_transpose_symmetric():
    p = GaussianSchellParams(P=1.0, a0=0.1, rho0=0.02, T0=1.0)
    k = make_gaussian_schell_kernel(p, TransverseGrid(96, p.rho0 / 4), Flavor.PHASE_SENSITIVE)
    out = propagate_ps(k, PropagationGeometry(L=1.0, k0=100.0))
    assert np.allclose(out.values, out.values.T)


def test_grid_too_small_detected():
    p = GaussianSchellParams(P=1.0, a0=0.1, rho0=0.02, T0=1.0)
    k = make_gaussian_schell_kernel(p, TransverseGrid(96, p.rho0 / 4))
    with pytest.raises(GridTooSmall):
        propagate_pi(k, PropagationGeometry(L=5.0, k0=100.0), out_grid=TransverseGrid(32, 0.005))


def test_flavor_mismatch_rejected():
    p = GaussianSchellParams(P=1.0, a0=0.1, rho0=0.02, T0=1.0)
    k = make_gaussian_schell_kernel(p, TransverseGrid(32, p.rho0 / 4))
    with pytest.raises(InvalidParams):
        propagate_ps(k, PropagationGeometry(L=1.0, k0=100.0))


def test_far_field_kernels_approach_closed_form():
    p = GaussianSchellParams(P=1.0, a0=1e-3, rho0=1e-4, T0=1.0)
    geom = PropagationGeometry(L=100.0, k0=2 * np.pi / 1e-6)
    r = fresnel_report(p, geom)
    assert r.regime_pi == r.regime_ps == "far"
    src = TransverseGrid(128, p.rho0 / 4)
    out = TransverseGrid(128, r.aL / 20)
    for flavor, prop in ((Flavor.PHASE_INSENSITIVE, propagate_pi), (Flavor.PHASE_SENSITIVE, propagate_ps)):
        k = prop(make_gaussian_schell_kernel(p, src, flavor), geom, out_grid=out)
        ref = analytic_detection_kernel(p, geom, out, flavor)
        err = np.max(np.abs(np.abs(k.values) - np.abs(ref.values))) / np.max(np.abs(ref.values))
        assert err < 0.01


def test_analytic_kernel_refuses_intermediate_regime():
    p = GaussianSchellParams(P=1.0, a0=2e-3, rho0=1e-4, T0=1.0)
    with pytest.raises(IntermediateRegime):
        analytic_detection_kernel(p, PropagationGeometry(L=2.0, k0=1e7), TransverseGrid(16, 1e-5))
