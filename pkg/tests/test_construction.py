import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from ghostimaging.construction import (
    PrescribedKernels,
    auto_correlations,
    build_classical_state,
    construct,
    random_kernels,
    reconstruct_cross_correlations,
    svd_decompose,
    verify_classical,
)
from ghostimaging.errors import InvalidParams, ToleranceUnreachable


def _gamma(state):
    """Joint covariance of (alpha, alpha^*); a proper P-representation needs it PSD."""
    N, P = state.covariances()
    return np.block([[N.T, P], [P.conj(), N]])


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 24), seed=st.integers(0, 2**32 - 1), d=st.floats(1e-3, 1e3))
def test_random_kernels_reconstructed_by_classical_state(n, seed, d):
    prescribed = random_kernels(n, np.random.default_rng(seed), d)
    decomp, state, report, err = construct(prescribed, 1e-10)
    assert err <= 1e-10
    assert report.classical and bool(report)
    g = _gamma(state)
    assert np.linalg.eigvalsh(g).min() >= -1e-10 * np.abs(g).max()


def test_modes_are_orthonormal_under_cell_measure():
    prescribed = random_kernels(12, np.random.default_rng(3), 0.25)
    decomp = svd_decompose(prescribed)
    for modes in (decomp.phi, decomp.Phi, decomp.psi, decomp.Psi):
        assert np.allclose(decomp.gram(modes), np.eye(modes.shape[1]), atol=1e-12)


def test_singular_values_match_reference_svd():
    prescribed = random_kernels(10, np.random.default_rng(9), 0.5)
    decomp = svd_decompose(prescribed, tol=1e-13)
    assert np.allclose(decomp.eta, scipy.linalg.svdvals(0.5 * prescribed.Kn), rtol=1e-12)
    assert np.allclose(decomp.mu, scipy.linalg.svdvals(0.5 * prescribed.Kp), rtol=1e-12)
    assert np.allclose(decomp.kn(), prescribed.Kn, atol=1e-12)
    assert np.allclose(decomp.kp(), prescribed.Kp, atol=1e-12)


def test_low_rank_kernels_use_few_modes():
    rng = np.random.default_rng(5)
    u = rng.standard_normal((20, 2)) + 1j * rng.standard_normal((20, 2))
    v = rng.standard_normal((2, 20))
    kn = u @ v
    kp = np.outer(u[:, 0], u[:, 0])
    decomp, state, report, err = construct(PrescribedKernels(kn, kp))
    assert decomp.rank_n == 2 and decomp.rank_p == 1
    assert decomp.rank_deficient
    assert err <= 1e-8 and report.classical


def test_loose_tolerance_truncates():
    s = np.array([1.0, 1e-2, 1e-5])
    q1, _ = np.linalg.qr(np.random.default_rng(1).standard_normal((3, 3)))
    kn = (q1 * s) @ q1.T
    decomp = svd_decompose(PrescribedKernels(kn, kn), tol=1e-3)
    assert decomp.rank_n == 2
    assert decomp.truncated and not decomp.rank_deficient
    assert decomp.residual_n <= 1e-3


def test_zero_tolerance_unreachable():
    with pytest.raises(ToleranceUnreachable):
        svd_decompose(random_kernels(4, np.random.default_rng(0)), tol=0.0)


def test_auto_correlations_are_valid_pi_kernels():
    prescribed = random_kernels(8, np.random.default_rng(2))
    decomp, state, _, _ = construct(prescribed)
    for K in auto_correlations(state, decomp):
        assert np.allclose(K, K.conj().T)
        assert np.linalg.eigvalsh(K).min() > -1e-10 * np.abs(K).max()


def test_reconstruction_uses_modal_covariance():
    prescribed = random_kernels(6, np.random.default_rng(4))
    decomp = svd_decompose(prescribed)
    state = build_classical_state(decomp)
    kn, kp = reconstruct_cross_correlations(state, decomp)
    assert np.allclose(kn, prescribed.Kn, atol=1e-12)
    assert np.allclose(kp, prescribed.Kp, atol=1e-12)


def test_under_populated_mode_is_flagged():
    decomp = svd_decompose(random_kernels(6, np.random.default_rng(7)))
    state = build_classical_state(decomp)
    pop = state.pop_S1.copy()
    pop[0] *= 0.5
    from dataclasses import replace

    broken = replace(state, pop_S1=pop)
    report = verify_classical(broken)
    assert not report.classical
    assert report.offending_modes == [("pi", 0)]
    assert np.linalg.eigvalsh(_gamma(broken)).min() < 0


def test_input_validation():
    with pytest.raises(InvalidParams):
        PrescribedKernels(np.eye(3), np.eye(2))
    with pytest.raises(InvalidParams):
        PrescribedKernels(np.eye(2) * np.nan, np.eye(2))
    with pytest.raises(InvalidParams):
        PrescribedKernels(np.eye(2), np.eye(2), cell_measure=0)


def test_space_time_kernels_are_kronecker_products():
    kx = np.array([[1, 0.5], [0.5, 1]])
    rt = np.array([[1, 0.2, 0], [0.2, 1, 0.2], [0, 0.2, 1]])
    p = PrescribedKernels.space_time(kx, rt, kx, rt, 0.1, 0.01)
    assert p.shape == (6, 6)
    assert p.cell_measure == pytest.approx(1e-3)
    _, _, report, err = construct(p)
    assert report.classical and err < 1e-8
