"""Classical Gaussian states that reproduce arbitrary cross-correlations.

Given a phase-insensitive cross kernel ``Kn(x1, x2) = <E_S^*(x1) E_R(x2)>``
and a phase-sensitive one ``Kp(x1, x2) = <E_S(x1) E_R(x2)>``, their singular
value decompositions

    Kn = sum_m eta_m conj(phi_m(x1)) Phi_m(x2),    Kp = sum_m mu_m psi_m(x1) Psi_m(x2)

define four sets of modes.  Fields ``E_S' = sum a_S'm phi_m``, ``E_R' = sum a_R'm Phi_m``,
``E_S'' = sum a_S''m psi_m``, ``E_R'' = sum a_R''m Psi_m`` with mode correlations
``<a_S'^* a_R'> = 2 eta``, ``<a_S'' a_R''> = 2 mu`` and populations at the
classical lower bounds ``2 eta`` and ``2 mu`` combine as
``E_S = (E_S' + E_S'') / sqrt(2)`` (likewise ``E_R``) into a classical state
with exactly the prescribed cross-correlations.

Kernels are matrices over a sample index (a spatial grid, or a flattened
space-time grid); ``cell_measure`` is the quadrature weight of one sample so
that matrix orthonormality equals continuous orthonormality.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidParams, ToleranceUnreachable

DEFAULT_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class PrescribedKernels:
    """Cross kernels to reproduce; rows index the signal sample, columns the reference sample."""

    Kn: np.ndarray
    Kp: np.ndarray
    cell_measure: float = 1.0

    def __post_init__(self):
        kn = np.array(self.Kn, dtype=complex)
        kp = np.array(self.Kp, dtype=complex)
        if kn.ndim != 2 or kp.shape != kn.shape:
            raise InvalidParams(f"Kn and Kp must be matrices of equal shape, got {kn.shape} and {kp.shape}")
        if not (np.all(np.isfinite(kn)) and np.all(np.isfinite(kp))):
            raise InvalidParams("prescribed kernels contain non-finite entries")
        if not self.cell_measure > 0:
            raise InvalidParams("cell measure must be positive")
        object.__setattr__(self, "Kn", kn)
        object.__setattr__(self, "Kp", kp)

    @classmethod
    def space_time(cls, Kn_x, Rn_t, Kp_x, Rp_t, dx: float, dt: float) -> "PrescribedKernels":
        """Cross-spectrally pure kernels ``K(x1, x2) R(t1, t2)`` flattened to index ``(x, t)``."""
        return cls(np.kron(Kn_x, Rn_t), np.kron(Kp_x, Rp_t), dx * dt)

    @property
    def shape(self):
        return self.Kn.shape


@dataclass(frozen=True, eq=False)
class ModalDecomposition:
    """Truncated singular systems of ``Kn`` and ``Kp``; mode functions are matrix columns."""

    eta: np.ndarray
    phi: np.ndarray
    Phi: np.ndarray
    mu: np.ndarray
    psi: np.ndarray
    Psi: np.ndarray
    cell_measure: float
    tol: float
    full_rank_n: int
    full_rank_p: int
    residual_n: float = 0.0
    residual_p: float = 0.0

    @property
    def rank_n(self) -> int:
        return len(self.eta)

    @property
    def rank_p(self) -> int:
        return len(self.mu)

    @property
    def n_modes(self) -> int:
        """Truncation rank (the larger of the two sums)."""
        return max(self.rank_n, self.rank_p)

    @property
    def rank_deficient(self) -> bool:
        """Either prescribed kernel has numerical rank below its smaller dimension (informational)."""
        dim = min(self.phi.shape[0], self.Phi.shape[0])
        return self.full_rank_n < dim or self.full_rank_p < dim

    @property
    def truncated(self) -> bool:
        """The tolerance dropped modes the kernels numerically carry."""
        return self.rank_n < self.full_rank_n or self.rank_p < self.full_rank_p

    def gram(self, modes: np.ndarray) -> np.ndarray:
        """Continuous inner products ``<f_m, f_n> = sum conj(f_m) f_n * cell_measure``."""
        return modes.conj().T @ modes * self.cell_measure

    def kn(self) -> np.ndarray:
        return (np.conj(self.phi) * self.eta) @ self.Phi.T

    def kp(self) -> np.ndarray:
        return (self.psi * self.mu) @ self.Psi.T


def _truncate(s: np.ndarray, norm: float, tol: float) -> int:
    """Smallest rank whose Frobenius tail is at most ``tol * norm``."""
    if norm == 0.0:
        return 0
    tail = np.sqrt(np.concatenate([np.cumsum((s**2)[::-1])[::-1], [0.0]]))
    return int(np.argmax(tail <= tol * norm))


def _svd(A: np.ndarray, tol: float):
    u, s, vh = np.linalg.svd(A, full_matrices=False)
    norm = float(np.linalg.norm(A))
    rank = _truncate(s, norm, tol)
    # the SVD itself carries rounding error; grow the rank until the actual residual is within tol
    while True:
        approx = (u[:, :rank] * s[:rank]) @ vh[:rank]
        residual = float(np.linalg.norm(A - approx))
        if residual <= tol * norm or norm == 0.0:
            break
        if rank == len(s):
            raise ToleranceUnreachable(
                f"full-rank reconstruction error {residual / norm:.3g} exceeds tolerance {tol:.3g}"
            )
        rank += 1
    full_rank = int(np.sum(s > max(A.shape) * np.finfo(float).eps * (s[0] if len(s) else 0.0)))
    return u[:, :rank], s[:rank], vh[:rank], residual / norm if norm else 0.0, full_rank


def svd_decompose(prescribed: PrescribedKernels, tol: float = DEFAULT_TOL) -> ModalDecomposition:
    """Singular systems of both kernels, truncated to Frobenius accuracy ``tol``.

    With ``A = cell_measure * K = U S V^H``: ``eta = S``, ``phi = conj(U) / sqrt(d)``,
    ``Phi = conj(V) / sqrt(d)`` for the phase-insensitive kernel and ``psi = U / sqrt(d)``,
    ``Psi = conj(V) / sqrt(d)`` for the phase-sensitive one (a general complex
    SVD; ``psi`` need not equal ``Psi`` even for symmetric ``Kp``).
    """
    if not tol >= 0:
        raise InvalidParams("tolerance must be non-negative")
    d = prescribed.cell_measure
    root = np.sqrt(d)
    un, sn, vhn, rn, fn = _svd(d * prescribed.Kn, tol)
    up, sp, vhp, rp, fp = _svd(d * prescribed.Kp, tol)
    return ModalDecomposition(
        eta=sn,
        phi=np.conj(un) / root,
        Phi=vhn.T / root,
        mu=sp,
        psi=up / root,
        Psi=vhp.T / root,
        cell_measure=d,
        tol=tol,
        full_rank_n=fn,
        full_rank_p=fp,
        residual_n=rn,
        residual_p=rp,
    )


@dataclass(frozen=True, eq=False)
class ClassicalModalState:
    """Second moments of the four modal field sets.

    ``pop_*`` are ``<a^* a>`` per mode; ``cross_pi[m] = <a_S'm^* a_R'm>`` and
    ``cross_ps[m] = <a_S''m a_R''m>``.  All other modal moments vanish.
    """

    pop_S1: np.ndarray
    pop_R1: np.ndarray
    pop_S2: np.ndarray
    pop_R2: np.ndarray
    cross_pi: np.ndarray
    cross_ps: np.ndarray
    combiner: float = 1.0 / np.sqrt(2.0)

    @property
    def total_signal_population(self) -> float:
        """Mean signal photon number ``(sum pop_S1 + sum pop_S2) / 2`` after the combiner."""
        return float(self.combiner**2 * (np.sum(self.pop_S1) + np.sum(self.pop_S2)))

    def covariances(self):
        """Normally ordered ``N = <alpha^* alpha^T>`` and ``P = <alpha alpha^T>``.

        The amplitude vector is ``alpha = [a_S', a_R', a_S'', a_R'']``.
        """
        m1, m2 = len(self.pop_S1), len(self.pop_S2)
        n = 2 * m1 + 2 * m2
        N = np.zeros((n, n), dtype=complex)
        P = np.zeros((n, n), dtype=complex)
        s1, r1 = np.arange(m1), m1 + np.arange(m1)
        s2, r2 = 2 * m1 + np.arange(m2), 2 * m1 + m2 + np.arange(m2)
        N[s1, s1], N[r1, r1] = self.pop_S1, self.pop_R1
        N[s2, s2], N[r2, r2] = self.pop_S2, self.pop_R2
        N[s1, r1] = self.cross_pi
        N[r1, s1] = np.conj(self.cross_pi)
        P[s2, r2] = self.cross_ps
        P[r2, s2] = self.cross_ps
        return N, P


def build_classical_state(decomp: ModalDecomposition) -> ClassicalModalState:
    """Populations at the classical lower bounds ``2 eta_m`` and ``2 mu_m``."""
    eta2 = 2.0 * decomp.eta
    mu2 = 2.0 * decomp.mu
    return ClassicalModalState(
        pop_S1=eta2.copy(),
        pop_R1=eta2.copy(),
        pop_S2=mu2.copy(),
        pop_R2=mu2.copy(),
        cross_pi=eta2.astype(complex),
        cross_ps=mu2.astype(complex),
    )


def field_maps(state: ClassicalModalState, decomp: ModalDecomposition):
    """Linear maps ``E_S = G_S alpha`` and ``E_R = G_R alpha`` from mode amplitudes to samples."""
    c = state.combiner
    n_s = decomp.phi.shape[0]
    n_r = decomp.Phi.shape[0]
    m1, m2 = decomp.rank_n, decomp.rank_p
    z_s1 = np.zeros((n_s, m1))
    z_s2 = np.zeros((n_s, m2))
    z_r1 = np.zeros((n_r, m1))
    z_r2 = np.zeros((n_r, m2))
    G_S = c * np.hstack([decomp.phi, z_s1, decomp.psi, z_s2])
    G_R = c * np.hstack([z_r1, decomp.Phi, z_r2, decomp.Psi])
    return G_S, G_R


def reconstruct_cross_correlations(state: ClassicalModalState, decomp: ModalDecomposition):
    """``(Kn, Kp)`` of the combined fields, computed from the full modal covariance."""
    N, P = state.covariances()
    G_S, G_R = field_maps(state, decomp)
    kn = np.conj(G_S) @ N @ G_R.T
    kp = G_S @ P @ G_R.T
    return kn, kp


def auto_correlations(state: ClassicalModalState, decomp: ModalDecomposition):
    """Phase-insensitive auto-correlations ``(K_SS, K_RR)`` implied by the construction."""
    N, _ = state.covariances()
    G_S, G_R = field_maps(state, decomp)
    return np.conj(G_S) @ N @ G_S.T, np.conj(G_R) @ N @ G_R.T


@dataclass(frozen=True)
class ClassicalityReport:
    classical: bool
    offending_modes: list = field(default_factory=list)
    margins_pi: tuple = ()
    margins_ps: tuple = ()

    def __bool__(self) -> bool:
        return self.classical


def verify_classical(state: ClassicalModalState, rtol: float = 1e-12) -> ClassicalityReport:
    """Per-mode Cauchy-Schwarz check ``|cross|^2 <= pop_S pop_R`` for both mode families.

    ``offending_modes`` lists ``("pi", m)`` / ``("ps", m)`` pairs that fail.
    """
    offending = []
    margins = {}
    for kind, cross, ps, pr in (
        ("pi", state.cross_pi, state.pop_S1, state.pop_R1),
        ("ps", state.cross_ps, state.pop_S2, state.pop_R2),
    ):
        bound = np.asarray(ps) * np.asarray(pr)
        c2 = np.abs(np.asarray(cross)) ** 2
        margins[kind] = tuple(float(v) for v in bound - c2)
        bad = c2 > bound + rtol * np.maximum(bound, c2)
        bad |= (np.asarray(ps) < 0) | (np.asarray(pr) < 0)
        offending.extend((kind, int(m)) for m in np.nonzero(bad)[0])
    return ClassicalityReport(not offending, offending, margins["pi"], margins["ps"])


def construct(prescribed: PrescribedKernels, tol: float = DEFAULT_TOL):
    """Decompose, build and verify in one call.

    Returns ``(decomp, state, report, reconstruction_error)`` where the error is
    the larger relative Frobenius error of the two reconstructed kernels.
    """
    decomp = svd_decompose(prescribed, tol)
    state = build_classical_state(decomp)
    kn, kp = reconstruct_cross_correlations(state, decomp)
    err = max(_relative_error(kn, prescribed.Kn), _relative_error(kp, prescribed.Kp))
    return decomp, state, verify_classical(state), err


def _relative_error(a: np.ndarray, b: np.ndarray) -> float:
    norm = float(np.linalg.norm(b))
    diff = float(np.linalg.norm(a - b))
    return diff / norm if norm else diff


def random_kernels(n: int, rng: Optional[np.random.Generator] = None, cell_measure: float = 1.0) -> PrescribedKernels:
    """Random complex Gaussian kernel pair, handy for property checks."""
    rng = np.random.default_rng() if rng is None else rng
    shape = (n, n)
    kn = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    kp = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return PrescribedKernels(kn, kp, cell_measure)
