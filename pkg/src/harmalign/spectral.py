"""Graph Fourier basis and diffusion coordinates.

The graph Fourier basis is the symmetric eigendecomposition of
``A = I - L = D^{-1/2} W D^{-1/2}`` with eigenvalues sorted descending.  A
symmetric solver (not an SVD) is used deliberately: slightly negative
eigenvalues of A must keep their sign so the clamp into [0, 1] is principled.
Each eigenvector is sign-normalized so that its largest-magnitude entry is
positive, making the basis deterministic away from eigenvalue ties.

Diffusion coordinates follow ``psi_j = D^{1/2} phi_j``, i.e.
``Phi_0 = D^{-1/2} Psi`` and ``Phi_t = Phi_0 Lambda^t``.  The opposite
``D^{1/2}`` scaling is available behind a flag for comparison.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .graph import KernelGraph


@dataclass(frozen=True)
class FourierBasis:
    """Orthonormal eigenvectors Psi and eigenvalues of I - L, sorted descending.

    Eigenvalues are clamped into [0, 1] after decomposition; the degree vector
    of the originating graph is carried along for diffusion-coordinate scaling.
    """

    psi: np.ndarray  # (N, r)
    lam: np.ndarray  # (r,)
    degrees: np.ndarray  # (N,)

    @property
    def rank(self) -> int:
        return self.psi.shape[1]


@dataclass(frozen=True)
class DiffusionEmbedding:
    """Diffusion coordinates Phi (rows = points) with eigenvalues and time t."""

    phi: np.ndarray
    lam: np.ndarray
    t: int


def canonical_signs(psi: np.ndarray) -> np.ndarray:
    """Flip eigenvector signs so each column's largest-magnitude entry is positive.

    Idempotent; applied on construction and again inside the alignment
    pipeline so externally sign-flipped bases align identically.
    """
    idx = np.abs(psi).argmax(axis=0)
    signs = np.sign(psi[idx, np.arange(psi.shape[1])])
    signs[signs == 0] = 1.0
    return psi * signs


def fourier_basis(g: KernelGraph, rank: int | None = None) -> FourierBasis:
    """Eigendecomposition of I - L, optionally truncated to the top ``rank`` pairs.

    Parameters
    ----------
    g : KernelGraph
    rank : int, optional
        Number of leading eigenpairs to keep.  ``None`` or ``rank >= N`` gives
        the full dense decomposition; smaller ranks use an iterative Lanczos
        solver with a fixed starting vector for determinism.

    Returns
    -------
    FourierBasis
        Eigenvalues sorted descending and clamped into [0, 1]; sign convention
        applied.
    """
    n = g.n_points
    if rank is not None and rank < 1:
        raise ValueError(f"rank must be positive, got {rank}")
    A = np.eye(n) - g.L
    A = 0.5 * (A + A.T)
    if rank is None or rank >= n:
        lam, psi = scipy.linalg.eigh(A)
        lam, psi = lam[::-1], psi[:, ::-1]
    else:
        v0 = np.full(n, 1.0 / np.sqrt(n))
        try:
            lam, psi = scipy.sparse.linalg.eigsh(A, k=rank, which="LA", v0=v0)
        except scipy.sparse.linalg.ArpackNoConvergence as exc:  # pragma: no cover
            raise RuntimeError(
                f"eigensolver failed to converge: {len(exc.eigenvalues)} of "
                f"{rank} eigenpairs found"
            ) from exc
        order = np.argsort(lam)[::-1]
        lam, psi = lam[order], psi[:, order]
    psi = canonical_signs(np.ascontiguousarray(psi))
    lam = np.clip(lam, 0.0, 1.0)
    return FourierBasis(psi=psi, lam=lam, degrees=g.degrees)


def drop_trivial(b: FourierBasis) -> FourierBasis:
    """Remove the leading (trivial, eigenvalue-1) eigenpair."""
    if b.rank < 2:
        raise ValueError(f"cannot drop the trivial component of a rank-{b.rank} basis")
    return FourierBasis(psi=b.psi[:, 1:], lam=b.lam[1:], degrees=b.degrees)


def degenerate_gaps(lam: np.ndarray, tol: float = 1e-10) -> list[int]:
    """Indices i where lam[i] - lam[i+1] < tol (basis defined only up to rotation)."""
    gaps = -np.diff(lam)
    return [int(i) for i in np.flatnonzero(gaps < tol)]


def diffusion_coordinates(
    b: FourierBasis, t: int, literal_degree_scaling: bool = False
) -> DiffusionEmbedding:
    """Diffusion coordinates ``Phi_t = D^{-1/2} Psi Lambda^t``.

    Parameters
    ----------
    b : FourierBasis
    t : int
        Non-negative diffusion time.
    literal_degree_scaling : bool
        If True use ``Phi_0 = D^{1/2} Psi`` instead of the default
        ``D^{-1/2} Psi`` (the two degree-scaling conventions in circulation).
    """
    if t < 0 or t != int(t):
        raise ValueError(f"diffusion time must be a non-negative integer, got {t}")
    power = 0.5 if literal_degree_scaling else -0.5
    scale = b.degrees**power
    phi = scale[:, None] * b.psi * b.lam[None, :] ** int(t)
    return DiffusionEmbedding(phi=phi, lam=b.lam, t=int(t))
