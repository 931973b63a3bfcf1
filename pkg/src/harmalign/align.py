"""Isometric alignment of diffusion geometries via bandlimited correlation.

Pipeline for a pair of datasets sharing a feature space:

1. build a kernel graph and graph Fourier basis per dataset;
2. drop the trivial (eigenvalue-1) harmonic;
3. transform the features into each basis (``Xh = Psi^T X``);
4. correlate harmonics across datasets, masked by bandlimiting weights so
   only harmonics of similar frequency may match
   (``C = w * (Xh Yh^T)`` elementwise);
5. orthogonalize C by SVD (``C = U S V^T``, ``T = U V^T``), the nearest
   isometry between the two diffusion coordinate systems;
6. assemble the unified diffusion map placing both datasets in shared
   coordinates:

       Phi_t = [[Phi0_x,        Phi0_x T ],    * blockdiag(Lam_x, Lam_y)^t
                [Phi0_y T^T,    Phi0_y   ]]

The n-dataset generalization computes a pairwise map ``T(i->j)`` for every
pair (its adjoint serving the reverse direction) and assembles the analogous
n-by-n block matrix.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .core import DataMatrix
from .filters import bandlimiting_weights
from .graph import (
    BandwidthSpec,
    KernelGraph,
    anisotropic_kernel_graph,
    gauss_kernel_graph,
)
from .spectral import (
    FourierBasis,
    canonical_signs,
    degenerate_gaps,
    drop_trivial,
    fourier_basis,
)

#: datasets larger than this use iterative rank-RANK_AUTO truncation by default
FULL_DECOMPOSITION_LIMIT = 2000
RANK_AUTO = 100


@dataclass(frozen=True)
class AlignmentParams:
    """Knobs of the alignment pipeline.

    Attributes
    ----------
    n_bands : int
        Itersine band count for the bandlimiting weights.
    t : int
        Diffusion time of the output embedding.
    kernel : {"adaptive", "fixed", "anisotropic"}
        Graph construction: symmetric adaptive Gaussian (default),
        fixed-bandwidth Gaussian, or density-normalized anisotropic kernel.
    knn : int
        Neighbor index for the adaptive bandwidth.
    sigma : float, optional
        Bandwidth for the fixed and anisotropic kernels.
    knn_fraction : float, optional
        When set, overrides ``knn`` with ``round(knn_fraction * N)`` per
        dataset, holding the neighborhood *fraction* constant across
        datasets of different sizes (their spectra then live on comparable
        frequency scales).
    rank : int, optional
        Spectral truncation; ``None`` selects full decomposition up to
        ``FULL_DECOMPOSITION_LIMIT`` points and rank ``RANK_AUTO`` beyond.
    normalize_scale : bool
        Rescale each dataset's rows of the unified embedding to unit mean
        norm.  Unit-norm eigenvectors make raw diffusion coordinates shrink
        like N^(-1/2), so datasets of different sizes otherwise sit at
        different radii in the shared space; a per-dataset scalar restores
        comparability without touching the geometry.  Off by default.
    anisotropy : float, optional
        Reserved density-normalization exponent; only the default (full
        normalization) is supported and any other value is rejected.
    literal_degree_scaling : bool
        Use ``Phi0 = D^{1/2} Psi`` instead of the default ``D^{-1/2} Psi``.
    strict_band_sum : bool
        Exclude the zero-frequency itersine band from the weight sum.
    standardize_features : bool
        Center and unit-scale feature columns before the Fourier transform
        (off by default; intended for features on incomparable scales).
    """

    n_bands: int = 8
    t: int = 1
    kernel: str = "adaptive"
    knn: int = 20
    knn_fraction: float | None = None
    sigma: float | None = None
    rank: int | None = None
    anisotropy: float | None = None
    normalize_scale: bool = False
    literal_degree_scaling: bool = False
    strict_band_sum: bool = False
    standardize_features: bool = False

    def __post_init__(self):
        if self.n_bands < 1:
            raise ValueError(f"band count must be >= 1, got {self.n_bands}")
        if self.t < 0 or self.t != int(self.t):
            raise ValueError(f"diffusion time must be a non-negative integer, got {self.t}")
        if self.kernel not in ("adaptive", "fixed", "anisotropic"):
            raise ValueError(f"unknown kernel {self.kernel!r}")
        if self.anisotropy is not None and self.anisotropy != 1.0:
            raise NotImplementedError(
                "partial anisotropic density normalization (anisotropy != 1) is "
                "not supported; use kernel='anisotropic' (full) or 'adaptive'"
            )


@dataclass(frozen=True)
class PreparedDataset:
    """Per-dataset intermediates: kernel graph and non-trivial Fourier basis."""

    data: DataMatrix
    graph: KernelGraph
    basis: FourierBasis


@dataclass(frozen=True)
class AlignmentResult:
    """Output of pairwise alignment.

    ``phi`` stacks the two datasets: rows ``blocks[0]`` belong to the first
    dataset, rows ``blocks[1]`` to the second.  ``T`` maps the first
    dataset's harmonics onto the second's.
    """

    C: np.ndarray
    T: np.ndarray
    phi: np.ndarray
    blocks: tuple  # ((0, N1), (N1, N1 + N2))
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class MultiAlignmentResult:
    """Output of n-dataset alignment.

    ``maps[(i, j)]`` carries the harmonic map from dataset i to dataset j;
    ``maps[(j, i)]`` is exactly its transpose.  ``phi`` is the n-by-n block
    embedding with ``row_ranges[i]`` / ``col_ranges[i]`` delimiting dataset
    i's rows and coordinate columns.
    """

    maps: dict
    phi: np.ndarray
    row_ranges: tuple
    col_ranges: tuple
    diagnostics: dict = field(default_factory=dict)


def gft_features(psi: np.ndarray, X) -> np.ndarray:
    """Graph Fourier transform of the feature columns: ``Xh = Psi^T X``."""
    values = X.values if isinstance(X, DataMatrix) else np.asarray(X, dtype=np.float64)
    if psi.shape[0] != values.shape[0]:
        raise ValueError(
            f"basis has {psi.shape[0]} rows but data has {values.shape[0]} points"
        )
    return psi.T @ values


def bandlimited_correlation(Xh: np.ndarray, Yh: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Cross-dataset harmonic correlation ``C = w * (Xh Yh^T)`` (elementwise mask)."""
    if Xh.shape[1] != Yh.shape[1]:
        raise ValueError(
            f"feature counts differ: {Xh.shape[1]} vs {Yh.shape[1]}"
        )
    if w.shape != (Xh.shape[0], Yh.shape[0]):
        raise ValueError(
            f"weight shape {w.shape} does not match ({Xh.shape[0]}, {Yh.shape[0]})"
        )
    return w * (Xh @ Yh.T)


def orthogonalize(C: np.ndarray) -> np.ndarray:
    """Nearest orthogonal map to C: ``T = U V^T`` from the SVD ``C = U S V^T``.

    For rectangular C the result has orthonormal rows or columns on the
    smaller side; it maximizes ``trace(T^T C)`` over all such maps.
    """
    if not np.all(np.isfinite(C)):
        raise ValueError("correlation matrix contains non-finite entries")
    U, _, Vt = scipy.linalg.svd(C, full_matrices=False)
    return U @ Vt


def unified_diffusion_map(
    phi_x0: np.ndarray,
    phi_y0: np.ndarray,
    lam_x: np.ndarray,
    lam_y: np.ndarray,
    T: np.ndarray,
    t: int,
) -> np.ndarray:
    """Assemble the shared-coordinate block embedding.

    The left column block lives in the first dataset's spectrum (scaled by
    ``lam_x**t``), the right block in the second's (scaled by ``lam_y**t``);
    the first dataset's rows are on top.
    """
    if t < 0 or t != int(t):
        raise ValueError(f"diffusion time must be a non-negative integer, got {t}")
    sx = lam_x ** int(t)
    sy = lam_y ** int(t)
    top = np.hstack([phi_x0 * sx[None, :], (phi_x0 @ T) * sy[None, :]])
    bottom = np.hstack([(phi_y0 @ T.T) * sx[None, :], phi_y0 * sy[None, :]])
    return np.vstack([top, bottom])


def _effective_rank(params: AlignmentParams, n: int) -> int | None:
    if params.rank is not None:
        return params.rank
    return None if n <= FULL_DECOMPOSITION_LIMIT else RANK_AUTO


def _build_graph(values: np.ndarray, params: AlignmentParams) -> KernelGraph:
    if params.kernel == "adaptive":
        k = params.knn
        if params.knn_fraction is not None:
            k = max(1, int(np.rint(params.knn_fraction * values.shape[0])))
        return gauss_kernel_graph(values, BandwidthSpec.adaptive(k))
    if params.kernel == "fixed":
        if params.sigma is None:
            raise ValueError("fixed kernel requires sigma")
        return gauss_kernel_graph(values, BandwidthSpec.fixed(params.sigma))
    if params.sigma is None:
        raise ValueError("anisotropic kernel requires sigma")
    return anisotropic_kernel_graph(values, params.sigma)


def prepare_dataset(X, params: AlignmentParams) -> PreparedDataset:
    """Run the per-dataset pipeline: graph, Fourier basis, trivial removal."""
    if not isinstance(X, DataMatrix):
        X = DataMatrix(values=np.asarray(X, dtype=np.float64))
    graph = _build_graph(X.values, params)
    basis = fourier_basis(graph, rank=_effective_rank(params, X.n_points))
    basis = drop_trivial(basis)
    return PreparedDataset(data=X, graph=graph, basis=basis)


def _phi0(basis: FourierBasis, params: AlignmentParams) -> np.ndarray:
    power = 0.5 if params.literal_degree_scaling else -0.5
    return basis.degrees[:, None] ** power * basis.psi


def _features(prep: PreparedDataset, psi: np.ndarray, params: AlignmentParams) -> np.ndarray:
    values = prep.data.values
    if params.standardize_features:
        std = values.std(axis=0)
        std[std == 0] = 1.0
        values = (values - values.mean(axis=0)) / std
    return gft_features(psi, values)


def _pair_map(
    px: PreparedDataset, py: PreparedDataset, params: AlignmentParams
) -> tuple[np.ndarray, np.ndarray]:
    """Bandlimited correlation and orthogonal map between two prepared datasets.

    Basis signs are re-canonicalized here, so alignment is invariant to any
    sign flips applied to eigenvector columns upstream.
    """
    psi_x = canonical_signs(px.basis.psi)
    psi_y = canonical_signs(py.basis.psi)
    Xh = _features(px, psi_x, params)
    Yh = _features(py, psi_y, params)
    w = bandlimiting_weights(
        px.basis.lam,
        py.basis.lam,
        params.n_bands,
        include_zero_band=not params.strict_band_sum,
    )
    C = bandlimited_correlation(Xh, Yh, w)
    return C, orthogonalize(C)


def _pair_diagnostics(preps) -> dict:
    diag = {}
    for i, prep in enumerate(preps):
        lam = prep.basis.lam
        diag[f"spectrum_{i}"] = lam.tolist()
        # ties among eigenvalues clamped to zero are artifacts of the clamp,
        # not genuine degeneracies of the decomposition
        ties = degenerate_gaps(lam[lam > 0])
        if ties:
            diag[f"degenerate_gaps_{i}"] = ties
            warnings.warn(
                f"dataset {i}: {len(ties)} near-degenerate eigenvalue gaps; "
                "the Fourier basis (hence the alignment) is only defined up to "
                "rotation within those eigenspaces",
                stacklevel=3,
            )
    return diag


def _normalize_block_scale(phi: np.ndarray, ranges) -> np.ndarray:
    """Scale each dataset's rows to unit mean norm (in place)."""
    for lo, hi in ranges:
        scale = np.linalg.norm(phi[lo:hi], axis=1).mean()
        if scale > 0:
            phi[lo:hi] /= scale
    return phi


def align_prepared(
    px: PreparedDataset, py: PreparedDataset, params: AlignmentParams
) -> AlignmentResult:
    """Align two prepared datasets (the tail of :func:`harmonic_alignment`)."""
    C, T = _pair_map(px, py, params)
    psi_x = canonical_signs(px.basis.psi)
    psi_y = canonical_signs(py.basis.psi)
    phi_x0 = px.basis.degrees[:, None] ** (0.5 if params.literal_degree_scaling else -0.5) * psi_x
    phi_y0 = py.basis.degrees[:, None] ** (0.5 if params.literal_degree_scaling else -0.5) * psi_y
    phi = unified_diffusion_map(phi_x0, phi_y0, px.basis.lam, py.basis.lam, T, params.t)
    n1, n2 = px.data.n_points, py.data.n_points
    if params.normalize_scale:
        phi = _normalize_block_scale(phi, ((0, n1), (n1, n1 + n2)))
    small = min(T.shape)
    residual = (
        np.abs(T.T @ T - np.eye(T.shape[1])).max()
        if T.shape[1] == small
        else np.abs(T @ T.T - np.eye(T.shape[0])).max()
    )
    diagnostics = _pair_diagnostics((px, py))
    diagnostics["orthogonality_residual"] = float(residual)
    return AlignmentResult(
        C=C,
        T=T,
        phi=phi,
        blocks=((0, n1), (n1, n1 + n2)),
        diagnostics=diagnostics,
    )


def harmonic_alignment(X, Y, params: AlignmentParams | None = None) -> AlignmentResult:
    """End-to-end pairwise alignment of two datasets sharing a feature space.

    Parameters
    ----------
    X, Y : DataMatrix or (N, d) arrays
        Two datasets with the same number of features ``d``.
    params : AlignmentParams, optional

    Returns
    -------
    AlignmentResult
        Unified embedding with X's rows on top, plus the correlation matrix,
        the orthogonal harmonic map, and diagnostics.
    """
    params = params or AlignmentParams()
    dx = X.n_features if isinstance(X, DataMatrix) else np.asarray(X).shape[1]
    dy = Y.n_features if isinstance(Y, DataMatrix) else np.asarray(Y).shape[1]
    if dx != dy:
        raise ValueError(
            f"datasets must share a feature space: d={dx} vs d={dy}"
        )
    px = prepare_dataset(X, params)
    py = prepare_dataset(Y, params)
    return align_prepared(px, py, params)


def multi_alignment(datasets, params: AlignmentParams | None = None) -> MultiAlignmentResult:
    """Align n >= 2 datasets into one block embedding.

    For every pair i < j the pairwise orthogonal map ``T(i->j)`` is computed
    once; its transpose serves as ``T(j->i)``.  Block (i, j) of the output is
    ``Phi0_i T(i->j) Lam_j^t`` (diagonal blocks use the identity map), so with
    n = 2 the result coincides with :func:`harmonic_alignment`.
    """
    params = params or AlignmentParams()
    if len(datasets) < 2:
        raise ValueError(f"need at least 2 datasets, got {len(datasets)}")
    dims = [
        X.n_features if isinstance(X, DataMatrix) else np.asarray(X).shape[1]
        for X in datasets
    ]
    if len(set(dims)) != 1:
        raise ValueError(f"datasets must share a feature space: d={dims}")
    preps = [prepare_dataset(X, params) for X in datasets]
    n = len(preps)
    maps = {}
    for i in range(n):
        for j in range(i + 1, n):
            _, T = _pair_map(preps[i], preps[j], params)
            maps[(i, j)] = T
            maps[(j, i)] = T.T
    power = 0.5 if params.literal_degree_scaling else -0.5
    phi0 = [
        p.basis.degrees[:, None] ** power * canonical_signs(p.basis.psi) for p in preps
    ]
    scales = [p.basis.lam ** int(params.t) for p in preps]
    row_blocks = []
    for i in range(n):
        cols = []
        for j in range(n):
            if i == j:
                block = phi0[i] * scales[i][None, :]
            else:
                block = (phi0[i] @ maps[(i, j)]) * scales[j][None, :]
            cols.append(block)
        row_blocks.append(np.hstack(cols))
    phi = np.vstack(row_blocks)
    row_sizes = [p.data.n_points for p in preps]
    col_sizes = [p.basis.rank for p in preps]
    row_offsets = np.concatenate([[0], np.cumsum(row_sizes)])
    col_offsets = np.concatenate([[0], np.cumsum(col_sizes)])
    row_ranges = tuple((int(row_offsets[i]), int(row_offsets[i + 1])) for i in range(n))
    col_ranges = tuple((int(col_offsets[i]), int(col_offsets[i + 1])) for i in range(n))
    if params.normalize_scale:
        phi = _normalize_block_scale(phi, row_ranges)
    return MultiAlignmentResult(
        maps=maps,
        phi=phi,
        row_ranges=row_ranges,
        col_ranges=col_ranges,
        diagnostics=_pair_diagnostics(preps),
    )
