"""Itersine spectral windows and joint bandlimiting weights.

A bank of ``n_bands + 1`` translated itersine windows

    w_xi(lam) = sin( (pi/2) * cos^2( (pi/2) * (n_bands * lam - xi) ) )

for xi = 0..n_bands tiles the spectrum [0, 1]: the squares of the windows sum
to exactly 1 at every lam.  Each window is supported on
[(xi-1)/n_bands, (xi+1)/n_bands] and vanishes identically outside it.

The joint bandlimiting weight between two eigenvalue vectors is

    w[i, j] = sum_xi  w_xi(lam_x[i]) * w_xi(lam_y[j]),

a soft indicator that the two eigenvalues occupy overlapping frequency
bands: it equals 1 when the eigenvalues coincide and is exactly 0 once they
differ by 2/n_bands or more.  By default the sum includes the xi = 0 band
(required for the w = 1 diagonal property at small eigenvalues); a strict
mode restricts the sum to xi = 1..n_bands.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def itersine_window(lam, xi: int, n_bands: int):
    """Evaluate the xi-th itersine window at lam (scalar or array).

    Returns values in [0, 1]; exactly 0 outside the support interval
    [(xi-1)/n_bands, (xi+1)/n_bands].
    """
    if n_bands < 1:
        raise ValueError(f"band count must be >= 1, got {n_bands}")
    lam = np.asarray(lam, dtype=np.float64)
    x = n_bands * lam - xi
    # the window is identically 0 for |x| >= 1; evaluating the formula there
    # would leave rounding residue from cos(pi/2), so mask it out exactly
    inside = np.abs(x) < 1.0
    xv = np.where(inside, x, 0.0)
    out = np.where(
        inside, np.sin(0.5 * np.pi * np.cos(0.5 * np.pi * xv) ** 2), 0.0
    )
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class WindowBank:
    """The itersine bank with bands xi = 0..n_bands over the spectrum [0, 1]."""

    n_bands: int

    def __post_init__(self):
        if self.n_bands < 1:
            raise ValueError(f"band count must be >= 1, got {self.n_bands}")

    @property
    def band_indices(self) -> range:
        return range(0, self.n_bands + 1)

    def window(self, lam, xi: int):
        return itersine_window(lam, xi, self.n_bands)

    def squared_sum(self, lam):
        """sum_xi w_xi(lam)^2 — identically 1 on [0, 1] (tight tiling)."""
        lam = np.asarray(lam, dtype=np.float64)
        total = np.zeros_like(lam)
        for xi in self.band_indices:
            total += itersine_window(lam, xi, self.n_bands) ** 2
        return total


def bandlimiting_weights(
    lam_x: np.ndarray,
    lam_y: np.ndarray,
    n_bands: int,
    include_zero_band: bool = True,
) -> np.ndarray:
    """Joint bandlimiting weight matrix between two eigenvalue vectors.

    Parameters
    ----------
    lam_x, lam_y : 1-D arrays of eigenvalues in [0, 1].
    n_bands : int
        Number of itersine bands.
    include_zero_band : bool
        Sum over xi = 0..n_bands when True (default; needed for the unit
        diagonal property), over xi = 1..n_bands when False (strict mode).

    Returns
    -------
    (len(lam_x), len(lam_y)) ndarray with entries in [0, 1].
    """
    lam_x = np.asarray(lam_x, dtype=np.float64)
    lam_y = np.asarray(lam_y, dtype=np.float64)
    start = 0 if include_zero_band else 1
    w = np.zeros((lam_x.size, lam_y.size))
    for xi in range(start, n_bands + 1):
        wx = itersine_window(lam_x, xi, n_bands)
        wy = itersine_window(lam_y, xi, n_bands)
        w += np.outer(wx, wy)
    return w
