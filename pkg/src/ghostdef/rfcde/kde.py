"""Weighted Gaussian kernel density estimates with plug-in bandwidths.

These are the leaf-weight smoothers used by the conditional density
forest: given per-training-row weights for one query point, the
conditional density estimate is a weighted KDE over the training
responses. Densities are evaluated on explicit grids (1D) or lattices
(2D); no object retains interpolators or fitted state beyond the inputs.
"""

from __future__ import annotations

import math

import numpy as np

#: Lower clamp for plug-in bandwidths, so degenerate weight sets (all
#: mass on one response value) still yield a proper density.
BANDWIDTH_FLOOR = 1e-6

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


class NoSupportError(ValueError):
    """A density was requested from a weight vector with no positive mass."""

    def __init__(self, message: str = "no_support"):
        super().__init__(message)


def effective_sample_size(weights: np.ndarray) -> float:
    """Kish effective sample size (sum w)^2 / sum w^2 of a weight vector."""
    weights = np.asarray(weights, dtype=float)
    total = weights.sum()
    if total <= 0:
        return 0.0
    return float(total * total / np.square(weights).sum())


def plugin_bandwidth(values: np.ndarray, weights: np.ndarray) -> float:
    """Normal-reference bandwidth 1.06 * sigma * n_eff**(-1/5), floored.

    ``sigma`` is the weighted standard deviation of ``values`` and the
    sample-size exponent uses the effective sample size of the weights,
    so heavily concentrated weight vectors get wider kernels than their
    raw length would suggest.
    """
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    total = weights.sum()
    if total <= 0:
        return BANDWIDTH_FLOOR
    mean = float((weights * values).sum() / total)
    var = float((weights * np.square(values - mean)).sum() / total)
    sigma = math.sqrt(max(var, 0.0))
    n_eff = effective_sample_size(weights)
    if n_eff <= 0:
        return BANDWIDTH_FLOOR
    return max(1.06 * sigma * n_eff ** (-0.2), BANDWIDTH_FLOOR)


def _nonzero(weights: np.ndarray) -> np.ndarray:
    idx = np.flatnonzero(weights > 0)
    if idx.size == 0:
        raise NoSupportError()
    return idx


def kde_1d(
    grid: np.ndarray,
    centers: np.ndarray,
    weights: np.ndarray,
    bandwidth: float | None = None,
) -> np.ndarray:
    """Weighted 1D Gaussian KDE evaluated on ``grid``.

    Weights are normalized internally, so the result integrates to ~1
    over the real line regardless of the input scale. A ``bandwidth`` of
    None selects the plug-in rule from the weighted sample itself.
    """
    grid = np.asarray(grid, dtype=float)
    centers = np.asarray(centers, dtype=float)
    weights = np.asarray(weights, dtype=float)
    idx = _nonzero(weights)
    c = centers[idx]
    w = weights[idx]
    w = w / w.sum()
    if bandwidth is None:
        bandwidth = plugin_bandwidth(c, w)
    z = (grid[None, :] - c[:, None]) / bandwidth
    k = np.exp(-0.5 * np.square(z))
    return (w[:, None] * k).sum(axis=0) * (_INV_SQRT_2PI / bandwidth)


def kde_2d(
    grid: np.ndarray,
    centers: np.ndarray,
    weights: np.ndarray,
    bandwidths: tuple[float, float] | None = None,
) -> np.ndarray:
    """Weighted 2D product-kernel Gaussian KDE on an (m, 2) point set.

    Bandwidths are chosen per dimension by the plug-in rule when not
    given. ``grid`` holds evaluation points, one per row; it need not be
    a full lattice.
    """
    grid = np.asarray(grid, dtype=float)
    centers = np.asarray(centers, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if grid.ndim != 2 or grid.shape[1] != 2:
        raise ValueError("grid must have shape (m, 2)")
    if centers.ndim != 2 or centers.shape[1] != 2:
        raise ValueError("centers must have shape (n, 2)")
    idx = _nonzero(weights)
    c = centers[idx]
    w = weights[idx]
    w = w / w.sum()
    if bandwidths is None:
        bandwidths = (plugin_bandwidth(c[:, 0], w), plugin_bandwidth(c[:, 1], w))
    hx, hy = bandwidths
    zx = (grid[None, :, 0] - c[:, 0, None]) / hx
    zy = (grid[None, :, 1] - c[:, 1, None]) / hy
    k = np.exp(-0.5 * (np.square(zx) + np.square(zy)))
    scale = _INV_SQRT_2PI * _INV_SQRT_2PI / (hx * hy)
    return (w[:, None] * k).sum(axis=0) * scale
