"""Hand-rolled reference implementations the package must agree with.

Everything here is written the slow, obvious way (python loops, textbook
formulas) and deliberately shares no code with the package, so a bug in
the package cannot hide in its own oracle.
"""

import math

import numpy as np

SQRT_2PI = math.sqrt(2.0 * math.pi)


def bandwidth_reference(values, weights):
    """Normal-reference rule: 1.06 * weighted sd * n_eff**(-1/5), floor 1e-6."""
    values = np.asarray(values, dtype=float)
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    mean = sum(wi * vi for wi, vi in zip(w, values))
    var = sum(wi * (vi - mean) ** 2 for wi, vi in zip(w, values))
    n_eff = 1.0 / sum(wi * wi for wi in w)
    return max(1.06 * math.sqrt(max(var, 0.0)) * n_eff ** (-0.2), 1e-6)


def kde_1d_reference(grid, centers, weights, bandwidth=None):
    """Weighted Gaussian KDE, one kernel at a time."""
    grid = np.asarray(grid, dtype=float)
    centers = np.asarray(centers, dtype=float)
    w = np.asarray(weights, dtype=float)
    keep = w > 0
    centers, w = centers[keep], w[keep]
    w = w / w.sum()
    h = bandwidth if bandwidth is not None else bandwidth_reference(centers, w)
    out = np.zeros(len(grid))
    for wi, ci in zip(w, centers):
        z = (grid - ci) / h
        out += wi * np.exp(-0.5 * z * z) / (h * SQRT_2PI)
    return out


def kde_2d_reference(points, centers, weights, bandwidths=None):
    """Weighted product-kernel Gaussian KDE at (m, 2) points."""
    points = np.asarray(points, dtype=float)
    centers = np.asarray(centers, dtype=float)
    w = np.asarray(weights, dtype=float)
    keep = w > 0
    centers, w = centers[keep], w[keep]
    w = w / w.sum()
    if bandwidths is None:
        bandwidths = (
            bandwidth_reference(centers[:, 0], w),
            bandwidth_reference(centers[:, 1], w),
        )
    hx, hy = bandwidths
    out = np.zeros(len(points))
    for wi, (cx, cy) in zip(w, centers):
        zx = (points[:, 0] - cx) / hx
        zy = (points[:, 1] - cy) / hy
        out += wi * np.exp(-0.5 * (zx * zx + zy * zy)) / (2.0 * math.pi * hx * hy)
    return out


def trapezoid_reference(values, grid):
    total = 0.0
    for i in range(len(grid) - 1):
        total += 0.5 * (values[i] + values[i + 1]) * (grid[i + 1] - grid[i])
    return total
