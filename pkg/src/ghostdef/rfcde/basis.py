"""Orthonormal cosine basis used by the density-split criterion.

Responses are mapped to the unit interval (or unit square) and expanded
in cosine functions that are orthonormal under the uniform measure.
Split quality is then scored from per-node sums of these basis values,
which is what lets the tree builder evaluate every split point of a
feature with a single cumulative sum.
"""

from __future__ import annotations

import numpy as np

SQRT2 = np.sqrt(2.0)


def rescale_to_unit(values: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Affinely map values to [0, 1] given training min/max per column.

    A zero-range column maps to the constant 0.5. Values outside
    [lo, hi] are clipped; the basis is only ever evaluated on training
    responses, so clipping matters only for degenerate inputs.
    """
    values = np.asarray(values, dtype=float)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    span = hi - lo
    safe = np.where(span > 0, span, 1.0)
    u = (values - lo) / safe
    u = np.where(span > 0, u, 0.5)
    return np.clip(u, 0.0, 1.0)


def cosine_basis_1d(u: np.ndarray, n_basis: int) -> np.ndarray:
    """Evaluate sqrt(2)*cos(pi*j*u) for j = 1..n_basis.

    The constant function is omitted: its within-node sum is the node
    size, which contributes identically to any split of the node and so
    carries no signal.

    Args:
        u: responses already rescaled to [0, 1], shape (n,).
        n_basis: number of non-constant basis functions.

    Returns:
        Array of shape (n, n_basis).
    """
    u = np.asarray(u, dtype=float).reshape(-1)
    j = np.arange(1, n_basis + 1, dtype=float)
    return SQRT2 * np.cos(np.pi * u[:, None] * j[None, :])


def cosine_basis_2d(u: np.ndarray, n_basis: int) -> np.ndarray:
    """Tensor-product cosine basis on the unit square.

    Uses all pairs (j1, j2) in {0..n_basis-1}^2 of the 1D family with
    phi_0 = 1, giving n_basis**2 columns. The (0, 0) column is constant
    and split-invariant; it is kept so the column count matches the
    square of the per-dimension order, and costs nothing in split
    selection.

    Args:
        u: responses rescaled to the unit square, shape (n, 2).
        n_basis: per-dimension basis order.

    Returns:
        Array of shape (n, n_basis**2), ordered with the second
        dimension's index varying fastest.
    """
    u = np.asarray(u, dtype=float)
    if u.ndim != 2 or u.shape[1] != 2:
        raise ValueError("u must have shape (n, 2)")
    j = np.arange(n_basis, dtype=float)

    def axis_basis(col):
        b = np.cos(np.pi * col[:, None] * j[None, :]) * SQRT2
        b[:, 0] = 1.0
        return b

    b1 = axis_basis(u[:, 0])
    b2 = axis_basis(u[:, 1])
    return (b1[:, :, None] * b2[:, None, :]).reshape(len(u), n_basis * n_basis)
