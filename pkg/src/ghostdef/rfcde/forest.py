"""Random forest for conditional density estimation.

The forest turns a query feature vector into a weight over training
rows (how often each training row shares a leaf with the query, averaged
over trees and normalized by leaf size), then smooths the weighted
training responses with a Gaussian KDE. Responses may be univariate
(yardage) or bivariate (field locations); the split criterion is the
same in both cases, driven by an orthonormal cosine expansion of the
response.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .basis import cosine_basis_1d, cosine_basis_2d, rescale_to_unit
from .kde import NoSupportError, kde_1d, kde_2d, plugin_bandwidth
from .tree import Tree, build_tree

_trapezoid = getattr(np, "trapezoid", None) or np.trapz


@dataclass(frozen=True)
class DensityGrid:
    """A conditional density evaluated on an explicit grid.

    ``grid`` is (m,) for univariate densities or (m, 2) for field
    locations; ``values`` are nonnegative, and sum to 1 when
    ``normalized`` (a discrete probability over the grid rather than a
    continuous density).
    """

    grid: np.ndarray
    values: np.ndarray
    normalized: bool
    bandwidth: tuple[float, ...]

    def __post_init__(self):
        if len(self.grid) != len(self.values):
            raise ValueError("grid and values differ in length")

    def normalize(self) -> "DensityGrid":
        """Discrete probability over the grid; error when there is no mass."""
        if self.normalized:
            return self
        total = self.values.sum()
        if not np.isfinite(total) or total <= 0:
            raise NoSupportError()
        return DensityGrid(self.grid, self.values / total, True, self.bandwidth)


def density_mean(d: DensityGrid):
    """Probability-weighted average grid point of a normalized density."""
    if not d.normalized:
        raise ValueError("density_mean requires a normalized DensityGrid")
    if d.grid.ndim == 1:
        return float((d.values * d.grid).sum())
    return (d.values[:, None] * d.grid).sum(axis=0)


def density_mode(d: DensityGrid):
    """Highest-probability grid point; ties go to the first in grid order."""
    if not d.normalized:
        raise ValueError("density_mode requires a normalized DensityGrid")
    idx = int(np.argmax(d.values))
    if d.grid.ndim == 1:
        return float(d.grid[idx])
    return d.grid[idx]


@dataclass(frozen=True)
class ForestConfig:
    """Hyperparameters of the density forest.

    features_per_split of None means ceil(sqrt(p)), resolved at fit time.
    n_basis is the cosine expansion order; for bivariate responses it is
    the per-dimension order (n_basis**2 functions in total).
    """

    n_trees: int = 500
    features_per_split: int | None = None
    min_leaf_size: int = 5
    max_depth: int | None = None
    n_basis: int = 15
    bootstrap: bool = True
    seed: int = 0

    def resolved_features_per_split(self, p: int) -> int:
        if self.features_per_split is not None:
            return max(1, min(self.features_per_split, p))
        return max(1, min(int(math.ceil(math.sqrt(p))), p))


@dataclass
class CDEForest:
    """A fitted conditional density forest.

    Attributes:
        config: hyperparameters used at fit time.
        feature_names: optional column names, checked on save/load only.
        responses: training responses, shape (n,) or (n, 2).
        response_lo/response_hi: per-dimension training response range
            used for the basis rescale.
        trees: fitted trees.
    """

    config: ForestConfig
    responses: np.ndarray
    response_lo: np.ndarray
    response_hi: np.ndarray
    trees: list[Tree]
    feature_count: int
    feature_names: tuple[str, ...] | None = None
    _stats: dict = field(default_factory=dict, repr=False)

    # -- fitting ------------------------------------------------------

    @classmethod
    def fit(
        cls,
        x: np.ndarray,
        y: np.ndarray,
        config: ForestConfig | None = None,
        feature_names: tuple[str, ...] | None = None,
    ) -> "CDEForest":
        """Fit a forest on features ``x`` and responses ``y``.

        ``y`` of shape (n,) fits a univariate density model; (n, 2) a
        bivariate one. Rows are bootstrap-resampled per tree unless the
        config disables it.
        """
        config = config or ForestConfig()
        x = np.ascontiguousarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.ndim != 2:
            raise ValueError("x must be 2-dimensional")
        n, p = x.shape
        if len(y) != n:
            raise ValueError("x and y row counts differ")
        if n < 2 * config.min_leaf_size:
            raise ValueError(
                f"need at least {2 * config.min_leaf_size} training rows, got {n}"
            )
        if not np.all(np.isfinite(x)):
            raise ValueError("x contains non-finite values")
        if not np.all(np.isfinite(y)):
            raise ValueError("y contains non-finite values")
        if feature_names is not None and len(feature_names) != p:
            raise ValueError("feature_names length does not match x")

        y2 = y.reshape(n, -1)
        if y2.shape[1] not in (1, 2):
            raise ValueError("responses must be univariate or bivariate")
        lo = y2.min(axis=0)
        hi = y2.max(axis=0)
        u = rescale_to_unit(y2, lo, hi)
        if y2.shape[1] == 1:
            basis = cosine_basis_1d(u[:, 0], config.n_basis)
        else:
            basis = cosine_basis_2d(u, config.n_basis)

        mtry = config.resolved_features_per_split(p)
        seed_seq = np.random.SeedSequence(config.seed)
        trees = []
        for child in seed_seq.spawn(config.n_trees):
            rng = np.random.default_rng(child)
            if config.bootstrap:
                idx = rng.integers(0, n, size=n)
            else:
                idx = np.arange(n)
            trees.append(
                build_tree(
                    x[idx],
                    basis[idx],
                    idx,
                    rng,
                    config.min_leaf_size,
                    mtry,
                    config.max_depth,
                )
            )
        return cls(
            config=config,
            responses=y2[:, 0] if y2.shape[1] == 1 else y2,
            response_lo=lo,
            response_hi=hi,
            trees=trees,
            feature_count=p,
            feature_names=tuple(feature_names) if feature_names else None,
        )

    @property
    def n_train(self) -> int:
        return len(self.responses)

    @property
    def response_dim(self) -> int:
        return 1 if self.responses.ndim == 1 else self.responses.shape[1]

    # -- weights ------------------------------------------------------

    def weights(self, x: np.ndarray) -> np.ndarray:
        """Training-row weights for each query, shape (m, n_train).

        For one query, each tree contributes 1/|leaf| to every distinct
        training row in the leaf the query lands in, and the result is
        the average over trees. Rows of the output sum to 1 up to float
        round-off. Accumulation order is fixed (tree by tree), so the
        result does not depend on how queries are batched.
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.feature_count:
            raise ValueError(
                f"query has {x.shape[1]} features, forest expects {self.feature_count}"
            )
        m = len(x)
        w = np.zeros((m, self.n_train))
        for tree in self.trees:
            leaves = tree.apply(x)
            for leaf in np.unique(leaves):
                rows = tree.leaf_rows(int(leaf))
                if rows.size == 0:
                    continue
                queries = np.flatnonzero(leaves == leaf)
                w[np.ix_(queries, rows)] += 1.0 / rows.size
        w /= len(self.trees)
        return w

    # -- densities ----------------------------------------------------

    def density_1d(self, weights_row: np.ndarray, grid: np.ndarray) -> np.ndarray:
        """Univariate conditional density on a grid from one weight row."""
        if self.response_dim != 1:
            raise ValueError("forest has bivariate responses")
        return kde_1d(grid, self.responses, weights_row)

    def density_2d(self, weights_row: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Bivariate conditional density at (m, 2) points from one weight row."""
        if self.response_dim != 2:
            raise ValueError("forest has univariate responses")
        return kde_2d(points, self.responses, weights_row)

    def predict_density(
        self,
        x: np.ndarray,
        grid: np.ndarray,
        bandwidth: tuple[float, ...] | None = None,
        normalize: bool = False,
    ) -> DensityGrid:
        """Conditional density of one query on a grid.

        The grid is a 1D array of response values for univariate forests
        and an (m, 2) point set for bivariate ones. ``bandwidth``
        overrides the plug-in rule (one value per response dimension).
        """
        x = np.asarray(x, dtype=float).reshape(-1)
        w = self.weights(x.reshape(1, -1))[0]
        if self.response_dim == 1:
            h = bandwidth if bandwidth is None else bandwidth[0]
            values = kde_1d(grid, self.responses, w, bandwidth=h)
            used = (h,) if h is not None else self.bandwidth_for(w)
        else:
            values = kde_2d(grid, self.responses, w, bandwidths=bandwidth)
            used = bandwidth if bandwidth is not None else self.bandwidth_for(w)
        d = DensityGrid(np.asarray(grid, dtype=float), values, False, tuple(used))
        return d.normalize() if normalize else d

    def predict_density_batch(self, x: np.ndarray, grid: np.ndarray) -> np.ndarray:
        """Raw density values for many queries on a shared grid, (m_q, m_grid)."""
        w = self.weights(x)
        if self.response_dim == 1:
            return np.stack([kde_1d(grid, self.responses, row) for row in w])
        return np.stack([kde_2d(grid, self.responses, row) for row in w])

    def bandwidth_for(self, weights_row: np.ndarray) -> tuple[float, ...]:
        """Plug-in bandwidth(s) the KDE would use for one weight row."""
        idx = np.flatnonzero(weights_row > 0)
        if idx.size == 0:
            raise NoSupportError()
        w = weights_row[idx]
        w = w / w.sum()
        resp = self.responses[idx].reshape(len(idx), -1)
        return tuple(plugin_bandwidth(resp[:, d], w) for d in range(resp.shape[1]))


def cde_loss_from_densities(
    densities: np.ndarray, grid: np.ndarray, densities_at_observed: np.ndarray
) -> float:
    """Density-estimation loss from precomputed density evaluations.

    Computes mean_i [ integral f_i(y)^2 dy  -  2 f_i(y_i) ], the
    squared-error loss of a density estimate up to an additive constant
    that does not depend on the estimator. The integral is a trapezoid
    rule on ``grid``; the second term uses the density evaluated exactly
    at each observed response, not an interpolation. Works for any
    estimator, which is what the oracle tests exploit.
    """
    densities = np.asarray(densities, dtype=float)
    grid = np.asarray(grid, dtype=float)
    at_obs = np.asarray(densities_at_observed, dtype=float)
    if len(densities) != len(at_obs):
        raise ValueError("densities and observed evaluations differ in length")
    integrals = _trapezoid(np.square(densities), grid, axis=1)
    return float(np.mean(integrals - 2.0 * at_obs))


def cde_loss(
    forest: CDEForest, x: np.ndarray, y: np.ndarray, grid: np.ndarray
) -> float:
    """Held-out CDE loss of a univariate forest on pairs (x, y); lower is better."""
    if forest.response_dim != 1:
        raise ValueError("cde_loss expects a univariate forest")
    y = np.asarray(y, dtype=float).reshape(-1)
    if len(y) == 0:
        raise ValueError("test set is empty")
    w = forest.weights(x)
    dens = np.stack([kde_1d(grid, forest.responses, row) for row in w])
    at_obs = np.array(
        [kde_1d(np.array([yi]), forest.responses, row)[0] for yi, row in zip(y, w)]
    )
    return cde_loss_from_densities(dens, grid, at_obs)
