"""Expected play value at the moment of catch.

Combines the conditional yards-after-catch density with the outcome
utility: the density is evaluated on a play-specific yardage grid,
normalized to a discrete distribution, and dotted with the utility of
each grid outcome (touchdown, conversion, next down, turnover on
downs). Kernel mass falling outside the grid is dropped by the
normalization, which is the discrete treatment the whole pipeline
shares. The same machinery is applied to the observed play and to every
counterfactual defender placement, so values are directly comparable.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .rfcde import CDEForest, NoSupportError, kde_1d
from .utility import ExpectedPointsModel, PlaySituation, utility_on_grid

logger = logging.getLogger(__name__)

__all__ = [
    "NoSupportError",
    "YacGrid",
    "build_yac_grid",
    "clamp_training_yac",
    "epv_at_catch",
    "epv_batch",
    "epv_for_features",
    "epv_from_density",
    "play_utilities",
    "yac_grid",
]

#: Most negative yards-after-catch outcome on the integration grid.
YAC_GRID_MIN = -10.0
#: Grid extends this many yards past the last whole yard before the goal
#: line, so the touchdown region always has support.
YAC_GRID_OVERSHOOT = 2.0
YAC_GRID_STEP = 1.0


@dataclass(frozen=True)
class YacGrid:
    """Play-specific yards-after-catch outcome grid.

    Whole-yard values from -10 to floor(catch_x_adj) + 2; the terminal
    mask marks values that reach the goal line (touchdowns).
    """

    catch_x_adj: float
    values: np.ndarray

    @property
    def touchdown_mask(self) -> np.ndarray:
        return self.values >= self.catch_x_adj

    def __len__(self) -> int:
        return len(self.values)


def yac_grid(catch_x_adj: float) -> np.ndarray:
    """Grid values only; see :func:`build_yac_grid` for the typed wrapper."""
    if not np.isfinite(catch_x_adj) or catch_x_adj <= 0:
        raise ValueError(
            f"catch_x_adj must be positive (catch outside the endzone), got {catch_x_adj}"
        )
    top = np.floor(catch_x_adj) + YAC_GRID_OVERSHOOT
    return np.arange(YAC_GRID_MIN, top + 0.5 * YAC_GRID_STEP, YAC_GRID_STEP)


def build_yac_grid(catch_x_adj: float) -> YacGrid:
    return YacGrid(float(catch_x_adj), yac_grid(catch_x_adj))


def epv_from_density(density: np.ndarray, utilities: np.ndarray) -> float:
    """Discrete-normalize a density over the grid and average the utility.

    This is the integration core: every play value in the package is
    this normalized dot product.

    Raises:
        NoSupportError: when the density has no positive finite mass.
    """
    density = np.asarray(density, dtype=float)
    utilities = np.asarray(utilities, dtype=float)
    if density.shape != utilities.shape:
        raise ValueError("density and utilities must share the grid")
    total = density.sum()
    if not np.isfinite(total) or total <= 0:
        raise NoSupportError()
    p = density / total
    return float((p * utilities).sum())


def play_utilities(
    grid: np.ndarray,
    catch_x_adj: float,
    situation: PlaySituation,
    ep_model: ExpectedPointsModel,
) -> np.ndarray:
    """Utility of each grid outcome for one play (touchdowns are exact 7s)."""
    return utility_on_grid(grid, catch_x_adj, situation, ep_model)


def epv_at_catch(
    density: np.ndarray,
    grid: YacGrid | np.ndarray,
    situation: PlaySituation,
    ep_model: ExpectedPointsModel,
) -> float:
    """Expected play value of a density already evaluated on a yardage grid.

    Accepts a YacGrid or a plain grid array (paired with the catch spot
    when a YacGrid is given; a plain array must come from
    :func:`yac_grid` of the same play).
    """
    if isinstance(grid, YacGrid):
        catch_x_adj = grid.catch_x_adj
        values = grid.values
    else:
        values = np.asarray(grid, dtype=float)
        # a plain grid encodes the catch spot as its top minus overshoot
        catch_x_adj = float(values[-1]) - YAC_GRID_OVERSHOOT
    utilities = play_utilities(values, catch_x_adj, situation, ep_model)
    return epv_from_density(density, utilities)


def epv_batch(
    forest: CDEForest,
    features: np.ndarray,
    catch_x_adj: float,
    situation: PlaySituation,
    ep_model: ExpectedPointsModel,
    return_densities: bool = False,
    on_no_support: str = "raise",
):
    """Expected play value for a batch of feature rows on one play's grid.

    All rows share the play's yardage grid and utility vector (the
    counterfactual placements change the defender features, not the
    catch spot or the down and distance). Identical feature rows produce
    bitwise-identical values: forest weights and the KDE are evaluated
    row by row with a fixed reduction order, so results do not depend on
    how rows are grouped into batches.

    Args:
        on_no_support: "raise" propagates NoSupportError; "nan" records
            NaN for the offending row and keeps going.

    Returns:
        (epvs, grid, utilities) or, with return_densities,
        (epvs, grid, utilities, densities) where densities has shape
        (n_rows, len(grid)).
    """
    if on_no_support not in ("raise", "nan"):
        raise ValueError("on_no_support must be 'raise' or 'nan'")
    features = np.atleast_2d(np.asarray(features, dtype=float))
    grid = yac_grid(catch_x_adj)
    utilities = play_utilities(grid, catch_x_adj, situation, ep_model)
    weights = forest.weights(features)
    epvs = np.empty(len(features))
    densities = np.empty((len(features), len(grid))) if return_densities else None
    for i, w in enumerate(weights):
        try:
            dens = kde_1d(grid, forest.responses, w)
            epvs[i] = epv_from_density(dens, utilities)
        except NoSupportError:
            if on_no_support == "raise":
                raise
            epvs[i] = np.nan
            dens = np.zeros(len(grid))
        if densities is not None:
            densities[i] = dens
    if return_densities:
        return epvs, grid, utilities, densities
    return epvs, grid, utilities


def epv_for_features(
    forest: CDEForest,
    features: np.ndarray,
    catch_x_adj: float,
    situation: PlaySituation,
    ep_model: ExpectedPointsModel,
) -> float:
    """Expected play value of a single feature row (observed catch)."""
    epvs, _, _ = epv_batch(
        forest, features, catch_x_adj, situation, ep_model
    )
    return float(epvs[0])


def clamp_training_yac(
    yac: np.ndarray, catch_x_adj: np.ndarray
) -> tuple[np.ndarray, int]:
    """Clamp training responses into each play's own outcome grid range.

    Values below -10 or beyond floor(catch)+2 (bad spotting, laterals,
    penalties folded into tracking) would put KDE mass where the utility
    integral never looks; clamping keeps that mass on the grid. Returns
    the clamped array and how many values moved.
    """
    yac = np.asarray(yac, dtype=float)
    catch_x_adj = np.asarray(catch_x_adj, dtype=float)
    top = np.floor(catch_x_adj) + YAC_GRID_OVERSHOOT
    clamped = np.clip(yac, YAC_GRID_MIN, top)
    moved = int((clamped != yac).sum())
    if moved:
        logger.info("clamped %d of %d training yac values onto the grid", moved, len(yac))
    return clamped, moved
