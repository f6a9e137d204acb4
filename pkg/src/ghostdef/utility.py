"""Play value: expected points of the state a completed pass ends in.

Maps a receiver's ending spot (plus down and distance at the snap) to a
single number the rest of the pipeline integrates against: exactly 7
for a touchdown, the offense's expected points at the resulting down
otherwise, and minus the opponent's expected points when a fourth down
comes up short and possession flips.

Expected points come from either a user-supplied lookup table (CSV of
down, distance bucket, yardline) or, when no table is given, a smooth
parametric approximation documented at
:class:`ParametricExpectedPoints`. Both are callables with the same
signature, so everything downstream is agnostic to the source, and the
whole pipeline can be re-run under a different table without code
changes.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Protocol, Union

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

TOUCHDOWN_POINTS = 7.0

#: Yardline domain for expected-points lookups: distance to the target
#: endzone. A scrimmage play cannot start on either goal line, so
#: queries are clamped into [1, 99].
YARDLINE_MIN = 1.0
YARDLINE_MAX = 99.0


class ExpectedPointsModel(Protocol):
    def __call__(self, down: int, yards_to_go: float, yardline: float) -> float: ...


@dataclass(frozen=True)
class PlaySituation:
    """Down, distance, and line of scrimmage (adjusted yards to the endzone)."""

    down: int
    yards_to_go: float
    los_x_adj: float

    def __post_init__(self):
        if not 1 <= self.down <= 4:
            raise ValueError(f"down must be 1..4, got {self.down}")
        if self.yards_to_go <= 0:
            raise ValueError("yards_to_go must be positive")

    @property
    def first_down_line(self) -> float:
        """Adjusted x of the line to gain (negative means goal-to-go past it)."""
        return self.los_x_adj - self.yards_to_go


@dataclass(frozen=True)
class Touchdown:
    """Terminal scoring state; worth exactly TOUCHDOWN_POINTS."""


@dataclass(frozen=True)
class GameState:
    """A next-play lookup state.

    ``yardline`` is the possessing team's distance to its target endzone.
    ``offense_possession`` False means the original offense lost the
    ball; the valuation negates the lookup in that case. Distances under
    a yard round up to 1 so lookup states stay in the table domain.
    """

    down: int
    yards_to_go: float
    yardline: float
    offense_possession: bool = True


TOUCHDOWN = Touchdown()


def next_state(
    situation: PlaySituation, ending_x_adj: float
) -> Union[Touchdown, GameState]:
    """The state a play ends in when the receiver is downed at ``ending_x_adj``.

    Reaching the goal line (ending_x_adj <= 0) is a touchdown. Reaching
    the line to gain resets to first and ten (or goal). Short of the
    line, downs one to three advance the down with the remaining
    distance; a short fourth down flips possession at the spot, with the
    yardline re-expressed from the new offense's perspective.
    """
    if ending_x_adj <= 0:
        return TOUCHDOWN
    if ending_x_adj <= situation.first_down_line:
        return GameState(
            down=1,
            yards_to_go=max(1.0, min(10.0, ending_x_adj)),
            yardline=ending_x_adj,
        )
    if situation.down < 4:
        return GameState(
            down=situation.down + 1,
            yards_to_go=max(1.0, ending_x_adj - situation.first_down_line),
            yardline=ending_x_adj,
        )
    opponent_yardline = 100.0 - ending_x_adj
    return GameState(
        down=1,
        yards_to_go=max(1.0, min(10.0, opponent_yardline)),
        yardline=opponent_yardline,
        offense_possession=False,
    )


def state_value(state: Union[Touchdown, GameState], ep_model: ExpectedPointsModel) -> float:
    """Expected points of a next-play state, signed for the original offense."""
    if isinstance(state, Touchdown):
        return TOUCHDOWN_POINTS
    value = ep_model(state.down, state.yards_to_go, state.yardline)
    return value if state.offense_possession else -value


def g(
    ending_x_adj: float,
    situation: PlaySituation,
    ep_model: ExpectedPointsModel,
) -> float:
    """Utility of the receiver ending the play at ``ending_x_adj``."""
    return state_value(next_state(situation, ending_x_adj), ep_model)


def utility_on_grid(
    yac_grid: np.ndarray,
    catch_x_adj: float,
    situation: PlaySituation,
    ep_model: ExpectedPointsModel,
) -> np.ndarray:
    """Outcome utility for each yards-after-catch value on a grid.

    A grid value of ``v`` ends the play at ``catch_x_adj - v``;
    touchdown outcomes (v >= catch_x_adj) are exact 7s by construction
    of :func:`next_state`.
    """
    grid = np.asarray(yac_grid, dtype=float)
    return np.array([g(catch_x_adj - v, situation, ep_model) for v in grid])


class ParametricExpectedPoints:
    """Smooth closed-form expected-points surface.

    Used when no empirical table is supplied. The functional form is a
    logistic ramp in field position plus additive down and distance
    penalties:

        ep(down, ytg, yardline) = 7 / (1 + exp(0.055 * (yardline - 48)))
                                  - 0.9
                                  + down_offset[down]
                                  - 0.05 * (ytg - 10)

    with down offsets {1: 0.0, 2: -0.5, 3: -1.2, 4: -2.8}, the yardline
    clamped to [1, 99], and the result clamped to [-7, 7]. The shape
    gives roughly +6 inside the opponent 5, about +0.4 at a team's own
    25, and slightly negative values backed up near one's own goal line,
    falling with down and with distance to gain.
    """

    DOWN_OFFSETS = {1: 0.0, 2: -0.5, 3: -1.2, 4: -2.8}

    def __call__(self, down: int, yards_to_go: float, yardline: float) -> float:
        if down not in self.DOWN_OFFSETS:
            raise ValueError(f"down must be 1..4, got {down}")
        yl = float(np.clip(yardline, YARDLINE_MIN, YARDLINE_MAX))
        base = 7.0 / (1.0 + np.exp(0.055 * (yl - 48.0))) - 0.9
        ep = base + self.DOWN_OFFSETS[down] - 0.05 * (float(yards_to_go) - 10.0)
        return float(np.clip(ep, -7.0, 7.0))


class TableExpectedPoints:
    """Expected points from a CSV lookup table.

    Expected columns: ``down`` (1..4), ``ytg_min``/``ytg_max``
    (inclusive distance bucket), ``yardline`` (integer 1..99, distance
    to the target endzone) and ``ep`` in [-7, 7]. Lookup rounds the
    query yardline to the nearest integer in [1, 99] and scans that
    (down, yardline) cell for a bucket containing the distance. A
    missing bucket falls back to the nearest available one for that
    down, with a warning logged once per (down, yardline). Coverage
    gaps across the down-by-yardline lattice are reported at load time.
    """

    REQUIRED = ("down", "ytg_min", "ytg_max", "yardline", "ep")

    def __init__(self, table: pd.DataFrame):
        missing = [c for c in self.REQUIRED if c not in table.columns]
        if missing:
            raise ValueError(f"utility table missing columns: {missing}")
        t = table[list(self.REQUIRED)].astype(float)
        if not ((t["down"] >= 1) & (t["down"] <= 4)).all():
            raise ValueError("utility table has downs outside 1..4")
        if not ((t["yardline"] >= 1) & (t["yardline"] <= 99)).all():
            raise ValueError("utility table has yardlines outside 1..99")
        if (t["ytg_min"] > t["ytg_max"]).any():
            raise ValueError("utility table has ytg_min > ytg_max")
        if not np.isfinite(t["ep"]).all():
            raise ValueError("utility table has non-finite ep values")
        if ((t["ep"] < -7.0) | (t["ep"] > 7.0)).any():
            raise ValueError("utility table has ep values outside [-7, 7]")
        self._cells: dict[tuple[int, int], list[tuple[float, float, float]]] = {}
        for row in t.itertuples(index=False):
            key = (int(row.down), int(round(row.yardline)))
            self._cells.setdefault(key, []).append(
                (row.ytg_min, row.ytg_max, row.ep)
            )
        covered = len(self._cells)
        if covered < 4 * 99:
            logger.warning(
                "utility table covers %d of %d (down, yardline) cells; "
                "uncovered lookups will use the nearest bucket",
                covered,
                4 * 99,
            )
        self._warned: set[tuple[int, int]] = set()

    @classmethod
    def from_csv(cls, path: str) -> "TableExpectedPoints":
        return cls(pd.read_csv(path))

    def __call__(self, down: int, yards_to_go: float, yardline: float) -> float:
        down = int(down)
        yl = int(round(float(np.clip(yardline, YARDLINE_MIN, YARDLINE_MAX))))
        cell = self._cells.get((down, yl))
        if cell is not None:
            for lo, hi, ep in cell:
                if lo <= yards_to_go <= hi:
                    return float(ep)
        if (down, yl) not in self._warned:
            self._warned.add((down, yl))
            logger.warning(
                "utility table has no bucket for down=%d ytg=%.1f yardline=%d; "
                "using nearest available bucket",
                down,
                yards_to_go,
                yl,
            )
        best = None
        for (d, cyl), buckets in self._cells.items():
            if d != down:
                continue
            for lo, hi, ep in buckets:
                ytg_dist = max(lo - yards_to_go, yards_to_go - hi, 0.0)
                key = (abs(cyl - yl), ytg_dist)
                if best is None or key < best[0]:
                    best = (key, ep)
        if best is None:
            raise ValueError(f"utility table has no rows for down {down}")
        return float(best[1])


def make_expected_points(table_path: str | None = None) -> ExpectedPointsModel:
    """Expected-points model from a CSV path, or the parametric fallback."""
    if table_path:
        return TableExpectedPoints.from_csv(table_path)
    return ParametricExpectedPoints()
