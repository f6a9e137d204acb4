"""Model validation and result aggregation.

Three jobs live here:

* leave-one-week-out cross-validation of the outcome and defender-
  location models, comparing candidate feature sets on held-out weeks;
* a training-size sweep that grows the training window one week at a
  time against a fixed final test week;
* season aggregation of per-play evaluations into player and team
  tables with the positioning-value versus yards-allowed correlations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd

from .epv import clamp_training_yac, yac_grid
from .ghost import PlayEvaluation
from .rfcde import CDEForest, ForestConfig, kde_1d, kde_2d

__all__ = [
    "CvFold",
    "CvReport",
    "GHOST2D_METRICS",
    "GHOST2D_RESPONSE",
    "PlayerAggregate",
    "PlayerSummary",
    "TeamAggregate",
    "TeamSummary",
    "YAC_METRICS",
    "aggregate_players",
    "aggregate_teams",
    "evaluations_to_frame",
    "ghost2d_metrics",
    "lowo_cv",
    "pearson_r",
    "standard_error",
    "week_sweep",
    "yac_metrics",
]

YAC_METRICS = ("cde_loss", "rmse_vs_mean", "rmse_vs_mode")
GHOST2D_METRICS = ("cross_entropy", "dist_to_mean", "dist_to_mode")
GHOST2D_RESPONSE = ("def1_x_adj", "def1_y_adj")

#: Density floor inside the cross-entropy log; an observed location the
#: model gives literally zero mass would otherwise produce -inf.
CROSS_ENTROPY_FLOOR = 1e-300


def standard_error(values: Sequence[float]) -> float:
    """Sample standard deviation over the square root of the count."""
    v = np.asarray(values, dtype=float)
    if len(v) < 2:
        return float("nan")
    return float(v.std(ddof=1) / math.sqrt(len(v)))


def pearson_r(a: Sequence[float], b: Sequence[float]) -> float:
    """Pearson correlation; NaN when undefined (n < 2 or zero variance)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(a) < 2 or a.std() == 0 or b.std() == 0:
        return float("nan")
    return float(np.corrcoef(a, b)[0, 1])


# ---------------------------------------------------------------------------
# per-fold metrics


def _check_columns(table: pd.DataFrame, columns: Sequence[str], what: str):
    missing = [c for c in columns if c not in table.columns]
    if missing:
        raise ValueError(f"{what} references unavailable columns: {missing}")


def yac_metrics(
    forest: CDEForest,
    test: pd.DataFrame,
    features: Sequence[str],
    grid_step: float = 0.5,
) -> dict[str, float]:
    """Held-out metrics of the outcome model on one test set.

    cde_loss uses one grid spanning every test play's outcome range; the
    point-prediction errors (density mean and mode against the observed
    yardage) are computed on each play's own outcome grid, normalized
    discretely, mirroring how the value integral treats the density.
    """
    x = test[list(features)].to_numpy(dtype=float)
    y = test["observed_yac"].to_numpy(dtype=float)
    catch = test["catch_x_adj"].to_numpy(dtype=float)
    w = forest.weights(x)

    lo = min(-10.0, math.floor(y.min()) - 1.0)
    hi = max(float(np.floor(catch.max()) + 2.0), math.ceil(y.max()) + 1.0)
    loss_grid = np.arange(lo, hi + 0.5 * grid_step, grid_step)
    sq_integrals = np.empty(len(test))
    at_obs = np.empty(len(test))
    means = np.empty(len(test))
    modes = np.empty(len(test))
    for i, row in enumerate(w):
        dens = kde_1d(loss_grid, forest.responses, row)
        sq_integrals[i] = _trapz(np.square(dens), loss_grid)
        at_obs[i] = kde_1d(np.array([y[i]]), forest.responses, row)[0]
        grid_i = yac_grid(catch[i])
        dens_i = kde_1d(grid_i, forest.responses, row)
        total = dens_i.sum()
        if total <= 0:
            raise ValueError(
                f"test play {i} has no density mass on its outcome grid"
            )
        p = dens_i / total
        means[i] = float((p * grid_i).sum())
        modes[i] = float(grid_i[int(np.argmax(dens_i))])
    return {
        "cde_loss": float(np.mean(sq_integrals - 2.0 * at_obs)),
        "rmse_vs_mean": float(np.sqrt(np.mean((means - y) ** 2))),
        "rmse_vs_mode": float(np.sqrt(np.mean((modes - y) ** 2))),
    }


def ghost2d_metrics(
    forest: CDEForest,
    test: pd.DataFrame,
    features: Sequence[str],
    lattice_step: float = 1.0,
    lattice_pad: float = 3.0,
) -> dict[str, float]:
    """Held-out metrics of the defender-location model on one test set.

    cross_entropy is the mean negative log density at the observed
    location (floored at 1e-300). dist_to_mean uses the exact mixture
    mean of the weighted kernel estimate (weighted average of training
    locations, no lattice involved); dist_to_mode scans a lattice
    spanning the training locations.
    """
    x = test[list(features)].to_numpy(dtype=float)
    obs = test[list(GHOST2D_RESPONSE)].to_numpy(dtype=float)
    w = forest.weights(x)
    centers = forest.responses

    pad, step = lattice_pad, lattice_step
    xs = np.arange(centers[:, 0].min() - pad, centers[:, 0].max() + pad + 0.5 * step, step)
    ys = np.arange(centers[:, 1].min() - pad, centers[:, 1].max() + pad + 0.5 * step, step)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    lattice = np.column_stack((gx.ravel(), gy.ravel()))

    nll = np.empty(len(test))
    d_mean = np.empty(len(test))
    d_mode = np.empty(len(test))
    for i, row in enumerate(w):
        at_obs = kde_2d(obs[i].reshape(1, 2), centers, row)[0]
        nll[i] = -math.log(max(at_obs, CROSS_ENTROPY_FLOOR))
        mean_loc = row @ centers
        d_mean[i] = float(np.hypot(*(mean_loc - obs[i])))
        dens = kde_2d(lattice, centers, row)
        mode_loc = lattice[int(np.argmax(dens))]
        d_mode[i] = float(np.hypot(*(mode_loc - obs[i])))
    return {
        "cross_entropy": float(nll.mean()),
        "dist_to_mean": float(d_mean.mean()),
        "dist_to_mode": float(d_mode.mean()),
    }


def _fit_fold(
    train: pd.DataFrame,
    features: Sequence[str],
    model_kind: str,
    config: ForestConfig,
) -> CDEForest:
    x = train[list(features)].to_numpy(dtype=float)
    if model_kind == "yac":
        y, _ = clamp_training_yac(
            train["observed_yac"].to_numpy(dtype=float),
            train["catch_x_adj"].to_numpy(dtype=float),
        )
    else:
        y = train[list(GHOST2D_RESPONSE)].to_numpy(dtype=float)
    return CDEForest.fit(x, y, config, feature_names=tuple(features))


def _score_fold(
    forest: CDEForest,
    test: pd.DataFrame,
    features: Sequence[str],
    model_kind: str,
    grid_step: float,
    lattice_step: float,
) -> dict[str, float]:
    if model_kind == "yac":
        return yac_metrics(forest, test, features, grid_step=grid_step)
    return ghost2d_metrics(forest, test, features, lattice_step=lattice_step)


def _required_columns(model_kind: str, features: Sequence[str]) -> list[str]:
    extra = ["observed_yac", "catch_x_adj"] if model_kind == "yac" else list(GHOST2D_RESPONSE)
    return list(features) + extra


def _weeks(table: pd.DataFrame) -> list[int]:
    if "week" not in table.columns or table["week"].isna().any():
        raise ValueError("every play needs a week for week-based splits")
    return sorted(int(w) for w in table["week"].unique())


# ---------------------------------------------------------------------------
# leave-one-week-out cross-validation


@dataclass(frozen=True)
class CvFold:
    """Metrics of one feature set on one held-out week."""

    week: int
    n_train: int
    n_test: int
    metrics: dict[str, float]


@dataclass(frozen=True)
class CvReport:
    """Cross-validation results for every candidate feature set."""

    model_kind: str
    metric_names: tuple[str, ...]
    feature_sets: dict[str, tuple[str, ...]]
    folds: dict[str, list[CvFold]]

    def fold_frame(self) -> pd.DataFrame:
        """One row per (feature set, held-out week)."""
        rows = []
        for name, folds in self.folds.items():
            for f in folds:
                row = {
                    "feature_set": name,
                    "week": f.week,
                    "n_train": f.n_train,
                    "n_test": f.n_test,
                }
                row.update(f.metrics)
                rows.append(row)
        return pd.DataFrame(rows)

    def summary_frame(self) -> pd.DataFrame:
        """Mean and standard error of each metric per feature set."""
        rows = []
        for name, folds in self.folds.items():
            row = {"feature_set": name, "n_folds": len(folds)}
            for m in self.metric_names:
                vals = [f.metrics[m] for f in folds]
                row[f"{m}_mean"] = float(np.mean(vals))
                row[f"{m}_se"] = standard_error(vals)
            rows.append(row)
        return pd.DataFrame(rows)


def lowo_cv(
    table: pd.DataFrame,
    feature_sets: Mapping[str, Sequence[str]],
    model_kind: str,
    forest_config: ForestConfig | None = None,
    grid_step: float = 0.5,
    lattice_step: float = 1.0,
) -> CvReport:
    """Leave-one-week-out comparison of candidate feature sets.

    Each week is held out once; models train on all other weeks. Folds
    therefore partition the plays: every play is tested exactly once.
    The same fold split and forest settings apply to every feature set,
    so differences in the summary are attributable to the features.
    """
    if model_kind not in ("yac", "ghost2d"):
        raise ValueError("model_kind must be 'yac' or 'ghost2d'")
    if not feature_sets:
        raise ValueError("no feature sets given")
    config = forest_config or ForestConfig()
    for name, features in feature_sets.items():
        _check_columns(table, _required_columns(model_kind, features), f"feature set {name!r}")
    weeks = _weeks(table)
    if len(weeks) < 2:
        raise ValueError(f"need at least 2 weeks for cross-validation, got {len(weeks)}")

    metric_names = YAC_METRICS if model_kind == "yac" else GHOST2D_METRICS
    folds: dict[str, list[CvFold]] = {name: [] for name in feature_sets}
    for week in weeks:
        is_test = table["week"].astype(int) == week
        train, test = table[~is_test], table[is_test]
        for name, features in feature_sets.items():
            forest = _fit_fold(train, features, model_kind, config)
            metrics = _score_fold(
                forest, test, features, model_kind, grid_step, lattice_step
            )
            folds[name].append(CvFold(week, len(train), len(test), metrics))
    return CvReport(
        model_kind=model_kind,
        metric_names=metric_names,
        feature_sets={n: tuple(f) for n, f in feature_sets.items()},
        folds=folds,
    )


def week_sweep(
    table: pd.DataFrame,
    features: Sequence[str],
    model_kind: str,
    forest_config: ForestConfig | None = None,
    grid_step: float = 0.5,
    lattice_step: float = 1.0,
) -> pd.DataFrame:
    """Metrics against a fixed final test week as training weeks accumulate.

    Trains on the first k weeks for k = 1 .. (#weeks - 1), always
    testing on the last week, so a season of 17 weeks yields 16 rows.
    """
    if model_kind not in ("yac", "ghost2d"):
        raise ValueError("model_kind must be 'yac' or 'ghost2d'")
    _check_columns(table, _required_columns(model_kind, features), "feature set")
    config = forest_config or ForestConfig()
    weeks = _weeks(table)
    if len(weeks) < 3:
        raise ValueError(f"need at least 3 weeks for the training sweep, got {len(weeks)}")
    test_week = weeks[-1]
    week_col = table["week"].astype(int)
    test = table[week_col == test_week]
    rows = []
    for k in range(1, len(weeks)):
        train_weeks = weeks[:k]
        train = table[week_col.isin(train_weeks)]
        forest = _fit_fold(train, features, model_kind, config)
        metrics = _score_fold(
            forest, test, features, model_kind, grid_step, lattice_step
        )
        row = {
            "n_train_weeks": k,
            "last_train_week": train_weeks[-1],
            "test_week": test_week,
            "n_train": len(train),
            "n_test": len(test),
        }
        row.update(metrics)
        rows.append(row)
    return pd.DataFrame(rows)


# ---------------------------------------------------------------------------
# season aggregation


EVALUATION_COLUMNS = (
    "game_id",
    "play_id",
    "week",
    "epv_catch",
    "expected_delta",
    "expected_delta_observed_traj",
    "identity_delta",
    "percentile",
    "observed_yac",
    "n_locations",
    "n_locations_failed",
    "def1_player_id",
    "def1_position",
    "def1_name",
    "def1_team",
)


def evaluations_to_frame(evaluations: Iterable[PlayEvaluation]) -> pd.DataFrame:
    """Flatten per-play evaluations into the season summary table."""
    rows = [
        {c: getattr(e, c) for c in EVALUATION_COLUMNS} for e in evaluations
    ]
    return pd.DataFrame(rows, columns=list(EVALUATION_COLUMNS))


def _as_frame(evaluations) -> pd.DataFrame:
    if isinstance(evaluations, pd.DataFrame):
        return evaluations
    return evaluations_to_frame(evaluations)


@dataclass(frozen=True)
class PlayerSummary:
    """Season totals for one defender (as the nearest defender at catch)."""

    player_id: str
    name: str | None
    position: str | None
    receptions: int
    total_delta: float
    avg_delta: float
    total_yac: float
    avg_yac: float


@dataclass(frozen=True)
class TeamSummary:
    """Season totals for one defense."""

    team: str
    receptions: int
    total_delta: float
    avg_delta: float
    total_yac: float
    avg_yac: float
    epa: float | None = None


@dataclass(frozen=True)
class PlayerAggregate:
    """Leaderboard plus the positioning-value versus yards-allowed scatter."""

    leaderboard: list[PlayerSummary]
    scatter: pd.DataFrame
    overall_r: float
    position_r: dict[str, float]
    n_unattributed: int = 0

    def leaderboard_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [
                {
                    "player_id": p.player_id,
                    "name": p.name,
                    "position": p.position,
                    "receptions": p.receptions,
                    "total_delta": p.total_delta,
                    "avg_delta": p.avg_delta,
                    "total_yac": p.total_yac,
                    "avg_yac": p.avg_yac,
                }
                for p in self.leaderboard
            ]
        )


@dataclass(frozen=True)
class TeamAggregate:
    """Per-team positioning value joined with externally supplied EPA."""

    teams: list[TeamSummary]
    r: float
    missing_teams: list[str] = field(default_factory=list)

    def team_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [
                {
                    "team": t.team,
                    "receptions": t.receptions,
                    "total_delta": t.total_delta,
                    "avg_delta": t.avg_delta,
                    "total_yac": t.total_yac,
                    "avg_yac": t.avg_yac,
                    "epa": t.epa,
                }
                for t in self.teams
            ]
        )


def aggregate_players(
    evaluations,
    rosters: pd.DataFrame | None = None,
    min_receptions: int = 10,
) -> PlayerAggregate:
    """Aggregate per-play positioning values into player season tables.

    The leaderboard ranks every attributed player by total positioning
    value, most negative (best) first, with no play-count minimum: a
    total only grows large through sustained play. The scatter table of
    (average positioning value, average yards allowed) keeps players
    with at least ``min_receptions`` plays, and the Pearson correlation
    between its two columns is reported overall and per position.

    ``rosters``, when given, overrides names and positions by player id
    (columns: player_id, plus optional name and position).

    Plays with no defender identity cannot be attributed; they are
    dropped and counted in ``n_unattributed``.
    """
    frame = _as_frame(evaluations)
    roster_name: dict[str, str] = {}
    roster_pos: dict[str, str] = {}
    if rosters is not None:
        if "player_id" not in rosters.columns:
            raise ValueError("rosters table needs a player_id column")
        for rec in rosters.to_dict("records"):
            pid = str(rec["player_id"])
            if rec.get("name") is not None and not pd.isna(rec.get("name")):
                roster_name[pid] = str(rec["name"])
            if rec.get("position") is not None and not pd.isna(rec.get("position")):
                roster_pos[pid] = str(rec["position"])

    acc: dict[str, dict] = {}
    n_unattributed = 0
    for rec in frame.to_dict("records"):
        pid = rec.get("def1_player_id")
        if pid is None or (isinstance(pid, float) and np.isnan(pid)):
            n_unattributed += 1
            continue
        pid = str(pid)
        slot = acc.setdefault(
            pid,
            {"n": 0, "delta": 0.0, "yac": 0.0, "name": None, "position": None},
        )
        slot["n"] += 1
        slot["delta"] += float(rec["expected_delta"])
        slot["yac"] += float(rec["observed_yac"])
        for key, col in (("name", "def1_name"), ("position", "def1_position")):
            v = rec.get(col)
            if slot[key] is None and v is not None and not pd.isna(v):
                slot[key] = str(v)

    summaries = []
    for pid, s in acc.items():
        summaries.append(
            PlayerSummary(
                player_id=pid,
                name=roster_name.get(pid, s["name"]),
                position=roster_pos.get(pid, s["position"]),
                receptions=s["n"],
                total_delta=s["delta"],
                avg_delta=s["delta"] / s["n"],
                total_yac=s["yac"],
                avg_yac=s["yac"] / s["n"],
            )
        )
    summaries.sort(key=lambda p: (p.total_delta, p.player_id))

    qualified = [p for p in summaries if p.receptions >= min_receptions]
    scatter = pd.DataFrame(
        [
            {
                "player_id": p.player_id,
                "name": p.name,
                "position": p.position,
                "receptions": p.receptions,
                "avg_delta": p.avg_delta,
                "avg_yac": p.avg_yac,
            }
            for p in qualified
        ],
        columns=["player_id", "name", "position", "receptions", "avg_delta", "avg_yac"],
    )
    overall = pearson_r(scatter["avg_delta"], scatter["avg_yac"]) if len(scatter) else float("nan")
    position_r = {}
    if len(scatter):
        for pos, sub in scatter.groupby("position", dropna=True):
            if len(sub) >= 2:
                position_r[str(pos)] = pearson_r(sub["avg_delta"], sub["avg_yac"])
    return PlayerAggregate(
        leaderboard=summaries,
        scatter=scatter,
        overall_r=overall,
        position_r=position_r,
        n_unattributed=n_unattributed,
    )


def aggregate_teams(evaluations, team_epa: pd.DataFrame) -> TeamAggregate:
    """Per-defense positioning value joined with an external EPA table.

    ``team_epa`` needs columns ``team`` and ``epa`` (one row per team,
    points per play or any consistent unit). Teams seen in evaluations
    but absent from the file are listed in ``missing_teams`` and left
    out of the correlation.
    """
    for col in ("team", "epa"):
        if col not in team_epa.columns:
            raise ValueError(f"team EPA table needs a {col!r} column")
    epa_by_team = {
        str(rec["team"]): float(rec["epa"]) for rec in team_epa.to_dict("records")
    }
    frame = _as_frame(evaluations)
    acc: dict[str, dict] = {}
    for rec in frame.to_dict("records"):
        team = rec.get("def1_team")
        if team is None or (isinstance(team, float) and np.isnan(team)):
            continue
        team = str(team)
        slot = acc.setdefault(team, {"n": 0, "delta": 0.0, "yac": 0.0})
        slot["n"] += 1
        slot["delta"] += float(rec["expected_delta"])
        slot["yac"] += float(rec["observed_yac"])

    teams = []
    missing = []
    for team in sorted(acc):
        s = acc[team]
        epa = epa_by_team.get(team)
        if epa is None:
            missing.append(team)
        teams.append(
            TeamSummary(
                team=team,
                receptions=s["n"],
                total_delta=s["delta"],
                avg_delta=s["delta"] / s["n"],
                total_yac=s["yac"],
                avg_yac=s["yac"] / s["n"],
                epa=epa,
            )
        )
    matched = [t for t in teams if t.epa is not None]
    r = pearson_r(
        [t.avg_delta for t in matched], [t.epa for t in matched]
    ) if len(matched) >= 2 else float("nan")
    return TeamAggregate(teams=teams, r=r, missing_teams=missing)


def _trapz(values: np.ndarray, grid: np.ndarray) -> float:
    trapezoid = getattr(np, "trapezoid", None) or np.trapz
    return float(trapezoid(values, grid))
