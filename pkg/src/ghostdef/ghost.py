"""Counterfactual ghost defenders and the positioning value of a play.

For one completed pass, the engine asks: over the distribution of
places a typical nearest defender would occupy at the catch (given the
receiver and quarterback context), how much expected play value did the
actual defender's position save or concede?

Mechanics per play:

1. Build a lattice of candidate defender locations around the receiver
   and weigh each by the fitted location density (the ghost model).
2. At each location, draw full movement states (speed, movement
   direction, facing) from observed defenders, preferring donors whose
   distance to their receiver matched this location's distance; the
   three components are drawn jointly from one donor so physically
   incoherent combinations never appear.
3. Rebuild the nearest-defender features for each placed ghost with the
   same code that produced the observed features, evaluate expected play
   value for every row in one batch, and average: the positioning value
   is the density-weighted mean of (observed value minus ghost value).

Positive values mean the real defender's position was better (cost the
offense more) than the typical ghost.
"""

from __future__ import annotations

import logging
import zlib
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .epv import epv_batch
from .rfcde import CDEForest, kde_2d
from .tracking import (
    GHOST_FEATURES,
    MIDFIELD_Y,
    YAC_FEATURES,
    relative_player_features,
)
from .utility import ExpectedPointsModel, PlaySituation

logger = logging.getLogger(__name__)

X_ADJ_MIN, X_ADJ_MAX = -10.0, 110.0
Y_ADJ_MIN, Y_ADJ_MAX = -MIDFIELD_Y, MIDFIELD_Y

#: Rows are evaluated through the forest in fixed-size chunks so memory
#: stays bounded; per-row results do not depend on the chunk size.
EPV_CHUNK_ROWS = 2048


@dataclass(frozen=True)
class GhostConfig:
    """Counterfactual evaluation settings.

    Attributes:
        draws_per_location: movement states sampled at each lattice point.
        spacing: lattice spacing in yards.
        halfwidth: lattice half-extent around the receiver, in yards.
        epsilon: softening constant in the donor-matching weights
            1 / (|donor distance - target distance| + epsilon).
        seed: base seed; per-play, per-location streams are derived from
            it and the play identity, so results are independent of play
            order and worker scheduling.
    """

    draws_per_location: int = 100
    spacing: float = 1.0
    halfwidth: float = 15.0
    epsilon: float = 1e-6
    seed: int = 0


class PlayEvaluationError(RuntimeError):
    """A play could not be evaluated; ``reason`` is machine-readable."""

    def __init__(self, reason: str, detail: str = ""):
        self.reason = reason
        super().__init__(f"{reason}: {detail}" if detail else reason)


@dataclass(frozen=True)
class TrajectoryPool:
    """Movement states of observed nearest defenders, with match keys.

    Each donor row keeps its (speed, movement direction, facing) triple
    in the attack-relative frame together with the donor's distance to
    its receiver; sampling prefers donors whose distance matches the
    ghost location being filled.
    """

    speed: np.ndarray
    dir_adj: np.ndarray
    o_adj: np.ndarray
    dist_to_rec: np.ndarray

    def __post_init__(self):
        n = len(self.speed)
        for name in ("dir_adj", "o_adj", "dist_to_rec"):
            if len(getattr(self, name)) != n:
                raise ValueError("trajectory pool arrays differ in length")
        if n == 0:
            raise ValueError("trajectory pool is empty")

    def __len__(self) -> int:
        return len(self.speed)

    @classmethod
    def from_feature_table(cls, table: pd.DataFrame) -> "TrajectoryPool":
        """Build the pool from the canonical feature table.

        Uses the full-circle attack-relative angles kept as auxiliary
        columns (the model features fold angles to [0, 180], which would
        lose the left/right distinction needed to rebuild a ghost).
        """
        cols = ("def1_s", "def1_dir_adj", "def1_o_adj", "def1_dist_to_rec")
        missing = [c for c in cols if c not in table.columns]
        if missing:
            raise ValueError(f"feature table missing columns: {missing}")
        sub = table[list(cols)].astype(float).dropna()
        return cls(
            speed=sub["def1_s"].to_numpy(),
            dir_adj=sub["def1_dir_adj"].to_numpy(),
            o_adj=sub["def1_o_adj"].to_numpy(),
            dist_to_rec=sub["def1_dist_to_rec"].to_numpy(),
        )

    def donor_probabilities(self, dist: float, epsilon: float) -> np.ndarray:
        """Donor selection distribution for one target distance."""
        return _distance_match_weights(self.dist_to_rec, dist, epsilon)

    def sample(
        self, dist: float, draws: int, epsilon: float, rng: np.random.Generator
    ) -> np.ndarray:
        """Draw (speed, dir_adj, o_adj) triples for a location, shape (b, 3)."""
        p = self.donor_probabilities(dist, epsilon)
        idx = rng.choice(len(p), size=draws, replace=True, p=p)
        return np.column_stack((self.speed[idx], self.dir_adj[idx], self.o_adj[idx]))


def _distance_match_weights(
    distances: np.ndarray, target: float, epsilon: float
) -> np.ndarray:
    w = 1.0 / (np.abs(np.asarray(distances, dtype=float) - target) + epsilon)
    return w / w.sum()


def trajectory_weights(
    location: np.ndarray,
    receiver_location: np.ndarray,
    training_distances: np.ndarray,
    epsilon: float = 1e-6,
) -> np.ndarray:
    """Donor weights for a candidate location: closer distance match, more weight.

    Weight of donor i is 1 / (|d_i - d| + epsilon) where d is the
    location's distance to the receiver, normalized to sum to 1. The
    epsilon keeps an exact distance match finite rather than a point
    mass.
    """
    location = np.asarray(location, dtype=float)
    receiver_location = np.asarray(receiver_location, dtype=float)
    training_distances = np.asarray(training_distances, dtype=float)
    if np.any(training_distances < 0):
        raise ValueError("training distances must be nonnegative")
    d = float(np.hypot(*(location - receiver_location)))
    return _distance_match_weights(training_distances, d, epsilon)


@dataclass(frozen=True)
class PlayAtCatch:
    """Everything the engine needs about one observed play."""

    game_id: str
    play_id: str
    week: int | None
    situation: PlaySituation
    ghost_features: np.ndarray  # receiver + QB block, length 10
    yac_features: np.ndarray  # full outcome-model vector, length 20
    def1_x_adj: float
    def1_y_adj: float
    def1_speed: float
    def1_dir_adj: float
    def1_o_adj: float
    observed_yac: float = float("nan")
    def1_player_id: str | None = None
    def1_position: str | None = None
    def1_name: str | None = None
    def1_team: str | None = None
    defense_team: str | None = None

    @property
    def rec_x_adj(self) -> float:
        return float(self.ghost_features[0])

    @property
    def rec_y_adj(self) -> float:
        return float(self.ghost_features[1])

    @property
    def catch_x_adj(self) -> float:
        return self.rec_x_adj

    @classmethod
    def from_row(cls, row) -> "PlayAtCatch":
        """Build from one feature-table row (Series or mapping)."""
        ghost = np.array([float(row[c]) for c in GHOST_FEATURES])
        yac = np.array([float(row[c]) for c in YAC_FEATURES])
        week = row.get("week")
        week = int(week) if week is not None and not pd.isna(week) else None

        def _opt(key):
            v = row.get(key)
            if v is None or (isinstance(v, float) and np.isnan(v)):
                return None
            return str(v)

        return cls(
            game_id=str(row["game_id"]),
            play_id=str(row["play_id"]),
            week=week,
            situation=PlaySituation(
                down=int(row["down"]),
                yards_to_go=float(row["yards_to_go"]),
                los_x_adj=float(row["los_x_adj"]),
            ),
            ghost_features=ghost,
            yac_features=yac,
            def1_x_adj=float(row["def1_x_adj"]),
            def1_y_adj=float(row["def1_y_adj"]),
            def1_speed=float(row["def1_s"]),
            def1_dir_adj=float(row["def1_dir_adj"]),
            def1_o_adj=float(row["def1_o_adj"]),
            observed_yac=float(row["observed_yac"]),
            def1_player_id=_opt("def1_player_id"),
            def1_position=_opt("def1_position"),
            def1_name=_opt("def1_name"),
            def1_team=_opt("def1_team"),
            defense_team=_opt("defense_team"),
        )


@dataclass
class PlayEvaluation:
    """Output of the counterfactual evaluation of one play."""

    game_id: str
    play_id: str
    week: int | None
    epv_catch: float
    expected_delta: float
    expected_delta_observed_traj: float
    identity_delta: float
    percentile: float | None = None
    observed_yac: float = float("nan")
    n_locations: int = 0
    n_locations_failed: int = 0
    def1_player_id: str | None = None
    def1_position: str | None = None
    def1_name: str | None = None
    def1_team: str | None = None
    # per-lattice detail, populated when keep_detail is requested; failed
    # locations hold NaN and are excluded from location_density's mass
    lattice: np.ndarray | None = field(default=None, repr=False)
    location_density: np.ndarray | None = field(default=None, repr=False)
    location_epv: np.ndarray | None = field(default=None, repr=False)
    location_epv_observed_traj: np.ndarray | None = field(default=None, repr=False)
    location_epv_samples: np.ndarray | None = field(default=None, repr=False)


def location_lattice(
    rec_x_adj: float, rec_y_adj: float, config: GhostConfig
) -> np.ndarray:
    """Candidate ghost locations: a square lattice clipped to the field.

    Points are ordered x-major (y varies fastest) so downstream arrays
    have a stable layout.
    """
    hw, step = config.halfwidth, config.spacing
    xs = np.arange(rec_x_adj - hw, rec_x_adj + hw + 0.5 * step, step)
    ys = np.arange(rec_y_adj - hw, rec_y_adj + hw + 0.5 * step, step)
    xs = xs[(xs >= X_ADJ_MIN) & (xs <= X_ADJ_MAX)]
    ys = ys[(ys >= Y_ADJ_MIN) & (ys <= Y_ADJ_MAX)]
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    points = np.column_stack((gx.ravel(), gy.ravel()))
    if len(points) == 0:
        raise PlayEvaluationError("empty_lattice")
    return points


def location_distribution(
    ghost_forest: CDEForest, ghost_features: np.ndarray, lattice: np.ndarray
) -> np.ndarray:
    """Normalized ghost-location distribution over the lattice."""
    w = ghost_forest.weights(ghost_features.reshape(1, -1))[0]
    dens = kde_2d(lattice, ghost_forest.responses, w)
    total = dens.sum()
    if not np.isfinite(total) or total <= 0:
        raise PlayEvaluationError("no_support", "location density has no mass")
    return dens / total


def ghost_feature_rows(
    play: PlayAtCatch, locations: np.ndarray, triples: np.ndarray
) -> np.ndarray:
    """Full outcome-model rows for ghosts at ``locations`` with ``triples``.

    The defender block is rebuilt with the same function used on
    observed tracking data; a ghost given the observed location and
    movement state reproduces the observed feature row bitwise.
    """
    locations = np.atleast_2d(np.asarray(locations, dtype=float))
    triples = np.atleast_2d(np.asarray(triples, dtype=float))
    if len(locations) != len(triples):
        raise ValueError("locations and triples differ in length")
    block = relative_player_features(
        play.rec_x_adj,
        play.rec_y_adj,
        locations[:, 0],
        locations[:, 1],
        triples[:, 0],
        triples[:, 1],
        triples[:, 2],
    )
    rows = np.empty((len(locations), len(YAC_FEATURES)))
    rows[:, : len(GHOST_FEATURES)] = play.ghost_features
    rows[:, len(GHOST_FEATURES):] = block
    return rows


def ghost_epv(
    play: PlayAtCatch,
    location: np.ndarray,
    triple: np.ndarray,
    yac_forest: CDEForest,
    ep_model: ExpectedPointsModel,
) -> float:
    """Expected play value with the nearest defender replaced by one ghost.

    The ghost stands at ``location`` with movement state ``triple``
    (speed, movement direction, facing, attack-relative); the receiver
    and quarterback context is untouched. Placing the ghost at the
    observed defender's location and movement state reproduces the
    observed play value exactly.
    """
    row = ghost_feature_rows(
        play,
        np.asarray(location, dtype=float).reshape(1, 2),
        np.asarray(triple, dtype=float).reshape(1, 3),
    )
    epvs, _, _ = epv_batch(
        yac_forest, row, play.catch_x_adj, play.situation, ep_model
    )
    return float(epvs[0])


def expected_delta_from_epvs(
    epv_catch: float, location_density: np.ndarray, epv_samples: np.ndarray
) -> float:
    """Reduce per-sample ghost play values to the positioning value.

    The value is sum over locations of density times the mean over draws
    of (observed value minus ghost value). Exposed so the reduction can
    be verified against a brute-force double loop on hand-set inputs.
    """
    h = np.asarray(location_density, dtype=float)
    samples = np.atleast_2d(np.asarray(epv_samples, dtype=float))
    if len(h) != len(samples):
        raise ValueError("density and samples differ in location count")
    return float((h * (epv_catch - samples.mean(axis=1))).sum())


def pooled_percentile(
    epv_catch: float, location_density: np.ndarray, epv_samples: np.ndarray
) -> float:
    """Percentile of the observed value within the pooled ghost values.

    Each ghost sample carries weight h(location) / draws, so the pool is
    the same mixture the positioning value integrates over. Ties count
    half (midpoint convention): if every ghost value equals the observed
    value the percentile is 0.5. Low percentile means the observed
    defender held the offense to less value than almost all ghosts.
    """
    h = np.asarray(location_density, dtype=float)
    samples = np.atleast_2d(np.asarray(epv_samples, dtype=float))
    if len(h) != len(samples):
        raise ValueError("density and samples differ in location count")
    w = np.repeat(h / samples.shape[1], samples.shape[1])
    flat = samples.ravel()
    below = w[flat < epv_catch].sum()
    ties = w[flat == epv_catch].sum()
    return float((below + 0.5 * ties) / w.sum())


def play_random_state(base_seed: int, game_id: str, play_id: str) -> np.random.SeedSequence:
    """Deterministic per-play seed root, independent of play order.

    Uses CRC32 of the play keys rather than Python's salted hash so the
    stream is stable across processes and runs.
    """
    return np.random.SeedSequence(
        entropy=[
            int(base_seed) & 0xFFFFFFFF,
            zlib.crc32(str(game_id).encode("utf-8")),
            zlib.crc32(str(play_id).encode("utf-8")),
        ]
    )


def evaluate_play(
    play: PlayAtCatch,
    yac_forest: CDEForest,
    ghost_forest: CDEForest,
    pool: TrajectoryPool,
    ep_model: ExpectedPointsModel,
    config: GhostConfig,
    keep_detail: bool = False,
) -> PlayEvaluation:
    """Counterfactual positioning value of one play.

    The observed row, an identity row (ghost rebuilt at the observed
    defender's location and movement state), one observed-movement ghost
    per lattice point, and all sampled ghosts are pushed through one
    batched play-value evaluation so every number comes from the same
    code path.

    Lattice points whose sampled ghosts yield no density support are
    dropped and the location distribution renormalized; the play fails
    with ``no_support`` if the observed row itself has no support or no
    lattice point survives.
    """
    lattice = location_lattice(play.rec_x_adj, play.rec_y_adj, config)
    h = location_distribution(ghost_forest, play.ghost_features, lattice)
    n_loc = len(lattice)
    b = config.draws_per_location

    dists = np.hypot(
        lattice[:, 0] - play.rec_x_adj, lattice[:, 1] - play.rec_y_adj
    )
    play_ss = play_random_state(config.seed, play.game_id, play.play_id)
    triples = np.empty((n_loc, b, 3))
    for i in range(n_loc):
        rng = np.random.default_rng(
            np.random.SeedSequence(
                entropy=play_ss.entropy, spawn_key=(i,)
            )
        )
        triples[i] = pool.sample(float(dists[i]), b, config.epsilon, rng)

    observed_triple = np.array(
        [[play.def1_speed, play.def1_dir_adj, play.def1_o_adj]]
    )
    observed_location = np.array([[play.def1_x_adj, play.def1_y_adj]])

    identity_row = ghost_feature_rows(play, observed_location, observed_triple)
    obs_traj_rows = ghost_feature_rows(
        play, lattice, np.repeat(observed_triple, n_loc, axis=0)
    )
    sampled_rows = ghost_feature_rows(
        play,
        np.repeat(lattice, b, axis=0),
        triples.reshape(n_loc * b, 3),
    )
    rows = np.concatenate(
        [play.yac_features.reshape(1, -1), identity_row, obs_traj_rows, sampled_rows]
    )

    epvs = _epv_rows(rows, yac_forest, play, ep_model)

    epv_catch = epvs[0]
    if np.isnan(epv_catch):
        raise PlayEvaluationError("no_support", "observed play has no density mass")
    identity_delta = float(epv_catch - epvs[1])
    epv_obs_traj = epvs[2 : 2 + n_loc]
    epv_sampled = epvs[2 + n_loc :].reshape(n_loc, b)

    loc_ok = ~(np.isnan(epv_sampled).any(axis=1) | np.isnan(epv_obs_traj))
    n_failed = int((~loc_ok).sum())
    if n_failed:
        logger.info(
            "play %s/%s: dropping %d of %d lattice points with no density support",
            play.game_id,
            play.play_id,
            n_failed,
            n_loc,
        )
    if not loc_ok.any():
        raise PlayEvaluationError("no_support", "every lattice point failed")
    h_ok = h[loc_ok]
    h_ok = h_ok / h_ok.sum()
    samples_ok = epv_sampled[loc_ok]
    loc_epv = samples_ok.mean(axis=1)
    loc_epv_obs = epv_obs_traj[loc_ok]

    expected_delta = expected_delta_from_epvs(epv_catch, h_ok, samples_ok)
    expected_delta_obs = float((h_ok * (epv_catch - loc_epv_obs)).sum())
    percentile = pooled_percentile(epv_catch, h_ok, samples_ok)

    detail_samples = None
    if keep_detail:
        detail_samples = np.full((n_loc, b), np.nan)
        detail_samples[loc_ok] = samples_ok

    return PlayEvaluation(
        game_id=play.game_id,
        play_id=play.play_id,
        week=play.week,
        epv_catch=float(epv_catch),
        expected_delta=expected_delta,
        expected_delta_observed_traj=expected_delta_obs,
        identity_delta=identity_delta,
        percentile=percentile,
        observed_yac=play.observed_yac,
        n_locations=n_loc,
        n_locations_failed=n_failed,
        def1_player_id=play.def1_player_id,
        def1_position=play.def1_position,
        def1_name=play.def1_name,
        def1_team=play.def1_team or play.defense_team,
        lattice=lattice if keep_detail else None,
        location_density=_expand(h_ok, loc_ok) if keep_detail else None,
        location_epv=_expand(loc_epv, loc_ok) if keep_detail else None,
        location_epv_observed_traj=_expand(loc_epv_obs, loc_ok) if keep_detail else None,
        location_epv_samples=detail_samples,
    )


def observed_trajectory_delta(
    play: PlayAtCatch,
    yac_forest: CDEForest,
    ghost_forest: CDEForest,
    ep_model: ExpectedPointsModel,
    config: GhostConfig,
) -> float:
    """Positioning value with every ghost reusing the observed movement state.

    Cheaper variant of :func:`evaluate_play` (one row per lattice point,
    no trajectory draws) that isolates the value of location alone.
    Matches the expected_delta_observed_traj field of a full evaluation.
    """
    lattice = location_lattice(play.rec_x_adj, play.rec_y_adj, config)
    h = location_distribution(ghost_forest, play.ghost_features, lattice)
    observed_triple = np.array(
        [[play.def1_speed, play.def1_dir_adj, play.def1_o_adj]]
    )
    rows = np.concatenate(
        [
            play.yac_features.reshape(1, -1),
            ghost_feature_rows(
                play, lattice, np.repeat(observed_triple, len(lattice), axis=0)
            ),
        ]
    )
    epvs = _epv_rows(rows, yac_forest, play, ep_model)
    epv_catch = epvs[0]
    if np.isnan(epv_catch):
        raise PlayEvaluationError("no_support", "observed play has no density mass")
    loc_epv = epvs[1:]
    loc_ok = ~np.isnan(loc_epv)
    if not loc_ok.any():
        raise PlayEvaluationError("no_support", "every lattice point failed")
    h_ok = h[loc_ok] / h[loc_ok].sum()
    return float((h_ok * (epv_catch - loc_epv[loc_ok])).sum())


def evaluate_at_locations(
    play: PlayAtCatch,
    locations: np.ndarray,
    yac_forest: CDEForest,
    pool: TrajectoryPool,
    ep_model: ExpectedPointsModel,
    config: GhostConfig,
) -> np.ndarray:
    """Mean ghost play value at specific locations (no lattice, no h).

    Samples movement states exactly as :func:`evaluate_play` does and
    returns the per-location mean expected play value over draws. Used
    for probing how value responds to defender placement.
    """
    locations = np.atleast_2d(np.asarray(locations, dtype=float))
    b = config.draws_per_location
    dists = np.hypot(
        locations[:, 0] - play.rec_x_adj, locations[:, 1] - play.rec_y_adj
    )
    play_ss = play_random_state(config.seed, play.game_id, play.play_id)
    triples = np.empty((len(locations), b, 3))
    for i in range(len(locations)):
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=play_ss.entropy, spawn_key=(i,))
        )
        triples[i] = pool.sample(float(dists[i]), b, config.epsilon, rng)
    rows = ghost_feature_rows(
        play, np.repeat(locations, b, axis=0), triples.reshape(-1, 3)
    )
    epvs = _epv_rows(rows, yac_forest, play, ep_model).reshape(len(locations), b)
    return epvs.mean(axis=1)


def _epv_rows(
    rows: np.ndarray,
    yac_forest: CDEForest,
    play: PlayAtCatch,
    ep_model: ExpectedPointsModel,
) -> np.ndarray:
    """Play values for feature rows, NaN where the density has no mass.

    Chunked to bound the (rows x training set) weight matrix; per-row
    results are chunk-size independent.
    """
    out = np.empty(len(rows))
    for start in range(0, len(rows), EPV_CHUNK_ROWS):
        chunk = rows[start : start + EPV_CHUNK_ROWS]
        epvs, _, _ = epv_batch(
            yac_forest,
            chunk,
            play.catch_x_adj,
            play.situation,
            ep_model,
            on_no_support="nan",
        )
        out[start : start + len(chunk)] = epvs
    return out


def _expand(values: np.ndarray, mask: np.ndarray) -> np.ndarray:
    out = np.full(len(mask), np.nan)
    out[mask] = values
    return out
