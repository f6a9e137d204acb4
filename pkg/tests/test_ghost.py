"""Counterfactual defender placement: matching, sampling, and play evaluation."""

import math

import numpy as np
import pytest

from ghostdef.epv import epv_for_features
from ghostdef.ghost import (
    GhostConfig,
    PlayAtCatch,
    PlayEvaluationError,
    TrajectoryPool,
    evaluate_at_locations,
    evaluate_play,
    expected_delta_from_epvs,
    ghost_epv,
    ghost_feature_rows,
    location_distribution,
    location_lattice,
    observed_trajectory_delta,
    play_random_state,
    pooled_percentile,
    trajectory_weights,
)
from ghostdef.rfcde import CDEForest, ForestConfig
from ghostdef.tracking import GHOST_FEATURES, YAC_FEATURES


@pytest.fixture
def play(table):
    # an interior play: far from every boundary so small lattices never clip
    ok = table[
        (table["rec_x_adj"] > 15.0)
        & (table["rec_x_adj"] < 85.0)
        & (table["rec_y_adj"].abs() < 18.0)
    ]
    assert len(ok) > 0
    return PlayAtCatch.from_row(ok.iloc[0])


@pytest.fixture
def pool(table):
    return TrajectoryPool.from_feature_table(table)


# ---------------------------------------------------------------------------
# distance matching


def test_trajectory_weights_formula():
    loc = np.array([23.0, 4.0])  # 5 yards from the receiver
    rec = np.array([20.0, 0.0])
    dists = np.array([0.5, 2.0, 5.0, 9.0])
    w = trajectory_weights(loc, rec, dists)
    raw = 1.0 / (np.abs(dists - 5.0) + 1e-6)
    np.testing.assert_allclose(w, raw / raw.sum(), atol=1e-12)
    assert w.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(w >= 0.0)


def test_trajectory_weights_equidistant_and_exact():
    loc, rec = np.array([5.0, 0.0]), np.array([0.0, 0.0])
    equal = trajectory_weights(loc, rec, np.array([4.0, 6.0]))
    np.testing.assert_allclose(equal, [0.5, 0.5], atol=1e-12)
    near = trajectory_weights(loc, rec, np.array([5.0, 9.0]))
    assert near[0] > 0.999


def test_trajectory_weights_rejects_negative_distances():
    with pytest.raises(ValueError, match="nonnegative"):
        trajectory_weights(
            np.array([1.0, 0.0]), np.array([0.0, 0.0]), np.array([2.0, -1.0])
        )


# ---------------------------------------------------------------------------
# the trajectory pool


def test_pool_from_feature_table(table):
    pool = TrajectoryPool.from_feature_table(table)
    assert len(pool.speed) == len(table)
    np.testing.assert_array_equal(pool.speed, table["def1_s"].to_numpy())
    np.testing.assert_array_equal(pool.dist_to_rec, table["def1_dist_to_rec"].to_numpy())


def test_pool_drops_incomplete_rows_and_validates(table):
    holey = table.copy()
    holey.loc[holey.index[0], "def1_s"] = np.nan
    pool = TrajectoryPool.from_feature_table(holey)
    assert len(pool.speed) == len(table) - 1

    with pytest.raises(ValueError, match="missing columns"):
        TrajectoryPool.from_feature_table(table.drop(columns=["def1_dir_adj"]))
    with pytest.raises(ValueError, match="empty"):
        TrajectoryPool(
            speed=np.array([]),
            dir_adj=np.array([]),
            o_adj=np.array([]),
            dist_to_rec=np.array([]),
        )
    with pytest.raises(ValueError, match="length"):
        TrajectoryPool(
            speed=np.array([1.0]),
            dir_adj=np.array([0.0, 1.0]),
            o_adj=np.array([0.0]),
            dist_to_rec=np.array([2.0]),
        )


def _toy_pool():
    return TrajectoryPool(
        speed=np.array([1.0, 2.0, 3.0, 4.0]),
        dir_adj=np.array([10.0, 20.0, 30.0, 40.0]),
        o_adj=np.array([15.0, 25.0, 35.0, 45.0]),
        dist_to_rec=np.array([0.5, 2.0, 5.0, 9.0]),
    )


def test_pool_sampling_membership_and_determinism():
    pool = _toy_pool()
    draws = pool.sample(4.0, 50, 1e-6, np.random.default_rng(3))
    assert draws.shape == (50, 3)
    allowed = {
        (s, d, o) for s, d, o in zip(pool.speed, pool.dir_adj, pool.o_adj)
    }
    for row in draws:
        assert tuple(row) in allowed
    again = pool.sample(4.0, 50, 1e-6, np.random.default_rng(3))
    np.testing.assert_array_equal(draws, again)


def test_pool_sampling_frequencies_track_match_weights():
    pool = _toy_pool()
    probs = pool.donor_probabilities(4.0, 1e-6)
    draws = pool.sample(4.0, 20_000, 1e-6, np.random.default_rng(11))
    for i, speed in enumerate(pool.speed):
        freq = float(np.mean(draws[:, 0] == speed))
        assert freq == pytest.approx(probs[i], abs=0.02)


# ---------------------------------------------------------------------------
# plays and lattices


def test_play_from_row_round_trips_fields(table):
    row = table.iloc[0]
    play = PlayAtCatch.from_row(row)
    assert play.game_id == row["game_id"]
    assert play.play_id == row["play_id"]
    assert play.week == int(row["week"])
    assert play.situation.down == int(row["down"])
    assert play.situation.yards_to_go == float(row["yards_to_go"])
    assert play.situation.los_x_adj == float(row["los_x_adj"])
    np.testing.assert_array_equal(
        play.ghost_features, row[list(GHOST_FEATURES)].to_numpy(dtype=float)
    )
    np.testing.assert_array_equal(
        play.yac_features, row[list(YAC_FEATURES)].to_numpy(dtype=float)
    )
    assert play.rec_x_adj == float(row["rec_x_adj"])
    assert play.rec_y_adj == float(row["rec_y_adj"])
    assert play.catch_x_adj == float(row["catch_x_adj"])
    assert play.def1_x_adj == float(row["def1_x_adj"])
    assert play.def1_speed == float(row["def1_s"])
    assert play.observed_yac == float(row["observed_yac"])
    assert play.def1_player_id == row["def1_player_id"]


def test_location_lattice_is_x_major_and_centered():
    cfg = GhostConfig(spacing=1.0, halfwidth=2.0)
    lattice = location_lattice(40.0, 0.0, cfg)
    assert lattice.shape == (25, 2)
    # x varies slowest: five consecutive rows share each x value
    np.testing.assert_array_equal(lattice[:5, 0], np.full(5, 38.0))
    np.testing.assert_array_equal(lattice[:5, 1], np.arange(-2.0, 3.0))
    assert lattice[0].tolist() == [38.0, -2.0]
    assert lattice[-1].tolist() == [42.0, 2.0]


def test_location_lattice_clips_to_the_field():
    cfg = GhostConfig(spacing=1.0, halfwidth=2.0)
    near_sideline = location_lattice(40.0, -25.7, cfg)
    assert near_sideline.shape[0] < 25
    assert near_sideline[:, 1].min() >= -26.65
    near_goal = location_lattice(-9.5, 0.0, cfg)
    assert near_goal[:, 0].min() >= -10.0
    with pytest.raises(PlayEvaluationError) as err:
        location_lattice(-40.0, 0.0, GhostConfig(spacing=1.0, halfwidth=4.0))
    assert err.value.reason == "empty_lattice"


def test_location_distribution_is_normalized(ghost_forest, play):
    lattice = location_lattice(play.rec_x_adj, play.rec_y_adj, GhostConfig())
    h = location_distribution(ghost_forest, play.ghost_features, lattice)
    assert h.shape == (len(lattice),)
    assert np.all(h >= 0.0)
    assert h.sum() == pytest.approx(1.0, abs=1e-12)


def test_location_distribution_without_support_fails(table, play):
    # a forest whose responses concentrate far off the field has no mass
    # anywhere near a real play's lattice
    x = table[list(GHOST_FEATURES)].to_numpy(dtype=float)
    far = np.full((len(x), 2), 500.0)
    degenerate = CDEForest.fit(
        x, far, ForestConfig(n_trees=4, seed=0), feature_names=GHOST_FEATURES
    )
    lattice = location_lattice(play.rec_x_adj, play.rec_y_adj, GhostConfig())
    with pytest.raises(PlayEvaluationError) as err:
        location_distribution(degenerate, play.ghost_features, lattice)
    assert err.value.reason == "no_support"


# ---------------------------------------------------------------------------
# ghost features and values


def test_identity_ghost_reproduces_the_observed_features(play):
    locations = np.array([[play.def1_x_adj, play.def1_y_adj]])
    triples = np.array([[play.def1_speed, play.def1_dir_adj, play.def1_o_adj]])
    rows = ghost_feature_rows(play, locations, triples)
    assert rows.shape == (1, len(YAC_FEATURES))
    np.testing.assert_array_equal(rows[0], play.yac_features)


def test_ghost_feature_rows_validates_lengths(play):
    with pytest.raises(ValueError, match="length"):
        ghost_feature_rows(
            play, np.zeros((2, 2)), np.zeros((3, 3))
        )


def test_identity_ghost_epv_equals_observed_epv(play, yac_forest, ep_model):
    value = ghost_epv(
        play,
        np.array([play.def1_x_adj, play.def1_y_adj]),
        np.array([play.def1_speed, play.def1_dir_adj, play.def1_o_adj]),
        yac_forest,
        ep_model,
    )
    direct = epv_for_features(
        yac_forest, play.yac_features, play.catch_x_adj, play.situation, ep_model
    )
    assert value == direct


def test_expected_delta_matches_double_loop():
    h = np.array([0.2, 0.3, 0.5])
    samples = np.array([[1.0, 3.0], [2.0, 2.0], [0.0, 4.0]])
    epv_catch = 2.5
    manual = sum(
        h[l] * (1.0 / samples.shape[1]) * sum(epv_catch - s for s in samples[l])
        for l in range(3)
    )
    assert expected_delta_from_epvs(epv_catch, h, samples) == pytest.approx(
        manual, abs=1e-12
    )
    with pytest.raises(ValueError, match="location count"):
        expected_delta_from_epvs(epv_catch, h, samples[:2])


def test_pooled_percentile_hand_cases():
    one = np.array([1.0])
    assert pooled_percentile(5.0, one, np.array([[0.0, 1.0]])) == 1.0
    assert pooled_percentile(-5.0, one, np.array([[0.0, 1.0]])) == 0.0
    assert pooled_percentile(4.0, one, np.array([[4.0, 4.0]])) == 0.5
    h = np.array([0.25, 0.75])
    assert pooled_percentile(4.0, h, np.array([[1.0, 3.0], [5.0, 7.0]])) == 0.25
    h = np.array([0.5, 0.5])
    assert pooled_percentile(
        4.0, h, np.array([[4.0, 4.0], [1.0, 9.0]])
    ) == pytest.approx(0.5)


def test_play_random_state_keys_on_play_identity():
    a = np.random.default_rng(play_random_state(7, "G1", "P1")).random(4)
    b = np.random.default_rng(play_random_state(7, "G1", "P1")).random(4)
    c = np.random.default_rng(play_random_state(7, "G1", "P2")).random(4)
    d = np.random.default_rng(play_random_state(8, "G1", "P1")).random(4)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)


# ---------------------------------------------------------------------------
# full play evaluation


@pytest.fixture
def small_cfg():
    return GhostConfig(draws_per_location=4, spacing=2.0, halfwidth=4.0, seed=9)


def test_evaluate_play_full_contract(
    play, yac_forest, ghost_forest, pool, ep_model, small_cfg
):
    out = evaluate_play(
        play, yac_forest, ghost_forest, pool, ep_model, small_cfg, keep_detail=True
    )
    assert out.game_id == play.game_id and out.play_id == play.play_id
    assert out.identity_delta == 0.0
    assert out.n_locations == 25
    assert out.n_locations_failed == 0
    assert 0.0 <= out.percentile <= 1.0
    assert out.observed_yac == play.observed_yac

    assert out.lattice.shape == (25, 2)
    assert out.location_density.shape == (25,)
    assert out.location_epv.shape == (25,)
    assert out.location_epv_observed_traj.shape == (25,)
    assert out.location_epv_samples.shape == (25, 4)
    assert out.location_density.sum() == pytest.approx(1.0, abs=1e-9)

    recomputed = expected_delta_from_epvs(
        out.epv_catch, out.location_density, out.location_epv_samples
    )
    assert out.expected_delta == pytest.approx(recomputed, abs=1e-12)
    mean_ghost = out.location_density @ out.location_epv_samples.mean(axis=1)
    assert out.expected_delta == pytest.approx(
        out.epv_catch - mean_ghost, abs=1e-10
    )

    standalone = observed_trajectory_delta(
        play, yac_forest, ghost_forest, ep_model, small_cfg
    )
    assert out.expected_delta_observed_traj == pytest.approx(standalone, abs=1e-12)


def test_evaluate_play_is_deterministic(
    play, yac_forest, ghost_forest, pool, ep_model, small_cfg
):
    a = evaluate_play(play, yac_forest, ghost_forest, pool, ep_model, small_cfg)
    b = evaluate_play(play, yac_forest, ghost_forest, pool, ep_model, small_cfg)
    assert a.epv_catch == b.epv_catch
    assert a.expected_delta == b.expected_delta
    assert a.expected_delta_observed_traj == b.expected_delta_observed_traj
    assert a.percentile == b.percentile

    other_seed = GhostConfig(
        draws_per_location=4, spacing=2.0, halfwidth=4.0, seed=10
    )
    c = evaluate_play(play, yac_forest, ghost_forest, pool, ep_model, other_seed)
    assert c.expected_delta != a.expected_delta
    # the observed-catch value does not depend on the sampling seed
    assert c.epv_catch == a.epv_catch


def test_evaluate_play_detail_is_off_by_default(
    play, yac_forest, ghost_forest, pool, ep_model, small_cfg
):
    out = evaluate_play(play, yac_forest, ghost_forest, pool, ep_model, small_cfg)
    assert out.lattice is None
    assert out.location_density is None
    assert out.location_epv_samples is None


def test_evaluate_at_locations_contract(
    play, yac_forest, pool, ep_model, small_cfg
):
    locations = np.array(
        [
            [play.rec_x_adj, play.rec_y_adj + 1.0],
            [play.rec_x_adj, play.rec_y_adj + 10.0],
        ]
    )
    a = evaluate_at_locations(play, locations, yac_forest, pool, ep_model, small_cfg)
    assert a.shape == (2,)
    assert np.all(np.isfinite(a))
    b = evaluate_at_locations(play, locations, yac_forest, pool, ep_model, small_cfg)
    np.testing.assert_array_equal(a, b)


def test_ghost_config_defaults():
    cfg = GhostConfig()
    assert cfg.draws_per_location == 100
    assert cfg.spacing == 1.0
    assert cfg.halfwidth == 15.0
    assert cfg.epsilon == 1e-6
    assert cfg.seed == 0


def test_play_evaluation_error_carries_reason():
    err = PlayEvaluationError("no_support", "extra context")
    assert err.reason == "no_support"
    assert "no_support" in str(err)
