"""Play-value integration: outcome grids, densities, and batch evaluation."""

import numpy as np
import pytest

from ghostdef.epv import (
    NoSupportError,
    YacGrid,
    build_yac_grid,
    clamp_training_yac,
    epv_at_catch,
    epv_batch,
    epv_for_features,
    epv_from_density,
    play_utilities,
    yac_grid,
)
from ghostdef.rfcde import CDEForest
from ghostdef.tracking import YAC_FEATURES
from ghostdef.utility import TOUCHDOWN_POINTS, PlaySituation

from helpers import kde_1d_reference


def sit(down=2, ytg=6.0, los=30.0):
    return PlaySituation(down=down, yards_to_go=ytg, los_x_adj=los)


# ---------------------------------------------------------------------------
# grids


def test_yac_grid_spans_minus_ten_to_past_the_goal_line():
    grid = yac_grid(25.3)
    assert grid[0] == -10.0
    assert grid[-1] == 27.0
    assert len(grid) == 38
    np.testing.assert_array_equal(np.diff(grid), 1.0)


def test_touchdown_mask_counts_reaching_values():
    yg = build_yac_grid(25.3)
    assert isinstance(yg, YacGrid)
    assert len(yg) == 38
    assert yg.touchdown_mask.sum() == 2  # 26 and 27
    whole = build_yac_grid(25.0)
    assert whole.touchdown_mask.sum() == 3  # 25, 26, 27 all reach


def test_yac_grid_rejects_catches_at_or_behind_the_goal_line():
    for bad in (0.0, -3.0, float("inf"), float("nan")):
        with pytest.raises(ValueError, match="positive"):
            yac_grid(bad)


# ---------------------------------------------------------------------------
# the integration core


def test_epv_from_density_matches_normalized_dot_product():
    rng = np.random.default_rng(2)
    density = rng.uniform(0.0, 1.0, 17)
    utilities = rng.uniform(-7.0, 7.0, 17)
    total = sum(float(d) for d in density)
    expected = sum(float(d) * float(u) for d, u in zip(density, utilities)) / total
    assert epv_from_density(density, utilities) == pytest.approx(
        expected, abs=1e-12
    )
    # scale of the density does not matter
    assert epv_from_density(10.0 * density, utilities) == pytest.approx(
        expected, abs=1e-12
    )


def test_epv_from_density_rejects_bad_input():
    with pytest.raises(ValueError, match="share the grid"):
        epv_from_density(np.ones(4), np.ones(5))
    with pytest.raises(NoSupportError):
        epv_from_density(np.zeros(6), np.ones(6))
    with pytest.raises(NoSupportError):
        epv_from_density(np.full(6, np.nan), np.ones(6))


def test_certain_touchdown_is_worth_exactly_seven(ep_model):
    yg = build_yac_grid(18.6)
    density = np.where(yg.touchdown_mask, 1.0, 0.0)
    value = epv_at_catch(density, yg, sit(los=25.0), ep_model)
    assert abs(value - TOUCHDOWN_POINTS) < 1e-12


def test_epv_at_catch_accepts_grid_array_or_wrapper(ep_model):
    # a bare grid array encodes the catch spot at whole-yard resolution,
    # so the two forms agree exactly on whole-yard catches
    yg = build_yac_grid(25.0)
    rng = np.random.default_rng(5)
    density = rng.uniform(0.0, 1.0, len(yg))
    a = epv_at_catch(density, yg, sit(), ep_model)
    b = epv_at_catch(density, yg.values, sit(), ep_model)
    assert a == b
    utilities = play_utilities(yg.values, 25.0, sit(), ep_model)
    assert a == pytest.approx(
        float((density / density.sum()) @ utilities), abs=1e-12
    )
    # fractional catch spots keep their exact touchdown boundary through
    # the wrapper form
    frac = build_yac_grid(25.3)
    density = rng.uniform(0.0, 1.0, len(frac))
    wrapped = epv_at_catch(density, frac, sit(), ep_model)
    utilities = play_utilities(frac.values, 25.3, sit(), ep_model)
    assert wrapped == pytest.approx(
        float((density / density.sum()) @ utilities), abs=1e-12
    )


# ---------------------------------------------------------------------------
# forest-backed batches


def test_epv_batch_matches_single_row_calls(yac_forest, table, ep_model):
    rows = table[list(YAC_FEATURES)].to_numpy()[:6]
    catch = float(table["catch_x_adj"].iloc[0])
    epvs, grid, utilities = epv_batch(yac_forest, rows, catch, sit(), ep_model)
    assert epvs.shape == (6,)
    np.testing.assert_array_equal(grid, yac_grid(catch))
    np.testing.assert_array_equal(
        utilities, play_utilities(grid, catch, sit(), ep_model)
    )
    for i, row in enumerate(rows):
        assert epvs[i] == epv_for_features(yac_forest, row, catch, sit(), ep_model)


def test_epv_batch_identical_rows_identical_values(yac_forest, table, ep_model):
    row = table[list(YAC_FEATURES)].to_numpy()[3]
    rows = np.tile(row, (5, 1))
    epvs, _, _ = epv_batch(yac_forest, rows, 20.0, sit(), ep_model)
    assert np.all(epvs == epvs[0])


def test_epv_batch_density_agrees_with_reference_kde(yac_forest, table, ep_model):
    rows = table[list(YAC_FEATURES)].to_numpy()[:3]
    catch = 22.0
    epvs, grid, utilities, densities = epv_batch(
        yac_forest, rows, catch, sit(), ep_model, return_densities=True
    )
    assert densities.shape == (3, len(grid))
    weights = yac_forest.weights(rows)
    for i in range(3):
        ref = kde_1d_reference(grid, yac_forest.responses, weights[i])
        np.testing.assert_allclose(densities[i], ref, atol=1e-12)
        assert epvs[i] == pytest.approx(
            float((ref / ref.sum()) @ utilities), abs=1e-10
        )


class _NoMassForest(CDEForest):
    """Forest stub whose weights carry no mass, to exercise the no-support path."""

    def weights(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.zeros((len(x), len(self.responses)))


def _no_mass_forest(yac_forest):
    stub = object.__new__(_NoMassForest)
    stub.__dict__.update(yac_forest.__dict__)
    return stub


def test_epv_batch_no_support_modes(yac_forest, table, ep_model):
    stub = _no_mass_forest(yac_forest)
    rows = table[list(YAC_FEATURES)].to_numpy()[:2]
    with pytest.raises(NoSupportError):
        epv_batch(stub, rows, 20.0, sit(), ep_model)
    epvs, _, _, densities = epv_batch(
        stub,
        rows,
        20.0,
        sit(),
        ep_model,
        return_densities=True,
        on_no_support="nan",
    )
    assert np.isnan(epvs).all()
    assert np.all(densities == 0.0)
    with pytest.raises(ValueError, match="on_no_support"):
        epv_batch(yac_forest, rows, 20.0, sit(), ep_model, on_no_support="skip")


# ---------------------------------------------------------------------------
# training-response clamping


def test_clamp_training_yac_hand_case(caplog):
    yac = np.array([-12.0, 0.0, 30.0])
    catch = np.array([20.4, 20.4, 20.4])
    with caplog.at_level("INFO"):
        clamped, moved = clamp_training_yac(yac, catch)
    np.testing.assert_array_equal(clamped, [-10.0, 0.0, 22.0])
    assert moved == 2
    assert any("clamped" in r.getMessage() for r in caplog.records)


def test_clamp_training_yac_noop_is_silent(caplog):
    yac = np.array([-3.0, 4.0, 11.0])
    catch = np.array([15.0, 15.0, 15.0])
    with caplog.at_level("INFO"):
        clamped, moved = clamp_training_yac(yac, catch)
    np.testing.assert_array_equal(clamped, yac)
    assert moved == 0
    assert not any("clamped" in r.getMessage() for r in caplog.records)
