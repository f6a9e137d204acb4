"""Down/distance bookkeeping, scoring values, and expected-points models."""

import numpy as np
import pandas as pd
import pytest

from ghostdef.utility import (
    TOUCHDOWN,
    TOUCHDOWN_POINTS,
    GameState,
    ParametricExpectedPoints,
    PlaySituation,
    TableExpectedPoints,
    Touchdown,
    g,
    make_expected_points,
    next_state,
    state_value,
    utility_on_grid,
)


def sit(down=1, ytg=10.0, los=60.0):
    return PlaySituation(down=down, yards_to_go=ytg, los_x_adj=los)


# ---------------------------------------------------------------------------
# situations and transitions


def test_situation_validation():
    with pytest.raises(ValueError, match="down"):
        sit(down=0)
    with pytest.raises(ValueError, match="down"):
        sit(down=5)
    with pytest.raises(ValueError, match="yards_to_go"):
        sit(ytg=0.0)
    with pytest.raises(ValueError, match="yards_to_go"):
        sit(ytg=-3.0)
    assert sit(down=2, ytg=7.0, los=40.0).first_down_line == pytest.approx(33.0)


def test_gain_past_goal_line_is_a_touchdown():
    for ending in (0.0, -0.5, -10.0):
        state = next_state(sit(down=3, ytg=4.0, los=20.0), ending)
        assert isinstance(state, Touchdown)
        assert state is TOUCHDOWN


def test_gain_past_the_line_to_gain_resets_downs():
    state = next_state(sit(down=2, ytg=7.0, los=40.0), 30.0)
    assert state == GameState(down=1, yards_to_go=10.0, yardline=30.0)
    # inside the 10 the next series is goal-to-go
    state = next_state(sit(down=1, ytg=10.0, los=18.0), 6.0)
    assert state == GameState(down=1, yards_to_go=6.0, yardline=6.0)


def test_short_gain_advances_the_down():
    state = next_state(sit(down=1, ytg=10.0, los=60.0), 55.0)
    assert state == GameState(down=2, yards_to_go=5.0, yardline=55.0)
    # a loss increases the distance
    state = next_state(sit(down=2, ytg=5.0, los=55.0), 58.0)
    assert state == GameState(down=3, yards_to_go=8.0, yardline=58.0)


def test_failed_fourth_down_flips_possession():
    state = next_state(sit(down=4, ytg=2.0, los=45.0), 44.0)
    assert state == GameState(
        down=1, yards_to_go=10.0, yardline=56.0, offense_possession=False
    )
    # turnover deep in opposing territory leaves the new offense backed up
    state = next_state(sit(down=4, ytg=8.0, los=5.0), 4.0)
    assert state == GameState(
        down=1, yards_to_go=10.0, yardline=96.0, offense_possession=False
    )
    # turnover near the original offense's goal line is goal-to-go
    state = next_state(sit(down=4, ytg=4.0, los=98.0), 97.0)
    assert state == GameState(
        down=1, yards_to_go=3.0, yardline=3.0, offense_possession=False
    )


def test_state_value_touchdowns_and_possession_sign(ep_model):
    assert state_value(TOUCHDOWN, ep_model) == TOUCHDOWN_POINTS
    keep = GameState(down=1, yards_to_go=10.0, yardline=50.0)
    lose = GameState(
        down=1, yards_to_go=10.0, yardline=50.0, offense_possession=False
    )
    assert state_value(keep, ep_model) == pytest.approx(
        -state_value(lose, ep_model)
    )
    assert state_value(keep, ep_model) > 0.0
    assert state_value(keep, ep_model) == pytest.approx(ep_model(1, 10.0, 50.0))


def test_g_is_state_value_of_the_ending_spot(ep_model):
    s = sit(down=2, ytg=7.0, los=40.0)
    assert g(30.0, s, ep_model) == pytest.approx(
        state_value(next_state(s, 30.0), ep_model)
    )
    assert g(-1.0, s, ep_model) == TOUCHDOWN_POINTS


def test_utility_on_grid_matches_per_point_calls(ep_model):
    s = sit(down=3, ytg=6.0, los=24.3)
    yac = np.arange(-10.0, 27.0)
    utilities = utility_on_grid(yac, 24.3, s, ep_model)
    expected = [g(24.3 - v, s, ep_model) for v in yac]
    np.testing.assert_allclose(utilities, expected, atol=1e-12)
    # touchdown entries are exactly the touchdown value
    td = yac >= 24.3
    assert td.any()
    assert np.all(utilities[td] == TOUCHDOWN_POINTS)


# ---------------------------------------------------------------------------
# parametric expected points


def test_parametric_ep_shape():
    ep = ParametricExpectedPoints()
    # closer to the opposing goal line (smaller yardline) is worth more
    values = [ep(1, 10.0, yl) for yl in (10.0, 30.0, 50.0, 80.0)]
    assert values == sorted(values, reverse=True)
    # earlier downs are worth more at the same spot
    by_down = [ep(d, 10.0, 50.0) for d in (1, 2, 3, 4)]
    assert by_down == sorted(by_down, reverse=True)
    # longer to go is worth less
    assert ep(2, 2.0, 50.0) > ep(2, 12.0, 50.0)
    with pytest.raises(ValueError, match="down"):
        ep(5, 10.0, 50.0)


def test_parametric_ep_clamps():
    ep = ParametricExpectedPoints()
    assert ep(1, 1.0, 0.2) == ep(1, 1.0, 1.0)
    assert ep(1, 1.0, 120.0) == ep(1, 1.0, 99.0)
    for down in (1, 2, 3, 4):
        for yl in (1.0, 25.0, 50.0, 75.0, 99.0):
            for ytg in (1.0, 10.0, 30.0):
                assert -7.0 <= ep(down, ytg, yl) <= 7.0


def test_make_expected_points_default_is_parametric():
    assert isinstance(make_expected_points(), ParametricExpectedPoints)


# ---------------------------------------------------------------------------
# table-driven expected points


def _table_frame():
    rows = []
    for down in (1, 2, 3, 4):
        for lo, hi in ((1, 5), (6, 99)):
            for yl in range(1, 100):
                rows.append(
                    {
                        "down": down,
                        "ytg_min": lo,
                        "ytg_max": hi,
                        "yardline": yl,
                        "ep": down + yl / 100.0 + (0.5 if lo == 1 else 0.0),
                    }
                )
    return pd.DataFrame(rows)


def test_table_ep_exact_lookup_and_inclusive_bounds():
    ep = TableExpectedPoints(_table_frame())
    assert ep(2, 3.0, 40.0) == pytest.approx(2.9)
    # bucket edges are inclusive on both sides
    assert ep(2, 5.0, 40.0) == pytest.approx(2.9)
    assert ep(2, 6.0, 40.0) == pytest.approx(2.4)
    # yardline clamps into [1, 99]
    assert ep(1, 2.0, 0.0) == ep(1, 2.0, 1.0)
    assert ep(1, 2.0, 104.0) == ep(1, 2.0, 99.0)


def test_table_ep_falls_back_to_nearest_bucket(caplog):
    frame = _table_frame()
    # remove the long-yardage buckets for down 3 so 12 to go has no exact cell
    frame = frame[~((frame["down"] == 3) & (frame["ytg_min"] == 6))]
    ep = TableExpectedPoints(frame)
    with caplog.at_level("WARNING"):
        v = ep(3, 12.0, 40.0)
        ep(3, 12.0, 40.0)  # repeat: warned only once per cell
    assert v == pytest.approx(ep(3, 5.0, 40.0))
    nearest_warnings = [r for r in caplog.records if "nearest" in r.getMessage()]
    assert len(nearest_warnings) == 1


def test_table_ep_validation_errors():
    with pytest.raises(ValueError, match="missing columns"):
        TableExpectedPoints(_table_frame().drop(columns=["ep"]))
    bad = _table_frame()
    bad.loc[0, "ep"] = float("nan")
    with pytest.raises(ValueError, match="non-finite"):
        TableExpectedPoints(bad)
    bad = _table_frame()
    bad.loc[0, "ep"] = 9.5
    with pytest.raises(ValueError, match=r"\[-7, 7\]"):
        TableExpectedPoints(bad)
    bad = _table_frame()
    bad.loc[0, "down"] = 6
    with pytest.raises(ValueError, match="downs"):
        TableExpectedPoints(bad)
    bad = _table_frame()
    bad.loc[0, "yardline"] = 0
    with pytest.raises(ValueError, match="yardlines"):
        TableExpectedPoints(bad)
    bad = _table_frame()
    bad.loc[0, ["ytg_min", "ytg_max"]] = (8, 2)
    with pytest.raises(ValueError, match="ytg_min"):
        TableExpectedPoints(bad)


def test_table_ep_missing_down_fails_at_lookup():
    frame = _table_frame()
    ep = TableExpectedPoints(frame[frame["down"] != 4])
    with pytest.raises(ValueError, match="down 4"):
        ep(4, 2.0, 50.0)


def test_table_ep_coverage_warning(caplog):
    small = _table_frame().iloc[:50]
    with caplog.at_level("WARNING"):
        TableExpectedPoints(small)
    assert any("covers" in r.getMessage() for r in caplog.records)


def test_table_ep_from_csv(tmp_path):
    path = tmp_path / "ep.csv"
    _table_frame().to_csv(path, index=False)
    ep = make_expected_points(str(path))
    assert isinstance(ep, TableExpectedPoints)
    assert ep(2, 3.0, 40.0) == pytest.approx(2.9)


def test_state_value_with_table_model():
    ep = TableExpectedPoints(_table_frame())
    keep = GameState(down=1, yards_to_go=3.0, yardline=30.0)
    assert state_value(keep, ep) == pytest.approx(1.8)
    flipped = GameState(
        down=1, yards_to_go=3.0, yardline=30.0, offense_possession=False
    )
    assert state_value(flipped, ep) == pytest.approx(-1.8)
