"""End-to-end command-line pipeline on a generated workspace."""

import contextlib
import io
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
import yaml

from ghostdef import cli
from ghostdef.rfcde import load_forest


def run_cli(argv):
    """Invoke the CLI in-process, returning (exit code, stdout json, stderr json)."""
    out_buf, err_buf = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out_buf), contextlib.redirect_stderr(err_buf):
        rc = cli.main(argv)
    out = json.loads(out_buf.getvalue()) if out_buf.getvalue().strip() else None
    err = json.loads(err_buf.getvalue()) if err_buf.getvalue().strip() else None
    return rc, out, err


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """A full pipeline run: synth -> ... -> report, all through the CLI."""
    ws = tmp_path_factory.mktemp("cli_ws")
    out = ws / "out"
    team_epa = ws / "team_epa.csv"
    pd.DataFrame(
        [
            {"team": "ALP", "epa": -0.05},
            {"team": "BRV", "epa": 0.02},
            {"team": "CHR", "epa": -0.11},
            {"team": "DEL", "epa": 0.07},
        ]
    ).to_csv(team_epa, index=False)

    config = {
        "out_dir": str(out),
        "tracking": [str(out / "tracking.csv")],
        "plays": str(out / "plays.csv"),
        "games": str(out / "games.csv"),
        "features": str(out / "features.csv"),
        "yac_forest": str(out / "yac_forest.bin"),
        "ghost_forest": str(out / "ghost_forest.bin"),
        "rosters": str(out / "rosters.csv"),
        "team_epa": str(team_epa),
        "seed": 4,
        "synth": {"n_plays": 30, "weeks": [1, 2, 3]},
        "yac_forest_config": {"n_trees": 10, "min_leaf_size": 5},
        "ghost_forest_config": {"n_trees": 10, "min_leaf_size": 5},
        "ghost": {"draws_per_location": 3, "halfwidth": 4.0, "spacing": 2.0},
        "cv": {"forest": {"n_trees": 6, "min_leaf_size": 5}},
        "sweep": {"forest": {"n_trees": 6, "min_leaf_size": 5}},
    }
    cfg_path = ws / "run.yaml"
    cfg_path.write_text(yaml.safe_dump(config))

    results = {}
    for command in (
        "synth",
        "ingest",
        "features",
        "train-yac",
        "train-ghost",
        "eval-season",
        "cv",
        "sweep",
        "report",
    ):
        rc, payload, err = run_cli([command, "--config", str(cfg_path)])
        assert rc == 0, f"{command} failed: {err}"
        results[command] = payload
    return {"dir": ws, "out": out, "config": cfg_path, "results": results}


def test_synth_writes_raw_files_and_truth(workspace):
    out = workspace["out"]
    payload = workspace["results"]["synth"]
    assert payload["command"] == "synth"
    assert payload["n_plays"] == 30
    for name in ("tracking.csv", "plays.csv", "games.csv", "synth_truth.csv", "rosters.csv"):
        assert (out / name).exists(), name
    truth = pd.read_csv(out / "synth_truth.csv")
    assert len(truth) == 30
    assert {"game_id", "play_id", "yac_mean", "observed_yac"} <= set(truth.columns)


def test_run_config_copy_written(workspace):
    copied = yaml.safe_load((workspace["out"] / "run_config.yaml").read_text())
    assert copied["seed"] == 4
    assert copied["synth"]["n_plays"] == 30
    assert copied["ghost"]["draws_per_location"] == 3


def test_ingest_reports_clean_files(workspace):
    report = json.loads((workspace["out"] / "ingest_report.json").read_text())
    assert report["eligible_plays"] == 30
    assert report["excluded_plays"] == {}
    assert report["ingest"]["rows_rejected"] == 0
    assert workspace["results"]["ingest"]["eligible_plays"] == 30


def test_features_table_written(workspace):
    table = pd.read_csv(workspace["out"] / "features.csv")
    assert len(table) == 30
    assert workspace["results"]["features"]["n_plays"] == 30
    assert (workspace["out"] / "features_report.json").exists()


def test_trained_forests_honor_config(workspace):
    yac = load_forest(str(workspace["out"] / "yac_forest.bin"))
    assert yac.config.n_trees == 10
    assert yac.config.seed == 4  # run seed
    assert yac.responses.ndim == 1
    ghost = load_forest(str(workspace["out"] / "ghost_forest.bin"))
    assert ghost.config.seed == 5  # run seed + 1 keeps the models independent
    assert ghost.responses.shape[1] == 2
    summary = json.loads((workspace["out"] / "yac_forest.bin.json").read_text())
    assert len(summary["trees"]) == 10


def test_eval_play_emits_lattice_detail(workspace):
    out = workspace["out"]
    table = pd.read_csv(out / "features.csv", dtype=str)
    game, play = table.iloc[0]["game_id"], table.iloc[0]["play_id"]
    rc, payload, err = run_cli(
        [
            "eval-play",
            "--config",
            str(workspace["config"]),
            "--game",
            game,
            "--play",
            play,
        ]
    )
    assert rc == 0, err
    tag = f"{game}_{play}"
    grid = pd.read_csv(out / f"ghost_grid_{tag}.csv")
    assert list(grid.columns) == [
        "x_adj",
        "y_adj",
        "h",
        "mean_ghost_epv",
        "mean_delta",
        "mean_ghost_epv_observed_traj",
    ]
    assert grid["h"].sum() == pytest.approx(1.0, abs=1e-9)
    np.testing.assert_allclose(
        grid["mean_delta"], payload["epv_catch"] - grid["mean_ghost_epv"], atol=1e-9
    )
    samples = pd.read_csv(out / f"ghost_samples_{tag}.csv")
    assert len(samples) == len(grid) * 3  # draws_per_location
    assert set(samples["draw"]) == {0, 1, 2}
    summary = pd.read_csv(out / f"summary_{tag}.csv")
    assert summary.iloc[0]["identity_delta"] == 0.0
    assert payload["expected_delta"] == pytest.approx(
        float((grid["h"] * grid["mean_delta"]).sum()), abs=1e-9
    )


def test_eval_season_outputs(workspace):
    out = workspace["out"]
    payload = workspace["results"]["eval-season"]
    assert payload["n_evaluated"] == 30
    assert payload["n_failed"] == 0
    evals = pd.read_csv(out / "evaluations.csv", dtype={"game_id": str, "play_id": str})
    assert len(evals) == 30
    keys = list(zip(evals["game_id"], evals["play_id"]))
    assert keys == sorted(keys)
    assert (evals["identity_delta"] == 0.0).all()
    assert evals["n_locations_failed"].eq(0).all()
    errors = pd.read_csv(out / "eval_errors.csv")
    assert len(errors) == 0
    assert (out / "leaderboard.csv").exists()


def test_eval_season_rerun_is_identical(workspace, tmp_path):
    evals_path = workspace["out"] / "evaluations.csv"
    first = evals_path.read_bytes()
    rc, payload, err = run_cli(
        ["eval-season", "--config", str(workspace["config"]), "--out", str(tmp_path)]
    )
    assert rc == 0, err
    # artifacts were read from the configured paths; only outputs moved
    second = (tmp_path / "evaluations.csv").read_bytes()
    assert first == second


def test_cv_outputs(workspace):
    out = workspace["out"]
    folds = pd.read_csv(out / "cv_folds.csv")
    assert len(folds) == 3  # one default feature set, three weeks
    assert set(folds["week"]) == {1, 2, 3}
    summary = pd.read_csv(out / "cv_summary.csv")
    assert len(summary) == 1
    assert summary.iloc[0]["n_folds"] == 3
    assert {"cde_loss_mean", "cde_loss_se"} <= set(summary.columns)


def test_sweep_outputs(workspace):
    sweep = pd.read_csv(workspace["out"] / "sweep.csv")
    assert sweep["n_train_weeks"].tolist() == [1, 2]
    assert set(sweep["test_week"]) == {3}


def test_report_outputs(workspace):
    out = workspace["out"]
    payload = workspace["results"]["report"]
    assert (out / "player_scatter.csv").exists()
    assert (out / "leaderboard.csv").exists()
    assert (out / "teams.csv").exists()
    teams = pd.read_csv(out / "teams.csv")
    assert set(teams["team"]) <= {"ALP", "BRV", "CHR", "DEL"}
    assert teams["epa"].notna().all()
    assert payload["missing_teams"] == []
    correlations = json.loads((out / "correlations.json").read_text())
    assert "overall_r" in correlations
    assert "team_r" in correlations
    leaderboard = pd.read_csv(out / "leaderboard.csv")
    assert leaderboard["total_delta"].is_monotonic_increasing


# ---------------------------------------------------------------------------
# error paths and overrides


def test_missing_artifact_names_the_producing_command(tmp_path):
    rc, out, err = run_cli(["train-yac", "--out", str(tmp_path)])
    assert rc == 1
    message = err["error"]["message"]
    assert "features" in message
    assert "ghostdef features" in message


def test_unknown_config_key_rejected(tmp_path):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text(yaml.safe_dump({"out_dir": str(tmp_path), "typo_key": 1}))
    rc, out, err = run_cli(["synth", "--config", str(cfg)])
    assert rc == 1
    assert "unknown config keys" in err["error"]["message"]
    assert "typo_key" in err["error"]["message"]


def test_non_mapping_config_rejected(tmp_path):
    cfg = tmp_path / "list.yaml"
    cfg.write_text("- a\n- b\n")
    rc, out, err = run_cli(["synth", "--config", str(cfg)])
    assert rc == 1
    assert "mapping" in err["error"]["message"]


def test_unknown_forest_option_rejected(workspace, tmp_path):
    cfg = tmp_path / "bad_forest.yaml"
    base = yaml.safe_load(Path(workspace["config"]).read_text())
    base["yac_forest_config"] = {"depth": 3}
    base["out_dir"] = str(tmp_path)
    cfg.write_text(yaml.safe_dump(base))
    rc, out, err = run_cli(["train-yac", "--config", str(cfg)])
    assert rc == 1
    assert "unknown yac forest options" in err["error"]["message"]


def test_eval_play_unknown_play(workspace):
    rc, out, err = run_cli(
        [
            "eval-play",
            "--config",
            str(workspace["config"]),
            "--game",
            "NOPE",
            "--play",
            "0",
        ]
    )
    assert rc == 1
    assert "not in the feature table" in err["error"]["message"]


def test_workers_must_be_positive(tmp_path):
    rc, out, err = run_cli(["synth", "--out", str(tmp_path), "--workers", "0"])
    assert rc == 1
    assert "workers" in err["error"]["message"]


def test_env_var_overrides_path(workspace, tmp_path, monkeypatch):
    bogus = str(tmp_path / "nowhere.csv")
    monkeypatch.setenv("GHOSTDEF_FEATURES", bogus)
    rc, out, err = run_cli(
        ["train-yac", "--config", str(workspace["config"]), "--out", str(tmp_path)]
    )
    assert rc == 1
    assert bogus in err["error"]["message"]


def test_module_entrypoint_runs_in_a_subprocess(tmp_path):
    proc = subprocess.run(
        [
            sys.executable,
            "-m",
            "ghostdef.cli",
            "synth",
            "--out",
            str(tmp_path),
            "--seed",
            "1",
        ],
        capture_output=True,
        text=True,
        timeout=300,
    )
    assert proc.returncode == 0, proc.stderr
    payload = json.loads(proc.stdout)
    assert payload["command"] == "synth"
    assert (tmp_path / "tracking.csv").exists()
