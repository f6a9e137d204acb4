"""Command-line front end for the whole pipeline.

Commands (``ghostdef <command> --config run.yaml``):

* ``synth``       generate a synthetic season of raw input files
* ``ingest``      validate raw inputs, report rejects and exclusions
* ``features``    build the per-play feature table
* ``train-yac``   fit the yards-after-catch density forest
* ``train-ghost`` fit the 2D defender-location density forest
* ``eval-play``   evaluate one play, emitting the per-lattice detail files
* ``eval-season`` evaluate every play and write the season table + leaderboard
* ``cv``          leave-one-week-out feature-set comparison
* ``sweep``       training-week accumulation sweep
* ``report``      player/team aggregation from a season table

Every command resolves a RunConfig from (defaults, YAML config file,
GHOSTDEF_* path environment variables, command-line flags), copies the
resolved config into the output directory, and writes outputs that are
pure functions of the inputs, the config, and the seed. Errors exit
nonzero with a one-line JSON report on stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
import yaml

from .epv import clamp_training_yac
from .ghost import (
    GhostConfig,
    PlayAtCatch,
    PlayEvaluationError,
    TrajectoryPool,
    evaluate_play,
)
from .harness import (
    EVALUATION_COLUMNS,
    aggregate_players,
    aggregate_teams,
    lowo_cv,
    week_sweep,
)
from .rfcde import CDEForest, ForestConfig, export_forest_json, load_forest, save_forest
from .synth import SynthConfig, generate, write_tracking_files
from .tracking import (
    GHOST_FEATURES,
    YAC_FEATURES,
    build_feature_table,
    load_play_contexts,
    read_feature_table,
    read_tracking,
    select_eligible_plays,
    write_feature_table,
)
from .utility import make_expected_points

#: Path-bearing config keys; each can be overridden by GHOSTDEF_<KEY>
#: (upper-cased). ``tracking`` takes a comma-separated list.
PATH_KEYS = (
    "tracking",
    "plays",
    "games",
    "ep_table",
    "features",
    "yac_forest",
    "ghost_forest",
    "evaluations",
    "rosters",
    "team_epa",
    "out_dir",
)

#: Which command produces each consumable artifact, for error messages.
PRODUCED_BY = {
    "features": "features",
    "yac_forest": "train-yac",
    "ghost_forest": "train-ghost",
    "evaluations": "eval-season",
}


class CliError(RuntimeError):
    pass


@dataclass
class RunConfig:
    """Serialized run settings; one file drives every command."""

    tracking: list[str] = field(default_factory=list)
    plays: str | None = None
    games: str | None = None
    ep_table: str | None = None
    features: str | None = None
    yac_forest: str | None = None
    ghost_forest: str | None = None
    evaluations: str | None = None
    rosters: str | None = None
    team_epa: str | None = None
    out_dir: str = "out"
    workers: int = 1
    seed: int = 0
    yac_feature_columns: list[str] = field(default_factory=lambda: list(YAC_FEATURES))
    ghost_feature_columns: list[str] = field(default_factory=lambda: list(GHOST_FEATURES))
    yac_forest_config: dict = field(default_factory=dict)
    ghost_forest_config: dict = field(default_factory=dict)
    ghost: dict = field(default_factory=dict)
    cv: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    synth: dict = field(default_factory=dict)

    # -- resolution -----------------------------------------------------

    @classmethod
    def resolve(cls, args: argparse.Namespace) -> "RunConfig":
        data: dict = {}
        if args.config:
            with open(args.config) as fh:
                loaded = yaml.safe_load(fh) or {}
            if not isinstance(loaded, dict):
                raise CliError(f"{args.config}: config must be a mapping")
            unknown = set(loaded) - {f.name for f in dataclasses.fields(cls)}
            if unknown:
                raise CliError(f"{args.config}: unknown config keys {sorted(unknown)}")
            data.update(loaded)
        cfg = cls(**data)
        for key in PATH_KEYS:
            env = os.environ.get(f"GHOSTDEF_{key.upper()}")
            if env:
                setattr(cfg, key, env.split(",") if key == "tracking" else env)
        if args.workers is not None:
            cfg.workers = args.workers
        if args.seed is not None:
            cfg.seed = args.seed
        if args.out is not None:
            cfg.out_dir = args.out
        if cfg.workers < 1:
            raise CliError("workers must be at least 1")
        if isinstance(cfg.tracking, str):
            cfg.tracking = [cfg.tracking]
        return cfg

    def default_path(self, key: str, filename: str) -> str:
        value = getattr(self, key)
        return value if value else str(Path(self.out_dir) / filename)

    def artifact(self, key: str, filename: str) -> str:
        """Path of a consumable artifact; error names the producing command."""
        path = self.default_path(key, filename)
        if not Path(path).exists():
            raise CliError(
                f"missing {key} file {path!r}; run 'ghostdef {PRODUCED_BY[key]}' first"
            )
        return path

    def forest_config(self, which: str) -> ForestConfig:
        raw = dict(self.yac_forest_config if which == "yac" else self.ghost_forest_config)
        # distinct default seeds so the two models do not share tree
        # randomness; either can be pinned explicitly
        raw.setdefault("seed", self.seed if which == "yac" else self.seed + 1)
        valid = {f.name for f in dataclasses.fields(ForestConfig)}
        unknown = set(raw) - valid
        if unknown:
            raise CliError(f"unknown {which} forest options {sorted(unknown)}")
        return ForestConfig(**raw)

    def ghost_config(self) -> GhostConfig:
        raw = dict(self.ghost)
        raw.setdefault("seed", self.seed)
        valid = {f.name for f in dataclasses.fields(GhostConfig)}
        unknown = set(raw) - valid
        if unknown:
            raise CliError(f"unknown ghost options {sorted(unknown)}")
        return GhostConfig(**raw)

    def write_copy(self) -> None:
        out = Path(self.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "run_config.yaml", "w") as fh:
            yaml.safe_dump(dataclasses.asdict(self), fh, sort_keys=True)


# ---------------------------------------------------------------------------
# shared loading steps


def _load_raw(cfg: RunConfig):
    if not cfg.tracking:
        raise CliError("no tracking files configured (tracking: [...])")
    if not cfg.plays:
        raise CliError("no plays file configured (plays: ...)")
    frames, report = read_tracking(cfg.tracking)
    contexts = load_play_contexts(cfg.plays, cfg.games)
    return frames, contexts, report


def _load_models(cfg: RunConfig):
    yac = load_forest(cfg.artifact("yac_forest", "yac_forest.bin"))
    ghost = load_forest(cfg.artifact("ghost_forest", "ghost_forest.bin"))
    table = read_feature_table(cfg.artifact("features", "features.csv"))
    pool = TrajectoryPool.from_feature_table(table)
    ep_model = make_expected_points(cfg.ep_table)
    return yac, ghost, table, pool, ep_model


def _write_csv(frame: pd.DataFrame, path: str | Path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False)


# ---------------------------------------------------------------------------
# commands


def cmd_synth(cfg: RunConfig, args) -> dict:
    raw = dict(cfg.synth)
    raw.setdefault("seed", cfg.seed)
    if "weeks" in raw:
        raw["weeks"] = tuple(raw["weeks"])
    if "teams" in raw:
        raw["teams"] = tuple(raw["teams"])
    for key in ("catch_x_range", "rec_y_range", "rec_speed_range", "air_yards_range", "def_offset_mean"):
        if key in raw:
            raw[key] = tuple(raw[key])
    valid = {f.name for f in dataclasses.fields(SynthConfig)}
    unknown = set(raw) - valid
    if unknown:
        raise CliError(f"unknown synth options {sorted(unknown)}")
    dataset = generate(SynthConfig(**raw))
    paths = write_tracking_files(dataset, cfg.out_dir)
    truth = pd.DataFrame(
        [
            {
                "game_id": p.game_id,
                "play_id": p.play_id,
                "yac_mean": p.yac_mean,
                "yac_sd": dataset.config.yac_sd,
                "def1_mean_x_adj": p.def1_mean_x_adj,
                "def1_mean_y_adj": p.def1_mean_y_adj,
                "observed_yac": p.observed_yac,
            }
            for p in dataset.plays
        ]
    )
    truth_path = Path(cfg.out_dir) / "synth_truth.csv"
    _write_csv(truth, truth_path)
    rosters_path = Path(cfg.out_dir) / "rosters.csv"
    _write_csv(dataset.rosters(), rosters_path)
    paths.update(truth=str(truth_path), rosters=str(rosters_path))
    return {"n_plays": len(dataset.plays), **paths}


def cmd_ingest(cfg: RunConfig, args) -> dict:
    frames, contexts, report = _load_raw(cfg)
    snapshots, exclusions = select_eligible_plays(contexts, frames)
    payload = {
        "ingest": report.as_dict(),
        "plays_in_context": len(contexts),
        "eligible_plays": len(snapshots),
        "excluded_plays": dict(exclusions),
    }
    out = Path(cfg.out_dir) / "ingest_report.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(payload, indent=2, sort_keys=True))
    return payload


def cmd_features(cfg: RunConfig, args) -> dict:
    frames, contexts, report = _load_raw(cfg)
    snapshots, exclusions = select_eligible_plays(contexts, frames)
    table = build_feature_table(snapshots)
    path = cfg.default_path("features", "features.csv")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    write_feature_table(table, path)
    report_path = Path(cfg.out_dir) / "features_report.json"
    report_path.write_text(
        json.dumps(
            {
                "ingest": report.as_dict(),
                "eligible_plays": len(snapshots),
                "excluded_plays": dict(exclusions),
                "features": path,
            },
            indent=2,
            sort_keys=True,
        )
    )
    return {"features": path, "n_plays": len(table)}


def cmd_train_yac(cfg: RunConfig, args) -> dict:
    table = read_feature_table(cfg.artifact("features", "features.csv"))
    features = list(cfg.yac_feature_columns)
    missing = [c for c in features if c not in table.columns]
    if missing:
        raise CliError(f"feature table lacks columns {missing}")
    x = table[features].to_numpy(dtype=float)
    y, n_clamped = clamp_training_yac(
        table["observed_yac"].to_numpy(dtype=float),
        table["catch_x_adj"].to_numpy(dtype=float),
    )
    forest = CDEForest.fit(x, y, cfg.forest_config("yac"), feature_names=tuple(features))
    path = cfg.default_path("yac_forest", "yac_forest.bin")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    save_forest(forest, path)
    export_forest_json(forest, path + ".json")
    return {"yac_forest": path, "n_train": len(table), "n_clamped": n_clamped}


def cmd_train_ghost(cfg: RunConfig, args) -> dict:
    table = read_feature_table(cfg.artifact("features", "features.csv"))
    features = list(cfg.ghost_feature_columns)
    missing = [c for c in features if c not in table.columns]
    if missing:
        raise CliError(f"feature table lacks columns {missing}")
    x = table[features].to_numpy(dtype=float)
    y = table[["def1_x_adj", "def1_y_adj"]].to_numpy(dtype=float)
    forest = CDEForest.fit(x, y, cfg.forest_config("ghost2d"), feature_names=tuple(features))
    path = cfg.default_path("ghost_forest", "ghost_forest.bin")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    save_forest(forest, path)
    export_forest_json(forest, path + ".json")
    return {"ghost_forest": path, "n_train": len(table)}


def cmd_eval_play(cfg: RunConfig, args) -> dict:
    yac, ghost, table, pool, ep_model = _load_models(cfg)
    match = table[
        (table["game_id"].astype(str) == args.game)
        & (table["play_id"].astype(str) == args.play)
    ]
    if match.empty:
        raise CliError(f"play {args.game}/{args.play} not in the feature table")
    play = PlayAtCatch.from_row(match.iloc[0])
    ev = evaluate_play(
        play, yac, ghost, pool, ep_model, cfg.ghost_config(), keep_detail=True
    )
    tag = f"{args.game}_{args.play}"
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    grid = pd.DataFrame(
        {
            "x_adj": ev.lattice[:, 0],
            "y_adj": ev.lattice[:, 1],
            "h": ev.location_density,
            "mean_ghost_epv": ev.location_epv,
            "mean_delta": ev.epv_catch - ev.location_epv,
            "mean_ghost_epv_observed_traj": ev.location_epv_observed_traj,
        }
    )
    grid_path = out / f"ghost_grid_{tag}.csv"
    _write_csv(grid, grid_path)

    n_loc, b = ev.location_epv_samples.shape
    samples = pd.DataFrame(
        {
            "x_adj": np.repeat(ev.lattice[:, 0], b),
            "y_adj": np.repeat(ev.lattice[:, 1], b),
            "h": np.repeat(ev.location_density, b),
            "draw": np.tile(np.arange(b), n_loc),
            "ghost_epv": ev.location_epv_samples.ravel(),
        }
    )
    samples_path = out / f"ghost_samples_{tag}.csv"
    _write_csv(samples, samples_path)

    summary = pd.DataFrame([{c: getattr(ev, c) for c in EVALUATION_COLUMNS}])
    summary_path = out / f"summary_{tag}.csv"
    _write_csv(summary, summary_path)
    return {
        "grid": str(grid_path),
        "samples": str(samples_path),
        "summary": str(summary_path),
        "epv_catch": ev.epv_catch,
        "expected_delta": ev.expected_delta,
        "percentile": ev.percentile,
    }


# worker state for season evaluation; initialized once per process
_WORKER: dict = {}


def _season_init(yac_path, ghost_path, features_path, ep_table, ghost_cfg):
    _WORKER["yac"] = load_forest(yac_path)
    _WORKER["ghost"] = load_forest(ghost_path)
    table = read_feature_table(features_path)
    _WORKER["pool"] = TrajectoryPool.from_feature_table(table)
    _WORKER["ep"] = make_expected_points(ep_table)
    _WORKER["cfg"] = GhostConfig(**ghost_cfg)


def _season_eval(row: dict) -> tuple[str, dict]:
    play = PlayAtCatch.from_row(row)
    try:
        ev = evaluate_play(
            play,
            _WORKER["yac"],
            _WORKER["ghost"],
            _WORKER["pool"],
            _WORKER["ep"],
            _WORKER["cfg"],
        )
    except PlayEvaluationError as exc:
        return "err", {
            "game_id": play.game_id,
            "play_id": play.play_id,
            "reason": exc.reason,
            "detail": str(exc),
        }
    return "ok", {c: getattr(ev, c) for c in EVALUATION_COLUMNS}


def cmd_eval_season(cfg: RunConfig, args) -> dict:
    yac_path = cfg.artifact("yac_forest", "yac_forest.bin")
    ghost_path = cfg.artifact("ghost_forest", "ghost_forest.bin")
    features_path = cfg.artifact("features", "features.csv")
    table = read_feature_table(features_path)
    rows = table.to_dict("records")
    ghost_cfg = dataclasses.asdict(cfg.ghost_config())

    results: list[tuple[str, dict]] = []
    if cfg.workers == 1:
        _season_init(yac_path, ghost_path, features_path, cfg.ep_table, ghost_cfg)
        results = [_season_eval(r) for r in rows]
    else:
        init_args = (yac_path, ghost_path, features_path, cfg.ep_table, ghost_cfg)
        with ProcessPoolExecutor(
            max_workers=cfg.workers, initializer=_season_init, initargs=init_args
        ) as pool:
            chunk = max(1, len(rows) // (cfg.workers * 4) or 1)
            results = list(pool.map(_season_eval, rows, chunksize=chunk))

    ok = [payload for status, payload in results if status == "ok"]
    errs = [payload for status, payload in results if status == "err"]
    evals = pd.DataFrame(ok, columns=list(EVALUATION_COLUMNS))
    evals = evals.sort_values(["game_id", "play_id"], kind="stable").reset_index(drop=True)
    eval_path = cfg.default_path("evaluations", "evaluations.csv")
    _write_csv(evals, eval_path)
    err_path = Path(cfg.out_dir) / "eval_errors.csv"
    _write_csv(
        pd.DataFrame(errs, columns=["game_id", "play_id", "reason", "detail"]), err_path
    )
    agg = aggregate_players(evals)
    leaderboard_path = Path(cfg.out_dir) / "leaderboard.csv"
    _write_csv(agg.leaderboard_frame(), leaderboard_path)
    return {
        "evaluations": eval_path,
        "leaderboard": str(leaderboard_path),
        "n_evaluated": len(evals),
        "n_failed": len(errs),
    }


def cmd_cv(cfg: RunConfig, args) -> dict:
    table = read_feature_table(cfg.artifact("features", "features.csv"))
    raw = dict(cfg.cv)
    model_kind = raw.get("model_kind", "yac")
    default_set = cfg.yac_feature_columns if model_kind == "yac" else cfg.ghost_feature_columns
    feature_sets = raw.get("feature_sets") or {"base": list(default_set)}
    forest_raw = dict(raw.get("forest") or {})
    forest_raw.setdefault("seed", cfg.seed)
    report = lowo_cv(
        table,
        feature_sets,
        model_kind,
        forest_config=ForestConfig(**forest_raw),
        grid_step=float(raw.get("grid_step", 0.5)),
        lattice_step=float(raw.get("lattice_step", 1.0)),
    )
    folds_path = Path(cfg.out_dir) / "cv_folds.csv"
    summary_path = Path(cfg.out_dir) / "cv_summary.csv"
    _write_csv(report.fold_frame(), folds_path)
    _write_csv(report.summary_frame(), summary_path)
    return {"folds": str(folds_path), "summary": str(summary_path)}


def cmd_sweep(cfg: RunConfig, args) -> dict:
    table = read_feature_table(cfg.artifact("features", "features.csv"))
    raw = dict(cfg.sweep)
    model_kind = raw.get("model_kind", "yac")
    default_set = cfg.yac_feature_columns if model_kind == "yac" else cfg.ghost_feature_columns
    features = raw.get("features") or list(default_set)
    forest_raw = dict(raw.get("forest") or {})
    forest_raw.setdefault("seed", cfg.seed)
    rows = week_sweep(
        table,
        features,
        model_kind,
        forest_config=ForestConfig(**forest_raw),
        grid_step=float(raw.get("grid_step", 0.5)),
        lattice_step=float(raw.get("lattice_step", 1.0)),
    )
    path = Path(cfg.out_dir) / "sweep.csv"
    _write_csv(rows, path)
    return {"sweep": str(path), "n_rows": len(rows)}


def cmd_report(cfg: RunConfig, args) -> dict:
    evals = pd.read_csv(
        cfg.artifact("evaluations", "evaluations.csv"),
        dtype={"game_id": str, "play_id": str, "def1_player_id": str},
    )
    rosters = pd.read_csv(cfg.rosters, dtype=str) if cfg.rosters else None
    agg = aggregate_players(evals, rosters=rosters)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    leaderboard_path = out / "leaderboard.csv"
    scatter_path = out / "player_scatter.csv"
    _write_csv(agg.leaderboard_frame(), leaderboard_path)
    _write_csv(agg.scatter, scatter_path)
    payload = {
        "leaderboard": str(leaderboard_path),
        "scatter": str(scatter_path),
        "overall_r": agg.overall_r,
        "position_r": agg.position_r,
        "n_unattributed": agg.n_unattributed,
    }
    if cfg.team_epa:
        team_epa = pd.read_csv(cfg.team_epa)
        teams = aggregate_teams(evals, team_epa)
        teams_path = out / "teams.csv"
        _write_csv(teams.team_frame(), teams_path)
        payload.update(
            teams=str(teams_path), team_r=teams.r, missing_teams=teams.missing_teams
        )
    (out / "correlations.json").write_text(
        json.dumps(
            _jsonify({k: v for k, v in payload.items() if not isinstance(v, str)}),
            indent=2,
            sort_keys=True,
        )
    )
    return payload


def _jsonify(value):
    """Make a result payload valid JSON (NaN/inf become null)."""
    if isinstance(value, dict):
        return {k: _jsonify(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonify(v) for v in value]
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if np.isfinite(v) else None
    if isinstance(value, np.integer):
        return int(value)
    return value


COMMANDS = {
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "features": cmd_features,
    "train-yac": cmd_train_yac,
    "train-ghost": cmd_train_ghost,
    "eval-play": cmd_eval_play,
    "eval-season": cmd_eval_season,
    "cv": cmd_cv,
    "sweep": cmd_sweep,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ghostdef",
        description="Nearest-defender positioning value for completed passes",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="YAML run configuration file")
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None, help="output directory")
        if name == "eval-play":
            p.add_argument("--game", required=True)
            p.add_argument("--play", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.resolve(args)
        cfg.write_copy()
        result = _jsonify(COMMANDS[args.command](cfg, args))
        print(json.dumps({"command": args.command, **result}, sort_keys=True, default=str))
        return 0
    except Exception as exc:  # pragma: no branch
        report = {
            "error": {
                "command": args.command,
                "type": type(exc).__name__,
                "message": str(exc),
            }
        }
        print(json.dumps(report, sort_keys=True), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
