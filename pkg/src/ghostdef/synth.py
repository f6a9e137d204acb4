"""Deterministic synthetic play generator with known ground truth.

Builds desk-scale datasets whose generative laws are simple and fully
known, so estimator tests can compare against exact conditional
densities:

* yards after catch: normal around a closed-form mean that increases
  with the nearest defender's distance (capped) and the receiver's
  speed, clamped to the play's outcome grid. Default ranges keep the
  clamp at least six standard deviations away, so the normal density IS
  the true density to well below any test tolerance.
* nearest-defender location: bivariate normal offset from the receiver,
  truncated to the field (resampled until in bounds).

The generator fabricates only geometry; snapshots and feature tables
are produced by the same code that handles real tracking data, and
:func:`write_tracking_files` emits raw CSVs in the ingest schema so the
entire pipeline can run end to end on synthetic data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .epv import YAC_GRID_MIN, YAC_GRID_OVERSHOOT
from .tracking import (
    CatchSnapshot,
    FIELD_LENGTH,
    FIELD_WIDTH,
    MIDFIELD_Y,
    PlayContext,
    TrackingFrame,
    build_feature_table,
    unadjust_angle,
    unadjust_x,
    unadjust_y,
)

__all__ = [
    "SynthConfig",
    "SynthDataset",
    "SynthPlay",
    "generate",
    "write_tracking_files",
]

#: Snap, throw, catch, and end-of-play frame ids in emitted tracking files.
FRAME_SNAP, FRAME_THROW, FRAME_CATCH, FRAME_END = 1, 5, 10, 15

#: Required sigma gap between the YAC law's mean range and the clamp
#: bounds; keeps the closed-form normal density exact in practice.
CLAMP_MARGIN_SIGMAS = 6.0

_DEF_POSITIONS = ("CB", "FS", "SS", "LB")


@dataclass(frozen=True)
class SynthConfig:
    """Generator settings; identical configs produce identical datasets."""

    n_plays: int = 200
    weeks: tuple[int, ...] = (1, 2, 3, 4)
    seed: int = 0
    # geometry
    catch_x_range: tuple[float, float] = (20.0, 60.0)
    rec_y_range: tuple[float, float] = (-14.0, 14.0)
    rec_speed_range: tuple[float, float] = (2.0, 8.0)
    air_yards_range: tuple[float, float] = (2.0, 12.0)
    # yards-after-catch law: mean = intercept + slope*min(dist, cap) + speed_slope*s
    yac_intercept: float = 0.5
    yac_dist_slope: float = 0.6
    yac_dist_cap: float = 10.0
    yac_speed_slope: float = 0.25
    yac_sd: float = 1.5
    # nearest-defender law: receiver + N(offset_mean, offset_sd^2 I), in-bounds
    def_offset_mean: tuple[float, float] = (-2.0, 0.0)
    def_offset_sd: float = 2.5
    teams: tuple[str, ...] = ("ALP", "BRV", "CHR", "DEL")

    def yac_mean(self, dist_to_rec: float, rec_speed: float) -> float:
        """Closed-form conditional mean of yards after catch."""
        return (
            self.yac_intercept
            + self.yac_dist_slope * min(dist_to_rec, self.yac_dist_cap)
            + self.yac_speed_slope * rec_speed
        )

    def validate(self) -> None:
        if self.n_plays < 0:
            raise ValueError("n_plays must be nonnegative")
        if not self.weeks:
            raise ValueError("need at least one week")
        if len(self.teams) < 4 or len(self.teams) % 2:
            raise ValueError("need an even number of teams, at least 4")
        for name in ("catch_x_range", "rec_y_range", "rec_speed_range", "air_yards_range"):
            lo, hi = getattr(self, name)
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise ValueError(f"{name} must be a finite (lo, hi) with lo < hi")
        if self.catch_x_range[0] <= 0 or self.catch_x_range[1] >= 100:
            raise ValueError("catch_x_range must stay inside (0, 100)")
        if abs(self.rec_y_range[0]) >= MIDFIELD_Y or abs(self.rec_y_range[1]) >= MIDFIELD_Y:
            raise ValueError("rec_y_range must stay inside the field")
        if self.rec_speed_range[0] < 0:
            raise ValueError("receiver speed cannot be negative")
        if self.yac_sd <= 0 or self.def_offset_sd <= 0:
            raise ValueError("law standard deviations must be positive")
        # clamp inertness: the normal law must sit well inside the
        # outcome grid for every reachable play, or the advertised
        # closed-form density would be wrong at the clamp points
        margin = CLAMP_MARGIN_SIGMAS * self.yac_sd
        mean_hi = self.yac_mean(self.yac_dist_cap, self.rec_speed_range[1])
        mean_lo = self.yac_mean(0.0, self.rec_speed_range[0])
        grid_top_min = math.floor(self.catch_x_range[0]) + YAC_GRID_OVERSHOOT
        if mean_hi + margin > grid_top_min:
            raise ValueError(
                "YAC law can reach the upper clamp: raise catch_x_range or lower the law"
            )
        if mean_lo - margin < YAC_GRID_MIN:
            raise ValueError("YAC law can reach the lower clamp")


@dataclass(frozen=True)
class SynthPlay:
    """Ground truth for one generated play."""

    snapshot: CatchSnapshot
    yac_mean: float
    observed_yac: float
    def1_mean_x_adj: float
    def1_mean_y_adj: float

    @property
    def game_id(self) -> str:
        return self.snapshot.context.game_id

    @property
    def play_id(self) -> str:
        return self.snapshot.context.play_id


@dataclass(frozen=True)
class SynthDataset:
    """Generated plays, their feature table, and exact generative densities."""

    config: SynthConfig
    plays: tuple[SynthPlay, ...]
    table: pd.DataFrame

    @property
    def snapshots(self) -> list[CatchSnapshot]:
        return [p.snapshot for p in self.plays]

    def true_yac_density(self, play_index: int, grid: np.ndarray) -> np.ndarray:
        """Exact conditional density of yards after catch on a grid."""
        p = self.plays[play_index]
        z = (np.asarray(grid, dtype=float) - p.yac_mean) / self.config.yac_sd
        return np.exp(-0.5 * z * z) / (self.config.yac_sd * math.sqrt(2.0 * math.pi))

    def true_defender_density(self, play_index: int, points: np.ndarray) -> np.ndarray:
        """Exact conditional density of the nearest defender's location.

        Bivariate normal truncated to the field box (that is how the
        generator samples), renormalized in closed form.
        """
        p = self.plays[play_index]
        sd = self.config.def_offset_sd
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        zx = (pts[:, 0] - p.def1_mean_x_adj) / sd
        zy = (pts[:, 1] - p.def1_mean_y_adj) / sd
        dens = np.exp(-0.5 * (zx * zx + zy * zy)) / (2.0 * math.pi * sd * sd)
        mass = _normal_box_mass(
            p.def1_mean_x_adj, sd, -10.0, FIELD_LENGTH - 10.0
        ) * _normal_box_mass(p.def1_mean_y_adj, sd, -MIDFIELD_Y, MIDFIELD_Y)
        inside = (
            (pts[:, 0] >= -10.0)
            & (pts[:, 0] <= FIELD_LENGTH - 10.0)
            & (np.abs(pts[:, 1]) <= MIDFIELD_Y)
        )
        return np.where(inside, dens / mass, 0.0)

    def rosters(self) -> pd.DataFrame:
        """Player id / name / position / team table for the generated league."""
        rows = []
        for team in self.config.teams:
            for pid, pos in _team_roster(team):
                rows.append(
                    {
                        "player_id": pid,
                        "name": f"Player {pid}",
                        "position": pos,
                        "team": team,
                    }
                )
        return pd.DataFrame(rows, columns=["player_id", "name", "position", "team"])


def _normal_box_mass(mean: float, sd: float, lo: float, hi: float) -> float:
    a = (lo - mean) / (sd * math.sqrt(2.0))
    b = (hi - mean) / (sd * math.sqrt(2.0))
    return 0.5 * (math.erf(b) - math.erf(a))


def _team_roster(team: str) -> list[tuple[str, str]]:
    roster = [(f"{team}Q1", "QB")]
    roster += [(f"{team}W{k}", "WR") for k in (1, 2, 3)]
    roster += [(f"{team}D{k}", pos) for k, pos in enumerate(_DEF_POSITIONS, start=1)]
    return roster


def _uniform(rng: np.random.Generator, lo_hi: tuple[float, float]) -> float:
    return float(rng.uniform(lo_hi[0], lo_hi[1]))


def _in_field(x_adj: float, y_adj: float) -> bool:
    return -10.0 <= x_adj <= FIELD_LENGTH - 10.0 and abs(y_adj) <= MIDFIELD_Y


def generate(config: SynthConfig | None = None) -> SynthDataset:
    """Generate a synthetic season; same config, same bytes out.

    Each play draws from its own seed stream derived from (seed, play
    index), so the dataset does not depend on generation order.
    """
    config = config or SynthConfig()
    config.validate()
    n_games_per_week = len(config.teams) // 2
    plays: list[SynthPlay] = []
    for i in range(config.n_plays):
        rng = np.random.default_rng(np.random.SeedSequence([config.seed, i]))
        week = config.weeks[i % len(config.weeks)]
        g = (i // len(config.weeks)) % n_games_per_week
        home, visitor = config.teams[2 * g], config.teams[2 * g + 1]
        direction = "left" if i % 2 == 0 else "right"
        offense, defense = (home, visitor) if (i // 2) % 2 == 0 else (visitor, home)
        game_id = f"G{week:02d}{g:02d}"
        play_id = f"{i + 1:05d}"

        rec_x = _uniform(rng, config.catch_x_range)
        rec_y = _uniform(rng, config.rec_y_range)
        rec_s = _uniform(rng, config.rec_speed_range)
        rec_dir = float(rng.uniform(0.0, 360.0))
        rec_o = float(rng.uniform(0.0, 360.0))

        # nearest defender: Gaussian offset, resampled until in bounds
        mean_x = rec_x + config.def_offset_mean[0]
        mean_y = rec_y + config.def_offset_mean[1]
        for _ in range(200):
            d1x = float(rng.normal(mean_x, config.def_offset_sd))
            d1y = float(rng.normal(mean_y, config.def_offset_sd))
            if _in_field(d1x, d1y):
                break
        else:  # pragma: no cover - would need absurd config
            raise RuntimeError("could not place the nearest defender in bounds")
        d1_dist = math.hypot(d1x - rec_x, d1y - rec_y)

        # second defender strictly farther out, somewhere in bounds
        for _ in range(200):
            r = d1_dist + float(rng.uniform(2.0, 6.0))
            phi = float(rng.uniform(0.0, 2.0 * math.pi))
            d2x = rec_x + r * math.cos(phi)
            d2y = rec_y + r * math.sin(phi)
            if _in_field(d2x, d2y):
                break
        else:  # pragma: no cover
            raise RuntimeError("could not place the second defender in bounds")

        # extra offensive player behind the receiver
        off_x = rec_x + float(rng.uniform(2.0, 8.0))
        off_y = rec_y + float(rng.uniform(-8.0, 8.0))

        air = _uniform(rng, config.air_yards_range)
        los_x = rec_x + air
        qb_x = los_x + float(rng.uniform(3.0, 8.0))
        qb_y = float(rng.uniform(-5.0, 5.0))
        qb_s = float(rng.uniform(0.0, 4.0))
        down = int(rng.integers(1, 5))
        ytg = float(min(int(rng.integers(1, 16)), max(1, math.floor(los_x))))

        yac_mean = config.yac_mean(d1_dist, rec_s)
        yac = float(rng.normal(yac_mean, config.yac_sd))
        grid_top = math.floor(rec_x) + YAC_GRID_OVERSHOOT
        yac = float(np.clip(yac, YAC_GRID_MIN, grid_top))

        rec_id = f"{offense}W{int(rng.integers(1, 4))}"
        off_choices = [f"{offense}W{k}" for k in (1, 2, 3) if f"{offense}W{k}" != rec_id]
        off_id = off_choices[int(rng.integers(0, len(off_choices)))]
        def_idx = int(rng.integers(0, len(_DEF_POSITIONS)))
        def2_idx = (def_idx + 1 + int(rng.integers(0, len(_DEF_POSITIONS) - 1))) % len(
            _DEF_POSITIONS
        )
        d1_id = f"{defense}D{def_idx + 1}"
        d2_id = f"{defense}D{def2_idx + 1}"

        home_score = int(rng.integers(0, 31))
        visitor_score = int(rng.integers(0, 31))

        def _frame(pid, pos, team, x_adj, y_adj, s, dir_adj, o_adj, frame_id, event):
            return TrackingFrame(
                game_id=game_id,
                play_id=play_id,
                player_id=pid,
                frame_id=frame_id,
                x=float(unadjust_x(x_adj, direction)),
                y=float(unadjust_y(y_adj, direction)),
                s=s,
                a=0.0,
                dis=0.0,
                o=float(unadjust_angle(o_adj, direction)),
                dir=float(unadjust_angle(dir_adj, direction)),
                event=event,
                team=team,
                display_name=f"Player {pid}",
                position=pos,
            )

        catch = FRAME_CATCH
        receiver = _frame(rec_id, "WR", offense, rec_x, rec_y, rec_s, rec_dir, rec_o, catch, "pass_outcome_caught")
        quarterback = _frame(
            f"{offense}Q1", "QB", offense, qb_x, qb_y, qb_s,
            float(rng.uniform(0.0, 360.0)), float(rng.uniform(0.0, 360.0)),
            FRAME_THROW, "pass_forward",
        )
        def1 = _frame(
            d1_id, _DEF_POSITIONS[def_idx], defense, d1x, d1y,
            float(rng.uniform(1.0, 9.0)), float(rng.uniform(0.0, 360.0)),
            float(rng.uniform(0.0, 360.0)), catch, "pass_outcome_caught",
        )
        def2 = _frame(
            d2_id, _DEF_POSITIONS[def2_idx], defense, d2x, d2y,
            float(rng.uniform(1.0, 9.0)), float(rng.uniform(0.0, 360.0)),
            float(rng.uniform(0.0, 360.0)), catch, "pass_outcome_caught",
        )
        off1 = _frame(
            off_id, "WR", offense, off_x, off_y,
            float(rng.uniform(1.0, 9.0)), float(rng.uniform(0.0, 360.0)),
            float(rng.uniform(0.0, 360.0)), catch, "pass_outcome_caught",
        )

        context = PlayContext(
            game_id=game_id,
            play_id=play_id,
            down=down,
            yards_to_go=ytg,
            absolute_yardline=float(unadjust_x(los_x, direction)),
            play_direction=direction,
            week=int(week),
            offense_team=offense,
            defense_team=defense,
            quarter=int(rng.integers(1, 5)),
            game_clock="10:00",
            score_differential=float(
                home_score - visitor_score if offense == home else visitor_score - home_score
            ),
        )
        snapshot = CatchSnapshot(
            context=context,
            catch_frame=catch,
            throw_frame=FRAME_THROW,
            receiver=receiver,
            quarterback_at_throw=quarterback,
            offense_ordered=(off1,),
            defense_ordered=(def1, def2),
            observed_yac=yac,
        )
        plays.append(
            SynthPlay(
                snapshot=snapshot,
                yac_mean=yac_mean,
                observed_yac=yac,
                def1_mean_x_adj=mean_x,
                def1_mean_y_adj=mean_y,
            )
        )
    table = build_feature_table([p.snapshot for p in plays])
    return SynthDataset(config=config, plays=tuple(plays), table=table)


def write_tracking_files(dataset: SynthDataset, out_dir: str) -> dict[str, str]:
    """Emit raw tracking/plays/games CSVs in the ingest schema.

    The pipeline run on these files recovers exactly the generated
    plays: frames carry snap, throw, catch, and tackle events; the ball
    sits on the quarterback at the throw and on the receiver at the
    catch; the receiver's tackle spot encodes the drawn yards after
    catch.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    track_rows: list[dict] = []
    play_rows: list[dict] = []
    game_rows: dict[str, dict] = {}

    for p in dataset.plays:
        snap = p.snapshot
        ctx = snap.context
        direction = ctx.play_direction
        rec = snap.receiver
        qb = snap.quarterback_at_throw
        others = list(snap.offense_ordered) + list(snap.defense_ordered)

        end_x_adj = (rec.x - 10.0 if direction == "left" else 110.0 - rec.x) - p.observed_yac
        end_x = float(unadjust_x(end_x_adj, direction))

        def _row(frame: TrackingFrame, frame_id: int, event: str, x=None, y=None):
            return {
                "gameId": ctx.game_id,
                "playId": ctx.play_id,
                "nflId": frame.player_id,
                "frameId": frame_id,
                "x": frame.x if x is None else x,
                "y": frame.y if y is None else y,
                "s": frame.s,
                "a": frame.a,
                "dis": frame.dis,
                "o": frame.o,
                "dir": frame.dir,
                "event": event,
                "team": frame.team,
                "displayName": frame.display_name,
                "position": frame.position,
                "playDirection": direction,
            }

        def _ball(frame_id: int, event: str, x: float, y: float):
            return {
                "gameId": ctx.game_id,
                "playId": ctx.play_id,
                "nflId": "",
                "frameId": frame_id,
                "x": x,
                "y": y,
                "s": "",
                "a": "",
                "dis": "",
                "o": "",
                "dir": "",
                "event": event,
                "team": "football",
                "displayName": "Football",
                "position": "",
                "playDirection": direction,
            }

        events = (
            (FRAME_SNAP, "ball_snap"),
            (FRAME_THROW, "pass_forward"),
            (FRAME_CATCH, "pass_outcome_caught"),
            (FRAME_END, "tackle"),
        )
        for frame_id, event in events:
            for fr in [rec, qb] + others:
                if fr is rec and frame_id == FRAME_END:
                    track_rows.append(_row(fr, frame_id, event, x=end_x))
                else:
                    track_rows.append(_row(fr, frame_id, event))
            if frame_id in (FRAME_SNAP, FRAME_THROW):
                track_rows.append(_ball(frame_id, event, qb.x, qb.y))
            elif frame_id == FRAME_CATCH:
                track_rows.append(_ball(frame_id, event, rec.x, rec.y))
            else:
                track_rows.append(_ball(frame_id, event, end_x, rec.y))

        # scores: only the offense-perspective differential matters; encode
        # it as (home, visitor) so re-ingestion recovers the same value
        g = int(ctx.game_id[-2:])
        home_team = dataset.config.teams[2 * g]
        diff = ctx.score_differential or 0.0
        home_diff = diff if ctx.offense_team == home_team else -diff
        hs, vs = (home_diff, 0.0) if home_diff >= 0 else (0.0, -home_diff)

        play_rows.append(
            {
                "gameId": ctx.game_id,
                "playId": ctx.play_id,
                "down": ctx.down,
                "yardsToGo": ctx.yards_to_go,
                "possessionTeam": ctx.offense_team,
                "absoluteYardlineNumber": ctx.absolute_yardline,
                "quarter": ctx.quarter,
                "gameClock": ctx.game_clock,
                "preSnapHomeScore": hs,
                "preSnapVisitorScore": vs,
            }
        )
        if ctx.game_id not in game_rows:
            # offense is home on even play pairs by construction; recover
            # the home team from the game id's team pair instead of guessing
            game_rows[ctx.game_id] = {
                "gameId": ctx.game_id,
                "week": ctx.week,
                "homeTeamAbbr": None,
                "visitorTeamAbbr": None,
            }

    # the team pair of a game is fixed by construction: fill home/visitor
    # from the configured pairing
    teams = dataset.config.teams
    for gid, row in game_rows.items():
        g = int(gid[-2:])
        row["homeTeamAbbr"] = teams[2 * g]
        row["visitorTeamAbbr"] = teams[2 * g + 1]

    tracking_path = out / "tracking.csv"
    plays_path = out / "plays.csv"
    games_path = out / "games.csv"
    track_cols = [
        "gameId", "playId", "nflId", "frameId", "x", "y", "s", "a", "dis",
        "o", "dir", "event", "team", "displayName", "position", "playDirection",
    ]
    pd.DataFrame(track_rows, columns=track_cols).to_csv(tracking_path, index=False)
    play_cols = [
        "gameId", "playId", "down", "yardsToGo", "possessionTeam",
        "absoluteYardlineNumber", "quarter", "gameClock",
        "preSnapHomeScore", "preSnapVisitorScore",
    ]
    pd.DataFrame(play_rows, columns=play_cols).to_csv(plays_path, index=False)
    game_cols = ["gameId", "week", "homeTeamAbbr", "visitorTeamAbbr"]
    pd.DataFrame(list(game_rows.values()), columns=game_cols).to_csv(
        games_path, index=False
    )
    return {
        "tracking": str(tracking_path),
        "plays": str(plays_path),
        "games": str(games_path),
    }
