"""Tracking-data ingestion and feature extraction at the moment of catch.

Reads Big Data Bowl style inputs (per-week tracking CSVs, a plays file, a
games file), selects eligible completed passes, and produces the model
feature table.

Coordinate conventions used throughout the package:

* Raw field coordinates: ``x`` in [0, 120] (both endzones included),
  ``y`` in [0, 53.3]. The target endzone's goal line sits at ``x = 10``
  when the play direction is ``left`` and ``x = 110`` when ``right``.
* Adjusted coordinates: ``x_adj`` is yards from the target endzone
  (0 at the goal line, decreasing as the offense advances); ``y_adj`` is
  yards from the field's center line, positive toward the offense's left.
* Raw angles (``o``, ``dir``): compass-style degrees in [0, 360),
  measured clockwise from the +y axis.
* Adjusted angles: degrees in [0, 360) measured clockwise from the
  direction of attack (0 points at the target endzone, 90 at the
  offense's right). Derived angular features fold these into [0, 180].

All geometry downstream of ingestion (features, ghost placement) is done
in adjusted coordinates so that left- and right-moving plays share one
frame of reference.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

FIELD_LENGTH = 120.0
FIELD_WIDTH = 53.3
MIDFIELD_Y = FIELD_WIDTH / 2.0  # 26.65

EVENT_CATCH = "pass_outcome_caught"
EVENT_THROW = "pass_forward"
#: Events that mark the end of the runback; first one at/after the catch
#: frame determines the receiver's ending spot (falls back to last frame).
END_EVENTS = ("tackle", "out_of_bounds", "touchdown", "fumble", "safety")

BALL_TEAM = "football"
QB_POSITION = "QB"

#: Default column names for Big Data Bowl 2021 style files. Keys are the
#: internal names, values the on-disk header names; remap via the
#: ``schema`` argument of the loaders.
TRACKING_SCHEMA = {
    "game_id": "gameId",
    "play_id": "playId",
    "player_id": "nflId",
    "frame_id": "frameId",
    "x": "x",
    "y": "y",
    "s": "s",
    "a": "a",
    "dis": "dis",
    "o": "o",
    "dir": "dir",
    "event": "event",
    "team": "team",
    "display_name": "displayName",
    "position": "position",
    "play_direction": "playDirection",
}

PLAYS_SCHEMA = {
    "game_id": "gameId",
    "play_id": "playId",
    "down": "down",
    "yards_to_go": "yardsToGo",
    "possession_team": "possessionTeam",
    "absolute_yardline": "absoluteYardlineNumber",
    "quarter": "quarter",
    "game_clock": "gameClock",
    "home_score": "preSnapHomeScore",
    "visitor_score": "preSnapVisitorScore",
}

GAMES_SCHEMA = {
    "game_id": "gameId",
    "week": "week",
    "home_team": "homeTeamAbbr",
    "visitor_team": "visitorTeamAbbr",
}


class SchemaError(ValueError):
    """A required input column is missing."""


class MissingRoleError(KeyError):
    """A requested player role is absent from a snapshot."""


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrackingFrame:
    """One player (or the ball) at one 10 Hz time step."""

    game_id: str
    play_id: str
    player_id: str | None  # None for the ball
    frame_id: int
    x: float
    y: float
    s: float = 0.0
    a: float = 0.0
    dis: float = 0.0
    o: float = float("nan")
    dir: float = float("nan")
    event: str | None = None
    team: str | None = None
    display_name: str | None = None
    position: str | None = None

    @property
    def is_ball(self) -> bool:
        return self.player_id is None


@dataclass(frozen=True)
class PlayContext:
    """Play-level situation at the snap, joined from plays and games files."""

    game_id: str
    play_id: str
    down: int
    yards_to_go: float
    absolute_yardline: float
    play_direction: str | None = None  # "left" | "right", filled from frames
    week: int | None = None
    offense_team: str | None = None
    defense_team: str | None = None
    quarter: int | None = None
    game_clock: str | None = None
    score_differential: float | None = None

    @property
    def los_x_adj(self) -> float:
        """Line of scrimmage in adjusted coordinates."""
        return adjust_x(self.absolute_yardline, self.play_direction)


@dataclass(frozen=True)
class CatchSnapshot:
    """One eligible completed pass frozen at the moment of catch.

    ``offense_ordered`` excludes the receiver and the quarterback;
    ``defense_ordered`` contains every defender. Both are sorted by
    Euclidean distance to the receiver at the catch, ties broken by
    ascending player id.
    """

    context: PlayContext
    catch_frame: int
    throw_frame: int
    receiver: TrackingFrame
    quarterback_at_throw: TrackingFrame
    offense_ordered: tuple[TrackingFrame, ...]
    defense_ordered: tuple[TrackingFrame, ...]
    observed_yac: float

    def role_frame(self, role: str) -> TrackingFrame:
        """Resolve a role name (rec, qb, def1, def2, ..., off1, ...)."""
        if role == "rec":
            return self.receiver
        if role == "qb":
            return self.quarterback_at_throw
        for prefix, pool in (("def", self.defense_ordered), ("off", self.offense_ordered)):
            if role.startswith(prefix) and role[len(prefix):].isdigit():
                idx = int(role[len(prefix):]) - 1
                if 0 <= idx < len(pool):
                    return pool[idx]
                raise MissingRoleError(role)
        raise MissingRoleError(role)


@dataclass(frozen=True)
class FeatureVector:
    """Named, ordered real-valued features for one play."""

    names: tuple[str, ...]
    values: np.ndarray

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names, self.values.tolist()))


@dataclass
class IngestReport:
    """Tally of rows read, emitted, and rejected (by reason) during ingestion."""

    rows_read: int = 0
    frames_emitted: int = 0
    rejected: Counter = field(default_factory=Counter)
    #: Up to ``max_examples`` (file, line, reason) samples for debugging.
    examples: list[tuple[str, int, str]] = field(default_factory=list)
    max_examples: int = 25

    @property
    def rows_rejected(self) -> int:
        return sum(self.rejected.values())

    def reject(self, reason: str, path: str, lines: Iterable[int]) -> None:
        lines = list(lines)
        self.rejected[reason] += len(lines)
        for line in lines[: max(0, self.max_examples - len(self.examples))]:
            self.examples.append((path, int(line), reason))

    def as_dict(self) -> dict:
        return {
            "rows_read": self.rows_read,
            "frames_emitted": self.frames_emitted,
            "rows_rejected": self.rows_rejected,
            "rejected_by_reason": dict(self.rejected),
            "examples": [
                {"file": f, "line": ln, "reason": r} for f, ln, r in self.examples
            ],
        }


# ---------------------------------------------------------------------------
# Coordinate and angle transforms
# ---------------------------------------------------------------------------


def adjust_x(x, direction):
    """Yards from the target endzone: ``x - 10`` (left) or ``110 - x`` (right)."""
    if direction == "left":
        return x - 10.0
    if direction == "right":
        return 110.0 - x
    raise ValueError(f"unknown play direction: {direction!r}")


def adjust_y(y, direction, positive_left: bool = True):
    """Yards from the field center, positive toward the offense's left.

    ``positive_left=False`` flips the sign convention (positive toward
    the offense's right). All folded angular features and distances are
    invariant to this choice; only the signed y_adj values and the
    full-circle adjusted angles mirror. Flip :func:`adjust_angle`'s
    ``positive_left`` together with this one to stay self-consistent.
    """
    if direction == "left":
        v = MIDFIELD_Y - y
    elif direction == "right":
        v = y - MIDFIELD_Y
    else:
        raise ValueError(f"unknown play direction: {direction!r}")
    return v if positive_left else -v


def unadjust_x(x_adj, direction):
    if direction == "left":
        return x_adj + 10.0
    if direction == "right":
        return 110.0 - x_adj
    raise ValueError(f"unknown play direction: {direction!r}")


def unadjust_y(y_adj, direction, positive_left: bool = True):
    y_adj = np.asarray(y_adj, dtype=float)
    if not positive_left:
        y_adj = -y_adj
    if direction == "left":
        return (MIDFIELD_Y - y_adj)[()]
    if direction == "right":
        return (y_adj + MIDFIELD_Y)[()]
    raise ValueError(f"unknown play direction: {direction!r}")


def adjusted_coordinates(frame: TrackingFrame, direction: str) -> tuple[float, float]:
    """Adjusted (x_adj, y_adj) of a frame under the given play direction."""
    return adjust_x(frame.x, direction), adjust_y(frame.y, direction)


def adjust_angle(theta, direction, positive_left: bool = True):
    """Compass angle re-expressed relative to the direction of attack.

    0 points at the target endzone. Under the default y convention the
    result agrees with bearings computed from adjusted coordinate
    differences (atan2 of (dy_adj, dx_adj) of the vector pointing AWAY
    from a target equals the adjusted angle of the vector pointing AT
    it), which is what makes the *_wrt_rec_diff features coherent. The
    transform is a rotation (a reflection when ``positive_left=False``),
    so minimal absolute angle differences are preserved either way.
    """
    if direction == "left":
        v = np.mod(np.asarray(theta, dtype=float) + 90.0, 360.0)
    elif direction == "right":
        v = np.mod(np.asarray(theta, dtype=float) - 90.0, 360.0)
    else:
        raise ValueError(f"unknown play direction: {direction!r}")
    if not positive_left:
        v = np.mod(-v, 360.0)
    return v[()]


def unadjust_angle(theta_adj, direction, positive_left: bool = True):
    theta_adj = np.asarray(theta_adj, dtype=float)
    if not positive_left:
        theta_adj = np.mod(-theta_adj, 360.0)
    if direction == "left":
        return np.mod(theta_adj - 90.0, 360.0)[()]
    if direction == "right":
        return np.mod(theta_adj + 90.0, 360.0)[()]
    raise ValueError(f"unknown play direction: {direction!r}")


def angle_difference(a, b):
    """Minimal absolute difference between two angles, in [0, 180]."""
    d = np.abs(np.mod(a, 360.0) - np.mod(b, 360.0))
    return np.asarray(np.minimum(d, 360.0 - d), dtype=float)[()]


def fold_angle(theta_adj):
    """Fold an adjusted angle to its offset from the attack direction, [0, 180]."""
    return angle_difference(theta_adj, 0.0)


def bearing_to_receiver(player_x_adj, player_y_adj, rec_x_adj, rec_y_adj):
    """Adjusted-frame bearing of the receiver as seen from a player.

    0 means the receiver lies in the attack direction from the player,
    90 to the player's right, and so on clockwise.
    """
    return np.asarray(
        np.mod(
            np.degrees(
                np.arctan2(player_y_adj - rec_y_adj, player_x_adj - rec_x_adj)
            ),
            360.0,
        ),
        dtype=float,
    )[()]


# ---------------------------------------------------------------------------
# Feature blocks
# ---------------------------------------------------------------------------

RECEIVER_FEATURES = (
    "rec_x_adj",
    "rec_y_adj",
    "rec_dir_endzone",
    "rec_o_endzone",
    "rec_x_adj_from_first_down",
    "rec_s",
)
QB_FEATURES = ("qb_s", "qb_x_adj_change", "qb_y_adj_change", "qb_dist_to_rec")
DEFENDER_FEATURE_SUFFIXES = (
    "x_adj",
    "y_adj",
    "dir_endzone",
    "o_endzone",
    "s",
    "x_adj_change",
    "y_adj_change",
    "dist_to_rec",
    "dir_wrt_rec_diff",
    "o_wrt_rec_diff",
)

#: The canonical 20-feature order of the outcome model. The first ten
#: entries (receiver + quarterback) are the ghost-model vector.
YAC_FEATURES = RECEIVER_FEATURES + QB_FEATURES + tuple(
    f"def1_{s}" for s in DEFENDER_FEATURE_SUFFIXES
)
GHOST_FEATURES = RECEIVER_FEATURES + QB_FEATURES


def relative_player_features(rec_x_adj, rec_y_adj, x_adj, y_adj, s, dir_adj, o_adj):
    """The ten receiver-relative features of a non-QB player.

    Accepts scalars or aligned arrays; returns a stacked array whose last
    axis follows ``DEFENDER_FEATURE_SUFFIXES``. This is the single code
    path for observed defenders and for hypothetical ones placed at
    arbitrary locations, so the two agree bit-for-bit.
    """
    x_adj = np.asarray(x_adj, dtype=float)
    y_adj = np.asarray(y_adj, dtype=float)
    s = np.asarray(s, dtype=float)
    dir_adj = np.asarray(dir_adj, dtype=float)
    o_adj = np.asarray(o_adj, dtype=float)

    x_change = x_adj - rec_x_adj
    y_change = np.abs(y_adj - rec_y_adj)
    dist = np.hypot(x_adj - rec_x_adj, y_adj - rec_y_adj)
    bearing = bearing_to_receiver(x_adj, y_adj, rec_x_adj, rec_y_adj)
    return np.stack(
        [
            x_adj,
            y_adj,
            fold_angle(dir_adj),
            fold_angle(o_adj),
            s,
            x_change,
            y_change,
            dist,
            angle_difference(dir_adj, bearing),
            angle_difference(o_adj, bearing),
        ],
        axis=-1,
    )


def first_down_line_x_adj(context: PlayContext) -> float:
    """First down line (goal line in goal-to-go situations), adjusted."""
    return max(context.los_x_adj - context.yards_to_go, 0.0)


def build_feature_vector(
    snapshot: CatchSnapshot, roles: Sequence[str] = ("rec", "qb", "def1")
) -> FeatureVector:
    """Assemble the model features for a snapshot in a fixed, documented order.

    Args:
        snapshot: the play at the catch.
        roles: which player blocks to include. ``("rec", "qb")`` yields the
            ten-feature ghost vector; adding ``"def1"`` yields the full
            twenty-feature outcome vector. ``"def2"``, ``"off1"``, ... append
            further receiver-relative blocks.

    Raises:
        MissingRoleError: if a requested role has no frame on this play.
    """
    direction = snapshot.context.play_direction
    rec = snapshot.receiver
    rec_x, rec_y = adjusted_coordinates(rec, direction)

    names: list[str] = []
    values: list[float] = []
    for role in roles:
        frame = snapshot.role_frame(role)
        if role == "rec":
            names.extend(RECEIVER_FEATURES)
            values.extend(
                [
                    rec_x,
                    rec_y,
                    fold_angle(adjust_angle(rec.dir, direction)),
                    fold_angle(adjust_angle(rec.o, direction)),
                    rec_x - first_down_line_x_adj(snapshot.context),
                    rec.s,
                ]
            )
        elif role == "qb":
            qb_x, qb_y = adjusted_coordinates(frame, direction)
            names.extend(QB_FEATURES)
            values.extend(
                [
                    frame.s,
                    qb_x - rec_x,
                    abs(qb_y - rec_y),
                    float(np.hypot(qb_x - rec_x, qb_y - rec_y)),
                ]
            )
        else:
            px, py = adjusted_coordinates(frame, direction)
            block = relative_player_features(
                rec_x,
                rec_y,
                px,
                py,
                frame.s,
                adjust_angle(frame.dir, direction),
                adjust_angle(frame.o, direction),
            )
            names.extend(f"{role}_{s}" for s in DEFENDER_FEATURE_SUFFIXES)
            values.extend(np.asarray(block, dtype=float).ravel().tolist())
    return FeatureVector(tuple(names), np.asarray(values, dtype=float))


# ---------------------------------------------------------------------------
# Ingestion
# ---------------------------------------------------------------------------


def _resolve_schema(
    df: pd.DataFrame, schema: Mapping[str, str], required: Sequence[str], path: str
) -> None:
    for key in required:
        col = schema[key]
        if col not in df.columns:
            raise SchemaError(f"{path}: missing required column {col!r} (for {key})")


def read_tracking(
    files: Sequence[str],
    schema: Mapping[str, str] | None = None,
    report: IngestReport | None = None,
) -> tuple[pd.DataFrame, IngestReport]:
    """Read and validate tracking CSVs into one normalized DataFrame.

    Rows failing validation (unparseable numerics, out-of-bounds positions,
    duplicated frames) are dropped and tallied in the report; a missing
    required column is a hard error. Ball rows only need positions; player
    rows need the full kinematic set.
    """
    schema = {**TRACKING_SCHEMA, **(schema or {})}
    report = report if report is not None else IngestReport()
    required = ["game_id", "play_id", "player_id", "frame_id", "x", "y", "event"]
    player_numeric = ["s", "a", "dis", "o", "dir"]

    parts = []
    for path in files:
        raw = pd.read_csv(str(path), dtype=str, keep_default_na=False)
        _resolve_schema(raw, schema, required, str(path))
        report.rows_read += len(raw)

        df = pd.DataFrame(index=raw.index)
        # header is line 1, first data row line 2
        df["line"] = raw.index.to_numpy() + 2
        for key in (
            "game_id",
            "play_id",
            "player_id",
            "frame_id",
            "x",
            "y",
            "event",
            "s",
            "a",
            "dis",
            "o",
            "dir",
            "team",
            "display_name",
            "position",
            "play_direction",
        ):
            col = schema.get(key)
            df[key] = raw[col] if col in raw.columns else ""

        is_ball = (df["player_id"].str.strip() == "") | (
            df["team"].str.lower() == BALL_TEAM
        )
        keep = pd.Series(True, index=df.index)

        for key in ("x", "y", "frame_id"):
            vals = pd.to_numeric(df[key], errors="coerce")
            bad = vals.isna() & keep
            if bad.any():
                report.reject(f"unparseable_{key}", str(path), df.loc[bad, "line"])
                keep &= ~bad
            df[key] = vals
        for key in player_numeric:
            vals = pd.to_numeric(df[key], errors="coerce")
            bad = vals.isna() & ~is_ball & keep
            if bad.any():
                report.reject(f"unparseable_{key}", str(path), df.loc[bad, "line"])
                keep &= ~bad
            df[key] = vals

        oob = keep & (
            (df["x"] < 0) | (df["x"] > FIELD_LENGTH) | (df["y"] < 0) | (df["y"] > FIELD_WIDTH)
        )
        if oob.any():
            report.reject("position_out_of_bounds", str(path), df.loc[oob, "line"])
            keep &= ~oob
        neg = keep & ~is_ball & ((df["s"] < 0) | (df["a"] < 0) | (df["dis"] < 0))
        if neg.any():
            report.reject("negative_kinematics", str(path), df.loc[neg, "line"])
            keep &= ~neg

        df = df[keep].copy()
        df["o"] = np.mod(df["o"], 360.0)
        df["dir"] = np.mod(df["dir"], 360.0)
        df["is_ball"] = is_ball[keep]
        dupes = df.duplicated(
            subset=["game_id", "play_id", "player_id", "frame_id"], keep="first"
        )
        if dupes.any():
            report.reject("duplicate_frame", str(path), df.loc[dupes, "line"])
            df = df[~dupes]
        parts.append(df.drop(columns=["line"]))

    frames = (
        pd.concat(parts, ignore_index=True)
        if parts
        else pd.DataFrame(
            columns=[
                "game_id", "play_id", "player_id", "frame_id", "x", "y", "event",
                "s", "a", "dis", "o", "dir", "team", "display_name", "position",
                "play_direction", "is_ball",
            ]
        )
    )
    frames = frames.sort_values(
        ["game_id", "play_id", "player_id", "frame_id"], kind="stable"
    ).reset_index(drop=True)
    frames["frame_id"] = frames["frame_id"].astype(int)
    report.frames_emitted += len(frames)
    return frames, report


def _frame_from_row(row) -> TrackingFrame:
    """Build a TrackingFrame from a namedtuple row or a pandas Series."""
    get = (lambda k: row[k]) if isinstance(row, pd.Series) else (lambda k: getattr(row, k))

    def _num(key: str, default: float = 0.0) -> float:
        v = float(get(key))
        return default if np.isnan(v) else v

    is_ball = bool(get("is_ball"))
    return TrackingFrame(
        game_id=get("game_id"),
        play_id=get("play_id"),
        player_id=None if is_ball else get("player_id"),
        frame_id=int(get("frame_id")),
        x=float(get("x")),
        y=float(get("y")),
        s=_num("s"),
        a=_num("a"),
        dis=_num("dis"),
        o=float(get("o")),
        dir=float(get("dir")),
        event=get("event") or None,
        team=get("team") or None,
        display_name=get("display_name") or None,
        position=get("position") or None,
    )


def load_tracking(
    files: Sequence[str],
    schema: Mapping[str, str] | None = None,
    report: IngestReport | None = None,
) -> Iterator[TrackingFrame]:
    """Stream validated TrackingFrames from CSV files.

    Thin per-frame view over :func:`read_tracking`; pass a report to
    collect reject counts.
    """
    frames, _ = read_tracking(files, schema=schema, report=report)
    for row in frames.itertuples(index=False):
        yield _frame_from_row(row)


def load_play_contexts(
    plays_path: str,
    games_path: str | None = None,
    plays_schema: Mapping[str, str] | None = None,
    games_schema: Mapping[str, str] | None = None,
) -> dict[tuple[str, str], PlayContext]:
    """Load the plays file (and optional games file) into PlayContexts.

    The games file supplies the week and home/visitor team abbreviations
    used to resolve offense/defense identities.
    """
    pschema = {**PLAYS_SCHEMA, **(plays_schema or {})}
    gschema = {**GAMES_SCHEMA, **(games_schema or {})}

    plays = pd.read_csv(plays_path, dtype=str, keep_default_na=False)
    _resolve_schema(
        plays, pschema, ["game_id", "play_id", "down", "yards_to_go", "absolute_yardline"], plays_path
    )
    games: dict[str, dict] = {}
    if games_path is not None:
        gdf = pd.read_csv(games_path, dtype=str, keep_default_na=False)
        _resolve_schema(gdf, gschema, ["game_id", "week"], games_path)
        for row in gdf.to_dict("records"):
            rec = {
                k: row.get(gschema[k], "")
                for k in ("week", "home_team", "visitor_team")
            }
            games[row[gschema["game_id"]]] = rec

    def _get(row, key, default=""):
        col = pschema.get(key)
        return row.get(col, default) if col else default

    contexts: dict[tuple[str, str], PlayContext] = {}
    for row in plays.to_dict("records"):
        gid = _get(row, "game_id")
        pid = _get(row, "play_id")
        try:
            down = int(float(_get(row, "down")))
            ytg = float(_get(row, "yards_to_go"))
            yardline = float(_get(row, "absolute_yardline"))
        except ValueError:
            logger.debug("skipping play %s/%s with unparseable context", gid, pid)
            continue
        if not (1 <= down <= 4 and ytg > 0 and 0 < yardline < FIELD_LENGTH):
            logger.debug("skipping play %s/%s with invalid context", gid, pid)
            continue
        game = games.get(gid, {})
        possession = _get(row, "possession_team") or None
        home = game.get("home_team") or None
        visitor = game.get("visitor_team") or None
        offense = possession
        defense = None
        if possession and home and visitor and possession in (home, visitor):
            defense = visitor if possession == home else home
        score = None
        hs, vs = _get(row, "home_score"), _get(row, "visitor_score")
        if hs and vs and possession and home:
            try:
                diff = float(hs) - float(vs)
                score = diff if possession == home else -diff
            except ValueError:
                score = None
        quarter = _get(row, "quarter")
        contexts[(gid, pid)] = PlayContext(
            game_id=gid,
            play_id=pid,
            down=down,
            yards_to_go=ytg,
            absolute_yardline=yardline,
            week=int(float(game["week"])) if game.get("week") else None,
            offense_team=offense,
            defense_team=defense,
            quarter=int(float(quarter)) if quarter else None,
            game_clock=_get(row, "game_clock") or None,
            score_differential=score,
        )
    return contexts


# ---------------------------------------------------------------------------
# Play selection
# ---------------------------------------------------------------------------


def select_eligible_plays(
    contexts: Mapping[tuple[str, str], PlayContext] | Iterable[PlayContext],
    frames: pd.DataFrame | Iterable[TrackingFrame],
) -> tuple[list[CatchSnapshot], Counter]:
    """Select completed passes caught by a receiver outside the endzone.

    A play qualifies when it has a ``pass_outcome_caught`` event, a
    ``pass_forward`` event thrown by a quarterback, a ball position at the
    catch to identify the receiver, a catch spot outside the target
    endzone, and no missing inputs for the mandatory feature roles
    (receiver, quarterback, nearest defender). Every exclusion is tallied
    by reason in the returned counter.
    """
    if not isinstance(frames, pd.DataFrame):
        frames = pd.DataFrame(
            [f.__dict__ | {"is_ball": f.is_ball} for f in frames]
        )
    if isinstance(contexts, Mapping):
        context_map = dict(contexts)
    else:
        context_map = {(c.game_id, c.play_id): c for c in contexts}

    snapshots: list[CatchSnapshot] = []
    exclusions: Counter = Counter()
    for (gid, pid), play in frames.groupby(["game_id", "play_id"], sort=True):
        context = context_map.get((gid, pid))
        if context is None:
            exclusions["no_play_context"] += 1
            continue
        snapshot, reason = _snapshot_for_play(context, play)
        if snapshot is None:
            exclusions[reason] += 1
        else:
            snapshots.append(snapshot)
    logger.info(
        "selected %d snapshots, excluded %d plays: %s",
        len(snapshots),
        sum(exclusions.values()),
        dict(exclusions),
    )
    return snapshots, exclusions


def _snapshot_for_play(
    context: PlayContext, play: pd.DataFrame
) -> tuple[CatchSnapshot | None, str]:
    catch_rows = play[play["event"] == EVENT_CATCH]
    if catch_rows.empty:
        return None, "no_catch_event"
    catch_frame = int(catch_rows["frame_id"].min())
    throw_rows = play[play["event"] == EVENT_THROW]
    if throw_rows.empty:
        return None, "no_throw_event"
    throw_frame = int(throw_rows["frame_id"].min())

    direction = context.play_direction
    if direction is None:
        if "play_direction" not in play.columns:
            return None, "no_play_direction"
        dirs = play["play_direction"].replace("", np.nan).dropna().unique()
        if len(dirs) != 1 or dirs[0] not in ("left", "right"):
            return None, "no_play_direction"
        direction = dirs[0]
        context = replace(context, play_direction=direction)

    at_catch = play[(play["frame_id"] == catch_frame) & ~play["is_ball"]]
    at_throw = play[(play["frame_id"] == throw_frame) & ~play["is_ball"]]
    ball_catch = play[(play["frame_id"] == catch_frame) & play["is_ball"]]
    ball_throw = play[(play["frame_id"] == throw_frame) & play["is_ball"]]
    if ball_catch.empty:
        return None, "no_ball_at_catch"

    offense_side = _resolve_offense_side(context, at_catch)
    if offense_side is None:
        return None, "unresolved_offense"
    off_catch = at_catch[at_catch["team"] == offense_side]
    def_catch = at_catch[at_catch["team"] != offense_side]
    if off_catch.empty or def_catch.empty:
        return None, "missing_side"

    qbs = at_throw[(at_throw["team"] == offense_side) & (at_throw["position"] == QB_POSITION)]
    if qbs.empty:
        return None, "no_quarterback"
    if len(qbs) > 1 and not ball_throw.empty:
        bx, by = float(ball_throw.iloc[0]["x"]), float(ball_throw.iloc[0]["y"])
        d = np.hypot(qbs["x"] - bx, qbs["y"] - by)
        qbs = qbs.loc[[d.idxmin()]]
    qb_row = qbs.sort_values("player_id").iloc[0]

    bx, by = float(ball_catch.iloc[0]["x"]), float(ball_catch.iloc[0]["y"])
    candidates = off_catch[off_catch["player_id"] != qb_row["player_id"]]
    if candidates.empty:
        return None, "no_receiver_candidate"
    d_ball = np.hypot(candidates["x"] - bx, candidates["y"] - by)
    rec_row = candidates.loc[d_ball.idxmin()]

    rec_x_adj = adjust_x(float(rec_row["x"]), direction)
    if rec_x_adj <= 0:
        return None, "catch_in_endzone"

    def _order(rows: pd.DataFrame) -> tuple[TrackingFrame, ...]:
        dist = np.hypot(rows["x"] - rec_row["x"], rows["y"] - rec_row["y"])
        ordered = rows.assign(_d=dist).sort_values(["_d", "player_id"], kind="stable")
        return tuple(_frame_from_row(r) for r in ordered.drop(columns="_d").itertuples(index=False))

    defense = _order(def_catch)
    offense = _order(candidates[candidates["player_id"] != rec_row["player_id"]])
    receiver = _frame_from_row(rec_row)
    quarterback = _frame_from_row(qb_row)

    rec_frames = play[(play["player_id"] == rec_row["player_id"]) & ~play["is_ball"]]
    after = rec_frames[rec_frames["frame_id"] >= catch_frame]
    end_rows = after[after["event"].isin(END_EVENTS)]
    end_row = end_rows.iloc[0] if not end_rows.empty else after.iloc[-1]
    observed_yac = rec_x_adj - adjust_x(float(end_row["x"]), direction)

    snapshot = CatchSnapshot(
        context=context,
        catch_frame=catch_frame,
        throw_frame=throw_frame,
        receiver=receiver,
        quarterback_at_throw=quarterback,
        offense_ordered=offense,
        defense_ordered=defense,
        observed_yac=float(observed_yac),
    )
    try:
        vec = build_feature_vector(snapshot)
    except MissingRoleError:
        return None, "missing_role"
    if not np.all(np.isfinite(vec.values)):
        return None, "missing_feature"
    return snapshot, ""


def _resolve_offense_side(context: PlayContext, at_catch: pd.DataFrame) -> str | None:
    """Which tracking 'team' label is on offense at the catch frame.

    Uses the possession team abbreviation when tracking carries real
    abbreviations; for home/away labelled tracking, the side fielding the
    quarterback is taken as offense.
    """
    teams = sorted(set(at_catch["team"].dropna().unique()) - {""})
    if len(teams) != 2:
        return None
    if context.offense_team in teams:
        return context.offense_team
    qb_side = at_catch.loc[at_catch["position"] == QB_POSITION, "team"]
    if len(qb_side.unique()) == 1:
        return qb_side.iloc[0]
    return None


# ---------------------------------------------------------------------------
# Feature table
# ---------------------------------------------------------------------------

KEY_COLUMNS = (
    "game_id",
    "play_id",
    "week",
    "play_direction",
    "down",
    "yards_to_go",
    "los_x_adj",
    "catch_x_adj",
    "observed_yac",
)
AUX_COLUMNS = (
    "def1_dir_adj",
    "def1_o_adj",
    "def1_player_id",
    "def1_name",
    "def1_position",
    "def1_team",
    "offense_team",
    "defense_team",
    "quarter",
    "score_differential",
)
OPTIONAL_ROLES = ("off1", "def2")


def feature_columns(roles: Sequence[str]) -> list[str]:
    """Model feature column names for a role set, in canonical order."""
    cols: list[str] = []
    for role in roles:
        if role == "rec":
            cols.extend(RECEIVER_FEATURES)
        elif role == "qb":
            cols.extend(QB_FEATURES)
        else:
            cols.extend(f"{role}_{s}" for s in DEFENDER_FEATURE_SUFFIXES)
    return cols


def table_columns(optional_roles: Sequence[str] = OPTIONAL_ROLES) -> list[str]:
    return (
        list(KEY_COLUMNS)
        + list(YAC_FEATURES)
        + feature_columns(optional_roles)
        + list(AUX_COLUMNS)
    )


def build_feature_table(snapshots: Iterable[CatchSnapshot]) -> pd.DataFrame:
    """Build the canonical per-play feature table.

    One row per snapshot, columns: play keys and context, the twenty
    outcome-model features, optional off1/def2 blocks (NaN when the role
    is absent), and auxiliary columns (full-circle adjusted def1 angles,
    identities) needed by the ghost engine and the aggregation reports.
    """
    rows = []
    for snap in sorted(snapshots, key=lambda s: (s.context.game_id, s.context.play_id)):
        ctx = snap.context
        direction = ctx.play_direction
        vec = build_feature_vector(snap)
        row: dict = {
            "game_id": ctx.game_id,
            "play_id": ctx.play_id,
            "week": ctx.week,
            "play_direction": direction,
            "down": ctx.down,
            "yards_to_go": ctx.yards_to_go,
            "los_x_adj": ctx.los_x_adj,
            "catch_x_adj": vec.values[0],
            "observed_yac": snap.observed_yac,
        }
        row.update(vec.as_dict())
        for role in OPTIONAL_ROLES:
            cols = feature_columns([role])
            try:
                block = build_feature_vector(snap, roles=[role])
                row.update(dict(zip(cols, block.values.tolist())))
            except MissingRoleError:
                row.update({c: np.nan for c in cols})
        def1 = snap.defense_ordered[0]
        row.update(
            {
                "def1_dir_adj": adjust_angle(def1.dir, direction),
                "def1_o_adj": adjust_angle(def1.o, direction),
                "def1_player_id": def1.player_id,
                "def1_name": def1.display_name,
                "def1_position": def1.position,
                "def1_team": _abbr(ctx.defense_team, def1.team),
                "offense_team": ctx.offense_team,
                "defense_team": ctx.defense_team,
                "quarter": ctx.quarter,
                "score_differential": ctx.score_differential,
            }
        )
        rows.append(row)
    return pd.DataFrame(rows, columns=table_columns())


def _abbr(context_team: str | None, frame_team: str | None) -> str | None:
    if frame_team and frame_team not in ("home", "away"):
        return frame_team
    return context_team


def write_feature_table(table: pd.DataFrame, path: str) -> None:
    """Write the feature table; .csv or .parquet by extension."""
    path = str(path)
    if path.endswith(".parquet"):
        table.to_parquet(path, index=False)
    else:
        table.to_csv(path, index=False)


def read_feature_table(path: str) -> pd.DataFrame:
    path = str(path)
    if path.endswith(".parquet"):
        return pd.read_parquet(path)
    return pd.read_csv(
        path,
        dtype={"game_id": str, "play_id": str, "def1_player_id": str},
        # exact float parsing so a write/read cycle is bitwise lossless
        float_precision="round_trip",
    )
