"""Nearest-defender positioning value for completed NFL passes.

Pipeline: ingest tracking data at the moment of catch, fit conditional
density forests for the yards-after-catch outcome and for where a
typical nearest defender stands, convert densities into expected play
value with a down-and-distance utility, and score the real defender
against a field of counterfactual ghosts.
"""

from .epv import (
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
from .ghost import (
    GhostConfig,
    PlayAtCatch,
    PlayEvaluation,
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
    pooled_percentile,
    trajectory_weights,
)
from .harness import (
    CvReport,
    PlayerSummary,
    TeamSummary,
    aggregate_players,
    aggregate_teams,
    evaluations_to_frame,
    lowo_cv,
    week_sweep,
)
from .rfcde import (
    CDEForest,
    DensityGrid,
    ForestConfig,
    NoSupportError,
    cde_loss,
    kde_1d,
    kde_2d,
    load_forest,
    save_forest,
)
from .synth import SynthConfig, SynthDataset, generate, write_tracking_files
from .tracking import (
    CatchSnapshot,
    FeatureVector,
    GHOST_FEATURES,
    PlayContext,
    TrackingFrame,
    YAC_FEATURES,
    build_feature_table,
    build_feature_vector,
    load_play_contexts,
    read_feature_table,
    read_tracking,
    select_eligible_plays,
    write_feature_table,
)
from .utility import (
    ExpectedPointsModel,
    ParametricExpectedPoints,
    PlaySituation,
    TableExpectedPoints,
    make_expected_points,
)

__version__ = "0.1.0"

__all__ = [
    "CDEForest",
    "CatchSnapshot",
    "CvReport",
    "DensityGrid",
    "ExpectedPointsModel",
    "FeatureVector",
    "ForestConfig",
    "GHOST_FEATURES",
    "GhostConfig",
    "NoSupportError",
    "ParametricExpectedPoints",
    "PlayAtCatch",
    "PlayContext",
    "PlayEvaluation",
    "PlayEvaluationError",
    "PlaySituation",
    "PlayerSummary",
    "SynthConfig",
    "SynthDataset",
    "TableExpectedPoints",
    "TeamSummary",
    "TrackingFrame",
    "TrajectoryPool",
    "YAC_FEATURES",
    "YacGrid",
    "aggregate_players",
    "aggregate_teams",
    "build_feature_table",
    "build_feature_vector",
    "build_yac_grid",
    "cde_loss",
    "clamp_training_yac",
    "epv_at_catch",
    "epv_batch",
    "epv_for_features",
    "epv_from_density",
    "evaluate_at_locations",
    "evaluate_play",
    "evaluations_to_frame",
    "expected_delta_from_epvs",
    "generate",
    "ghost_epv",
    "ghost_feature_rows",
    "kde_1d",
    "kde_2d",
    "load_forest",
    "load_play_contexts",
    "location_distribution",
    "location_lattice",
    "lowo_cv",
    "make_expected_points",
    "observed_trajectory_delta",
    "play_utilities",
    "pooled_percentile",
    "read_feature_table",
    "read_tracking",
    "save_forest",
    "select_eligible_plays",
    "trajectory_weights",
    "week_sweep",
    "write_feature_table",
    "write_tracking_files",
    "yac_grid",
]
