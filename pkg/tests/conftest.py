import pytest

from ghostdef import (
    CDEForest,
    ForestConfig,
    GHOST_FEATURES,
    SynthConfig,
    YAC_FEATURES,
    clamp_training_yac,
    generate,
    make_expected_points,
)


@pytest.fixture(scope="session")
def dataset():
    """Three synthetic weeks; big enough for forests and week splits."""
    return generate(SynthConfig(n_plays=72, weeks=(1, 2, 3), seed=11))


@pytest.fixture(scope="session")
def table(dataset):
    return dataset.table


@pytest.fixture(scope="session")
def yac_forest(table):
    x = table[list(YAC_FEATURES)].to_numpy(dtype=float)
    y, _ = clamp_training_yac(
        table["observed_yac"].to_numpy(dtype=float),
        table["catch_x_adj"].to_numpy(dtype=float),
    )
    return CDEForest.fit(
        x,
        y,
        ForestConfig(n_trees=24, min_leaf_size=5, seed=5),
        feature_names=YAC_FEATURES,
    )


@pytest.fixture(scope="session")
def ghost_forest(table):
    x = table[list(GHOST_FEATURES)].to_numpy(dtype=float)
    y = table[["def1_x_adj", "def1_y_adj"]].to_numpy(dtype=float)
    return CDEForest.fit(
        x,
        y,
        ForestConfig(n_trees=24, min_leaf_size=5, seed=6),
        feature_names=GHOST_FEATURES,
    )


@pytest.fixture(scope="session")
def ep_model():
    return make_expected_points()
