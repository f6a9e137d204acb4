"""Random-forest conditional density estimation.

Fits forests whose splits are chosen to sharpen the estimated
conditional density of a univariate or bivariate response, and turns
query points into weighted-KDE densities over the training responses.
"""

from .basis import cosine_basis_1d, cosine_basis_2d, rescale_to_unit
from .forest import (
    CDEForest,
    DensityGrid,
    ForestConfig,
    cde_loss,
    cde_loss_from_densities,
    density_mean,
    density_mode,
)
from .io import ForestFormatError, export_forest_json, load_forest, save_forest
from .kde import (
    BANDWIDTH_FLOOR,
    NoSupportError,
    effective_sample_size,
    kde_1d,
    kde_2d,
    plugin_bandwidth,
)
from .tree import Tree, build_tree

__all__ = [
    "BANDWIDTH_FLOOR",
    "CDEForest",
    "DensityGrid",
    "ForestConfig",
    "ForestFormatError",
    "NoSupportError",
    "Tree",
    "build_tree",
    "cde_loss",
    "cde_loss_from_densities",
    "cosine_basis_1d",
    "cosine_basis_2d",
    "density_mean",
    "density_mode",
    "effective_sample_size",
    "export_forest_json",
    "kde_1d",
    "kde_2d",
    "load_forest",
    "plugin_bandwidth",
    "rescale_to_unit",
    "save_forest",
]
