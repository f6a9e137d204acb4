"""Forest serialization: a small self-describing binary container.

Layout: magic bytes, format version, a JSON header (config, shapes,
array manifest), then the arrays in manifest order written with numpy's
own array format (no pickle anywhere). All trees are concatenated into
shared arrays with offset tables, which keeps files compact and loading
a handful of reads.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict

import numpy as np

from .forest import CDEForest, ForestConfig
from .tree import Tree

MAGIC = b"GDCDF\n"
FORMAT_VERSION = 1

_ARRAY_ORDER = (
    "responses",
    "response_lo",
    "response_hi",
    "node_offsets",
    "rowidx_offsets",
    "feature",
    "threshold",
    "left",
    "right",
    "leaf_start",
    "leaf_count",
    "row_index",
)


class ForestFormatError(ValueError):
    """The file is not a forest container this version can read."""


def save_forest(forest: CDEForest, path: str) -> None:
    """Write a fitted forest to ``path``."""
    trees = forest.trees
    node_offsets = np.zeros(len(trees) + 1, dtype=np.int64)
    rowidx_offsets = np.zeros(len(trees) + 1, dtype=np.int64)
    for i, t in enumerate(trees):
        node_offsets[i + 1] = node_offsets[i] + t.n_nodes
        rowidx_offsets[i + 1] = rowidx_offsets[i] + len(t.row_index)

    def _cat(attr, dtype):
        parts = [getattr(t, attr) for t in trees]
        return (
            np.concatenate(parts).astype(dtype)
            if parts
            else np.empty(0, dtype=dtype)
        )

    arrays = {
        "responses": np.asarray(forest.responses, dtype=float),
        "response_lo": np.asarray(forest.response_lo, dtype=float),
        "response_hi": np.asarray(forest.response_hi, dtype=float),
        "node_offsets": node_offsets,
        "rowidx_offsets": rowidx_offsets,
        "feature": _cat("feature", np.int32),
        "threshold": _cat("threshold", float),
        "left": _cat("left", np.int32),
        "right": _cat("right", np.int32),
        "leaf_start": _cat("leaf_start", np.int64),
        "leaf_count": _cat("leaf_count", np.int64),
        "row_index": _cat("row_index", np.int64),
    }
    header = {
        "config": asdict(forest.config),
        "feature_count": forest.feature_count,
        "feature_names": list(forest.feature_names) if forest.feature_names else None,
        "n_trees": len(trees),
        "arrays": list(_ARRAY_ORDER),
    }
    payload = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(struct.pack("<Q", len(payload)))
        fh.write(payload)
        for name in _ARRAY_ORDER:
            np.lib.format.write_array(fh, arrays[name], allow_pickle=False)


def load_forest(path: str) -> CDEForest:
    """Read a forest written by :func:`save_forest`."""
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise ForestFormatError(f"{path}: not a forest file")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != FORMAT_VERSION:
            raise ForestFormatError(
                f"{path}: unsupported forest format version {version}"
            )
        (hlen,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        arrays = {}
        for name in header["arrays"]:
            arrays[name] = np.lib.format.read_array(fh, allow_pickle=False)

    node_off = arrays["node_offsets"]
    row_off = arrays["rowidx_offsets"]
    trees = []
    for i in range(header["n_trees"]):
        ns, ne = int(node_off[i]), int(node_off[i + 1])
        rs, re = int(row_off[i]), int(row_off[i + 1])
        # leaf_start was stored tree-local already; row slices are per tree
        trees.append(
            Tree(
                feature=arrays["feature"][ns:ne],
                threshold=arrays["threshold"][ns:ne],
                left=arrays["left"][ns:ne],
                right=arrays["right"][ns:ne],
                leaf_start=arrays["leaf_start"][ns:ne],
                leaf_count=arrays["leaf_count"][ns:ne],
                row_index=arrays["row_index"][rs:re],
            )
        )
    names = header.get("feature_names")
    return CDEForest(
        config=ForestConfig(**header["config"]),
        responses=arrays["responses"],
        response_lo=arrays["response_lo"],
        response_hi=arrays["response_hi"],
        trees=trees,
        feature_count=int(header["feature_count"]),
        feature_names=tuple(names) if names else None,
    )


def export_forest_json(forest: CDEForest, path: str) -> None:
    """Write a human-readable summary of a forest for inspection.

    Holds the config and per-tree shape statistics, not the full arrays;
    the binary container is the round-trippable format.
    """

    def tree_stats(t: Tree) -> dict:
        leaves = t.feature < 0
        return {
            "n_nodes": int(t.n_nodes),
            "n_leaves": int(leaves.sum()),
            "min_leaf_rows": int(t.leaf_count[leaves].min()),
            "max_leaf_rows": int(t.leaf_count[leaves].max()),
        }

    summary = {
        "config": asdict(forest.config),
        "feature_count": forest.feature_count,
        "feature_names": list(forest.feature_names) if forest.feature_names else None,
        "n_train": forest.n_train,
        "response_dim": forest.response_dim,
        "response_lo": np.asarray(forest.response_lo).tolist(),
        "response_hi": np.asarray(forest.response_hi).tolist(),
        "trees": [tree_stats(t) for t in forest.trees],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
