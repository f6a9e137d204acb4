"""A single density-estimation tree over a precomputed basis matrix.

Trees are stored as flat parallel arrays (feature, threshold, children,
leaf slices into one row-index vector) so they serialize trivially and
can be built by hand in tests. Leaves record the sorted distinct
original training-row indices that reached them through the bootstrap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

#: A candidate split must beat the parent's basis score by this much;
#: otherwise the node becomes a leaf. Guards against splitting on noise
#: when all candidate features are (near-)constant.
MIN_SCORE_GAIN = 1e-10


@dataclass
class Tree:
    """Flat-array decision tree.

    Attributes:
        feature: split feature per node, -1 at leaves.
        threshold: split threshold per node (x <= threshold goes left).
        left/right: child node ids, -1 at leaves.
        leaf_start/leaf_count: slice of ``row_index`` per node; zero-length
            at internal nodes.
        row_index: concatenated distinct original training-row indices of
            all leaves.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_start: np.ndarray
    leaf_count: np.ndarray
    row_index: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Leaf node id reached by each query row."""
        x = np.asarray(x, dtype=float)
        nodes = np.zeros(len(x), dtype=np.int64)
        active = np.flatnonzero(self.feature[nodes] >= 0)
        while active.size:
            cur = nodes[active]
            f = self.feature[cur]
            go_left = x[active, f] <= self.threshold[cur]
            nodes[active] = np.where(go_left, self.left[cur], self.right[cur])
            active = active[self.feature[nodes[active]] >= 0]
        return nodes

    def leaf_rows(self, node: int) -> np.ndarray:
        """Distinct original training-row indices stored at a leaf node."""
        start = self.leaf_start[node]
        return self.row_index[start : start + self.leaf_count[node]]


def build_tree(
    x: np.ndarray,
    basis: np.ndarray,
    original_index: np.ndarray,
    rng: np.random.Generator,
    min_leaf_size: int,
    features_per_split: int,
    max_depth: int | None,
) -> Tree:
    """Grow one tree greedily on (bootstrap) rows.

    Args:
        x: features of the sampled rows, shape (n, p).
        basis: basis expansion of the sampled rows' responses, (n, J).
        original_index: original training-row id of each sampled row
            (repeats under bootstrap).
        rng: source for per-node feature subsampling.
        min_leaf_size: minimum sampled rows on each side of a split.
        features_per_split: candidate features drawn per node.
        max_depth: optional depth cap; 0 forces a single-leaf tree.

    Splits maximize the summed squared basis totals of the children,
    each scaled by its child size; that quantity is (up to a constant
    shared by all splits of the node) the negative of the density
    estimation loss of a per-node orthogonal series fit, so greedy
    maximization drives the loss down. A node becomes a leaf when no
    candidate beats the parent's own score.
    """
    x = np.asarray(x, dtype=float)
    basis = np.asarray(basis, dtype=float)
    original_index = np.asarray(original_index)
    n, p = x.shape

    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    leaf_slices: list[tuple[int, int]] = []
    row_chunks: list[np.ndarray] = []
    row_total = 0

    def new_node() -> int:
        feature.append(-1)
        threshold.append(np.nan)
        left.append(-1)
        right.append(-1)
        leaf_slices.append((0, 0))
        return len(feature) - 1

    # (node_id, row positions, depth); explicit stack keeps recursion
    # depth independent of tree depth, and LIFO order is deterministic.
    stack: list[tuple[int, np.ndarray, int]] = [(new_node(), np.arange(n), 0)]
    while stack:
        node, rows, depth = stack.pop()
        split = None
        if (max_depth is None or depth < max_depth) and rows.size >= 2 * min_leaf_size:
            split = _best_split(
                x, basis, rows, rng, min_leaf_size, features_per_split, p
            )
        if split is None:
            members = np.unique(original_index[rows])
            leaf_slices[node] = (row_total, len(members))
            row_chunks.append(members)
            row_total += len(members)
            continue
        f, t, left_rows, right_rows = split
        feature[node] = f
        threshold[node] = t
        lid, rid = new_node(), new_node()
        left[node] = lid
        right[node] = rid
        stack.append((rid, right_rows, depth + 1))
        stack.append((lid, left_rows, depth + 1))

    return Tree(
        feature=np.asarray(feature, dtype=np.int32),
        threshold=np.asarray(threshold, dtype=float),
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        leaf_start=np.asarray([s for s, _ in leaf_slices], dtype=np.int64),
        leaf_count=np.asarray([c for _, c in leaf_slices], dtype=np.int64),
        row_index=(
            np.concatenate(row_chunks)
            if row_chunks
            else np.empty(0, dtype=original_index.dtype)
        ),
    )


def _best_split(x, basis, rows, rng, min_leaf_size, features_per_split, p):
    """Best (feature, threshold, left rows, right rows) or None."""
    n_node = rows.size
    z = basis[rows]
    s_total = z.sum(axis=0)
    parent_score = float(s_total @ s_total) / n_node

    k = np.arange(min_leaf_size, n_node - min_leaf_size + 1)
    candidates = rng.choice(p, size=min(features_per_split, p), replace=False)

    best_score = parent_score + MIN_SCORE_GAIN
    best = None
    for f in candidates:
        xv = x[rows, f]
        order = np.argsort(xv, kind="stable")
        xs = xv[order]
        # boundaries where the sorted feature actually changes value
        valid = xs[k - 1] < xs[k]
        if not valid.any():
            continue
        csum = np.cumsum(z[order], axis=0)
        s_left = csum[k - 1]
        s_right = s_total[None, :] - s_left
        scores = (
            np.square(s_left).sum(axis=1) / k
            + np.square(s_right).sum(axis=1) / (n_node - k)
        )
        scores = np.where(valid, scores, -np.inf)
        j = int(np.argmax(scores))
        if scores[j] > best_score:
            best_score = float(scores[j])
            kk = int(k[j])
            lo, hi = xs[kk - 1], xs[kk]
            t = 0.5 * (lo + hi)
            if not (lo <= t < hi):  # midpoint rounded onto a boundary value
                t = lo
            best = (int(f), float(t), rows[order[:kk]], rows[order[kk:]])
    return best
