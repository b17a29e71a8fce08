"""Depth-limited regression trees with exact greedy variance-reduction splits.

Trees are stored as flat preorder arrays so they can be evaluated by the
kernel backends and serialized as plain node lists. Fitting is fully
deterministic: features are scanned in index order, candidate thresholds in
ascending value order, and ties keep the first candidate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels


@dataclass
class RegressionTree:
    feature: np.ndarray    # int32, -1 marks a leaf
    threshold: np.ndarray  # float64, valid at internal nodes
    left: np.ndarray       # int32 child ids
    right: np.ndarray
    value: np.ndarray      # float64, valid at leaves

    @property
    def n_nodes(self) -> int:
        return int(self.feature.shape[0])

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.ascontiguousarray(x, dtype=np.float64)
        return kernels.apply_tree(self.feature, self.threshold, self.left, self.right, self.value, x)

    def to_node_list(self) -> list[list[float]]:
        """Preorder node list [feature, threshold, leaf_value]; feature -1 = leaf.

        Internal nodes always have two children, so preorder alone
        reconstructs the shape.
        """
        out = []
        for i in range(self.n_nodes):
            f = int(self.feature[i])
            if f < 0:
                out.append([-1, 0.0, float(self.value[i])])
            else:
                out.append([f, float(self.threshold[i]), 0.0])
        return out

    @classmethod
    def from_node_list(cls, nodes: list[list[float]]) -> "RegressionTree":
        n = len(nodes)
        feature = np.empty(n, dtype=np.int32)
        threshold = np.zeros(n, dtype=np.float64)
        left = np.full(n, -1, dtype=np.int32)
        right = np.full(n, -1, dtype=np.int32)
        value = np.zeros(n, dtype=np.float64)

        pos = 0

        def read() -> int:
            nonlocal pos
            i = pos
            pos += 1
            f, thr, val = nodes[i]
            feature[i] = int(f)
            if int(f) < 0:
                value[i] = float(val)
            else:
                threshold[i] = float(thr)
                left[i] = read()
                right[i] = read()
            return i

        read()
        if pos != n:
            raise ValueError("malformed preorder node list")
        return cls(feature, threshold, left, right, value)


def fit_tree(x: np.ndarray, y: np.ndarray, max_depth: int, min_leaf: int) -> tuple[RegressionTree, np.ndarray]:
    """Fit one tree to (x, y); returns it plus its predictions on x.

    The training predictions come from the partition built during fitting,
    which agrees exactly with `predict` (thresholds are guarded so the
    midpoint never rounds onto the right-hand value).
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n, n_features = x.shape

    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []
    train_pred = np.empty(n, dtype=np.float64)

    def new_node() -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        return len(feature) - 1

    def build(indices: np.ndarray, depth: int) -> int:
        node = new_node()
        y_node = y[indices]
        mean = float(np.sum(y_node) / y_node.size)

        best = None
        if depth < max_depth and indices.size >= 2 * min_leaf:
            total = float(np.sum(y_node))
            parent_score = total * total / indices.size
            best_score = -np.inf
            for j in range(n_features):
                col = x[indices, j]
                order = np.argsort(col, kind="stable")
                score, n_left, thr = kernels.best_split_scan(
                    np.ascontiguousarray(col[order]),
                    np.ascontiguousarray(y_node[order]),
                    min_leaf,
                )
                if score > best_score:
                    best_score = score
                    best = (j, n_left, thr, order)
            if best is not None and not best_score > parent_score:
                best = None  # no split strictly improves the node

        if best is None:
            value[node] = mean
            train_pred[indices] = mean
            return node

        j, n_left, thr, order = best
        feature[node] = j
        threshold[node] = thr
        # Children get ascending index order so later stable argsorts are
        # independent of which feature was split here.
        left[node] = build(np.sort(indices[order[:n_left]]), depth + 1)
        right[node] = build(np.sort(indices[order[n_left:]]), depth + 1)
        return node

    build(np.arange(n, dtype=np.int64), 0)
    tree = RegressionTree(
        np.asarray(feature, dtype=np.int32),
        np.asarray(threshold, dtype=np.float64),
        np.asarray(left, dtype=np.int32),
        np.asarray(right, dtype=np.int32),
        np.asarray(value, dtype=np.float64),
    )
    return tree, train_pred
