import numpy as np

from bleprox.trees import RegressionTree, fit_tree


def brute_force_depth1_sse(x, y):
    """Exhaustive search over every (feature, cut) for the best depth-1 SSE."""
    n, d = x.shape
    best = np.sum((y - y.mean()) ** 2)
    for j in range(d):
        order = np.argsort(x[:, j], kind="stable")
        xs, ys = x[order, j], y[order]
        for i in range(n - 1):
            if xs[i] >= xs[i + 1]:
                continue
            left, right = ys[: i + 1], ys[i + 1 :]
            sse = np.sum((left - left.mean()) ** 2) + np.sum((right - right.mean()) ** 2)
            best = min(best, sse)
    return best


def test_depth1_split_is_globally_optimal():
    rng = np.random.default_rng(2)
    for _ in range(25):
        n = int(rng.integers(4, 40))
        x = rng.normal(size=(n, 3))
        y = rng.normal(size=n) + (x[:, 0] > 0.3)
        tree, pred = fit_tree(x, y, max_depth=1, min_leaf=1)
        sse = float(np.sum((y - pred) ** 2))
        assert sse <= brute_force_depth1_sse(x, y) + 1e-9


def test_leaf_values_are_node_means():
    x = np.array([[0.0], [1.0], [2.0], [3.0]])
    y = np.array([1.0, 3.0, 10.0, 14.0])
    tree, pred = fit_tree(x, y, max_depth=1, min_leaf=1)
    # best cut must isolate {1,3} from {10,14}
    assert np.allclose(sorted(set(pred)), [2.0, 12.0])


def test_constant_target_yields_single_leaf():
    x = np.arange(12, dtype=np.float64).reshape(-1, 1)
    y = np.full(12, 7.5)
    tree, pred = fit_tree(x, y, max_depth=3, min_leaf=1)
    assert tree.n_nodes == 1
    assert np.all(pred == 7.5)


def test_depth_zero_is_global_mean():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(30, 2))
    y = rng.normal(size=30)
    tree, pred = fit_tree(x, y, max_depth=0, min_leaf=1)
    assert tree.n_nodes == 1
    assert np.allclose(pred, y.mean())


def test_training_predictions_match_apply():
    rng = np.random.default_rng(9)
    x = rng.normal(size=(200, 4))
    y = rng.normal(size=200) + 3.0 * np.sin(x[:, 1])
    tree, pred = fit_tree(x, y, max_depth=3, min_leaf=2)
    assert np.array_equal(pred, tree.predict(x))


def test_depth_limit_respected():
    rng = np.random.default_rng(13)
    x = rng.normal(size=(300, 3))
    y = rng.normal(size=300)
    tree, _ = fit_tree(x, y, max_depth=2, min_leaf=1)

    def depth(node, level):
        if tree.feature[node] < 0:
            return level
        return max(depth(tree.left[node], level + 1), depth(tree.right[node], level + 1))

    assert depth(0, 0) <= 2


def test_determinism():
    rng = np.random.default_rng(21)
    x = rng.normal(size=(100, 3))
    y = rng.normal(size=100)
    t1, p1 = fit_tree(x, y, max_depth=3, min_leaf=2)
    t2, p2 = fit_tree(x, y, max_depth=3, min_leaf=2)
    assert np.array_equal(p1, p2)
    assert t1.to_node_list() == t2.to_node_list()


def test_preorder_round_trip():
    rng = np.random.default_rng(27)
    x = rng.normal(size=(150, 4))
    y = rng.normal(size=150) + (x[:, 3] < -0.5)
    tree, _ = fit_tree(x, y, max_depth=3, min_leaf=2)
    clone = RegressionTree.from_node_list(tree.to_node_list())
    queries = rng.normal(size=(80, 4))
    assert np.array_equal(tree.predict(queries), clone.predict(queries))
