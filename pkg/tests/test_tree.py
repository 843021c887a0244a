"""Weak learner: greedy tree induction, hard-vote leaves, margin estimation."""

import math

import numpy as np
import pytest

from fairboost import (
    FAIL,
    HBS,
    LBS,
    Attribute,
    AttributeSchema,
    Dataset,
    DecisionTreeClassifier,
    TreeConfig,
    estimate_wla,
    train_tree,
)

from conftest import LN2, table_classifier, xa_schema

CFG = TreeConfig()


def two_feature_schema(n1=4, n2=4):
    """Two ordinal features plus the sensitive column the learner must ignore."""
    return AttributeSchema(
        attributes=(
            Attribute("f1", n1, bin_edges=tuple(float(i) for i in range(n1 + 1))),
            Attribute("f2", n2, bin_edges=tuple(float(i) for i in range(n2 + 1))),
            Attribute("a", 2),
        ),
        sensitive_index=2,
    )


def with_a(feature_rows):
    rows = np.asarray(feature_rows, dtype=np.int64)
    return np.column_stack([rows, np.zeros(len(rows), dtype=np.int64)])


def cell_scores(tree, schema):
    return tree.scores(schema.x_subschema().all_cells())


def walk(node, x_row):
    while not node.is_leaf:
        col = np.array([x_row[node.attr]])
        node = node.left if bool(node.goes_left(col)[0]) else node.right
    return node


# -- basic induction ----------------------------------------------------


def test_separable_one_feature():
    s = two_feature_schema(n1=4, n2=1)
    p = Dataset(s, with_a([[c, 0] for c in (0, 1) for _ in range(10)]))
    q = Dataset(s, with_a([[c, 0] for c in (2, 3) for _ in range(10)]))
    tree = train_tree(p, q, CFG)
    assert tree.depth() == 1
    scores = cell_scores(tree, s)
    assert np.allclose(scores, [LN2, LN2, -LN2, -LN2])


def test_identical_sides_yield_abstaining_tree():
    s = two_feature_schema()
    rows = with_a([[i % 4, (i // 4) % 4] for i in range(32)])
    tree = train_tree(Dataset(s, rows), Dataset(s, rows), CFG)
    assert tree.depth() == 0
    assert np.all(cell_scores(tree, s) == 0.0)
    est = estimate_wla(tree, Dataset(s, rows), Dataset(s, rows))
    assert est.gamma_p == 0.0
    assert est.gamma_q == 0.0
    assert est.regime == FAIL


def test_oversampled_negatives_do_not_bias_leaves():
    # Q drawn as two copies of P must look identical after balancing:
    # every region ties exactly, so the tree abstains everywhere
    s = two_feature_schema()
    base = [[i % 4, (i * 7 + 1) % 4] for i in range(24)]
    p = Dataset(s, with_a(base))
    q = Dataset(s, with_a(base + base))
    tree = train_tree(p, q, CFG)
    assert tree.depth() == 0
    assert np.all(cell_scores(tree, s) == 0.0)


def test_rectangle_recovered_at_depth_two():
    s = two_feature_schema()
    p_cells = [(i, j) for i in (0, 1) for j in (0, 1)]
    q_cells = [(i, j) for i in range(4) for j in range(4) if (i, j) not in p_cells]
    p = Dataset(s, with_a([c for c in p_cells for _ in range(8)]))
    q = Dataset(s, with_a([c for c in q_cells for _ in range(8)]))
    tree = train_tree(p, q, CFG)
    assert tree.depth() == 2
    scores = tree.scores(s.x_subschema().all_cells())
    want = np.array([LN2 if (i, j) in p_cells else -LN2 for i in range(4) for j in range(4)])
    assert np.allclose(scores, want)


def test_min_leaf_blocks_tiny_splits():
    s = two_feature_schema(n1=2, n2=1)
    p = Dataset(s, with_a([[0, 0]] * 3))
    q = Dataset(s, with_a([[1, 0]] * 3))
    tree = train_tree(p, q, TreeConfig(min_leaf_count=5))
    assert tree.depth() == 0
    assert np.all(cell_scores(tree, s) == 0.0)  # tie at the root abstains


def test_max_depth_one_caps_growth():
    s = two_feature_schema()
    p_cells = [(i, j) for i in (0, 1) for j in (0, 1)]
    q_cells = [(i, j) for i in range(4) for j in range(4) if (i, j) not in p_cells]
    p = Dataset(s, with_a([c for c in p_cells for _ in range(8)]))
    q = Dataset(s, with_a([c for c in q_cells for _ in range(8)]))
    tree = train_tree(p, q, TreeConfig(max_depth=1))
    assert tree.depth() == 1
    scores = cell_scores(tree, s).reshape(4, 4)
    assert np.all(scores[2:, :] == -LN2)  # pure Q half
    assert np.all(scores[:2, :] == LN2)  # majority-P half votes P everywhere


def test_training_is_deterministic(rng):
    s = two_feature_schema()
    rows_p = with_a(rng.integers(0, 4, size=(60, 2)))
    rows_q = with_a(rng.integers(0, 4, size=(90, 2)))
    p, q = Dataset(s, rows_p), Dataset(s, rows_q)
    t1 = train_tree(p, q, CFG, seed=0)
    t2 = train_tree(p, q, CFG, seed=12345)
    assert t1.to_dict() == t2.to_dict()


def test_ties_resolve_to_lowest_attribute_and_value():
    s = two_feature_schema(n1=3, n2=3)
    # f2 mirrors f1 exactly, and codes skip 1, so splits le-0 and le-1
    # tie on both features; the winner must be attr 0 at value 0
    p = Dataset(s, with_a([[0, 0]] * 10))
    q = Dataset(s, with_a([[2, 2]] * 10))
    tree = train_tree(p, q, CFG)
    assert tree.root.attr == 0
    assert tree.root.value == 0


def test_scores_are_saturated_votes(rng):
    s = two_feature_schema()
    p = Dataset(s, with_a(rng.integers(0, 4, size=(120, 2))))
    q = Dataset(s, with_a(rng.integers(0, 4, size=(180, 2))))
    tree = train_tree(p, q, CFG)
    scores = cell_scores(tree, s)
    for v in scores:
        assert min(abs(v - LN2), abs(v + LN2), abs(v)) < 1e-15


def test_deeper_partitions_never_raise_impurity(rng):
    s = two_feature_schema()
    rows_p = with_a(rng.integers(0, 4, size=(80, 2)))
    rows_q = with_a(np.minimum(rng.integers(0, 4, size=(80, 2)) + rng.integers(0, 2, size=(80, 2)), 3))
    p, q = Dataset(s, rows_p), Dataset(s, rows_q)

    X = np.vstack([p.x_rows(), q.x_rows()])
    is_p = np.zeros(len(X), dtype=bool)
    is_p[: len(p)] = True

    def partition_impurity(tree):
        leaves = {}
        for i, row in enumerate(X):
            leaves.setdefault(id(walk(tree.root, row)), []).append(i)
        total = 0.0
        for idx in leaves.values():
            wp = float(is_p[idx].sum())
            wq = float(len(idx) - wp)
            son = wp + wq
            total += son - (wp * wp + wq * wq) / son
        return total

    prev = None
    for depth in (1, 2, 3, 4):
        cur = partition_impurity(train_tree(p, q, TreeConfig(max_depth=depth)))
        if prev is not None:
            assert cur <= prev + 1e-9
        prev = cur


def test_sensitive_attribute_never_splits(rng):
    s = two_feature_schema()
    # group membership perfectly separates the sides, features are noise
    rows_p = np.column_stack([rng.integers(0, 4, size=(60, 2)), np.zeros(60, dtype=np.int64)])
    rows_q = np.column_stack([rng.integers(0, 4, size=(60, 2)), np.ones(60, dtype=np.int64)])
    tree = train_tree(Dataset(s, rows_p), Dataset(s, rows_q), CFG)
    assert "a" not in tree.split_names()
    assert tree.split_names() <= {"f1", "f2"}


# -- config and input validation ---------------------------------------


def test_tree_config_validation():
    with pytest.raises(ValueError, match="max_depth must be >= 1"):
        TreeConfig(max_depth=0)
    with pytest.raises(ValueError, match="min_leaf_count must be >= 1"):
        TreeConfig(min_leaf_count=0)
    with pytest.raises(ValueError, match="c_bound must be > 0"):
        TreeConfig(c_bound=0.0)
    with pytest.raises(ValueError, match="leaf_smoothing must be >= 0"):
        TreeConfig(leaf_smoothing=-0.5)


def test_train_tree_input_validation():
    s = two_feature_schema()
    rows = with_a([[0, 0]] * 10)
    with pytest.raises(ValueError, match="empty sample side"):
        train_tree(Dataset(s, np.empty((0, 3))), Dataset(s, rows), CFG)
    with pytest.raises(ValueError, match="empty sample side"):
        train_tree(Dataset(s, rows), Dataset(s, rows, np.zeros(10)), CFG)
    other = two_feature_schema(n1=3)
    with pytest.raises(ValueError, match="schema mismatch"):
        train_tree(Dataset(s, rows), Dataset(other, with_a([[0, 0]] * 10)), CFG)


def test_tree_serialization_roundtrip(rng):
    s = two_feature_schema()
    p = Dataset(s, with_a(rng.integers(0, 4, size=(80, 2))))
    q = Dataset(s, with_a(np.minimum(rng.integers(0, 4, size=(80, 2)) + 1, 3)))
    tree = train_tree(p, q, CFG)
    back = DecisionTreeClassifier.from_dict(tree.to_dict(), s.x_subschema())
    cells = s.x_subschema().all_cells()
    assert np.array_equal(back.scores(cells), tree.scores(cells))
    assert back.to_dict() == tree.to_dict()


# -- margin estimation --------------------------------------------------


def test_wla_perfect_separation():
    s = xa_schema(nx=2)
    clf = table_classifier(s, [LN2, -LN2])
    p = Dataset(s, [[0, 0]] * 5)
    q = Dataset(s, [[1, 0]] * 5)
    est = estimate_wla(clf, p, q)
    assert est.gamma_p == pytest.approx(1.0, abs=1e-12)
    assert est.gamma_q == pytest.approx(1.0, abs=1e-12)
    assert est.regime == HBS


def test_wla_zero_classifier_fails():
    s = xa_schema(nx=2)
    clf = table_classifier(s, [0.0, 0.0])
    p = Dataset(s, [[0, 0]] * 5)
    q = Dataset(s, [[1, 0]] * 5)
    assert estimate_wla(clf, p, q).regime == FAIL


def test_wla_low_regime_margin():
    s = xa_schema(nx=2)
    clf = table_classifier(s, [LN2, -LN2])
    p = Dataset(s, [[0, 0]] * 5)
    # model mass 0.6 on the -C cell, 0.4 on the +C cell: gamma_q = 0.2
    q = Dataset(s, [[0, 0], [1, 0]], weights=[0.4, 0.6])
    est = estimate_wla(clf, p, q)
    assert est.gamma_p == pytest.approx(1.0, abs=1e-12)
    assert est.gamma_q == pytest.approx(0.2, abs=1e-12)
    assert est.regime == LBS


def test_wla_regime_boundary_is_high():
    s = xa_schema(nx=2)
    clf = table_classifier(s, [1.0, -1.0], c_bound=1.0)
    p = Dataset(s, [[0, 0]] * 3)
    q = Dataset(s, [[0, 0], [1, 0]], weights=[1.0, 2.0])  # gamma_q = 1/3
    est = estimate_wla(clf, p, q)
    assert est.gamma_q == pytest.approx(1.0 / 3.0, abs=1e-15)
    assert est.regime == HBS


def test_wla_negative_p_margin_fails():
    s = xa_schema(nx=2)
    clf = table_classifier(s, [-LN2, LN2])
    p = Dataset(s, [[0, 0]] * 5)
    q = Dataset(s, [[1, 0]] * 5)
    assert estimate_wla(clf, p, q).regime == FAIL


def test_wla_empty_side_rejected():
    s = xa_schema(nx=2)
    clf = table_classifier(s, [LN2, -LN2])
    p = Dataset(s, [[0, 0]] * 5)
    with pytest.raises(ValueError, match="empty sample side"):
        estimate_wla(clf, p, Dataset(s, np.empty((0, 2))))
