"""Decision-tree weak learner producing a bounded score over the feature cells.

The trainer solves a two-class problem (rows of P against rows drawn from the
current model) by greedy top-down induction on weighted Gini impurity.  The
two sides are rescaled to equal total mass first, so an oversampled negative
pool steers variance down without biasing every leaf toward the model class.
Ordinal attributes (those carrying bin edges) get threshold splits on the bin
index; the rest get one-vs-rest category splits.  Leaves cast a full-strength
vote at the score bound:

    v = +C where the P mass leads, -C where it trails,
    v = 0 where |w_P - w_Q| <= leaf_smoothing (too close to call)

Saturated votes spend the whole budget the bound C allows per round, which
matters because the leveraging coefficients multiplying the score are small;
a proportional leaf value would shrink exactly when the boosting stack needs
its last few rounds to keep moving.  The abstention margin keeps leaves
quiet where the class masses differ by less than `leaf_smoothing` units of
(balanced) sample mass, so indistinguishable sides yield a zero tree rather
than sign noise.  Induction is
deterministic: candidate splits are scanned in ascending attribute order and
ascending split value, and only a strictly better Gini gain displaces the
incumbent, so ties resolve to the lowest attribute index, then the lowest
split value.  The sensitive attribute is never part of the feature set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .schema import AttributeSchema, Dataset

_GAIN_TOL = 1e-12

HBS = "HBS"
LBS = "LBS"
FAIL = "FAIL"


@dataclass(frozen=True)
class TreeConfig:
    max_depth: int = 8
    min_leaf_count: int = 5
    c_bound: float = math.log(2.0)
    leaf_smoothing: float = 1.0

    def __post_init__(self) -> None:
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.min_leaf_count < 1:
            raise ValueError("min_leaf_count must be >= 1")
        if self.c_bound <= 0:
            raise ValueError("c_bound must be > 0")
        if self.leaf_smoothing < 0:
            raise ValueError("leaf_smoothing must be >= 0")


class Node:
    """One tree node; either a split (attr/op/value) or a leaf value."""

    __slots__ = ("attr", "name", "op", "value", "left", "right", "leaf")

    def __init__(self, attr=None, name=None, op=None, value=None, left=None, right=None, leaf=None):
        self.attr = attr
        self.name = name
        self.op = op
        self.value = value
        self.left = left
        self.right = right
        self.leaf = leaf

    @property
    def is_leaf(self) -> bool:
        return self.leaf is not None

    def goes_left(self, col: np.ndarray) -> np.ndarray:
        if self.op == "le":
            return col <= self.value
        return col == self.value


@dataclass(frozen=True, eq=False)
class DecisionTreeClassifier:
    """A fitted tree scoring feature rows into [-C, C]."""

    root: Node
    c_bound: float

    def scores(self, x_rows: np.ndarray) -> np.ndarray:
        x_rows = np.asarray(x_rows, dtype=np.int64)
        out = np.empty(len(x_rows), dtype=np.float64)
        stack = [(self.root, np.arange(len(x_rows)))]
        while stack:
            node, idx = stack.pop()
            if node.is_leaf:
                out[idx] = node.leaf
                continue
            left = node.goes_left(x_rows[idx, node.attr])
            stack.append((node.left, idx[left]))
            stack.append((node.right, idx[~left]))
        return out

    def depth(self) -> int:
        def walk(node):
            if node.is_leaf:
                return 0
            return 1 + max(walk(node.left), walk(node.right))

        return walk(self.root)

    def split_names(self) -> set:
        """Every attribute name used by some split (feature-hygiene checks)."""
        names = set()
        stack = [self.root]
        while stack:
            node = stack.pop()
            if not node.is_leaf:
                names.add(node.name)
                stack.extend([node.left, node.right])
        return names

    def leaf_values(self) -> list:
        vals = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            if node.is_leaf:
                vals.append(node.leaf)
            else:
                stack.extend([node.left, node.right])
        return vals

    def to_dict(self) -> dict:
        def encode(node):
            if node.is_leaf:
                return {"leaf": float(node.leaf)}
            return {
                "attr": node.name,
                "split": {"op": node.op, "value": int(node.value)},
                "left": encode(node.left),
                "right": encode(node.right),
            }

        return {"type": "tree", "c_bound": float(self.c_bound), "root": encode(self.root)}

    @staticmethod
    def from_dict(d: dict, x_schema: AttributeSchema) -> "DecisionTreeClassifier":
        def decode(obj):
            if "leaf" in obj:
                return Node(leaf=float(obj["leaf"]))
            attr = x_schema.index_of(obj["attr"])
            split = obj["split"]
            return Node(
                attr=attr,
                name=obj["attr"],
                op=split["op"],
                value=int(split["value"]),
                left=decode(obj["left"]),
                right=decode(obj["right"]),
            )

        return DecisionTreeClassifier(root=decode(d["root"]), c_bound=float(d["c_bound"]))


def _gini_terms(wp, wq):
    """Weighted Gini impurity contribution s * (1 - (wp/s)^2 - (wq/s)^2)."""
    s = wp + wq
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(s > 0, s - (wp * wp + wq * wq) / np.where(s > 0, s, 1.0), 0.0)
    return out


def _best_split_for_column(col, is_p, w, counts_card, ordinal, min_leaf):
    """(gain, split_value) of the best valid split on one column, or None.

    Works on per-value aggregates so a column costs O(n + cardinality):
    threshold sweeps use prefix sums of the value-indexed class weights,
    one-vs-rest uses them directly.
    """
    wp_by = np.bincount(col, weights=w * is_p, minlength=counts_card)
    wq_by = np.bincount(col, weights=w * (~is_p), minlength=counts_card)
    n_by = np.bincount(col, minlength=counts_card)
    wp_tot, wq_tot, n_tot = wp_by.sum(), wq_by.sum(), n_by.sum()
    parent = _gini_terms(np.array([wp_tot]), np.array([wq_tot]))[0]

    if ordinal:
        lp = np.cumsum(wp_by)[:-1]
        lq = np.cumsum(wq_by)[:-1]
        ln = np.cumsum(n_by)[:-1]
        values = np.arange(counts_card - 1)
    else:
        lp, lq, ln = wp_by, wq_by, n_by
        values = np.arange(counts_card)
    rp, rq, rn = wp_tot - lp, wq_tot - lq, n_tot - ln
    valid = (ln >= min_leaf) & (rn >= min_leaf)
    if not valid.any():
        return None
    gains = parent - (_gini_terms(lp, lq) + _gini_terms(rp, rq))
    best = None
    for v, g, ok in zip(values, gains, valid):
        if ok and (best is None or g > best[0]):
            best = (float(g), int(v))
    return best


def train_tree(p_samples: Dataset, q_samples: Dataset, cfg: TreeConfig, seed: int = 0) -> DecisionTreeClassifier:
    """Fit the P-vs-Q tree.  `seed` is accepted for interface stability; the
    induction itself is deterministic through its tie-breaking rules."""
    if len(p_samples) == 0 or len(q_samples) == 0:
        raise ValueError("empty sample side")
    x_schema = p_samples.schema.x_subschema()
    if q_samples.schema.x_subschema() != x_schema:
        raise ValueError("schema mismatch")

    X = np.vstack([p_samples.x_rows(), q_samples.x_rows()])
    is_p = np.zeros(len(X), dtype=bool)
    is_p[: len(p_samples)] = True
    w = np.concatenate([p_samples.weights, q_samples.weights]).astype(np.float64)
    total_p = float(w[is_p].sum())
    total_q = float(w[~is_p].sum())
    if total_p <= 0 or total_q <= 0:
        raise ValueError("empty sample side")
    # equalize class masses; keeps the count scale so min_leaf/smoothing stay meaningful
    target = 0.5 * (total_p + total_q)
    w[is_p] *= target / total_p
    w[~is_p] *= target / total_q
    cards = [a.cardinality for a in x_schema.attributes]
    ordinal = [a.is_ordinal for a in x_schema.attributes]
    C, smooth = cfg.c_bound, cfg.leaf_smoothing

    def leaf(idx):
        wp = float(w[idx][is_p[idx]].sum())
        wq = float(w[idx][~is_p[idx]].sum())
        if abs(wp - wq) <= smooth:
            return Node(leaf=0.0)
        return Node(leaf=C if wp > wq else -C)

    def grow(idx, depth):
        if depth >= cfg.max_depth or len(idx) < 2 * cfg.min_leaf_count:
            return leaf(idx)
        best = None  # (gain, attr, value, op)
        for f in range(X.shape[1]):
            if cards[f] < 2:
                continue
            found = _best_split_for_column(
                X[idx, f], is_p[idx], w[idx], cards[f], ordinal[f], cfg.min_leaf_count
            )
            if found is not None and (best is None or found[0] > best[0]):
                best = (found[0], f, found[1], "le" if ordinal[f] else "eq")
        if best is None or best[0] <= _GAIN_TOL:
            return leaf(idx)
        _, f, value, op = best
        col = X[idx, f]
        mask = (col <= value) if op == "le" else (col == value)
        node = Node(attr=f, name=x_schema.attributes[f].name, op=op, value=value)
        node.left = grow(idx[mask], depth + 1)
        node.right = grow(idx[~mask], depth + 1)
        return node

    root = grow(np.arange(len(X)), 0)
    return DecisionTreeClassifier(root=root, c_bound=C)


@dataclass(frozen=True)
class WlaEstimate:
    """Normalized margins gamma_p = E_P[c]/C and gamma_q = E_Q[-c]/C.

    The regime labels come from the KL-drop analysis: the model-side margin
    decides between the high (gamma_q >= 1/3) and low (0 < gamma_q < 1/3)
    boosting regimes, and any nonpositive margin is a weak-learning failure.
    """

    gamma_p: float
    gamma_q: float
    regime: str


def estimate_wla(classifier, p_samples: Dataset, q_samples: Dataset) -> WlaEstimate:
    if len(p_samples) == 0 or len(q_samples) == 0:
        raise ValueError("empty sample side")
    C = classifier.c_bound
    gamma_p = float(np.average(classifier.scores(p_samples.x_rows()), weights=p_samples.weights)) / C
    gamma_q = -float(np.average(classifier.scores(q_samples.x_rows()), weights=q_samples.weights)) / C
    if gamma_p <= 0 or gamma_q <= 0:
        regime = FAIL
    elif gamma_q >= 1.0 / 3.0:
        regime = HBS
    else:
        regime = LBS
    return WlaEstimate(gamma_p, gamma_q, regime)
