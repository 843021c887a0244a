"""The boosted exponential-family density stack.

Starting from an anchor Q0 with a perfectly uniform sensitive marginal, each
round multiplies the density by exp(theta_t * c_t(x)) and renormalizes:

    Q_t(x, a) = Q_{t-1}(x, a) * exp(theta_t * c_t(x)) / Z_t

with the per-group normalizer Z_t(a) = E_{q_{t-1}(.|a)}[exp(theta_t c_t(x))]
and Z_t = Sum_a q_{t-1}(a) Z_t(a).  Because every classifier depends only on
the non-sensitive coordinates, the normalizers carry all the fairness
information:

    q_t(a)          = q_0(a) * Prod_k Z_k(a) / Z_k
    RR(Q_t) ratios  = Prod_k Z_k(a_i) / Z_k(a_j)

and expectations reduce to reweighted anchor expectations:

    E_{Q_t}[g] = E_{Q_0}[ Prod_k exp(theta_k c_k(x)) / Z_k * g(x, a) ].

Normalizers are computed exactly (full log-space sums over the discrete
domain), frozen when a round is appended, and serialized with the model;
evaluation never recomputes them.

A classifier here is any object with a ``c_bound`` attribute and a
``scores(x_rows) -> array`` method taking coordinate rows over the
non-sensitive subdomain.  Trained trees satisfy this; ``TableClassifier``
below is the direct tabulated form used by the property suites.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.special import logsumexp

from .schema import AttributeSchema, Dataset, _readonly
from .tabular import TabularDensity


@dataclass(frozen=True, eq=False)
class TableClassifier:
    """A bounded score tabulated over the feature cells."""

    x_schema: AttributeSchema
    values: np.ndarray
    c_bound: float

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if vals.shape != (self.x_schema.n_cells,):
            raise ValueError("values must cover every feature cell")
        if not np.isfinite(vals).all():
            raise ValueError("classifier unbounded")
        if np.abs(vals).max(initial=0.0) > self.c_bound + 1e-12:
            raise ValueError("values exceed c_bound")
        object.__setattr__(self, "values", _readonly(vals))

    def scores(self, x_rows: np.ndarray) -> np.ndarray:
        return self.values[self.x_schema.encode(x_rows)]

    def to_dict(self) -> dict:
        return {
            "type": "table",
            "c_bound": float(self.c_bound),
            "values": [float(v) for v in self.values],
        }

    @staticmethod
    def from_dict(d: dict, x_schema: AttributeSchema) -> "TableClassifier":
        return TableClassifier(x_schema, np.asarray(d["values"]), float(d["c_bound"]))


class InitialDensity:
    """The fair anchor: per-group conditionals under an exactly uniform marginal.

    The sensitive marginal is the constant 1/|A| by construction, never
    estimated, so the anchor's representation rate is exactly 1.
    """

    def __init__(self, schema: AttributeSchema, conditionals: Sequence[TabularDensity]):
        if schema.sensitive_index is None:
            raise ValueError("schema must designate a sensitive attribute")
        self.schema = schema
        self.x_schema = schema.x_subschema()
        card = schema.sensitive.cardinality
        conditionals = tuple(conditionals)
        if len(conditionals) != card:
            raise ValueError("need one conditional per sensitive value")
        for cond in conditionals:
            if cond.schema != self.x_schema:
                raise ValueError("conditional schema mismatch")
        self.conditionals = conditionals
        self.cond = _readonly(np.stack([c.mass for c in conditionals]))
        with np.errstate(divide="ignore"):
            self.log_cond = _readonly(np.log(self.cond))
        self.x_cells = _readonly(self.x_schema.all_cells())
        # per full-cell lookups: which x-cell / sensitive value a flat cell holds
        n_x = self.x_schema.n_cells
        self.cell_to_x = _readonly(
            schema.flatten_groups(np.tile(np.arange(n_x), (card, 1))).astype(np.int64)
        )
        self.cell_to_a = _readonly(
            schema.flatten_groups(np.repeat(np.arange(card), n_x).reshape(card, n_x)).astype(np.int64)
        )
        self.joint_flat = _readonly(schema.flatten_groups(self.cond) / card)

    @classmethod
    def from_matrix(cls, schema: AttributeSchema, cond: np.ndarray) -> "InitialDensity":
        x_schema = schema.x_subschema()
        conds = [TabularDensity(x_schema, row) for row in np.asarray(cond, dtype=np.float64)]
        return cls(schema, conds)

    def joint(self) -> TabularDensity:
        return TabularDensity(self.schema, self.joint_flat)


@dataclass(frozen=True, eq=False)
class BoostRound:
    """One frozen boosting round: coefficient, classifier, and normalizers."""

    theta: float
    classifier: object
    z: float
    z_by_group: np.ndarray
    scores: np.ndarray  # classifier values tabulated over the feature cells

    def __post_init__(self) -> None:
        zg = np.asarray(self.z_by_group, dtype=np.float64)
        if self.z <= 0 or (zg <= 0).any():
            raise ValueError("normalizers must be > 0")
        object.__setattr__(self, "z_by_group", _readonly(zg))
        object.__setattr__(self, "scores", _readonly(np.asarray(self.scores, dtype=np.float64)))


@dataclass(frozen=True)
class ExpectationEstimate:
    value: float
    stderr: float
    n: int


GFun = Callable[[np.ndarray], float]


class BoostedDensity:
    """Immutable stack of boosting rounds on top of an InitialDensity."""

    def __init__(self, q0: InitialDensity, rounds: Sequence[BoostRound] = ()):
        self.q0 = q0
        self.schema = q0.schema
        self.rounds = tuple(rounds)
        n_x = q0.x_schema.n_cells
        tilt = np.zeros(n_x)
        log_z = 0.0
        log_zg = np.zeros(q0.cond.shape[0])
        for rnd in self.rounds:
            tilt += rnd.theta * rnd.scores
            log_z += math.log(rnd.z)
            log_zg += np.log(rnd.z_by_group)
        self._tilt = _readonly(tilt)
        self._log_z_total = log_z
        self._log_zg_total = _readonly(log_zg)

    # -- structure ------------------------------------------------------

    @property
    def n_rounds(self) -> int:
        return len(self.rounds)

    def prefix(self, t: int) -> "BoostedDensity":
        """The stack truncated to its first t rounds."""
        return BoostedDensity(self.q0, self.rounds[:t])

    def extended(self, classifier, theta: float) -> "BoostedDensity":
        """Append one round, computing its exact normalizers."""
        scores = _checked_scores(self, classifier)
        z, z_by_group = self._normalizers(scores, theta)
        rnd = BoostRound(theta, classifier, z, z_by_group, scores)
        return BoostedDensity(self.q0, self.rounds + (rnd,))

    def _normalizers(self, scores: np.ndarray, theta: float) -> tuple[float, np.ndarray]:
        log_cond = self._log_cond()
        log_zg = logsumexp(log_cond + theta * scores[None, :], axis=1)
        log_marg = np.log(self.sensitive_marginal())
        log_z = logsumexp(log_marg + log_zg)
        return float(np.exp(log_z)), np.exp(log_zg)

    # -- evaluation -----------------------------------------------------

    def _log_cond(self) -> np.ndarray:
        """log q_T(x|a): anchor conditionals tilted and renormalized per group."""
        return self.q0.log_cond + self._tilt[None, :] - self._log_zg_total[:, None]

    def density_at(self, row) -> float:
        """Unrolled product density Q0(x,a) * Prod_k exp(theta_k c_k(x)) / Z_k."""
        cell = self.schema.encode(np.asarray(row))[0]
        x_idx = self.q0.cell_to_x[cell]
        base = self.q0.joint_flat[cell]
        if base == 0.0:
            return 0.0
        return float(math.exp(math.log(base) + self._tilt[x_idx] - self._log_z_total))

    def _raw_joint_vector(self) -> np.ndarray:
        card = self.q0.cond.shape[0]
        log_groups = self.q0.log_cond - math.log(card) + self._tilt[None, :] - self._log_z_total
        return self.schema.flatten_groups(np.exp(log_groups))

    def total_mass(self) -> float:
        """Sum of the unrolled product over the domain (1 up to stored-Z drift)."""
        return float(self._raw_joint_vector().sum())

    def joint(self) -> TabularDensity:
        """Explicit table of the stack, renormalized by its raw total."""
        raw = self._raw_joint_vector()
        return TabularDensity(self.schema, raw / raw.sum())

    def conditional(self, a: int) -> TabularDensity:
        """q_T(x | A=a) as an explicit table over the feature cells."""
        raw = np.exp(self.q0.log_cond[a] + self._tilt - self._log_zg_total[a])
        return TabularDensity(self.q0.x_schema, raw / raw.sum())

    def sensitive_marginal(self) -> np.ndarray:
        """Marginal recursion q_T(a) = q_0(a) * Prod_k Z_k(a)/Z_k."""
        card = self.q0.cond.shape[0]
        return np.exp(self._log_zg_total - self._log_z_total) / card

    def representation_rate(self) -> float:
        """RR through the normalizer products, min over ordered group pairs."""
        s = self._log_zg_total
        return float(np.exp(s.min() - s.max()))

    # -- expectations ---------------------------------------------------

    def expectation(
        self,
        g: GFun,
        sample_budget: Union[int, str] = "exact",
        seed: int = 0,
    ) -> ExpectationEstimate:
        """E_{Q_T}[g] over full coordinate rows.

        Exact mode sums the unrolled product over the whole domain.  Monte
        Carlo mode draws from the anchor and averages the importance-weighted
        values Prod_k exp(theta_k c_k(x))/Z_k * g(x, a); the estimator is
        unbiased because the stored normalizers are exact.
        """
        if sample_budget == "exact":
            rows = self.schema.all_cells()
            vals = np.array([float(g(r)) for r in rows])
            return ExpectationEstimate(float(self._raw_joint_vector() @ vals), 0.0, len(rows))
        n = int(sample_budget)
        if n < 2:
            raise ValueError("sample_budget must be >= 2 in Monte Carlo mode")
        rng = np.random.default_rng(seed)
        cells = _draw_cells(self.q0.joint_flat, n, rng)
        rows = self.schema.decode(cells)
        log_w = self._tilt[self.q0.cell_to_x[cells]] - self._log_z_total
        vals = np.exp(log_w) * np.array([float(g(r)) for r in rows])
        return _mc_estimate(vals)

    def conditional_expectation(
        self,
        g: GFun,
        a: int,
        sample_budget: Union[int, str] = "exact",
        seed: int = 0,
    ) -> ExpectationEstimate:
        """E_{q_T(.|a)}[g] over feature rows, via the per-group normalizers."""
        card = self.q0.cond.shape[0]
        if not (0 <= a < card):
            raise ValueError("sensitive value out of range")
        if sample_budget == "exact":
            rows = self.q0.x_cells
            vals = np.array([float(g(r)) for r in rows])
            raw = np.exp(self.q0.log_cond[a] + self._tilt - self._log_zg_total[a])
            return ExpectationEstimate(float(raw @ vals), 0.0, len(rows))
        n = int(sample_budget)
        if n < 2:
            raise ValueError("sample_budget must be >= 2 in Monte Carlo mode")
        rng = np.random.default_rng(seed)
        x_idx = _draw_cells(self.q0.cond[a], n, rng)
        rows = self.q0.x_schema.decode(x_idx)
        log_w = self._tilt[x_idx] - self._log_zg_total[a]
        vals = np.exp(log_w) * np.array([float(g(r)) for r in rows])
        return _mc_estimate(vals)

    # -- sampling -------------------------------------------------------

    def sample(self, n: int, seed: int, method: str = "table") -> Dataset:
        """Draw n rows from Q_T, deterministically for a given seed.

        "table" inverts the CDF of the explicit joint table (the default on
        these finite domains).  "sir" is sampling-importance-resampling from
        the anchor with weights Prod_k exp(theta_k c_k(x))/Z_k, kept for
        pipelines whose anchor is cheap to sample but expensive to tabulate.
        """
        if n < 1:
            raise ValueError("n must be >= 1")
        rng = np.random.default_rng(seed)
        if method == "table":
            cells = _draw_cells(self.joint().mass, n, rng)
        elif method == "sir":
            m = max(4 * n, 1000)
            proposal = _draw_cells(self.q0.joint_flat, m, rng)
            w = np.exp(self._tilt[self.q0.cell_to_x[proposal]])
            cells = proposal[rng.choice(m, size=n, p=w / w.sum())]
        else:
            raise ValueError(f"unknown sampling method {method!r}")
        return Dataset(self.schema, self.schema.decode(cells))


def compute_normalizers(prev: BoostedDensity, classifier, theta: float) -> tuple[float, np.ndarray]:
    """Exact (Z, Z(a)) for appending one round with this classifier to prev.

    Z(a) = E_{q_prev(.|a)}[exp(theta * c(x))], summed in log space over the
    discrete domain; Z = Sum_a q_prev(a) * Z(a).
    """
    scores = _checked_scores(prev, classifier)
    return prev._normalizers(scores, theta)


def _checked_scores(bd: BoostedDensity, classifier) -> np.ndarray:
    scores = np.asarray(classifier.scores(bd.q0.x_cells), dtype=np.float64)
    if scores.shape != (bd.q0.x_schema.n_cells,) or not np.isfinite(scores).all():
        raise ValueError("classifier unbounded")
    return scores


def _draw_cells(probs: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    cdf = np.cumsum(probs)
    idx = np.searchsorted(cdf, rng.random(n) * cdf[-1], side="right")
    return np.minimum(idx, len(probs) - 1)


def _mc_estimate(vals: np.ndarray) -> ExpectationEstimate:
    n = len(vals)
    return ExpectationEstimate(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n)), n)
