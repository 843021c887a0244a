"""Explicit probability tables over finite domains, and the metrics on them.

The fairness quantities all reduce to ratios of marginal or conditional
probabilities read off a dense table:

    representation rate   RR(P)  = min_{i,j} p[A=a_i] / p[A=a_j]
    statistical rate      SR(P)  = min_{i,j} p[Y=y|A=a_i] / p[Y=y|A=a_j]
    discrimination ctrl   J(P)   = max_{i,j} |p[Y=y|A=a_i] / p[Y=y|A=a_j] - 1|

KL divergence is Sum p * ln(p/q) in nats with the 0*ln 0 := 0 convention and
an explicit absolute-continuity check.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .schema import AttributeSchema, Dataset, _readonly

_SUM_TOL = 1e-12
#: slack applied to log-space ratio comparisons at constraint boundaries
_LOG_TOL = 1e-12

DENSITY_FORMAT = "fairboost.density"
DENSITY_VERSION = 1


@dataclass(frozen=True, eq=False)
class TabularDensity:
    """A dense joint probability vector in row-major cell order."""

    schema: AttributeSchema
    mass: np.ndarray

    def __post_init__(self) -> None:
        mass = np.asarray(self.mass, dtype=np.float64).reshape(-1)
        if mass.shape != (self.schema.n_cells,):
            raise ValueError("mass length must equal the number of cells")
        if not np.isfinite(mass).all() or (mass < 0).any():
            raise ValueError("mass entries must be finite and >= 0")
        if abs(float(mass.sum()) - 1.0) > _SUM_TOL:
            raise ValueError(f"mass must sum to 1 within {_SUM_TOL}")
        object.__setattr__(self, "mass", _readonly(mass))

    def prob(self, row) -> float:
        """Probability of one coordinate row."""
        return float(self.mass[self.schema.encode(np.asarray(row))[0]])

    def marginal(self, attr_index: int) -> np.ndarray:
        cube = self.mass.reshape(self.schema.shape)
        other = tuple(i for i in range(cube.ndim) if i != attr_index)
        return cube.sum(axis=other)

    def sensitive_marginal(self) -> np.ndarray:
        if self.schema.sensitive_index is None:
            raise ValueError("no sensitive attribute")
        return self.marginal(self.schema.sensitive_index)

    def target_sensitive_joint(self) -> np.ndarray:
        """p[Y=y, A=a] as a (|Y|, |A|) matrix."""
        s = self.schema
        if s.target_index is None:
            raise ValueError("no target attribute")
        if s.sensitive_index is None:
            raise ValueError("no sensitive attribute")
        cube = self.mass.reshape(s.shape)
        keep = {s.target_index, s.sensitive_index}
        other = tuple(i for i in range(cube.ndim) if i not in keep)
        joint = cube.sum(axis=other)
        if s.target_index > s.sensitive_index:
            joint = joint.T
        return joint

    def to_dict(self) -> dict:
        return {
            "format": DENSITY_FORMAT,
            "version": DENSITY_VERSION,
            "schema": self.schema.to_dict(),
            "mass": [float(v) for v in self.mass],
        }

    @staticmethod
    def from_dict(d: dict) -> "TabularDensity":
        if d.get("format") != DENSITY_FORMAT:
            raise ValueError("not a density document")
        if int(d.get("version", -1)) != DENSITY_VERSION:
            raise ValueError(f"unsupported density version {d.get('version')!r}")
        return TabularDensity(AttributeSchema.from_dict(d["schema"]), np.asarray(d["mass"]))


def fit_empirical(dataset: Dataset, smoothing: float = 0.0) -> TabularDensity:
    """Laplace-smoothed empirical table.

    mass[cell] = (count(cell) + smoothing) / (N + smoothing * n_cells),
    where counts and N respect the per-row weights.
    """
    if smoothing < 0:
        raise ValueError("smoothing must be >= 0")
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    total = float(dataset.weights.sum())
    if total <= 0:
        raise ValueError("empty dataset")
    n_cells = dataset.schema.n_cells
    counts = np.bincount(dataset.cells(), weights=dataset.weights, minlength=n_cells)
    mass = (counts + smoothing) / (total + smoothing * n_cells)
    return TabularDensity(dataset.schema, mass)


def representation_rate(density: TabularDensity) -> float:
    """Minimum ordered-pair ratio of the sensitive marginal.

    Equals 1 exactly when the marginal is uniform; undefined (an error)
    when any group carries zero mass.
    """
    marg = density.sensitive_marginal()
    if (marg <= 0).any():
        raise ValueError("degenerate marginal")
    return float(marg.min() / marg.max())


def _target_conditionals(density: TabularDensity, y: int) -> np.ndarray:
    """p[Y=y | A=a] for every sensitive value a."""
    schema = density.schema
    if schema.target_index is None:
        raise ValueError("no target attribute")
    joint = density.target_sensitive_joint()
    if not (0 <= y < joint.shape[0]):
        raise ValueError(f"target value {y} out of range")
    group = joint.sum(axis=0)
    if (group <= 0).any():
        raise ValueError("degenerate marginal")
    cond = joint[y] / group
    if (cond <= 0).any():
        raise ValueError("degenerate conditional")
    return cond


def statistical_rate(density: TabularDensity, y: int) -> float:
    """Minimum ordered-pair ratio of p[Y=y|A=a] across sensitive groups."""
    cond = _target_conditionals(density, y)
    return float(cond.min() / cond.max())


def discrimination_control(density: TabularDensity, y: int) -> float:
    """Maximum ordered-pair deviation |p[Y=y|A=a_i]/p[Y=y|A=a_j] - 1|.

    Over all ordered pairs the deviation is extremal at the largest ratio
    max/min, so the maximum equals max/min - 1.
    """
    cond = _target_conditionals(density, y)
    return float(cond.max() / cond.min() - 1.0)


def kl_divergence(p: TabularDensity, q: TabularDensity) -> float:
    """KL(p, q) in nats; requires q's support to cover p's."""
    if p.schema != q.schema:
        raise ValueError("schema mismatch")
    pm = p.mass
    qm = q.mass
    support = pm > 0
    if (qm[support] <= 0).any():
        raise ValueError("absolute continuity violated")
    val = float(np.sum(pm[support] * (np.log(pm[support]) - np.log(qm[support]))))
    return max(val, 0.0)


def mollifier_membership(q: TabularDensity, q0: TabularDensity, eps: float) -> bool:
    """Does q sit inside the anchored fairness band of width eps around q0?

    Checks, for every ordered pair of sensitive values (a_i, a_j), that the
    pairwise representation ratio of q deviates from q0's by a factor of at
    most exp(eps/2) in either direction.
    """
    if eps <= 0:
        raise ValueError("eps must be > 0")
    if q.schema != q0.schema:
        raise ValueError("schema mismatch")
    mq = q.sensitive_marginal()
    m0 = q0.sensitive_marginal()
    if (mq <= 0).any() or (m0 <= 0).any():
        raise ValueError("degenerate marginal")
    # log of the pairwise ratio r_ij = m[i]/m[j] for every ordered pair
    lq = np.log(mq)
    l0 = np.log(m0)
    dev = (lq[:, None] - lq[None, :]) - (l0[:, None] - l0[None, :])
    return bool(np.abs(dev).max() <= eps / 2.0 + _LOG_TOL)
