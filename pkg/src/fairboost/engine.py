"""The boosting loop: leveraging schemes, round execution, per-round trace.

Each round draws negatives from the current model, trains a bounded tree to
separate them from the data sample, and multiplies the density stack by
exp(theta_t * c_t).  The leveraging coefficient theta_t controls the fairness
budget spent per round:

    exact      theta_t = -ln(tau) / (C * 2^(t+1))   keeps RR(Q_t) > tau forever
    relative   theta_t = -ln(tau) / (2 C t)         RR(Q_T) > tau^(1 + ln T)
    constant   theta_t = v                          RR(Q_t) >= exp(-2 C t v)

The constant-scheme floor comes from the same normalizer bounds the other two
rest on: each round can shift any pairwise group log-ratio by at most
2*C*theta_t.  All logarithms are natural; tau close to 1 forces theta toward 0
and the fit sticks to the anchor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import seeds
from .boosted import BoostedDensity, InitialDensity
from .schema import Dataset
from .tabular import TabularDensity, fit_empirical, kl_divergence
from .tree import FAIL, TreeConfig, estimate_wla, train_tree

EXACT = "exact"
RELATIVE = "relative"
CONSTANT = "constant"

KL_NONE = "none"
KL_TRAIN = "train"
KL_HELD_OUT = "held-out"


@dataclass(frozen=True)
class LeveragingScheme:
    """How much the stack may move per round, parameterized by the target
    representation rate tau (exact/relative) or a fixed coefficient."""

    kind: str
    tau: Optional[float] = None
    c_bound: float = math.log(2.0)
    value: Optional[float] = None

    def __post_init__(self) -> None:
        if self.kind not in (EXACT, RELATIVE, CONSTANT):
            raise ValueError(f"unknown scheme {self.kind!r}")
        if self.c_bound <= 0:
            raise ValueError("c_bound must be > 0")
        if self.kind == CONSTANT:
            if self.value is None or self.value <= 0:
                raise ValueError("constant scheme needs a positive coefficient")
        else:
            if self.tau is None or not (0.0 < self.tau < 1.0):
                raise ValueError("tau must be in (0, 1)")

    @classmethod
    def parse(cls, text: str, tau: Optional[float], c_bound: float) -> "LeveragingScheme":
        if text == EXACT or text == RELATIVE:
            return cls(kind=text, tau=tau, c_bound=c_bound)
        if text.startswith("const:"):
            return cls(kind=CONSTANT, c_bound=c_bound, value=float(text.split(":", 1)[1]))
        raise ValueError(f"unknown scheme {text!r}")


def leverage(scheme: LeveragingScheme, t: int) -> float:
    """theta_t for round t >= 1."""
    if t < 1:
        raise ValueError("t must be >= 1")
    if scheme.kind == EXACT:
        return -math.log(scheme.tau) / (scheme.c_bound * 2.0 ** (t + 1))
    if scheme.kind == RELATIVE:
        return -math.log(scheme.tau) / (2.0 * scheme.c_bound * t)
    return scheme.value


def rr_lower_bound(scheme: LeveragingScheme, t: int) -> float:
    """Guaranteed representation-rate floor after t rounds."""
    if t < 1:
        raise ValueError("t must be >= 1")
    if scheme.kind == EXACT:
        return scheme.tau
    if scheme.kind == RELATIVE:
        return scheme.tau ** (1.0 + math.log(t))
    return math.exp(-2.0 * scheme.c_bound * t * scheme.value)


def mollifier_size(scheme: LeveragingScheme, t: int) -> float:
    """Size parameter eps_t of the anchored mollifier certified to contain Q_t
    (membership holds at width 2*eps_t)."""
    if t < 1:
        raise ValueError("t must be >= 1")
    if scheme.kind == EXACT:
        return -math.log(scheme.tau)
    if scheme.kind == RELATIVE:
        return -(1.0 + math.log(t)) * math.log(scheme.tau)
    return 2.0 * scheme.c_bound * t * scheme.value


@dataclass(frozen=True)
class FitConfig:
    rounds: int
    scheme: LeveragingScheme
    tree: TreeConfig = field(default_factory=TreeConfig)
    negatives_multiplier: int = 2
    # reweight one fixed anchor pool instead of resampling the model each round
    fixed_anchor_pool: bool = False
    stop_on_wla_failure: bool = False
    kl_eval: str = KL_TRAIN
    seed: int = 0

    def __post_init__(self) -> None:
        if self.rounds < 0:
            raise ValueError("rounds must be >= 0")
        if self.negatives_multiplier < 1:
            raise ValueError("negatives_multiplier must be >= 1")
        if self.kl_eval not in (KL_NONE, KL_TRAIN, KL_HELD_OUT):
            raise ValueError(f"unknown kl_eval mode {self.kl_eval!r}")


@dataclass(frozen=True)
class TraceRow:
    """One line of the boosting trace; t=0 is the anchor baseline."""

    t: int
    theta: float
    gamma_p: Optional[float]
    gamma_q: Optional[float]
    regime: Optional[str]
    rr: float
    rr_bound: float
    kl_train: Optional[float]
    kl_test: Optional[float]
    z: float
    z_by_group: Optional[tuple] = None


def fbde_fit(
    p: Dataset,
    q0: InitialDensity,
    cfg: FitConfig,
    test: Optional[Dataset] = None,
) -> tuple[BoostedDensity, list[TraceRow]]:
    """Run the boosting loop for cfg.rounds rounds.

    Returns the fitted stack and its trace.  The trace opens with a t=0 row
    for the anchor (rr and z exactly 1) so downstream consumers can read off
    per-round drops and total progress without refitting; rounds == 0 returns
    the bare anchor with an empty trace.  Deterministic given cfg.seed.
    """
    if p.schema != q0.schema:
        raise ValueError("schema mismatch")
    if len(p) == 0:
        raise ValueError("empty dataset")
    stack = BoostedDensity(q0)
    trace: list[TraceRow] = []
    if cfg.rounds == 0:
        return stack, trace

    p_hat = test_hat = None
    if cfg.kl_eval != KL_NONE:
        p_hat = fit_empirical(p, 0.0)
    if cfg.kl_eval == KL_HELD_OUT:
        if test is None:
            raise ValueError("held-out kl_eval needs a test dataset")
        test_hat = fit_empirical(test, 0.0)

    def kl_pair(bd: BoostedDensity) -> tuple[Optional[float], Optional[float]]:
        joint = bd.joint() if (p_hat is not None or test_hat is not None) else None
        kl_tr = kl_divergence(p_hat, joint) if p_hat is not None else None
        kl_te = kl_divergence(test_hat, joint) if test_hat is not None else None
        return kl_tr, kl_te

    kl_tr, kl_te = kl_pair(stack)
    trace.append(TraceRow(0, 0.0, None, None, None, 1.0, 1.0, kl_tr, kl_te, 1.0))

    n_neg = cfg.negatives_multiplier * len(p)
    pool = None
    pool_logw = None
    if cfg.fixed_anchor_pool:
        pool = stack.sample(n_neg, seeds.subseed(cfg.seed, seeds.NEGATIVES, 0))
        pool_logw = np.zeros(n_neg)

    for t in range(1, cfg.rounds + 1):
        theta = leverage(cfg.scheme, t)
        if pool is not None:
            w = np.exp(pool_logw - pool_logw.max())
            negatives = Dataset(p.schema, pool.rows, weights=w * (n_neg / w.sum()))
        else:
            negatives = stack.sample(n_neg, seeds.subseed(cfg.seed, seeds.NEGATIVES, t))
        classifier = train_tree(p, negatives, cfg.tree, seeds.subseed(cfg.seed, seeds.TREE, t))
        wla = estimate_wla(classifier, p, negatives)
        if wla.regime == FAIL and cfg.stop_on_wla_failure:
            break
        stack = stack.extended(classifier, theta)
        if pool is not None:
            pool_logw += theta * classifier.scores(pool.x_rows())
        kl_tr, kl_te = kl_pair(stack)
        rnd = stack.rounds[-1]
        trace.append(
            TraceRow(
                t=t,
                theta=theta,
                gamma_p=wla.gamma_p,
                gamma_q=wla.gamma_q,
                regime=wla.regime,
                rr=stack.representation_rate(),
                rr_bound=rr_lower_bound(cfg.scheme, t),
                kl_train=kl_tr,
                kl_test=kl_te,
                z=rnd.z,
                z_by_group=tuple(float(z) for z in rnd.z_by_group),
            )
        )
    return stack, trace
