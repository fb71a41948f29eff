"""Cost-sensitive three-way relevance partitioning.

Features are split into strong (POS), weak (BND) and irrelevant (NEG)
regions by a threshold pair on their relevance score.  The pair starts from
the Bayesian minimum-risk values implied by the cost matrix and is then
refined by simulated annealing on the decision cost of the feature history.
"""
from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _accel
from .errors import DegenerateCostsError, ValidationError


class Region(str, enum.Enum):
    STRONG = "POS"
    WEAK = "BND"
    IRRELEVANT = "NEG"


@dataclass(frozen=True)
class CostMatrix:
    r_pp: float = 0.0
    r_bp: float = 1.0
    r_ep: float = 10.0
    r_pe: float = 10.0
    r_be: float = 1.0
    r_ee: float = 0.0

    def __post_init__(self):
        vals = self.as_tuple()
        if any(not math.isfinite(v) or v < 0 for v in vals):
            raise ValidationError("costs must be finite and nonnegative")
        if not (self.r_pp <= self.r_bp <= self.r_ep and self.r_ee <= self.r_be <= self.r_pe):
            raise ValidationError("costs must satisfy r_pp <= r_bp <= r_ep and r_ee <= r_be <= r_pe")
        gaps = (self.r_pe - self.r_be, self.r_bp - self.r_pp, self.r_be - self.r_ee, self.r_ep - self.r_bp)
        if any(g <= 0 for g in gaps):
            raise DegenerateCostsError("every cost gap must be strictly positive for a three-way split")

    @classmethod
    def from_sequence(cls, values):
        values = [float(v) for v in values]
        if len(values) != 6:
            raise ValidationError("cost matrix needs six values: r_pp,r_bp,r_ep,r_pe,r_be,r_ee")
        return cls(*values)

    def as_tuple(self):
        return (self.r_pp, self.r_bp, self.r_ep, self.r_pe, self.r_be, self.r_ee)


@dataclass(frozen=True)
class ThresholdPair:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (0.0 <= self.beta < self.alpha <= 1.0):
            raise ValidationError(f"thresholds must satisfy 0 <= beta < alpha <= 1, got {self}")


@dataclass(frozen=True)
class RegionCounts:
    m_pp: int = 0
    m_bp: int = 0
    m_ep: int = 0
    m_pe: int = 0
    m_be: int = 0
    m_ee: int = 0

    @property
    def total(self) -> int:
        return self.m_pp + self.m_bp + self.m_ep + self.m_pe + self.m_be + self.m_ee


@dataclass(frozen=True)
class SaParams:
    init_t: float = 1.0
    min_t: float = 1e-3
    delta: float = 0.95
    k: float = 1.0
    step_sigma: float = 0.05
    seed: int = 0
    chain: int = 20
    max_redraws: int = 1000

    def __post_init__(self):
        if not (self.init_t > 0 and self.min_t > 0 and self.min_t < self.init_t):
            raise ValidationError("need 0 < min_t < init_t")
        if not 0.0 < self.delta < 1.0:
            raise ValidationError("cooling factor delta must lie in (0, 1)")
        if self.k <= 0 or self.step_sigma <= 0:
            raise ValidationError("k and step_sigma must be > 0")
        if self.chain < 1:
            raise ValidationError("chain length must be >= 1")

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class DecisionCost:
    total: float
    mis: float
    delayed: float
    correct: float = 0.0


@dataclass
class AnnealResult:
    thresholds: ThresholdPair
    cost: float
    initial: ThresholdPair
    initial_cost: float
    best_trace: list = field(default_factory=list)


def initial_thresholds(costs: CostMatrix) -> ThresholdPair:
    """Minimum-risk thresholds induced by the cost matrix."""
    a_num = costs.r_pe - costs.r_be
    alpha = a_num / (a_num + (costs.r_bp - costs.r_pp))
    b_num = costs.r_be - costs.r_ee
    beta = b_num / (b_num + (costs.r_ep - costs.r_bp))
    if not beta < alpha:
        raise DegenerateCostsError(f"cost matrix collapses to alpha={alpha}, beta={beta}; no boundary region")
    return ThresholdPair(alpha, beta)


def classify(dep_c: float, thresholds: ThresholdPair) -> Region:
    if dep_c >= thresholds.alpha:
        return Region.STRONG
    if dep_c <= thresholds.beta:
        return Region.IRRELEVANT
    return Region.WEAK


def _history_arrays(history):
    if isinstance(history, tuple) and len(history) == 2:
        dep, rel = history
        return np.asarray(dep, dtype=float), np.asarray(rel, dtype=bool)
    dep = np.fromiter((r.dep_c for r in history), dtype=float)
    rel = np.fromiter((r.relevant for r in history), dtype=bool)
    return dep, rel


def region_counts(history, thresholds: ThresholdPair) -> RegionCounts:
    dep, rel = _history_arrays(history)
    return _counts(dep, rel, thresholds.alpha, thresholds.beta)


def _counts(dep, rel, alpha, beta):
    pos = dep >= alpha
    neg = dep <= beta
    bnd = ~(pos | neg)
    irr = ~rel
    return RegionCounts(
        int(np.count_nonzero(pos & rel)),
        int(np.count_nonzero(bnd & rel)),
        int(np.count_nonzero(neg & rel)),
        int(np.count_nonzero(pos & irr)),
        int(np.count_nonzero(bnd & irr)),
        int(np.count_nonzero(neg & irr)),
    )


def _cost_from_counts(m: RegionCounts, c: CostMatrix) -> DecisionCost:
    mis = c.r_ep * m.m_ep + c.r_pe * m.m_pe
    delayed = c.r_bp * m.m_bp + c.r_be * m.m_be
    correct = c.r_pp * m.m_pp + c.r_ee * m.m_ee
    return DecisionCost(mis + delayed + correct, mis, delayed, correct)


def decision_cost(history, thresholds: ThresholdPair, costs: CostMatrix) -> DecisionCost:
    """Total, misclassification and delay cost of the history under ``thresholds``.

    ``history`` is a sequence of records with ``dep_c`` and ``relevant``
    attributes, or a ``(dep_c array, relevant array)`` pair.
    """
    return _cost_from_counts(region_counts(history, thresholds), costs)


def temperature_schedule(sa: SaParams) -> np.ndarray:
    temps = []
    t = sa.init_t
    while t > sa.min_t:
        temps.append(t)
        t *= sa.delta
    return np.array(temps)


def anneal_thresholds(history, costs: CostMatrix, sa: SaParams, start: ThresholdPair | None = None) -> AnnealResult:
    """Search for the threshold pair minimising the decision cost of ``history``.

    Geometric cooling from ``init_t`` to ``min_t`` with ``sa.chain`` Metropolis
    proposals per temperature level.  Gaussian proposals that leave
    0 <= beta < alpha <= 1 are redrawn.  Returns the best pair ever visited,
    so the result never costs more than the starting pair.
    """
    dep, rel = _history_arrays(history)
    if dep.size == 0:
        raise ValidationError("cannot anneal thresholds on an empty history")
    init = initial_thresholds(costs)
    if start is None:
        start = init
    cost_vec = np.array(costs.as_tuple(), dtype=float)
    temps = temperature_schedule(sa)
    n_props = temps.size * sa.chain
    pool = 4 * n_props
    while True:
        rng = np.random.default_rng(sa.seed)
        uniforms = rng.random(n_props)
        steps = rng.standard_normal((pool, 2)) * sa.step_sigma
        trace = np.empty(temps.size)
        a, b, best, exhausted = _accel.anneal(
            dep, rel, cost_vec, start.alpha, start.beta, temps, sa.k, steps, uniforms, sa.chain, trace
        )
        if not exhausted:
            break
        if pool >= sa.max_redraws * n_props:
            raise ValidationError("could not draw valid threshold proposals; step_sigma too large?")
        pool *= 4
    initial_cost = decision_cost((dep, rel), start, costs).total
    return AnnealResult(ThresholdPair(float(a), float(b)), float(best), start, initial_cost, trace.tolist())
