"""Online sparse streaming feature selection.

Columns arrive in buffers.  Each buffer is completed by latent factor
analysis, every completed column is scored against the class, placed in a
three-way region, and then passed through Markov-blanket redundancy
analysis against the currently selected set.
"""
from __future__ import annotations

import dataclasses
import itertools
import logging
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from . import lfa
from ._rng import derive_seed
from .citest import ci_test, dep_score
from .datamodel import FeatureBuffer, LabelVector, inject_missing, stream_columns
from .errors import NumericError, ValidationError
from .threeway import (
    CostMatrix,
    Region,
    SaParams,
    ThresholdPair,
    anneal_thresholds,
    classify,
    decision_cost,
    initial_thresholds,
)

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
THREE_WAY = "three_way"
TWO_WAY = "two_way"


@dataclass(frozen=True)
class SelectorConfig:
    mu: float = 0.05
    lfa: lfa.LfaConfig = field(default_factory=lfa.LfaConfig)
    buffer_len: int = 5
    costs: CostMatrix = field(default_factory=CostMatrix)
    sa: SaParams = field(default_factory=SaParams)
    max_cond_size: int = 3
    seed: int = 0
    mode: str = THREE_WAY
    pinned: ThresholdPair | None = None
    warm_start: bool = False
    reanneal_every: int = 1
    weak_rule: str = "subsets"

    def __post_init__(self):
        if not 0.0 < self.mu < 1.0:
            raise ValidationError("significance level mu must lie in (0, 1)")
        if self.max_cond_size < 1:
            raise ValidationError("max_cond_size must be >= 1")
        if self.buffer_len < 1:
            raise ValidationError("buffer_len must be >= 1")
        if self.reanneal_every < 1:
            raise ValidationError("reanneal_every must be >= 1")
        if self.mode not in (THREE_WAY, TWO_WAY):
            raise ValidationError(f"unknown mode {self.mode!r}")
        if self.weak_rule not in ("subsets", "singleton"):
            raise ValidationError(f"unknown weak_rule {self.weak_rule!r}")
        if self.mode == THREE_WAY and self.pinned is None:
            initial_thresholds(self.costs)

    def replace(self, **changes) -> "SelectorConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "mu": self.mu,
            "lfa": self.lfa.to_dict(),
            "buffer_len": self.buffer_len,
            "costs": list(self.costs.as_tuple()),
            "sa": self.sa.to_dict(),
            "max_cond_size": self.max_cond_size,
            "seed": self.seed,
            "mode": self.mode,
            "pinned": None if self.pinned is None else [self.pinned.alpha, self.pinned.beta],
            "warm_start": self.warm_start,
            "reanneal_every": self.reanneal_every,
            "weak_rule": self.weak_rule,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SelectorConfig":
        d = dict(d)
        if "lfa" in d:
            d["lfa"] = lfa.LfaConfig(**d["lfa"])
        if "costs" in d:
            d["costs"] = CostMatrix.from_sequence(d["costs"])
        if "sa" in d:
            d["sa"] = SaParams(**d["sa"])
        if d.get("pinned") is not None:
            d["pinned"] = ThresholdPair(*d["pinned"])
        return cls(**d)


@dataclass
class RelevanceRecord:
    feature_index: int
    dep_c: float
    p_value: float
    relevant: bool
    region: Region
    timestamp: int

    @property
    def two_way_label(self) -> str:
        return "C" if self.relevant else "notC"


@dataclass
class SelectionState:
    y: np.ndarray
    selected: list = field(default_factory=list)
    deferred: list = field(default_factory=list)
    history: list = field(default_factory=list)
    store: dict = field(default_factory=dict)
    thresholds: ThresholdPair | None = None

    def check(self):
        assert not set(self.selected) & set(self.deferred)
        assert len(set(self.selected)) == len(self.selected)
        assert len(set(self.deferred)) == len(self.deferred)


@dataclass
class SelectionResult:
    selected: list
    deferred: list
    history: list
    steps: list
    thresholds: ThresholdPair | None
    completed: np.ndarray
    indices: list
    completed_entries: int

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "selected": list(self.selected),
            "deferred": list(self.deferred),
            "n_features": len(self.indices),
            "completed_entries": self.completed_entries,
            "thresholds": None if self.thresholds is None else [self.thresholds.alpha, self.thresholds.beta],
        }


def _find_separator(state: SelectionState, f: int, pool, mu: float, max_size: int):
    """First subset of ``pool`` (by increasing size) that renders ``f`` independent of the class."""
    x = state.store[f]
    n = x.shape[0]
    max_size = min(max_size, len(pool), n - 4)
    for size in range(1, max_size + 1):
        for subset in itertools.combinations(pool, size):
            z = np.column_stack([state.store[s] for s in subset])
            if ci_test(x, state.y, z, mu).independent:
                return subset
    return None


def admit_strong(f: int, state: SelectionState, mu: float, max_cond_size: int) -> bool:
    """Add ``f`` to the selected set unless some subset of it makes ``f`` redundant."""
    if _find_separator(state, f, list(state.selected), mu, max_cond_size) is not None:
        return False
    state.selected.append(f)
    return True


def admit_weak(f: int, state: SelectionState, mu: float, max_cond_size: int, weak_rule: str = "subsets") -> str:
    """Route a weakly relevant feature; returns ``"deferred"``, ``"selected"`` or ``"redundant"``."""
    if not state.selected:
        if f not in state.deferred:
            state.deferred.append(f)
        return "deferred"
    size = 1 if weak_rule == "singleton" else max_cond_size
    if f in state.deferred:
        state.deferred.remove(f)
    if _find_separator(state, f, list(state.selected), mu, size) is not None:
        return "redundant"
    state.selected.append(f)
    return "selected"


def prune_selected(f_new: int, state: SelectionState, mu: float, max_cond_size: int) -> list:
    """Remove selected features made redundant by the arrival of ``f_new``.

    Candidates are visited in admission order and each is tested against the
    set as it stands at that moment, so earlier removals are taken into
    account before later ones.
    """
    removed = []
    for g in list(state.selected):
        if g == f_new or g not in state.selected:
            continue
        others = [s for s in state.selected if s != g]
        if _find_separator(state, g, others, mu, max_cond_size) is not None:
            state.selected.remove(g)
            removed.append(g)
    return removed


class OnlineSelector:
    """Stateful selector consuming feature buffers in arrival order."""

    def __init__(self, labels, cfg: SelectorConfig):
        y = labels.labels if isinstance(labels, LabelVector) else np.asarray(labels)
        self.cfg = cfg
        self.state = SelectionState(y=np.asarray(y, dtype=float))
        self.steps: list[dict] = []
        self.completed_entries = 0
        self._t = 0
        if cfg.mode == TWO_WAY:
            self.state.thresholds = None
        elif cfg.pinned is not None:
            self.state.thresholds = cfg.pinned
        else:
            self.state.thresholds = initial_thresholds(cfg.costs)

    def _log(self, feature, record, action, cost=None, completed=0):
        th = self.state.thresholds
        if th is None:
            alpha = beta = 1.0 - self.cfg.mu
        else:
            alpha, beta = th.alpha, th.beta
        entry = {
            "schema_version": SCHEMA_VERSION,
            "t": self._t,
            "feature": int(feature),
            "dep_c": None if record is None else record.dep_c,
            "alpha": alpha,
            "beta": beta,
            "region": None if record is None else record.region.value,
            "action": action,
            "cost_total": cost,
            "n_selected": len(self.state.selected),
            "n_deferred": len(self.state.deferred),
            "completed": int(completed),
        }
        self.steps.append(entry)
        return entry

    def push_buffer(self, buffer: FeatureBuffer):
        if buffer.n_rows != self.state.y.shape[0]:
            raise ValidationError(f"buffer has {buffer.n_rows} rows but there are {self.state.y.shape[0]} labels")
        cfg = self.cfg
        lfa_cfg = dataclasses.replace(cfg.lfa, seed=derive_seed(cfg.seed, "lfa", buffer.start))
        block, _ = lfa.fill(buffer, lfa_cfg)
        imputed = (~buffer.mask).sum(axis=0)
        self.completed_entries += int(imputed.sum())
        for j in range(buffer.n_cols):
            self.push_column(buffer.start + j, block[:, j], completed=int(imputed[j]))

    def _thresholds_for_step(self):
        cfg = self.cfg
        st = self.state
        if cfg.mode == TWO_WAY or cfg.pinned is not None:
            return st.thresholds
        if (len(st.history) - 1) % cfg.reanneal_every != 0:
            return st.thresholds
        sa = dataclasses.replace(cfg.sa, seed=derive_seed(cfg.seed, "sa", self._t))
        start = st.thresholds if cfg.warm_start else None
        return anneal_thresholds(st.history, cfg.costs, sa, start=start).thresholds

    def push_column(self, index: int, values, completed: int = 0):
        cfg = self.cfg
        st = self.state
        self._t += 1
        values = np.asarray(values, dtype=float)
        try:
            score = dep_score(values, st.y, cfg.mu)
        except NumericError as exc:
            log.warning("feature %d skipped: %s", index, exc)
            return self._log(index, None, "error", completed=completed)
        st.store[index] = values
        relevant = score.p_value <= cfg.mu
        record = RelevanceRecord(index, score.dep_c, score.p_value, relevant, Region.IRRELEVANT, self._t)
        st.history.append(record)

        if cfg.mode == TWO_WAY:
            record.region = Region.STRONG if relevant else Region.IRRELEVANT
            cost = None
        else:
            st.thresholds = self._thresholds_for_step()
            record.region = classify(record.dep_c, st.thresholds)
            cost = decision_cost(st.history, st.thresholds, cfg.costs).total

        was_empty = not st.selected
        try:
            action = self._route(index, record.region)
        except NumericError as exc:
            log.warning("feature %d skipped during redundancy analysis: %s", index, exc)
            action = "error"
        entry = self._log(index, record, action, cost, completed)
        if was_empty and st.selected and st.deferred:
            self._sweep_deferred()
        return entry

    def _route(self, f, region):
        cfg = self.cfg
        st = self.state
        if region is Region.IRRELEVANT:
            return "discarded"
        if region is Region.STRONG:
            if not admit_strong(f, st, cfg.mu, cfg.max_cond_size):
                return "redundant"
            action = "selected"
        else:
            action = admit_weak(f, st, cfg.mu, cfg.max_cond_size, cfg.weak_rule)
            if action != "selected":
                return action
        removed = prune_selected(f, st, cfg.mu, cfg.max_cond_size)
        if removed:
            action += " pruned=" + ",".join(str(g) for g in removed)
        return action

    def _sweep_deferred(self):
        cfg = self.cfg
        st = self.state
        by_index = {r.feature_index: r for r in st.history}
        for g in list(st.deferred):
            if not st.selected:
                break
            action = admit_weak(g, st, cfg.mu, cfg.max_cond_size, cfg.weak_rule)
            if action == "selected":
                removed = prune_selected(g, st, cfg.mu, cfg.max_cond_size)
                action = "promoted" + ("" if not removed else " pruned=" + ",".join(map(str, removed)))
            else:
                action = "dropped"
            self._log(g, by_index[g], action)

    def finish(self) -> SelectionResult:
        st = self.state
        if st.selected and st.deferred:
            self._sweep_deferred()
        st.check()
        indices = sorted(st.store)
        completed = (
            np.column_stack([st.store[i] for i in indices]) if indices else np.empty((st.y.shape[0], 0))
        )
        return SelectionResult(
            list(st.selected),
            list(st.deferred),
            list(st.history),
            list(self.steps),
            st.thresholds,
            completed,
            indices,
            self.completed_entries,
        )


def process_stream(source, labels, cfg: SelectorConfig | None = None) -> SelectionResult:
    """Run the full pipeline over a column stream.

    ``source`` is a :class:`FeatureBuffer`, an N x D array with NaN at missing
    cells, or an iterable of buffers already split in arrival order.
    """
    cfg = cfg or SelectorConfig()
    if isinstance(source, (FeatureBuffer, np.ndarray)):
        buffers: Iterable[FeatureBuffer] = stream_columns(source, cfg.buffer_len)
    else:
        buffers = source
    sel = OnlineSelector(labels, cfg)
    seen = False
    for buf in buffers:
        seen = True
        sel.push_buffer(buf)
    if not seen:
        raise ValidationError("empty feature stream")
    return sel.finish()


def run_selection(table, labels, cfg: SelectorConfig | None = None, zeta: float = 0.1):
    """Hide a ``zeta`` fraction of a complete table, then select.

    The mask is seeded from ``cfg.seed``.  A table that already has NaN
    cells is used as-is.  Returns ``(buffer, result)``.
    """
    cfg = cfg or SelectorConfig()
    table = np.asarray(table, dtype=float)
    if np.isnan(table).any():
        if zeta:
            log.warning("input already has missing cells; using them as-is instead of masking")
        buf = FeatureBuffer(table)
    else:
        buf = inject_missing(table, zeta, derive_seed(cfg.seed, "mask"))
    return buf, process_stream(buf, labels, cfg)
