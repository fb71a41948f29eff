"""Evaluation harness: KNN on selected features under repeated stratified CV."""
from __future__ import annotations

import dataclasses
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from sklearn.model_selection import StratifiedKFold

from ._rng import derive_seed
from .datamodel import LabelVector
from .errors import DataError, ValidationError
from .selector import TWO_WAY, SelectorConfig, run_selection

CSV_COLUMNS = ("dataset", "method", "mean_acc", "std_acc", "mean_selected", "runtime_s", "seed")


class EmptyFeatureSetError(ValidationError):
    """KNN was asked to classify with zero features; predict the majority class instead."""


@dataclass
class EvalReport:
    mean_accuracy: float
    std_accuracy: float
    mean_selected: float
    runtime_seconds: float
    per_fold: list
    per_fold_selected: list = field(default_factory=list)
    fallback_folds: int = 0
    method: str = "three_way"
    seed: int = 0

    @classmethod
    def from_folds(cls, accs, n_selected, runtime, fallback=0, method="three_way", seed=0):
        accs = [float(a) for a in accs]
        return cls(
            float(np.mean(accs)),
            float(np.std(accs)),
            float(np.mean(n_selected)),
            float(runtime),
            accs,
            [int(k) for k in n_selected],
            int(fallback),
            method,
            int(seed),
        )

    def to_dict(self, include_runtime=False) -> dict:
        d = dataclasses.asdict(self)
        if not include_runtime:
            d.pop("runtime_seconds")
        return d

    def csv_row(self, dataset: str) -> str:
        return ",".join(
            [
                dataset,
                self.method,
                f"{self.mean_accuracy:.6f}",
                f"{self.std_accuracy:.6f}",
                f"{self.mean_selected:.3f}",
                f"{self.runtime_seconds:.3f}",
                str(self.seed),
            ]
        )


def knn_predict(train_X, train_y, test_X, k=3):
    """Euclidean k-nearest-neighbour majority vote.

    Vote ties go to the class with the smallest summed neighbour distance,
    then to the lowest class code.
    """
    train_X = np.asarray(train_X, dtype=float)
    test_X = np.asarray(test_X, dtype=float)
    train_y = np.asarray(train_y)
    if train_X.ndim != 2 or train_X.shape[1] == 0:
        raise EmptyFeatureSetError("no features to classify with; fall back to majority-class prediction")
    if k < 1 or train_X.shape[0] < k:
        raise ValidationError(f"k={k} needs at least k training rows, got {train_X.shape[0]}")
    if test_X.shape[1] != train_X.shape[1]:
        raise ValidationError("train and test feature dimensions differ")

    n_classes = int(train_y.max()) + 1
    out = np.empty(test_X.shape[0], dtype=train_y.dtype)
    for i, row in enumerate(test_X):
        # direct differences keep exact ties exact (identical points give 0)
        dist = np.sqrt(((train_X - row) ** 2).sum(axis=1))
        nn = np.argsort(dist, kind="stable")[:k]
        labs = train_y[nn]
        votes = np.bincount(labs, minlength=n_classes)
        sums = np.bincount(labs, weights=dist[nn], minlength=n_classes)
        tied = np.flatnonzero(votes == votes.max())
        out[i] = tied[np.argmin(sums[tied])]  # argmin keeps the lowest code on equal sums
    return out


def majority_class(y):
    return int(np.argmax(np.bincount(np.asarray(y))))


def stratified_folds(labels, folds, seed):
    """List of ``(train_idx, test_idx)`` with class proportions preserved."""
    y = getattr(labels, "labels", labels)
    counts = np.bincount(y)
    for cls, c in enumerate(counts):
        if 0 < c < folds:
            raise DataError(f"class {cls} has {c} instances, fewer than {folds} folds")
    skf = StratifiedKFold(n_splits=folds, shuffle=True, random_state=seed)
    return list(skf.split(np.zeros(len(y)), y))


def _standardize(train, test):
    mu = train.mean(axis=0)
    sd = train.std(axis=0)
    sd[sd == 0] = 1.0
    return (train - mu) / sd, (test - mu) / sd


def select_features(train_X, train_y, cfg: SelectorConfig, zeta: float, seed: int):
    """Mask the training block, run the selector, return ``(selected, completed)``."""
    buf, res = run_selection(train_X, LabelVector(train_y), cfg.replace(seed=seed), zeta)
    completed = buf.values.copy()
    completed[:, res.indices] = res.completed
    return list(res.selected), completed


def select_all(train_X, train_y, cfg, zeta, seed):
    """Identity selection: every column, unmasked; baseline for comparisons."""
    return list(range(train_X.shape[1])), np.asarray(train_X, dtype=float)


def _run_fold(args):
    X, y, train_idx, test_idx, cfg, zeta, knn_k, fold_seed, select_fn = args
    selected, completed = select_fn(X[train_idx], y[train_idx], cfg, zeta, fold_seed)
    if not selected:
        pred = np.full(len(test_idx), majority_class(y[train_idx]))
        return float(np.mean(pred == y[test_idx])), 0, True
    tr, te = _standardize(completed[:, selected], X[test_idx][:, selected])
    pred = knn_predict(tr, y[train_idx], te, knn_k)
    return float(np.mean(pred == y[test_idx])), len(selected), False


def cross_validate(
    table,
    labels,
    cfg: SelectorConfig | None = None,
    folds=5,
    repeats=10,
    seed=0,
    zeta=0.1,
    knn_k=3,
    jobs=1,
    select_fn=select_features,
) -> EvalReport:
    """Repeated stratified k-fold evaluation of the selector with KNN.

    Masking, completion and selection see only the training rows of each
    fold; the held-out fold is scored on its original values.  Folds with an
    empty selection fall back to majority-class prediction and are counted
    in ``fallback_folds``.
    """
    cfg = cfg or SelectorConfig()
    X = np.asarray(table, dtype=float)
    y = getattr(labels, "labels", np.asarray(labels))
    if X.shape[0] != y.shape[0]:
        raise DataError("table and labels have different row counts")
    tasks = []
    for r in range(repeats):
        for f, (tr, te) in enumerate(stratified_folds(y, folds, derive_seed(seed, "folds", r))):
            tasks.append((X, y, tr, te, cfg, zeta, knn_k, derive_seed(seed, "fold", r, f), select_fn))
    t0 = time.perf_counter()
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_fold, tasks))
    else:
        results = [_run_fold(t) for t in tasks]
    runtime = time.perf_counter() - t0
    accs, n_sel, fallback = zip(*results)
    method = "two_way" if cfg.mode == TWO_WAY else "three_way"
    return EvalReport.from_folds(accs, n_sel, runtime, sum(fallback), method, seed)


def run_ablation(table, labels, cfg: SelectorConfig | None = None, seed=0, **kwargs):
    """Evaluate the full three-way pipeline and its two-way ablation on identical folds and seeds."""
    cfg = cfg or SelectorConfig()
    three = cross_validate(table, labels, cfg.replace(mode="three_way"), seed=seed, **kwargs)
    two = cross_validate(table, labels, cfg.replace(mode=TWO_WAY), seed=seed, **kwargs)
    return three, two
