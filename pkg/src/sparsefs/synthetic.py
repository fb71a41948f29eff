"""Planted-signal datasets with known ground truth."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._rng import make_rng
from .datamodel import LabelVector
from .errors import ValidationError


@dataclass(frozen=True)
class GroundTruth:
    relevant: list
    duplicates: dict  # duplicate column -> source column
    noise: list
    weights: list

    def groups(self):
        """Relevance groups: each relevant column together with its duplicates."""
        out = {r: [r] for r in self.relevant}
        for dup, src in sorted(self.duplicates.items()):
            out[src].append(dup)
        return [out[r] for r in self.relevant]

    def to_dict(self):
        return {
            "relevant": list(self.relevant),
            "duplicates": {str(k): v for k, v in sorted(self.duplicates.items())},
            "noise": list(self.noise),
            "weights": list(self.weights),
        }


def make_synthetic(n, d, n_relevant, n_duplicates=0, noise_sigma=0.5, seed=0, jitter=1e-3, n_classes=2):
    """Generate ``(table, labels, truth)``.

    Relevant columns are standard normal; the class is the sign (or argmax,
    for more than two classes) of a random linear combination of them plus
    Gaussian noise of scale ``noise_sigma``.  Duplicates copy relevant
    columns with ``jitter``-scale noise added; every other column is pure
    noise.  Column positions are shuffled so signal arrives at random times.
    """
    if n < 2 or d < 1:
        raise ValidationError("need n >= 2 and d >= 1")
    if n_relevant < 0 or n_duplicates < 0 or n_relevant + n_duplicates > d:
        raise ValidationError(f"n_relevant + n_duplicates = {n_relevant + n_duplicates} exceeds d = {d}")
    if n_duplicates and not n_relevant:
        raise ValidationError("duplicates need at least one relevant feature")
    if n_classes < 2:
        raise ValidationError("n_classes must be >= 2")

    rng = make_rng(seed, "synthetic")
    X = rng.standard_normal((n, d))
    perm = rng.permutation(d)
    relevant = sorted(int(i) for i in perm[:n_relevant])
    dup_cols = [int(i) for i in perm[n_relevant:n_relevant + n_duplicates]]
    duplicates = {c: relevant[i % n_relevant] for i, c in enumerate(dup_cols)}
    noise = sorted(int(i) for i in perm[n_relevant + n_duplicates:])

    if n_relevant:
        signs = rng.choice([-1.0, 1.0], size=(n_relevant, n_classes - 1 if n_classes == 2 else n_classes))
        W = signs * rng.uniform(0.5, 1.5, size=signs.shape)
        score = X[:, relevant] @ W + noise_sigma * rng.standard_normal((n, W.shape[1]))
        y = (score[:, 0] > 0).astype(np.int64) if n_classes == 2 else np.argmax(score, axis=1)
        weights = W[:, 0].tolist()
    else:
        y = rng.integers(0, n_classes, size=n)
        weights = []
    # guarantee every class is present
    for c in range(n_classes):
        if not np.any(y == c):
            y[rng.integers(n)] = c

    for c, src in duplicates.items():
        X[:, c] = X[:, src] + jitter * rng.standard_normal(n)

    truth = GroundTruth(relevant, duplicates, noise, weights)
    return X, LabelVector(y, tuple(range(n_classes))), truth
