"""Latent factor completion of sparse feature buffers.

A rank-h model U ~ P Q^T is fitted to the known entries only, by
entry-wise SGD on the L2-regularised squared error, and then used to fill
the missing cells.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import _accel
from .datamodel import FeatureBuffer
from .errors import DivergenceError, ValidationError


@dataclass(frozen=True)
class LfaConfig:
    h: int = 10
    lam: float = 0.01
    eta: float = 0.01
    max_epochs: int = 1000
    tol: float = 1e-4
    seed: int = 0
    min_epochs: int = 50

    def __post_init__(self):
        if self.h < 1:
            raise ValidationError("latent dimension h must be >= 1")
        if self.lam < 0:
            raise ValidationError("regularisation lambda must be >= 0")
        if self.eta <= 0:
            raise ValidationError("learning rate eta must be > 0")
        if self.max_epochs < 1:
            raise ValidationError("max_epochs must be >= 1")
        if self.tol <= 0:
            raise ValidationError("tol must be > 0")
        if self.min_epochs < 0:
            raise ValidationError("min_epochs must be >= 0")

    def effective_rank(self, n_rows, n_cols) -> int:
        return min(self.h, n_rows, n_cols)

    def to_dict(self):
        return asdict(self)


@dataclass
class LatentFactors:
    P: np.ndarray
    Q: np.ndarray
    epochs: int = 0
    rmse_trace: tuple = ()

    def predict(self) -> np.ndarray:
        return self.P @ self.Q.T


def init_factors(n_rows, n_cols, rank, seed):
    rng = np.random.default_rng(seed)
    P = rng.uniform(0.0, 0.1, size=(n_rows, rank))
    Q = rng.uniform(0.0, 0.1, size=(n_cols, rank))
    return P, Q


def train(buffer: FeatureBuffer, cfg: LfaConfig, P0=None, Q0=None) -> LatentFactors:
    """Fit latent factors to the known entries of ``buffer``.

    Each epoch visits the known entries in a freshly shuffled (seeded) order.
    Training stops after ``cfg.max_epochs`` epochs or, once ``cfg.min_epochs``
    have run, when the epoch-over-epoch RMSE improvement on known entries
    drops below ``cfg.tol``.  The floor keeps the near-zero initialisation
    from being mistaken for convergence.  ``P0``/``Q0`` override the random
    initialisation.
    """
    rows, cols, vals = buffer.known_entries()
    if rows.size == 0:
        raise ValidationError("buffer has no known entries")
    n, m = buffer.shape
    rank = cfg.effective_rank(n, m)
    if P0 is None or Q0 is None:
        P, Q = init_factors(n, m, rank, cfg.seed)
    else:
        P = np.array(P0, dtype=float, order="C")
        Q = np.array(Q0, dtype=float, order="C")
        if P.shape != (n, Q.shape[1]) or Q.shape[0] != m:
            raise ValidationError("initial factor shapes do not match buffer")
    vals = np.ascontiguousarray(vals, dtype=float)
    rng = np.random.default_rng(cfg.seed + 1)

    initial = float(_accel.rmse(rows, cols, vals, P, Q))
    trace = [initial]
    prev = initial
    epoch = 0
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(rows.size).astype(np.int64)
        _accel.sgd_epoch(rows, cols, vals, order, P, Q, float(cfg.eta), float(cfg.lam))
        cur = float(_accel.rmse(rows, cols, vals, P, Q))
        trace.append(cur)
        if not np.isfinite(cur) or not (np.isfinite(P).all() and np.isfinite(Q).all()):
            raise DivergenceError(epoch, cur)
        if initial > 0 and cur > 10.0 * initial:
            raise DivergenceError(epoch, cur)
        if epoch >= cfg.min_epochs and prev - cur < cfg.tol:
            break
        prev = cur
    return LatentFactors(P, Q, epoch, tuple(trace))


def complete(buffer: FeatureBuffer, factors: LatentFactors) -> np.ndarray:
    """Dense N x L block: known cells kept, missing cells predicted."""
    n, m = buffer.shape
    if factors.P.shape[0] != n or factors.Q.shape[0] != m or factors.P.shape[1] != factors.Q.shape[1]:
        raise ValidationError(
            f"factor shapes {factors.P.shape}/{factors.Q.shape} do not match buffer {buffer.shape}"
        )
    out = np.where(buffer.mask, buffer.values, factors.predict())
    if not np.isfinite(out).all():
        raise DivergenceError(factors.epochs, float("nan"))
    return out


def rmse_known(buffer: FeatureBuffer, factors: LatentFactors) -> float:
    rows, cols, vals = buffer.known_entries()
    if rows.size == 0:
        raise ValidationError("buffer has no known entries")
    if factors.P.shape[0] != buffer.n_rows or factors.Q.shape[0] != buffer.n_cols:
        raise ValidationError("factor shapes do not match buffer")
    return float(_accel.rmse_numpy(rows, cols, vals, factors.P, factors.Q))


def fill(buffer: FeatureBuffer, cfg: LfaConfig) -> tuple[np.ndarray, LatentFactors | None]:
    """Train and complete in one step; a fully known buffer passes through."""
    if buffer.mask.all():
        return buffer.values.copy(), None
    factors = train(buffer, cfg)
    return complete(buffer, factors), factors


def entry_loss(f, p, q, lam):
    """Regularised loss of one known entry ``f`` given its factor rows."""
    err = f - p @ q
    return 0.5 * err**2 + 0.5 * lam * (p @ p + q @ q)


def entry_gradients(f, p, q, lam):
    """Analytic gradients of :func:`entry_loss` with respect to ``p`` and ``q``."""
    err = f - p @ q
    return -err * q + lam * p, -err * p + lam * q


def sgd_step(f, p, q, eta, lam):
    """Single coupled update on one entry; returns new ``(p, q)``."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    err = f - p @ q
    return p + eta * (q * err - lam * p), q + eta * (p * err - lam * q)
