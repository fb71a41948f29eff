"""Partial correlation and Fisher's Z conditional-independence test."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientSamplesError, SingularityError

_CLAMP = 1.0 - 1e-12
_RIDGE = 1e-8
_COND_LIMIT = 1e10


@dataclass(frozen=True)
class CITestResult:
    partial_corr: float
    statistic: float
    p_value: float
    independent: bool
    n: int
    cond_size: int
    degenerate: bool = False


@dataclass(frozen=True)
class RelevanceScore:
    dep_c: float
    dep_not_c: float
    p_value: float


def _as_block(x, y, z):
    cols = [np.asarray(x, dtype=float).ravel(), np.asarray(y, dtype=float).ravel()]
    if z is not None:
        z = np.asarray(z, dtype=float)
        if z.ndim == 1:
            z = z[:, None]
        cols.extend(z.T)
    return np.column_stack(cols)


def _partial_corr(x, y, z=None):
    """Return ``(r, degenerate)``; degenerate means x or y has zero variance."""
    data = _as_block(x, y, z)
    n, dim = data.shape
    cond_size = dim - 2
    if n < cond_size + 4:
        raise InsufficientSamplesError(f"{n} samples cannot support a conditioning set of size {cond_size}")
    centered = data - data.mean(axis=0)
    sd = np.sqrt(np.einsum("ij,ij->j", centered, centered) / (n - 1))
    if sd[0] == 0.0 or sd[1] == 0.0:
        return 0.0, True
    # constant conditioning columns carry no information; keep them at unit scale
    sd = np.where(sd > 0.0, sd, 1.0)
    std = centered / sd
    corr = std.T @ std / (n - 1)
    if np.linalg.cond(corr) > _COND_LIMIT:
        corr[np.diag_indices(dim)] += _RIDGE * np.trace(corr) / dim
    try:
        theta = np.linalg.inv(corr)
    except np.linalg.LinAlgError:
        raise SingularityError("covariance matrix is singular after ridge") from None
    denom = theta[0, 0] * theta[1, 1]
    if not np.isfinite(theta).all() or denom <= 0.0:
        raise SingularityError("covariance matrix is singular after ridge")
    r = -theta[0, 1] / math.sqrt(denom)
    return float(min(max(r, -_CLAMP), _CLAMP)), False


def partial_correlation(x, y, z=None) -> float:
    """Partial correlation of ``x`` and ``y`` given the columns of ``z``.

    Computed from the precision matrix of the correlation matrix of
    ``[x, y, z]`` and clamped to the open interval (-1, 1).  Zero-variance
    ``x`` or ``y`` gives 0.
    """
    return _partial_corr(x, y, z)[0]


def fisher_z_test(partial_corr: float, n: int, cond_size: int, mu: float = 0.05) -> CITestResult:
    dof = n - cond_size - 3
    if dof < 1:
        raise InsufficientSamplesError(f"n - |S| - 3 = {dof} < 1")
    if not abs(partial_corr) < 1.0:
        raise InsufficientSamplesError("|partial correlation| must be < 1")
    z = 0.5 * math.log((1.0 + partial_corr) / (1.0 - partial_corr))
    stat = math.sqrt(dof) * abs(z)
    p = math.erfc(stat / math.sqrt(2.0))
    return CITestResult(partial_corr, stat, p, p > mu, n, cond_size)


def ci_test(x, y, z=None, mu: float = 0.05) -> CITestResult:
    r, degenerate = _partial_corr(x, y, z)
    n = len(np.asarray(x).ravel())
    cond_size = 0 if z is None else (1 if np.ndim(z) == 1 else np.shape(z)[1])
    res = fisher_z_test(r, n, cond_size, mu)
    if degenerate:
        return CITestResult(0.0, 0.0, 1.0, True, n, cond_size, degenerate=True)
    return res


def dep_score(feature, labels, mu: float = 0.05) -> RelevanceScore:
    """Unconditional relevance of a feature to the class codes: 1 - p and p."""
    y = getattr(labels, "labels", labels)
    res = ci_test(feature, y, None, mu)
    p = res.p_value
    return RelevanceScore(1.0 - p, p, p)
