"""Hot kernels with a numba path and a pure-numpy fallback.

Set ``SPARSEFS_DISABLE_NUMBA=1`` to force the fallback (it is also used
automatically when numba cannot be imported).  Both paths take the same
arguments, update arrays in place and consume random numbers drawn by the
caller, so results agree across backends.
"""
import math
import os

import numpy as np

_disabled = os.environ.get("SPARSEFS_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if _disabled:
        raise ImportError("disabled by SPARSEFS_DISABLE_NUMBA")
    from numba import njit

    NUMBA_ENABLED = True
except ImportError:
    NUMBA_ENABLED = False


def sgd_epoch_numpy(rows, cols, vals, order, P, Q, eta, lam):
    """One pass of entry-wise SGD over the known entries, visiting them in ``order``."""
    for idx in order:
        n = rows[idx]
        j = cols[idx]
        p = P[n].copy()
        q = Q[j]
        err = vals[idx] - p @ q
        P[n] = p + eta * (q * err - lam * p)
        Q[j] = q + eta * (p * err - lam * q)


def rmse_numpy(rows, cols, vals, P, Q):
    pred = np.einsum("ik,ik->i", P[rows], Q[cols])
    err = vals - pred
    return float(np.sqrt(np.mean(err * err)))


def region_cost_numpy(dep, rel, costs, a, b):
    # costs = (r_pp, r_bp, r_ep, r_pe, r_be, r_ee)
    pos = dep >= a
    neg = dep <= b
    bnd = ~(pos | neg)
    irr = ~rel
    return float(
        costs[0] * np.count_nonzero(pos & rel)
        + costs[1] * np.count_nonzero(bnd & rel)
        + costs[2] * np.count_nonzero(neg & rel)
        + costs[3] * np.count_nonzero(pos & irr)
        + costs[4] * np.count_nonzero(bnd & irr)
        + costs[5] * np.count_nonzero(neg & irr)
    )


def _make_anneal(region_cost):
    def anneal(dep, rel, costs, a0, b0, temps, k, steps, uniforms, chain, trace):
        """Metropolis search over (alpha, beta) driven by pre-drawn random pools.

        ``steps`` holds Gaussian proposal offsets consumed in order (an
        invalid proposal is redrawn from the next row); ``uniforms`` holds one
        acceptance draw per proposal.  ``trace[level]`` receives the best cost
        after each temperature level.  Returns (best_a, best_b, best_cost,
        exhausted) where ``exhausted`` flags that ``steps`` ran out.
        """
        cur_a = a0
        cur_b = b0
        cur = region_cost(dep, rel, costs, cur_a, cur_b)
        best_a = cur_a
        best_b = cur_b
        best = cur
        pos = 0
        u_pos = 0
        n_steps = steps.shape[0]
        for level in range(temps.shape[0]):
            t = temps[level]
            for _ in range(chain):
                na = cur_a
                nb = cur_b
                valid = False
                while not valid:
                    if pos >= n_steps:
                        return best_a, best_b, best, True
                    na = cur_a + steps[pos, 0]
                    nb = cur_b + steps[pos, 1]
                    pos += 1
                    valid = 0.0 <= nb and nb < na and na <= 1.0
                new = region_cost(dep, rel, costs, na, nb)
                diff = new - cur
                u = uniforms[u_pos]
                u_pos += 1
                if diff <= 0.0 or u < math.exp(-diff / (k * t)):
                    cur_a = na
                    cur_b = nb
                    cur = new
                    if cur < best:
                        best_a = cur_a
                        best_b = cur_b
                        best = cur
            trace[level] = best
        return best_a, best_b, best, False

    return anneal


anneal_numpy = _make_anneal(region_cost_numpy)

if NUMBA_ENABLED:

    @njit(cache=True)
    def sgd_epoch_numba(rows, cols, vals, order, P, Q, eta, lam):
        h = P.shape[1]
        for t in range(order.shape[0]):
            idx = order[t]
            n = rows[idx]
            j = cols[idx]
            pred = 0.0
            for k in range(h):
                pred += P[n, k] * Q[j, k]
            err = vals[idx] - pred
            for k in range(h):
                p = P[n, k]
                q = Q[j, k]
                # q update uses the pre-step p (simultaneous form)
                P[n, k] = p + eta * (q * err - lam * p)
                Q[j, k] = q + eta * (p * err - lam * q)

    @njit(cache=True)
    def rmse_numba(rows, cols, vals, P, Q):
        h = P.shape[1]
        total = 0.0
        for i in range(rows.shape[0]):
            pred = 0.0
            for k in range(h):
                pred += P[rows[i], k] * Q[cols[i], k]
            e = vals[i] - pred
            total += e * e
        return np.sqrt(total / rows.shape[0])

    @njit(cache=True)
    def region_cost_numba(dep, rel, costs, a, b):
        total = 0.0
        for i in range(dep.shape[0]):
            d = dep[i]
            if d >= a:
                total += costs[0] if rel[i] else costs[3]
            elif d <= b:
                total += costs[2] if rel[i] else costs[5]
            else:
                total += costs[1] if rel[i] else costs[4]
        return total

    anneal_numba = njit(cache=True)(_make_anneal(region_cost_numba))

    sgd_epoch = sgd_epoch_numba
    rmse = rmse_numba
    anneal = anneal_numba
else:
    sgd_epoch_numba = rmse_numba = region_cost_numba = anneal_numba = None
    sgd_epoch = sgd_epoch_numpy
    rmse = rmse_numpy
    anneal = anneal_numpy


def backend():
    return "numba" if NUMBA_ENABLED else "numpy"
