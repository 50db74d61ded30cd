"""Pure NumPy kernel implementations (fallback when the extension is absent).

Accumulation order in ``var1_recurrence`` and random-number consumption in
``run_walks`` deliberately mirror the Cython kernels element for element.
"""

from __future__ import annotations

import numpy as np


def var1_recurrence(coef: np.ndarray, innovations: np.ndarray) -> np.ndarray:
    """Lag-1 linear recurrence x(t) = x(t-1) @ coef + innovations(t).

    ``coef[j, i]`` is the weight of node j at t-1 on node i at t.
    Row 0 of the result equals ``innovations[0]``.
    """
    coef = np.ascontiguousarray(coef, dtype=np.float64)
    innovations = np.ascontiguousarray(innovations, dtype=np.float64)
    horizon, n = innovations.shape
    if coef.shape != (n, n):
        raise ValueError(f"coef shape {coef.shape} incompatible with {n} nodes")
    out = np.empty_like(innovations)
    out[0] = innovations[0]
    for t in range(1, horizon):
        acc = innovations[t].copy()
        prev = out[t - 1]
        for j in range(n):  # j-ordered accumulation matches the compiled kernel
            acc += prev[j] * coef[j]
        out[t] = acc
    return out


def run_walks(
    indptr: np.ndarray,
    parents: np.ndarray,
    cum_weights: np.ndarray,
    anomaly: int,
    restart_prob: float,
    max_steps: int,
    uniforms: np.ndarray,
) -> np.ndarray:
    """Backward random walks over an in-edge CSR structure.

    ``indptr[v]:indptr[v+1]`` indexes the parents of node v in ``parents``;
    ``cum_weights`` holds per-segment cumulative confidence sums. Each step
    consumes ``uniforms[w, s, 0]`` (restart draw) and ``uniforms[w, s, 1]``
    (transition draw). A restart teleports without recording a visit; a node
    without parents records a terminal visit and ends the walk.
    """
    n = len(indptr) - 1
    visits = np.zeros(n, dtype=np.int64)
    n_walks = uniforms.shape[0]
    for w in range(n_walks):
        cur = anomaly
        for s in range(max_steps):
            if uniforms[w, s, 0] < restart_prob:
                cur = anomaly
                continue
            lo, hi = indptr[cur], indptr[cur + 1]
            if lo == hi:
                visits[cur] += 1
                break
            total = cum_weights[hi - 1]
            u = uniforms[w, s, 1] * total
            k = int(np.searchsorted(cum_weights[lo:hi], u, side="right"))
            if k >= hi - lo:
                k = hi - lo - 1
            cur = int(parents[lo + k])
            visits[cur] += 1
    return visits
