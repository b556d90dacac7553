"""Pure-Python/numpy versions of the compiled kernels in ``_kernels.pyx``.

Both modules expose the same three functions with the same arithmetic
order, so results agree bit for bit.
"""

from itertools import combinations

import numpy as np

GRIM, ALWAYS_DEFECT, TIT_FOR_TAT = 0, 1, 2

_TOL = 1e-9


def mwu_exact_counts(ranks, n_a, rank_sum):
    """Enumerate every size-``n_a`` subset of the pooled ``ranks``.

    Returns ``(n_ge, n_le, total)``: how many subsets have a rank sum at
    least / at most ``rank_sum`` (within 1e-9), and how many there are.
    """
    ranks = [float(r) for r in ranks]
    n_ge = n_le = total = 0
    for comb in combinations(ranks, n_a):
        s = 0.0
        for r in comb:
            s += r
        if s >= rank_sum - _TOL:
            n_ge += 1
        if s <= rank_sum + _TOL:
            n_le += 1
        total += 1
    return n_ge, n_le, total


def nearest_centroid(X, C):
    """Label of the closest row of ``C`` for every row of ``X`` and the
    squared distance to it. Ties go to the lower centroid index."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    C = np.ascontiguousarray(C, dtype=np.float64)
    n, d = X.shape
    dist = np.zeros((n, C.shape[0]))
    # accumulate dimension by dimension to match the compiled loop order
    for j in range(d):
        diff = X[:, j, None] - C[None, :, j]
        dist += diff * diff
    labels = np.argmin(dist, axis=1).astype(np.int64)
    return labels, dist[np.arange(n), labels]


def play_supergame(kinds, partners, n_rounds):
    """Play ``n_rounds`` of simultaneous moves for every subject.

    ``kinds[i]`` is subject ``i``'s strategy code and ``partners[i]`` the
    index of their partner. Returns an ``(n, n_rounds)`` int8 array with 1
    for cooperate.
    """
    kinds = np.asarray(kinds, dtype=np.int64)
    partners = np.asarray(partners, dtype=np.int64)
    n = kinds.shape[0]
    actions = np.zeros((n, n_rounds), dtype=np.int8)
    triggered = [False] * n
    for r in range(n_rounds):
        for i in range(n):
            k = kinds[i]
            if k == GRIM:
                actions[i, r] = 0 if triggered[i] else 1
            elif k == TIT_FOR_TAT:
                actions[i, r] = 1 if r == 0 else actions[partners[i], r - 1]
            else:
                actions[i, r] = 0
        for i in range(n):
            if actions[partners[i], r] == 0:
                triggered[i] = True
    return actions
