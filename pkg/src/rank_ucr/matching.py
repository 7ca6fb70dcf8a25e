"""Maximum-weight imperfect bipartite matching of N items onto K positions.

``solve`` pads the K x N problem with N - K zero-weight dummy positions and
runs a shortest-augmenting-path Hungarian method on the square problem. Among
all optimal assignments it returns the one whose ``item_at`` vector is
lexicographically smallest; ``brute_force`` enumerates ordered K-subsets and
applies the same rule, so the two can be compared exactly.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

# Ties are resolved on a scale-relative tolerance shared by both solvers.
TIE_TOL = 1e-12
BRUTE_FORCE_LIMIT = 10**6


@dataclass(frozen=True)
class Assignment:
    item_at: tuple[int, ...]
    total_weight: float

    @property
    def items(self) -> frozenset[int]:
        return frozenset(self.item_at)


def _check(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.ndim != 2 or w.shape[0] < 1 or w.shape[1] < 1:
        raise ValueError(f"weight matrix must be N x K with N, K >= 1, got shape {w.shape}")
    N, K = w.shape
    if K > N:
        raise ValueError(f"cannot fill K={K} positions from N={N} items")
    if not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite")
    return w


def _total(w: np.ndarray, item_at) -> float:
    total = 0.0
    for k, j in enumerate(item_at):
        total += w[j, k]
    return float(total)


def _tol(w: np.ndarray) -> float:
    return TIE_TOL * max(1.0, float(np.max(np.abs(w))))


def _hungarian(cost: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Min-cost perfect assignment on a square matrix.

    Returns (col_of_row, u, v) with u[i] + v[j] <= cost[i, j] everywhere and
    equality on the assignment (the optimal dual). Plain lists: the instances
    here are tiny and numpy call overhead dominates.
    """
    n = cost.shape[0]
    INF = math.inf
    c = cost.tolist()
    u = [0.0] * (n + 1)
    v = [0.0] * (n + 1)
    p = [0] * (n + 1)  # p[j] = row (1-based) matched to column j
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [INF] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            row = c[i0 - 1]
            ui0 = u[i0]
            delta = INF
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = row[j - 1] - ui0 - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    col_of_row = np.empty(n, dtype=int)
    for j in range(1, n + 1):
        col_of_row[p[j] - 1] = j - 1
    return col_of_row, np.array(u[1:]), np.array(v[1:])


def _perfect_matching(adj: list[list[int]], n_cols: int, fixed: dict[int, int]) -> dict[int, int] | None:
    """Kuhn's augmenting paths on the rows not pinned by ``fixed``."""
    match_col = [-1] * n_cols
    for r, col in fixed.items():
        match_col[col] = r
    blocked = set(fixed.values())

    def augment(r, seen):
        for col in adj[r]:
            if col in seen or col in blocked:
                continue
            seen.add(col)
            if match_col[col] == -1 or augment(match_col[col], seen):
                match_col[col] = r
                return True
        return False

    for r in range(len(adj)):
        if r not in fixed and not augment(r, set()):
            return None
    return {r: col for col, r in enumerate(match_col) if r != -1}


def solve(w) -> Assignment:
    """Maximise sum_k w[item_at[k], k] over distinct items.

    ``w`` is an N x K array (rows are items, columns positions).
    """
    w = _check(w)
    N, K = w.shape
    # rows = positions (K real, N-K dummy), cols = items; minimise cost
    shifted = w - w.min()
    cost = np.zeros((N, N))
    cost[:K, :] = -shifted.T
    col_of_row, u, v = _hungarian(cost)

    # Every optimal assignment is a perfect matching on the tight edges of
    # an optimal dual, so the lexicographic choice is made on that subgraph.
    tol = _tol(w)
    reduced = cost - u[:, None] - v[None, :]
    adj = [sorted(np.flatnonzero(reduced[r] <= tol).tolist()) for r in range(N)]
    for r in range(N):
        if col_of_row[r] not in adj[r]:
            adj[r].append(int(col_of_row[r]))
            adj[r].sort()

    fixed: dict[int, int] = {}
    current = {r: int(col_of_row[r]) for r in range(N)}
    for k in range(K):
        taken = set(fixed.values())
        for j in adj[k]:
            if j in taken:
                continue
            trial = {**fixed, k: j}
            if current[k] == j:
                fixed = trial
                break
            found = _perfect_matching(adj, N, trial)
            if found is not None:
                fixed, current = trial, found
                break
        else:  # pragma: no cover - the Hungarian matching is always feasible
            raise RuntimeError("tie-break search lost feasibility")
    item_at = tuple(fixed[k] for k in range(K))
    return Assignment(item_at, _total(w, item_at))


def n_ordered_subsets(N: int, K: int) -> int:
    return math.perm(N, K)


def brute_force(w) -> Assignment:
    """Exhaustive reference for :func:`solve` on small instances."""
    w = _check(w)
    N, K = w.shape
    if n_ordered_subsets(N, K) > BRUTE_FORCE_LIMIT:
        raise ValueError(f"{N}!/({N}-{K})! ordered subsets exceeds {BRUTE_FORCE_LIMIT}")
    cands = list(itertools.permutations(range(N), K))
    totals = [_total(w, c) for c in cands]
    best = max(totals)
    tol = _tol(w)
    # permutations() yields in lexicographic order
    for c, t in zip(cands, totals):
        if t >= best - tol:
            return Assignment(c, t)
    raise AssertionError("unreachable")
