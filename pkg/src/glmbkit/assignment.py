"""Ranked enumeration of survival/birth subsets and association maps."""

from __future__ import annotations

import heapq
import itertools
import math
from typing import Iterator, List, Optional, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment


def ranked_bernoulli_subsets(log_on, log_off, max_count: Optional[int] = None,
                             min_log_ratio: float = -math.inf
                             ) -> Iterator[Tuple[float, Tuple[bool, ...]]]:
    """Outcomes of independent Bernoulli items in non-increasing probability.

    Yields ``(log_prob, mask)`` where ``mask[i]`` says item ``i`` is on.
    Stops after ``max_count`` outcomes or once an outcome falls more than
    ``-min_log_ratio`` below the most likely one. Without limits all
    ``2**n`` outcomes are produced.
    """
    log_on = np.asarray(log_on, dtype=float)
    log_off = np.asarray(log_off, dtype=float)
    n = log_on.size
    best_on = log_on >= log_off
    best = float(np.sum(np.where(best_on, log_on, log_off)))
    flip_cost = np.abs(log_on - log_off)
    order = np.argsort(flip_cost, kind="stable")
    costs = flip_cost[order]
    count = 0

    def emit(flipped):
        mask = best_on.copy()
        for j in flipped:
            mask[order[j]] = ~mask[order[j]]
        return tuple(bool(v) for v in mask)

    yield best, emit(())
    count += 1
    if n == 0:
        return
    # heap of flip sets over the cost-sorted items, keyed by total cost
    heap = [(float(costs[0]), (0,))]
    while heap:
        if max_count is not None and count >= max_count:
            return
        cost, flipped = heapq.heappop(heap)
        if not math.isfinite(cost) or -cost < min_log_ratio:
            return
        yield best - cost, emit(flipped)
        count += 1
        j = flipped[-1]
        if j + 1 < n:
            heapq.heappush(heap, (cost + float(costs[j + 1]), flipped + (j + 1,)))
            heapq.heappush(heap, (cost - float(costs[j]) + float(costs[j + 1]),
                                  flipped[:-1] + (j + 1,)))


def _solve(cost: np.ndarray) -> Optional[Tuple[float, np.ndarray]]:
    try:
        rows, cols = linear_sum_assignment(cost)
    except ValueError:
        return None
    total = float(cost[rows, cols].sum())
    if not math.isfinite(total):
        return None
    return total, cols


def murty(cost: np.ndarray, k: int) -> List[Tuple[float, Tuple[int, ...]]]:
    """The ``k`` cheapest assignments of every row to a distinct column.

    Entries equal to ``inf`` are forbidden. Returns ``(total_cost, columns)``
    pairs in non-decreasing cost.
    """
    cost = np.asarray(cost, dtype=float)
    n = cost.shape[0]
    if n == 0:
        return [(0.0, ())]
    first = _solve(cost)
    if first is None:
        return []
    tie = itertools.count()
    heap = [(first[0], next(tie), cost, first[1])]
    out = []
    while heap and len(out) < k:
        total, _, C, cols = heapq.heappop(heap)
        out.append((total, tuple(int(c) for c in cols)))
        Cp = C.copy()
        for i in range(n):
            C2 = Cp.copy()
            C2[i, cols[i]] = np.inf
            sol = _solve(C2)
            if sol is not None:
                heapq.heappush(heap, (sol[0], next(tie), C2, sol[1]))
            keep = Cp[i, cols[i]]
            Cp[i, :] = np.inf
            Cp[:, cols[i]] = np.inf
            Cp[i, cols[i]] = keep
    return out


def exhaustive_assignments(cost: np.ndarray) -> List[Tuple[float, Tuple[int, ...]]]:
    """Every feasible assignment, sorted by cost then by columns."""
    cost = np.asarray(cost, dtype=float)
    n = cost.shape[0]
    options = [np.flatnonzero(np.isfinite(cost[i])).tolist() for i in range(n)]
    out = []

    def rec(i, used, acc, cols):
        if i == n:
            out.append((acc, tuple(cols)))
            return
        for j in options[i]:
            if j in used:
                continue
            used.add(j)
            cols.append(j)
            rec(i + 1, used, acc + cost[i, j], cols)
            cols.pop()
            used.discard(j)

    rec(0, set(), 0.0, [])
    out.sort()
    return out


def count_upper_bound(cost: np.ndarray) -> int:
    """Product of the finite entries per row; bounds the number of assignments."""
    cost = np.asarray(cost)
    return int(np.prod([max(1, int(np.count_nonzero(np.isfinite(r)))) for r in cost]))


def ranked_assignments(cost: np.ndarray, k: int, exhaustive_limit: int = 256
                       ) -> Tuple[List[Tuple[float, Tuple[int, ...]]], bool]:
    """Up to ``k`` cheapest assignments and whether any were cut off.

    Small problems are enumerated exhaustively; larger ones use Murty's
    algorithm.
    """
    if count_upper_bound(cost) <= exhaustive_limit:
        allsol = exhaustive_assignments(cost)
        return allsol[:k], len(allsol) > k
    best = murty(cost, k + 1)
    return best[:k], len(best) > k
