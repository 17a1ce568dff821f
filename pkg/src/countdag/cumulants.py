"""Plug-in estimation of joint cumulants from count data.

Cumulants are estimated through the set-partition expansion with raw moments
replaced by empirical means (1/m normalization).  Point estimates accumulate
moments with exact compensated summation; order-5 products of counts near 1e3
exceed what naive single-precision accumulation can carry.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .simulator import CountDataset

MAX_ORDER = 12  # Bell(12) = 4,213,597 partitions is the practical ceiling

SetPartition = tuple[tuple[int, ...], ...]

_partition_cache: dict[int, tuple[SetPartition, ...]] = {}
_slice_terms_cache: dict[int, tuple[tuple[int, tuple[tuple[int, int], ...]], ...]] = {}
_cache_lock = threading.Lock()


def set_partitions(k: int) -> tuple[SetPartition, ...]:
    """All partitions of positions {0, ..., k-1}; len equals the k-th Bell number.

    Blocks are sorted tuples ordered by smallest element; the listing is
    deterministic and cached process-wide.
    """
    if not (1 <= k <= MAX_ORDER):
        raise ValueError(f"k must lie in [1, {MAX_ORDER}], got {k}")
    got = _partition_cache.get(k)
    if got is not None:
        return got
    with _cache_lock:
        got = _partition_cache.get(k)
        if got is not None:
            return got
        parts: list[list[list[int]]] = [[[0]]]
        for e in range(1, k):
            nxt: list[list[list[int]]] = []
            for p in parts:
                for b in range(len(p)):
                    nxt.append([blk + [e] if t == b else blk for t, blk in enumerate(p)])
                nxt.append(p + [[e]])
            parts = nxt
        frozen = tuple(tuple(tuple(b) for b in p) for p in parts)
        _partition_cache[k] = frozen
        return frozen


def _moment(data: np.ndarray, cols: Sequence[int]) -> float:
    """Exact empirical mean of the product of the given columns."""
    prod = data[:, cols[0]].astype(np.float64)
    for c in cols[1:]:
        prod = prod * data[:, c]
    return math.fsum(prod) / data.shape[0]


def joint_cumulant(data: CountDataset, indices: Sequence[int]) -> float:
    """Plug-in joint cumulant of the columns named by ``indices`` (a multiset)."""
    idx = [int(c) for c in indices]
    if not (1 <= len(idx) <= MAX_ORDER):
        raise ValueError(f"need between 1 and {MAX_ORDER} indices, got {len(idx)}")
    for c in idx:
        if not (0 <= c < data.num_columns):
            raise ValueError(f"column index {c} out of range")
    if data.num_samples < 1:
        raise ValueError("dataset is empty")

    values = data.values
    moments: dict[tuple[int, ...], float] = {}

    def block_moment(block: tuple[int, ...]) -> float:
        key = tuple(sorted(idx[t] for t in block))
        got = moments.get(key)
        if got is None:
            got = moments[key] = _moment(values, key)
        return got

    total = 0.0
    for partition in set_partitions(len(idx)):
        L = len(partition)
        term = -math.factorial(L - 1) if L % 2 == 0 else math.factorial(L - 1)
        acc = float(term)
        for block in partition:
            acc *= block_moment(block)
        total += acc
    return total


@dataclass(frozen=True)
class CumulantSlices:
    """Estimated kappa(X_i, X_j, ..., X_j) for orders 2..max_order of one ordered pair."""

    pair: tuple[int, int]
    values: np.ndarray  # values[t] is the order-(t+2) estimate

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("values must be a non-empty vector")
        object.__setattr__(self, "values", arr)

    @property
    def max_order(self) -> int:
        return self.values.size + 1

    def order(self, n: int) -> float:
        if not (2 <= n <= self.max_order):
            raise ValueError(f"order {n} not in [2, {self.max_order}]")
        return float(self.values[n - 2])


def slice_partition_terms(n: int) -> tuple[tuple[int, tuple[tuple[int, int], ...]], ...]:
    """Aggregated partition expansion of kappa(X_i, X_j, ..., X_j) at order ``n``.

    Each entry is (integer coefficient, block moment keys); a key (p, q) stands
    for the raw moment E[X_i^p X_j^q].  Partitions sharing a block-shape are
    merged, which keeps evaluation cheap inside bootstrap loops.
    """
    got = _slice_terms_cache.get(n)
    if got is not None:
        return got
    agg: dict[tuple[tuple[int, int], ...], int] = {}
    for partition in set_partitions(n):
        L = len(partition)
        coef = -math.factorial(L - 1) if L % 2 == 0 else math.factorial(L - 1)
        keys = tuple(
            sorted((1, len(b) - 1) if 0 in b else (0, len(b)) for b in partition)
        )
        agg[keys] = agg.get(keys, 0) + coef
    frozen = tuple((c, k) for k, c in sorted(agg.items()))
    with _cache_lock:
        _slice_terms_cache.setdefault(n, frozen)
    return _slice_terms_cache[n]


def pair_moment_keys(max_order: int) -> tuple[tuple[int, int], ...]:
    """Moment keys (p, q) needed for slices of orders 2..max_order."""
    keys = [(1, q) for q in range(0, max_order)]
    keys += [(0, q) for q in range(1, max_order)]
    return tuple(keys)


def pair_moment_products(data: CountDataset, i: int, j: int, max_order: int) -> np.ndarray:
    """Per-row products X_i^p * X_j^q for every key of ``pair_moment_keys``.

    Returns an (m, num_keys) float matrix; column means are the raw moments.
    Bootstrap replicates are weighted means of these same rows.
    """
    xi = data.column(i).astype(np.float64)
    xj = data.column(j).astype(np.float64)
    cols = []
    for p, q in pair_moment_keys(max_order):
        col = xi.copy() if p else np.ones_like(xi)
        for _ in range(q):
            col = col * xj
        cols.append(col)
    return np.column_stack(cols)


def slices_from_moments(
    moments: dict[tuple[int, int], float], pair: tuple[int, int], max_order: int
) -> CumulantSlices:
    """Assemble slice estimates from raw-moment values E[X_i^p X_j^q]."""
    out = np.empty(max_order - 1)
    for n in range(2, max_order + 1):
        total = 0.0
        for coef, keys in slice_partition_terms(n):
            acc = float(coef)
            for key in keys:
                acc *= moments[key]
            total += acc
        out[n - 2] = total
    return CumulantSlices(pair, out)


def cumulant_slices(data: CountDataset, i: int, j: int, max_order: int) -> CumulantSlices:
    """Slice estimates kappa(X_i, X_j * (n-1)) for n = 2..max_order."""
    if not (2 <= max_order <= MAX_ORDER):
        raise ValueError(f"max_order must lie in [2, {MAX_ORDER}], got {max_order}")
    for c in (i, j):
        if not (0 <= c < data.num_columns):
            raise ValueError(f"column index {c} out of range")
    products = pair_moment_products(data, i, j, max_order)
    m = data.num_samples
    moments = {
        key: math.fsum(products[:, t]) / m
        for t, key in enumerate(pair_moment_keys(max_order))
    }
    return slices_from_moments(moments, (i, j), max_order)
