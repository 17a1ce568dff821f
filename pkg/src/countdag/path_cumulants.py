"""Recovery of path-count summaries from cumulant slices.

The order-n slice of a pair decomposes as a known positive-integer combination
of per-path-multiplicity aggregates: C^(n) = sum_k S(n-1, k) * lambda_k, where
S(r, k) counts the ordered surjections of r slots onto k parts.  The system is
lower triangular, so the lambda vector is recovered exactly by forward
substitution.  Whether each lambda_k is zero is decided by a bootstrap test
with a centered kernel-density null.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.stats import gaussian_kde

from .cumulants import (
    MAX_ORDER,
    CumulantSlices,
    pair_moment_keys,
    pair_moment_products,
    slice_partition_terms,
    slices_from_moments,
)
from .simulator import CountDataset

MAX_SURJECTION_ORDER = 16
KDE_GRID_SIZE = 2048
KDE_GRID_PAD_BANDWIDTHS = 6.0


def surjection_count(r: int, k: int) -> int:
    """Ordered surjections of r labeled slots onto k labeled parts.

    Inclusion-exclusion: sum_t (-1)^t C(k, t) (k - t)^r.  Equals the sum of
    multinomial coefficients over all positive compositions m_1+...+m_k = r.
    """
    if not (1 <= r <= MAX_SURJECTION_ORDER and 1 <= k <= MAX_SURJECTION_ORDER):
        raise ValueError(f"r and k must lie in [1, {MAX_SURJECTION_ORDER}]")
    return sum((-1) ** t * math.comb(k, t) * (k - t) ** r for t in range(k + 1))


@dataclass(frozen=True)
class SurjectionTable:
    """Table S[r][k] of surjection counts for 1 <= k <= r <= max_order."""

    max_order: int

    def __post_init__(self):
        if not (1 <= self.max_order <= MAX_SURJECTION_ORDER):
            raise ValueError(f"max_order must lie in [1, {MAX_SURJECTION_ORDER}]")
        rows = [[surjection_count(r, k) for k in range(1, r + 1)]
                for r in range(1, self.max_order + 1)]
        object.__setattr__(self, "_rows", rows)

    def entry(self, r: int, k: int) -> int:
        if not (1 <= r <= self.max_order and k >= 1):
            raise ValueError(f"entry ({r}, {k}) out of table range")
        if k > r:
            return 0
        return self._rows[r - 1][k - 1]


def slices_from_lambda(lambdas) -> np.ndarray:
    """Forward composition: slice values for orders 2..K+1 from lambda_1..K."""
    lam = np.asarray(lambdas, dtype=float)
    K = lam.size
    out = np.empty(K)
    for n in range(2, K + 2):
        r = n - 1
        out[n - 2] = sum(surjection_count(r, k) * lam[k - 1] for k in range(1, r + 1))
    return out


def solve_lambda(slices: CumulantSlices, K: int) -> np.ndarray:
    """Recover lambda_1..K from slice orders 2..K+1 by forward substitution."""
    if K < 1:
        raise ValueError("K must be positive")
    if slices.max_order < K + 1:
        raise ValueError(
            f"slices carry orders up to {slices.max_order}; need {K + 1} for K={K}"
        )
    lam = np.empty(K)
    for n in range(2, K + 2):
        r = n - 1
        acc = slices.order(n)
        for k in range(1, r):
            acc -= surjection_count(r, k) * lam[k - 1]
        lam[r - 1] = acc / math.factorial(r)
    return lam


@dataclass(frozen=True)
class TestConfig:
    """Settings for the bootstrap zero-tests of the path summaries."""

    max_order: int = 4
    num_resamples: int = 200
    significance: float = 0.05
    threshold: float = 0.1
    threshold_fallback: bool = True

    def __post_init__(self):
        if not (1 <= self.max_order <= MAX_ORDER - 1):
            raise ValueError(f"max_order must lie in [1, {MAX_ORDER - 1}]")
        if self.num_resamples < 2:
            raise ValueError("num_resamples must be at least 2")
        if not (0.0 < self.significance < 1.0):
            raise ValueError("significance must lie in (0, 1)")
        if self.threshold < 0:
            raise ValueError("threshold must be non-negative")


class ZeroTestResult(NamedTuple):
    lambda_hat: float
    p_value: float
    degenerate: bool


@dataclass(frozen=True)
class LambdaProfile:
    """Estimated lambda_1..K for an ordered pair, with bootstrap zero-tests."""

    pair: tuple[int, int]
    lambdas: np.ndarray
    p_values: np.ndarray
    is_zero: tuple[bool, ...]
    degenerate: tuple[bool, ...]

    @property
    def max_order(self) -> int:
        return self.lambdas.size

    def order(self, k: int) -> ZeroTestResult:
        if not (1 <= k <= self.max_order):
            raise ValueError(f"k must lie in [1, {self.max_order}]")
        return ZeroTestResult(
            float(self.lambdas[k - 1]), float(self.p_values[k - 1]), self.degenerate[k - 1]
        )


def _lambda_from_moment_means(means, keys, pair, K):
    moments = dict(zip(keys, means))
    slices = slices_from_moments(moments, pair, K + 1)
    return solve_lambda(slices, K)


def _bootstrap_lambda(
    data: CountDataset, i: int, j: int, K: int, num_resamples: int, rng
) -> tuple[np.ndarray, np.ndarray]:
    """Point estimate of lambda_1..K plus full-row bootstrap replicates.

    Resampling draws whole rows with replacement, preserving the dependence of
    (X_i, X_j); replicates are weighted means of precomputed row products, so
    each costs one bincount and one small matrix product.
    """
    warm = slice_partition_terms(K + 1)  # populate caches outside the loop
    del warm
    products = pair_moment_products(data, i, j, K + 1)
    keys = pair_moment_keys(K + 1)
    m = data.num_samples
    exact = [math.fsum(products[:, t]) / m for t in range(len(keys))]
    lam_hat = _lambda_from_moment_means(exact, keys, (i, j), K)
    reps = np.empty((num_resamples, K))
    for b in range(num_resamples):
        idx = rng.integers(0, m, size=m)
        weights = np.bincount(idx, minlength=m).astype(np.float64)
        means = weights @ products / m
        reps[b] = _lambda_from_moment_means(means, keys, (i, j), K)
    return lam_hat, reps


def _kde_tail_pvalue(replicates: np.ndarray, threshold: float) -> float:
    """Two-sided tail mass beyond ``threshold`` of the mean-centered KDE null.

    Gaussian kernels with Silverman bandwidth; the density is integrated on a
    fixed grid spanning the centered replicates plus six bandwidths each side.
    """
    centered = replicates - replicates.mean()
    kde = gaussian_kde(centered, bw_method="silverman")
    bw = math.sqrt(float(kde.covariance[0, 0]))
    lo = centered.min() - KDE_GRID_PAD_BANDWIDTHS * bw
    hi = centered.max() + KDE_GRID_PAD_BANDWIDTHS * bw
    grid = np.linspace(lo, hi, KDE_GRID_SIZE)
    dens = kde(grid)
    step = grid[1] - grid[0]
    cdf = np.concatenate(([0.0], np.cumsum((dens[1:] + dens[:-1]) * 0.5 * step)))
    total = cdf[-1]
    t = abs(threshold)
    upper = np.interp(t, grid, cdf, left=0.0, right=total)
    lower = np.interp(-t, grid, cdf, left=0.0, right=total)
    p = 1.0 - (upper - lower) / total
    return float(min(max(p, 0.0), 1.0))


def bootstrap_zero_test(
    data: CountDataset, i: int, j: int, k: int, cfg: TestConfig, rng: np.random.Generator
) -> ZeroTestResult:
    """Test H0: lambda_k(i -> j) = 0 against the centered bootstrap null."""
    if not (1 <= k <= cfg.max_order):
        raise ValueError(f"k must lie in [1, {cfg.max_order}]")
    lam_hat, reps = _bootstrap_lambda(data, i, j, cfg.max_order, cfg.num_resamples, rng)
    return _column_zero_test(lam_hat, reps, k)


def _column_zero_test(lam_hat: np.ndarray, reps: np.ndarray, k: int) -> ZeroTestResult:
    stat = float(lam_hat[k - 1])
    col = reps[:, k - 1]
    if np.ptp(col) == 0.0:
        return ZeroTestResult(stat, 1.0 if stat == 0.0 else 0.0, True)
    return ZeroTestResult(stat, _kde_tail_pvalue(col, stat), False)


def lambda_profile(
    data: CountDataset, i: int, j: int, cfg: TestConfig, rng: np.random.Generator
) -> LambdaProfile:
    """Estimate lambda_1..K for the ordered pair (i, j) and test each for zero.

    All orders share one set of bootstrap resamples, so the profile is a
    consistent joint summary of the pair.
    """
    lam_hat, reps = _bootstrap_lambda(data, i, j, cfg.max_order, cfg.num_resamples, rng)
    results = [_column_zero_test(lam_hat, reps, k) for k in range(1, cfg.max_order + 1)]
    p_values = np.array([r.p_value for r in results])
    return LambdaProfile(
        pair=(i, j),
        lambdas=lam_hat,
        p_values=p_values,
        is_zero=tuple(bool(p >= cfg.significance) for p in p_values),
        degenerate=tuple(r.degenerate for r in results),
    )
