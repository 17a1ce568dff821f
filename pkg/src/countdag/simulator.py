"""Count-data generation under the branching (thinning + Poisson noise) model.

Each variable is the sum of binomially thinned copies of its parents plus an
independent Poisson innovation.  Also provides the random benchmark-graph
generator and the distribution-equivalent reversed two-variable model used as
a non-identifiability oracle.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .graph import Dag


class DataFormatError(ValueError):
    """Malformed dataset file (non-integer, negative, or ragged rows)."""


class DegenerateModelError(ValueError):
    """The requested model has no probability mass to rearrange."""


@dataclass(frozen=True)
class CountDataset:
    """An m x p matrix of non-negative integer observations."""

    values: np.ndarray
    column_names: tuple[str, ...] | None = None

    def __post_init__(self):
        arr = np.asarray(self.values)
        if arr.ndim != 2:
            raise ValueError(f"values must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 1:
            raise ValueError("dataset must contain at least one row")
        if not np.issubdtype(arr.dtype, np.integer):
            if not np.all(arr == np.floor(arr)):
                raise ValueError("entries must be integer-valued")
            arr = arr.astype(np.int64)
        if arr.size and arr.min() < 0:
            raise ValueError("entries must be non-negative")
        object.__setattr__(self, "values", np.ascontiguousarray(arr, dtype=np.int64))
        if self.column_names is not None:
            names = tuple(str(c) for c in self.column_names)
            if len(names) != arr.shape[1]:
                raise ValueError("column_names length must match column count")
            object.__setattr__(self, "column_names", names)

    @property
    def num_samples(self) -> int:
        return self.values.shape[0]

    @property
    def num_columns(self) -> int:
        return self.values.shape[1]

    @property
    def names(self) -> tuple[str, ...]:
        if self.column_names is not None:
            return self.column_names
        return tuple(f"X{k + 1}" for k in range(self.num_columns))

    def column(self, i: int) -> np.ndarray:
        return self.values[:, i]

    def to_csv(self, path) -> None:
        """Header row of column names, then one comma-separated integer row per sample."""
        with open(path, "w", newline="") as fh:
            fh.write(",".join(self.names) + "\n")
            np.savetxt(fh, self.values, fmt="%d", delimiter=",")

    @classmethod
    def from_csv(cls, path) -> "CountDataset":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DataFormatError(f"{path}: empty file") from None
            names = tuple(s.strip() for s in header)
            width = len(names)
            rows: list[list[int]] = []
            for r, rec in enumerate(reader, start=1):
                if not rec:
                    continue
                if len(rec) != width:
                    raise DataFormatError(
                        f"{path}: row {r} has {len(rec)} fields, expected {width}"
                    )
                vals = []
                for c, cell in enumerate(rec):
                    try:
                        v = int(cell)
                    except ValueError:
                        raise DataFormatError(
                            f"{path}: row {r}, column {names[c]!r}: "
                            f"not an integer: {cell!r}"
                        ) from None
                    if v < 0:
                        raise DataFormatError(
                            f"{path}: row {r}, column {names[c]!r}: negative value {v}"
                        )
                    vals.append(v)
                rows.append(vals)
        if not rows:
            raise DataFormatError(f"{path}: no data rows")
        return cls(np.array(rows, dtype=np.int64), names)


@dataclass(frozen=True)
class SimConfig:
    """Benchmark generation settings; defaults mirror the synthetic protocol."""

    sample_size: int = 30000
    num_vertices: int = 10
    expected_indegree: float = 3.0
    alpha_range: tuple[float, float] = (0.1, 0.5)
    mu_range: tuple[float, float] = (1.0, 3.0)
    rng_seed: int = 0

    def __post_init__(self):
        if self.sample_size < 1:
            raise ValueError("sample_size must be positive")
        if self.num_vertices < 1:
            raise ValueError("num_vertices must be positive")
        lo, hi = self.alpha_range
        if not (0.0 < lo <= hi <= 1.0):
            raise ValueError(f"alpha_range must lie within (0, 1], got {self.alpha_range}")
        lo, hi = self.mu_range
        if not (0.0 <= lo <= hi):
            raise ValueError(f"mu_range must be a non-negative interval, got {self.mu_range}")
        if not (0.0 <= self.expected_indegree < self.num_vertices):
            raise ValueError("expected_indegree must be in [0, num_vertices)")


def binomial_thin(x: int, alpha: float, rng: np.random.Generator) -> int:
    """One draw of the thinning operator: Binomial(x, alpha)."""
    if not (0.0 <= alpha <= 1.0):
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if x < 0:
        raise ValueError(f"x must be non-negative, got {x}")
    return int(rng.binomial(x, alpha))


def sample(g: Dag, mus: Sequence[float], n: int, rng: np.random.Generator) -> CountDataset:
    """Draw ``n`` i.i.d. joint observations from the model on ``g``.

    Column ``i`` is the sum of Binomial(x_j, alpha_ji) draws over parents j
    plus Poisson(mus[i]) noise, generated in topological order.
    """
    mus = np.asarray(mus, dtype=float)
    if mus.shape != (g.num_vertices,):
        raise ValueError(
            f"mus must have length {g.num_vertices}, got shape {mus.shape}"
        )
    if np.any(mus < 0):
        raise ValueError("noise means must be non-negative")
    if n < 1:
        raise ValueError("n must be positive")
    cols = np.empty((n, g.num_vertices), dtype=np.int64)
    for i in g.topological_order():
        x = rng.poisson(mus[i], size=n)
        for j in g.parents(i):
            x = x + rng.binomial(cols[:, j], g.alpha(j, i))
        cols[:, i] = x
    return CountDataset(cols)


def random_dag(cfg: SimConfig, rng: np.random.Generator) -> tuple[Dag, np.ndarray]:
    """Random benchmark graph plus noise means.

    A uniformly random topological order is drawn, then each forward pair is
    an edge independently with probability 2 * expected_indegree / (n - 1),
    which makes the expected indegree per vertex equal cfg.expected_indegree.
    """
    n = cfg.num_vertices
    order = rng.permutation(n)
    edges = {}
    if n > 1:
        p = min(1.0, 2.0 * cfg.expected_indegree / (n - 1))
        lo, hi = cfg.alpha_range
        for a in range(n):
            for b in range(a + 1, n):
                if rng.random() < p:
                    edges[(int(order[a]), int(order[b]))] = rng.uniform(lo, hi)
    mus = rng.uniform(cfg.mu_range[0], cfg.mu_range[1], size=n)
    return Dag(n, edges), mus


class ReversePair(NamedTuple):
    alpha: float
    mu_x: float
    mu_y: float


def reverse_pair(alpha: float, mu_x: float, mu_y: float) -> ReversePair:
    """Parameters of the distribution-equivalent reversed two-variable model.

    For X -> Y with X ~ Pois(mu_x) and Y = alpha o X + Pois(mu_y), the model
    Y -> X with Y ~ Pois(alpha*mu_x + mu_y) and X = alpha_hat o Y + Pois(mu_x_hat)
    has the same joint distribution, where alpha_hat = alpha*mu_x / (alpha*mu_x + mu_y)
    and mu_x_hat = mu_x * (1 - alpha).
    """
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    if mu_x <= 0:
        raise ValueError(f"mu_x must be positive, got {mu_x}")
    if mu_y < 0:
        raise ValueError(f"mu_y must be non-negative, got {mu_y}")
    total = alpha * mu_x + mu_y
    if total == 0:
        raise DegenerateModelError("alpha * mu_x + mu_y must be positive")
    return ReversePair(alpha * mu_x / total, mu_x * (1.0 - alpha), total)
