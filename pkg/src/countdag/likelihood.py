"""Conditional likelihood of a count variable given its parents.

P(X_i = k | parents) is the k-th coefficient of the product of the parents'
binomial generating polynomials with the truncated Poisson noise polynomial.
Small products are convolved directly; large ones go through the FFT.  Node
parameters are fitted by cyclic golden-section search per coordinate under box
constraints, and graphs are scored by the BIC-penalized log-likelihood.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import gammaln

from .graph import Dag
from .simulator import CountDataset

logger = logging.getLogger(__name__)

ALPHA_MIN = 1e-6
PROB_FLOOR = 1e-300
FFT_CROSSOVER = 64  # total coefficient count above which pmf queries use the FFT
OBJECTIVE_TOL = 1e-6
MAX_SWEEPS = 500
MU_MAX_FACTOR = 10.0
MU_INIT_MIN = 1e-3


@dataclass(frozen=True)
class ModelParams:
    """Per-edge thinning coefficients and per-vertex noise means."""

    alpha: dict[tuple[int, int], float]
    mu: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        if mu.ndim != 1:
            raise ValueError("mu must be a vector")
        if np.any(mu < 0):
            raise ValueError("noise means must be non-negative")
        for (j, i), a in self.alpha.items():
            if not (ALPHA_MIN < a <= 1.0):
                raise ValueError(
                    f"alpha[{j}->{i}] must lie in ({ALPHA_MIN}, 1], got {a}"
                )
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "alpha", dict(self.alpha))

    def check_support(self, dag: Dag) -> None:
        if set(self.alpha) != dag.edge_set() or self.mu.size != dag.num_vertices:
            raise ValueError("parameter support does not match the graph")

    def node_alphas(self, dag: Dag, i: int) -> tuple[float, ...]:
        return tuple(self.alpha[(j, i)] for j in dag.parents(i))


@dataclass(frozen=True)
class ScoredGraph:
    """A graph with fitted parameters and its (penalized) log-likelihood."""

    dag: Dag
    params: ModelParams
    loglik: float
    penalized: float
    num_edges: int


class NodeFit(NamedTuple):
    """Result of maximizing one node's conditional log-likelihood."""

    node: int
    parents: tuple[int, ...]
    alphas: tuple[float, ...]
    mu: float
    loglik: float


# --- generating-polynomial coefficient vectors ---


def _poisson_vector(mu: float, length: int) -> np.ndarray:
    """Poisson(mu) pmf at 0..length-1.  Truncation is exact for extracting
    coefficients below ``length``: higher noise terms cannot reach them."""
    if mu < 0:
        raise ValueError(f"mu must be non-negative, got {mu}")
    if mu == 0.0:
        out = np.zeros(length)
        out[0] = 1.0
        return out
    t = np.arange(length)
    return np.exp(t * math.log(mu) - mu - gammaln(t + 1))


def _binomial_vector(x: int, alpha: float) -> np.ndarray:
    """Binomial(x, alpha) pmf at 0..x."""
    if x < 0:
        raise ValueError(f"parent value must be non-negative, got {x}")
    if not (0.0 <= alpha <= 1.0):
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if x == 0:
        return np.ones(1)
    if alpha == 0.0:
        out = np.zeros(x + 1)
        out[0] = 1.0
        return out
    if alpha == 1.0:
        out = np.zeros(x + 1)
        out[x] = 1.0
        return out
    t = np.arange(x + 1)
    logpmf = (
        gammaln(x + 1)
        - gammaln(t + 1)
        - gammaln(x - t + 1)
        + t * math.log(alpha)
        + (x - t) * math.log1p(-alpha)
    )
    return np.exp(logpmf)


def _check_pmf_args(k, parent_values, alphas, mu):
    if k < 0:
        raise ValueError(f"k must be non-negative, got {k}")
    if len(parent_values) != len(alphas):
        raise ValueError("parent_values and alphas must have equal length")
    if mu < 0:
        raise ValueError(f"mu must be non-negative, got {mu}")


def conditional_pmf_direct(
    k: int, parent_values: Sequence[int], alphas: Sequence[float], mu: float
) -> float:
    """P(X = k | parents) by nested direct convolution of the pmf vectors."""
    _check_pmf_args(k, parent_values, alphas, mu)
    vec = _poisson_vector(mu, k + 1)
    for x, a in zip(parent_values, alphas):
        vec = np.convolve(vec, _binomial_vector(int(x), a))[: k + 1]
    return float(vec[k])


def _fft_length(total_degree: int) -> int:
    return 1 << int(total_degree).bit_length()


def conditional_pmf_fft(
    k: int, parent_values: Sequence[int], alphas: Sequence[float], mu: float
) -> float:
    """Same coefficient extracted through a frequency-domain product.

    Vectors are zero-padded to a power-of-two length covering the full product
    degree; roundoff can leave tiny negative coefficients, clamped to zero.
    """
    _check_pmf_args(k, parent_values, alphas, mu)
    total_degree = int(k + sum(int(x) for x in parent_values))
    size = _fft_length(total_degree)
    spec = np.fft.rfft(_poisson_vector(mu, k + 1), size)
    for x, a in zip(parent_values, alphas):
        spec *= np.fft.rfft(_binomial_vector(int(x), a), size)
    coeffs = np.fft.irfft(spec, size)
    return float(max(coeffs[k], 0.0))


def conditional_pmf_vector(
    parent_values: Sequence[int],
    alphas: Sequence[float],
    mu: float,
    poisson_truncation: int,
) -> np.ndarray:
    """Full coefficient vector with the noise polynomial cut at the given degree.

    The entries sum to one minus the Poisson tail mass beyond the truncation.
    """
    _check_pmf_args(0, parent_values, alphas, mu)
    if poisson_truncation < 0:
        raise ValueError("poisson_truncation must be non-negative")
    vec = _poisson_vector(mu, poisson_truncation + 1)
    total_degree = poisson_truncation + int(sum(int(x) for x in parent_values))
    if total_degree + 1 > FFT_CROSSOVER:
        size = _fft_length(total_degree)
        spec = np.fft.rfft(vec, size)
        for x, a in zip(parent_values, alphas):
            spec *= np.fft.rfft(_binomial_vector(int(x), a), size)
        out = np.fft.irfft(spec, size)[: total_degree + 1]
        return np.maximum(out, 0.0)
    for x, a in zip(parent_values, alphas):
        vec = np.convolve(vec, _binomial_vector(int(x), a))
    return vec


def _conditional_pmf(k, parent_values, alphas, mu) -> float:
    if sum(int(x) + 1 for x in parent_values) > FFT_CROSSOVER:
        return conditional_pmf_fft(k, parent_values, alphas, mu)
    return conditional_pmf_direct(k, parent_values, alphas, mu)


# --- per-node log-likelihood over a dataset ---


def _compress_rows(child: np.ndarray, parent_mat: np.ndarray):
    """Unique (child, parents) configurations and their multiplicities."""
    stacked = np.column_stack([child, parent_mat]) if parent_mat.size else child[:, None]
    configs, counts = np.unique(stacked, axis=0, return_counts=True)
    return configs[:, 0], configs[:, 1:], counts


def node_log_likelihood(
    data: CountDataset,
    i: int,
    parents: Sequence[int],
    alphas: Sequence[float],
    mu: float,
) -> float:
    """Sum of log P(X_i = x | parent row) over the dataset.

    Rows are grouped by unique configuration; each pmf query runs through the
    FFT when its coefficient count crosses the threshold, directly otherwise.
    Probabilities are clamped at 1e-300 before the log.
    """
    parents = [int(p) for p in parents]
    if len(parents) != len(alphas):
        raise ValueError("parents and alphas must have equal length")
    child = data.column(i)
    pmat = data.values[:, parents] if parents else np.empty((data.num_samples, 0), int)
    uk, upar, counts = _compress_rows(child, pmat)
    total = 0.0
    for t in range(uk.size):
        p = _conditional_pmf(int(uk[t]), upar[t], alphas, mu)
        total += counts[t] * math.log(max(p, PROB_FLOOR))
    return total


def _binom_matrix(vals: np.ndarray, alpha: float, width: int) -> np.ndarray:
    """Binomial pmf rows for each value in ``vals``, zero-padded to ``width``."""
    t = np.arange(width)
    x = vals[:, None]
    if alpha >= 1.0:
        out = np.zeros((vals.size, width))
        out[np.arange(vals.size), vals] = 1.0
        return out
    logpmf = (
        gammaln(x + 1)
        - gammaln(t + 1)
        - gammaln(np.maximum(x - t, 0) + 1)
        + t * math.log(max(alpha, ALPHA_MIN))
        + (x - t) * math.log1p(-alpha)
    )
    out = np.exp(logpmf)
    out[t[None, :] > x] = 0.0
    return out


class _NodeObjective:
    """One node's log-likelihood as a function of (alphas, mu) over compressed
    unique configurations.

    A full evaluation runs one batched frequency-domain product over the
    unique parent tuples.  Coordinate line searches are much cheaper: the
    convolution of all factors except the active one is computed once, after
    which each trial value costs a small gather and an inner product.
    """

    def __init__(self, child: np.ndarray, parent_mat: np.ndarray):
        uk, upar, counts = _compress_rows(child, parent_mat)
        self.counts = counts.astype(np.float64)
        self.k_of_cfg = uk.astype(np.int64)
        self.kmax = int(uk.max())
        self.num_parents = parent_mat.shape[1] if parent_mat.size else 0
        if not self.num_parents:
            return
        self.col_vals = []
        self.val_idx_of_cfg = []
        for t in range(self.num_parents):
            vals, inv = np.unique(upar[:, t], return_inverse=True)
            self.col_vals.append(vals.astype(np.int64))
            self.val_idx_of_cfg.append(inv)
        inv_mat = np.column_stack(self.val_idx_of_cfg)
        self.pt_cols, self.pt_of_cfg = np.unique(inv_mat, axis=0, return_inverse=True)
        degree = self.kmax + int(sum(int(v.max()) for v in self.col_vals))
        self.fft_size = _fft_length(degree)
        # per-parent gathered spectra are memoized on the coefficient value;
        # a coordinate sweep touches each alpha once, so the other factors hit
        self._spec_cache: dict[int, tuple[float, np.ndarray]] = {}
        # flat take-indices pairing a fixed factor's coefficient k - u with the
        # active factor's pmf at power u, plus a mask for u > k
        self.offsets = {}
        stride = self.kmax + 1
        rows = np.arange(self.k_of_cfg.size)[:, None] * stride
        for width in {stride, *(int(v.max()) + 1 for v in self.col_vals)}:
            ku = self.k_of_cfg[:, None] - np.arange(width)[None, :]
            valid = (ku >= 0).astype(np.float64)
            self.offsets[width] = (rows + np.maximum(ku, 0), valid)

    # -- full evaluation --

    def loglik(self, alphas: Sequence[float], mu: float) -> float:
        pois = _poisson_vector(mu, self.kmax + 1)
        if not self.num_parents:
            probs = np.maximum(pois[self.k_of_cfg], PROB_FLOOR)
            return float(self.counts @ np.log(probs))
        spec = np.fft.rfft(pois, self.fft_size)
        for t in range(self.num_parents):
            bspec = np.fft.rfft(self._bmat(t, alphas[t]), self.fft_size, axis=1)
            spec = spec * bspec[self.pt_cols[:, t]]
        coeffs = np.fft.irfft(spec, self.fft_size, axis=1)[:, : self.kmax + 1]
        probs = np.maximum(coeffs[self.pt_of_cfg, self.k_of_cfg], PROB_FLOOR)
        return float(self.counts @ np.log(probs))

    def _bmat(self, t: int, alpha: float) -> np.ndarray:
        vals = self.col_vals[t]
        return _binom_matrix(vals, alpha, int(vals.max()) + 1)

    # -- coordinate line searches --

    def _gathered_spec(self, t: int, alpha: float) -> np.ndarray:
        hit = self._spec_cache.get(t)
        if hit is not None and hit[0] == alpha:
            return hit[1]
        bspec = np.fft.rfft(self._bmat(t, alpha), self.fft_size, axis=1)
        gathered = bspec[self.pt_cols[:, t]]
        self._spec_cache[t] = (alpha, gathered)
        return gathered

    def _spread(self, spec_rows, width: int):
        """Turn fixed-factor spectra into the per-config, per-power coefficient
        table consumed by a line search."""
        if spec_rows.ndim == 1:
            fixed = np.fft.irfft(spec_rows, self.fft_size)[None, : self.kmax + 1]
            per_cfg = np.broadcast_to(fixed, (self.k_of_cfg.size, self.kmax + 1))
        else:
            coef = np.fft.irfft(spec_rows, self.fft_size, axis=1)[:, : self.kmax + 1]
            per_cfg = coef[self.pt_of_cfg]
        flat, valid = self.offsets[width]
        return np.ascontiguousarray(per_cfg).take(flat) * valid

    def mu_line(self, alphas):
        """Objective restricted to mu, parents held fixed."""
        if not self.num_parents:
            def f(mu: float) -> float:
                pois = _poisson_vector(mu, self.kmax + 1)
                probs = np.maximum(pois[self.k_of_cfg], PROB_FLOOR)
                return float(self.counts @ np.log(probs))
            return f
        width = self.kmax + 1
        rows = self._gathered_spec(0, alphas[0])
        for t in range(1, self.num_parents):
            rows = rows * self._gathered_spec(t, alphas[t])
        gf = self._spread(rows, width)

        def f(mu: float) -> float:
            probs = np.maximum(gf @ _poisson_vector(mu, width), PROB_FLOOR)
            return float(self.counts @ np.log(probs))

        return f

    def _alpha_line_from_spec(self, t: int, spec_rows):
        vals = self.col_vals[t]
        width = int(vals.max()) + 1
        gf = self._spread(spec_rows, width)
        idx = self.val_idx_of_cfg[t]

        def f(alpha: float) -> float:
            b = _binom_matrix(vals, alpha, width)[idx]
            probs = np.maximum(np.einsum("cw,cw->c", gf, b), PROB_FLOOR)
            return float(self.counts @ np.log(probs))

        return f

    def alpha_line(self, t: int, alphas, mu: float):
        """Objective restricted to the t-th coefficient."""
        spec = np.fft.rfft(_poisson_vector(mu, self.kmax + 1), self.fft_size)
        for s in range(self.num_parents):
            if s != t:
                spec = spec * self._gathered_spec(s, alphas[s])
        return self._alpha_line_from_spec(t, spec)

    def sweep(self, alphas, mu, win, tol_alpha, tol_mu, mu_max, cur):
        """One cyclic pass of line searches; returns the improved point.

        The products of the non-active factors are assembled from suffix
        spectra built once per pass and a running prefix that absorbs each
        accepted coordinate move.
        """
        line = self.mu_line(alphas)
        cand = _golden_max(
            line, max(0.0, mu - win[0]), min(mu_max, mu + win[0]), tol_mu
        )
        val = line(cand)
        if val > cur:
            mu, cur = cand, val

        p = self.num_parents
        if p:
            suffix = [None] * (p + 1)  # suffix[t] = product of factors t..p-1
            for t in range(p - 1, 0, -1):
                g = self._gathered_spec(t, alphas[t])
                suffix[t] = g if suffix[t + 1] is None else g * suffix[t + 1]
            prefix = np.fft.rfft(_poisson_vector(mu, self.kmax + 1), self.fft_size)
            for t in range(p):
                spec = prefix if suffix[t + 1] is None else prefix * suffix[t + 1]
                line = self._alpha_line_from_spec(t, spec)
                cand = _golden_max(
                    line,
                    max(ALPHA_MIN, alphas[t] - win[t + 1]),
                    min(1.0, alphas[t] + win[t + 1]),
                    tol_alpha,
                )
                val = line(cand)
                if val > cur:
                    alphas[t], cur = cand, val
                prefix = prefix * self._gathered_spec(t, alphas[t])
        return alphas, mu, cur


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_max(f, lo: float, hi: float, tol: float) -> float:
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def _initial_values(
    data: CountDataset,
    i: int,
    parents: Sequence[int],
    warm: dict[int, float] | None = None,
):
    """Covariance-ratio starting alphas and the implied residual noise mean.

    ``warm`` carries already-fitted coefficients for a subset of the parents
    (the structure search re-fits a node after adding one edge); only the
    remaining parents start from the covariance heuristic.
    """
    child = data.column(i).astype(float)
    warm = warm or {}
    alphas = []
    for j in parents:
        if j in warm:
            alphas.append(min(max(warm[j], ALPHA_MIN), 1.0))
            continue
        pj = data.column(j).astype(float)
        var = pj.var()
        if var == 0.0:
            logger.warning(
                "parent column %d has zero variance; starting alpha at 0.5", j
            )
            alphas.append(0.5)
        else:
            cov = ((pj - pj.mean()) * (child - child.mean())).mean()
            alphas.append(min(max(cov / var, 0.05), 0.95))
    mu0 = child.mean() - sum(
        a * data.column(j).mean() for a, j in zip(alphas, parents)
    )
    return alphas, max(MU_INIT_MIN, mu0)


def fit_node(
    data: CountDataset,
    i: int,
    parents: Sequence[int],
    warm: dict[int, float] | None = None,
) -> NodeFit:
    """Maximize the node conditional log-likelihood over (alphas, mu).

    Cyclic golden-section line searches under the box alpha in (1e-6, 1],
    mu in [0, 10 * max column mean], each sweep followed by a single probe
    along the net displacement (coordinate moves alone zig-zag when parents
    are collinear).  A move is kept only when it improves the objective;
    sweeps stop once the gain drops below 1e-6, or after 500 sweeps.
    """
    parents = tuple(sorted(int(p) for p in parents))
    pmat = data.values[:, list(parents)] if parents else np.empty((data.num_samples, 0), int)
    obj = _NodeObjective(data.column(i), pmat)
    alphas, mu = _initial_values(data, i, parents, warm)
    mu_max = MU_MAX_FACTOR * max(float(data.values.mean(axis=0).max()), 1.0)
    mu = min(mu, mu_max)
    cur = obj.loglik(alphas, mu)
    tol_alpha = 1e-3
    tol_mu = 1e-3 * mu_max
    p = len(parents)
    # line-search windows shrink toward recent movement; sweep 0 spans the box
    win = [mu_max] + [1.0] * p

    for _ in range(MAX_SWEEPS):
        start = cur
        mu_start, alphas_start = mu, list(alphas)
        alphas, mu, cur = obj.sweep(alphas, mu, win, tol_alpha, tol_mu, mu_max, cur)

        d_mu = mu - mu_start
        d_al = [a - b for a, b in zip(alphas, alphas_start)]
        win[0] = max(16 * tol_mu, 4 * abs(d_mu))
        for t in range(p):
            win[t + 1] = max(16 * tol_alpha, 4 * abs(d_al[t]))

        if p >= 2 and (d_mu != 0.0 or any(d_al)):
            s_probe = 1.0
            for v, d, lo, hi in [(mu, d_mu, 0.0, mu_max)] + [
                (alphas[t], d_al[t], ALPHA_MIN, 1.0) for t in range(p)
            ]:
                if d > 0:
                    s_probe = min(s_probe, (hi - v) / d)
                elif d < 0:
                    s_probe = min(s_probe, (lo - v) / d)
            if s_probe > 1e-2:
                probe_mu = mu + s_probe * d_mu
                probe_al = [a + s_probe * d for a, d in zip(alphas, d_al)]
                val = obj.loglik(probe_al, probe_mu)
                if val > cur:
                    mu, alphas, cur = probe_mu, probe_al, val

        assert cur >= start, "coordinate sweep decreased the objective"
        if cur - start < OBJECTIVE_TOL:
            break
    return NodeFit(i, parents, tuple(alphas), mu, cur)


def fit_parameters(data: CountDataset, dag: Dag) -> ModelParams:
    """Fit every node's thinning coefficients and noise mean for ``dag``."""
    if data.num_columns != dag.num_vertices:
        raise ValueError("data column count must match the graph")
    alpha: dict[tuple[int, int], float] = {}
    mu = np.empty(dag.num_vertices)
    for i in range(dag.num_vertices):
        fit = fit_node(data, i, dag.parents(i))
        mu[i] = fit.mu
        for j, a in zip(fit.parents, fit.alphas):
            alpha[(j, i)] = a
    return ModelParams(alpha, mu)


def penalized_score(data: CountDataset, dag: Dag, params: ModelParams) -> ScoredGraph:
    """Log-likelihood of ``dag`` under ``params`` minus the BIC edge penalty."""
    params.check_support(dag)
    loglik = 0.0
    for i in range(dag.num_vertices):
        parents = dag.parents(i)
        loglik += node_log_likelihood(
            data, i, parents, params.node_alphas(dag, i), float(params.mu[i])
        )
    d = dag.num_edges
    penalized = loglik - d * math.log(data.num_samples) / 2.0
    return ScoredGraph(dag, params, loglik, penalized, d)
