"""Directed acyclic graphs with per-edge thinning coefficients.

Vertices are dense 0-based integer indices. A ``Dag`` is immutable after
construction; every query is read-only and safe to call concurrently.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Iterable, Mapping

DEFAULT_PATH_LIMIT = 10**6

EdgeInput = Mapping[tuple[int, int], float] | Iterable[tuple[int, int, float]]


class CycleError(ValueError):
    """Raised when an edge set contains a directed cycle."""


class TooManyPathsError(RuntimeError):
    """Raised when path enumeration exceeds the configured limit."""


@dataclass(frozen=True)
class DirectedPath:
    """A simple directed path (v0, v1, ..., vp) with its edge coefficients.

    ``coefficients[t]`` is the coefficient of the edge vertices[t] -> vertices[t+1].
    """

    vertices: tuple[int, ...]
    coefficients: tuple[float, ...]

    def __post_init__(self):
        if len(self.coefficients) != len(self.vertices) - 1:
            raise ValueError("coefficients must have one entry per edge")

    @property
    def source(self) -> int:
        return self.vertices[0]

    @property
    def target(self) -> int:
        return self.vertices[-1]

    def coefficient_product(self) -> float:
        out = 1.0
        for a in self.coefficients:
            out *= a
        return out


class Dag:
    """Directed acyclic graph whose edges carry coefficients in (0, 1].

    ``edges`` may be a mapping ``{(tail, head): coefficient}`` or an iterable
    of ``(tail, head, coefficient)`` triples.  Self-loops, duplicate edges,
    out-of-range coefficients and cyclic edge sets are rejected.
    """

    def __init__(self, num_vertices: int, edges: EdgeInput = ()):
        if num_vertices < 1:
            raise ValueError(f"num_vertices must be positive, got {num_vertices}")
        self._n = int(num_vertices)

        if isinstance(edges, Mapping):
            triples = [(j, i, a) for (j, i), a in edges.items()]
        else:
            triples = [(j, i, a) for j, i, a in edges]

        alpha: dict[tuple[int, int], float] = {}
        for j, i, a in triples:
            j, i, a = int(j), int(i), float(a)
            self._check_vertex(j)
            self._check_vertex(i)
            if j == i:
                raise ValueError(f"self-loop on vertex {j}")
            if (j, i) in alpha:
                raise ValueError(f"duplicate edge {j}->{i}")
            if not (0.0 < a <= 1.0):
                raise ValueError(f"coefficient of {j}->{i} must lie in (0, 1], got {a}")
            alpha[(j, i)] = a

        self._alpha = alpha
        parents: list[list[int]] = [[] for _ in range(self._n)]
        children: list[list[int]] = [[] for _ in range(self._n)]
        for j, i in alpha:
            parents[i].append(j)
            children[j].append(i)
        self._parents = tuple(tuple(sorted(p)) for p in parents)
        self._children = tuple(tuple(sorted(c)) for c in children)
        self._topo = self._kahn_order()  # raises CycleError on cyclic input
        self._path_counts_to: dict[int, list[int]] = {}

    # --- basic accessors ---

    @property
    def num_vertices(self) -> int:
        return self._n

    @property
    def num_edges(self) -> int:
        return len(self._alpha)

    @property
    def edges(self) -> dict[tuple[int, int], float]:
        """Copy of the edge -> coefficient mapping."""
        return dict(self._alpha)

    def edge_set(self) -> frozenset[tuple[int, int]]:
        return frozenset(self._alpha)

    def has_edge(self, j: int, i: int) -> bool:
        return (j, i) in self._alpha

    def alpha(self, j: int, i: int) -> float:
        try:
            return self._alpha[(j, i)]
        except KeyError:
            raise ValueError(f"no edge {j}->{i}") from None

    def parents(self, i: int) -> tuple[int, ...]:
        self._check_vertex(i)
        return self._parents[i]

    def children(self, j: int) -> tuple[int, ...]:
        self._check_vertex(j)
        return self._children[j]

    def _check_vertex(self, v: int) -> None:
        if not (0 <= v < self._n):
            raise ValueError(f"vertex index {v} out of range [0, {self._n})")

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Dag)
            and self._n == other._n
            and self._alpha == other._alpha
        )

    def __repr__(self) -> str:
        edges = ", ".join(f"{j}->{i}" for j, i in sorted(self._alpha))
        return f"Dag({self._n} vertices; {edges or 'no edges'})"

    # --- ordering and reachability ---

    def _kahn_order(self) -> tuple[int, ...]:
        indeg = [len(self._parents[v]) for v in range(self._n)]
        heap = [v for v in range(self._n) if indeg[v] == 0]
        heapq.heapify(heap)
        order: list[int] = []
        while heap:
            v = heapq.heappop(heap)
            order.append(v)
            for c in self._children[v]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    heapq.heappush(heap, c)
        if len(order) != self._n:
            raise CycleError("edge set contains a directed cycle")
        return tuple(order)

    def topological_order(self) -> tuple[int, ...]:
        """Deterministic topological order (smallest index first on ties)."""
        return self._topo

    def ancestors(self, i: int) -> set[int]:
        """All vertices with a directed path to ``i``, excluding ``i``."""
        self._check_vertex(i)
        seen: set[int] = set()
        stack = list(self._parents[i])
        while stack:
            v = stack.pop()
            if v not in seen:
                seen.add(v)
                stack.extend(self._parents[v])
        return seen

    def common_ancestors(self, i: int, j: int) -> set[int]:
        return self.ancestors(i) & self.ancestors(j)

    # --- directed paths ---

    def count_paths(self, i: int, j: int) -> int:
        """Number of directed paths from ``i`` to ``j`` (1 when i == j)."""
        self._check_vertex(i)
        self._check_vertex(j)
        counts = self._path_counts_to.get(j)
        if counts is None:
            counts = [0] * self._n
            counts[j] = 1
            for v in reversed(self._topo):
                if v != j:
                    counts[v] = sum(counts[c] for c in self._children[v])
            self._path_counts_to[j] = counts
        return counts[i]

    def directed_paths(
        self, i: int, j: int, limit: int = DEFAULT_PATH_LIMIT
    ) -> list[DirectedPath]:
        """All simple directed paths from ``i`` to ``j``, lexicographic order.

        Raises TooManyPathsError when more than ``limit`` paths exist; use
        ``count_paths`` for count-only queries, which has no limit.
        """
        self._check_vertex(i)
        self._check_vertex(j)
        if i == j:
            raise ValueError("path endpoints must be distinct")
        if self.count_paths(i, j) > limit:
            raise TooManyPathsError(
                f"more than {limit} paths from {i} to {j}; raise the limit to enumerate"
            )
        out: list[DirectedPath] = []
        path = [i]
        coefs: list[float] = []

        def descend(v: int) -> None:
            if v == j:
                out.append(DirectedPath(tuple(path), tuple(coefs)))
                return
            for c in self._children[v]:  # ascending -> lexicographic output
                path.append(c)
                coefs.append(self._alpha[(v, c)])
                descend(c)
                path.pop()
                coefs.pop()

        descend(i)
        return out

    # --- identifiability of the causal order ---

    def is_order_identifiable(self, i: int, j: int) -> bool:
        """Whether the causal order of the pair ``i`` before ``j`` is recoverable
        from path-count asymmetries of high-order cumulants.

        Requires ``i`` to be an ancestor of ``j``.  True when the largest path
        count toward ``j`` from ``i`` or any common ancestor strictly exceeds
        the largest path count toward ``i`` from a common ancestor (counting
        the trivial self path once, so a lone direct edge is never enough).
        In particular: a root with two or more paths to ``j`` is identifiable,
        and so is any pair whose maximally-connected common ancestor reaches
        ``j`` while avoiding ``i``.
        """
        self._check_vertex(i)
        self._check_vertex(j)
        if i == j or self.count_paths(i, j) == 0:
            raise ValueError(f"{i} is not an ancestor of {j}")
        common = self.common_ancestors(i, j)
        toward_source = max((self.count_paths(m, i) for m in common), default=0)
        toward_target = max(self.count_paths(m, j) for m in common | {i})
        return toward_target > max(toward_source, 1)

    # --- single-edge modifications (used by structure search) ---

    def with_edge(self, j: int, i: int, alpha: float) -> "Dag":
        edges = self.edges
        edges[(j, i)] = alpha
        return Dag(self._n, edges)

    def without_edge(self, j: int, i: int) -> "Dag":
        edges = self.edges
        if (j, i) not in edges:
            raise ValueError(f"no edge {j}->{i}")
        del edges[(j, i)]
        return Dag(self._n, edges)

    def with_reversed_edge(self, j: int, i: int) -> "Dag":
        edges = self.edges
        if (j, i) not in edges:
            raise ValueError(f"no edge {j}->{i}")
        a = edges.pop((j, i))
        edges[(i, j)] = a
        return Dag(self._n, edges)

    # --- JSON interchange ---

    def to_json_dict(self, mu=None) -> dict:
        """Plain-dict form: {"num_vertices": n, "edges": [{"from", "to", "alpha"}]}.

        Indices are 0-based.  ``mu`` (per-vertex noise means) is attached under
        the "mu" key when given.
        """
        d = {
            "num_vertices": self._n,
            "edges": [
                {"from": j, "to": i, "alpha": self._alpha[(j, i)]}
                for j, i in sorted(self._alpha)
            ],
        }
        if mu is not None:
            mu = list(map(float, mu))
            if len(mu) != self._n:
                raise ValueError("mu must have one entry per vertex")
            d["mu"] = mu
        return d

    @classmethod
    def from_json_dict(cls, d: Mapping) -> "Dag":
        try:
            n = d["num_vertices"]
            edges = [(e["from"], e["to"], e.get("alpha", 1.0)) for e in d["edges"]]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed graph document: {exc}") from exc
        return cls(n, edges)
