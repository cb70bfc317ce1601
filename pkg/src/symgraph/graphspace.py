"""Canonical edge indexing, edge partitions, graphs and edge profiles.

Every potential edge ``{u, v}`` (``u < v``) of the complete graph on ``n``
vertices gets a fixed index in ``[0, N)``, ``N = n(n-1)/2``, following the
lexicographic order of the pairs. All other modules address edges through
this index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .exceptions import InvalidInputError

__all__ = [
    "Partition",
    "EdgePartition",
    "Graph",
    "enumerate_edges",
    "num_edges",
    "vertices_from_num_edges",
    "edge_index",
    "partition_from_costs",
    "balanced_partition",
    "partition_from_groups",
    "edge_profile",
    "edge_profiles",
    "density_profile",
    "read_graph",
    "write_graph",
    "read_partition",
    "write_partition",
]


def num_edges(n: int) -> int:
    return n * (n - 1) // 2


def vertices_from_num_edges(N: int) -> int:
    """Invert ``N = n(n-1)/2``; raise if ``N`` is not a triangular number."""
    n = int(round((1 + math.sqrt(1 + 8 * N)) / 2))
    if n < 2 or num_edges(n) != N:
        raise InvalidInputError(f"{N} is not n(n-1)/2 for any n >= 2")
    return n


def enumerate_edges(n: int) -> list[tuple[int, int]]:
    """All unordered vertex pairs ``(u, v)``, ``u < v``, in lexicographic order.

    The position of a pair in this list is its edge index.

    >>> enumerate_edges(3)
    [(0, 1), (0, 2), (1, 2)]
    """
    if not isinstance(n, (int, np.integer)) or n < 2:
        raise InvalidInputError(f"n must be an integer >= 2, got {n!r}")
    return [(u, v) for u in range(n) for v in range(u + 1, n)]


def edge_index(u: int, v: int, n: int) -> int:
    """Index of the pair ``{u, v}`` in the canonical order."""
    if u == v or not (0 <= u < n and 0 <= v < n):
        raise InvalidInputError(f"invalid vertex pair ({u}, {v}) for n={n}")
    if u > v:
        u, v = v, u
    # pairs before row u: sum_{w<u} (n-1-w)
    return u * (2 * n - u - 1) // 2 + (v - u - 1)


def _pair_arrays(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.triu_indices(n, k=1)


def _min_vertices(N: int) -> int:
    n = 2
    while num_edges(n) < N:
        n += 1
    return n


@dataclass(frozen=True, eq=False)
class Partition:
    """Partition of ``N`` labelled edges into ``k`` nonempty parts.

    The edges need not be all pairs of a vertex set; ``n`` is the nominal
    vertex count entering ``log n`` terms and must satisfy
    ``N <= n(n-1)/2``. Use :class:`EdgePartition` for partitions of the
    complete graph, which is what graph-level operations require.

    Parameters
    ----------
    n : int
        Number of vertices.
    part_of : array of int, shape (N,)
        Part index of every edge. Part indices must be contiguous
        ``0..k-1`` with every part nonempty.
    labels : tuple, optional
        One label per part (e.g. the group pair of a block-model part).
    """

    n: int
    part_of: np.ndarray
    labels: tuple = field(default=(), compare=False)

    def _check_size(self, N):
        if N < 1 or N > num_edges(self.n):
            raise InvalidInputError(f"{N} edges do not fit on n={self.n} vertices")

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 2:
            raise InvalidInputError(f"n must be an integer >= 2, got {self.n!r}")
        part_of = np.asarray(self.part_of)
        if part_of.ndim != 1:
            raise InvalidInputError(f"part_of must be one-dimensional, got shape {part_of.shape}")
        self._check_size(part_of.shape[0])
        if not np.issubdtype(part_of.dtype, np.integer) and not np.all(part_of == np.round(part_of)):
            raise InvalidInputError("part indices must be integers")
        part_of = part_of.astype(np.int64)
        if part_of.min() < 0:
            raise InvalidInputError("part indices must be nonnegative")
        k = int(part_of.max()) + 1
        sizes = np.bincount(part_of, minlength=k)
        if np.any(sizes == 0):
            empty = np.flatnonzero(sizes == 0).tolist()
            raise InvalidInputError(f"parts {empty} are empty; part indices must be contiguous")
        part_of.setflags(write=False)
        sizes.setflags(write=False)
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "part_of", part_of)
        object.__setattr__(self, "_sizes", sizes)
        if self.labels and len(self.labels) != k:
            raise InvalidInputError(f"expected {k} part labels, got {len(self.labels)}")

    @classmethod
    def from_sizes(cls, sizes: Sequence[int], n: int | None = None) -> "Partition":
        """Contiguous parts of the given sizes; ``n`` defaults to the fewest vertices that fit."""
        sizes = [int(x) for x in sizes]
        if not sizes or min(sizes) < 1:
            raise InvalidInputError(f"part sizes must be positive integers, got {sizes}")
        part_of = np.repeat(np.arange(len(sizes)), sizes)
        if n is None:
            n = _min_vertices(part_of.shape[0])
        if cls is EdgePartition or num_edges(n) == part_of.shape[0]:
            return EdgePartition(n, part_of)
        return Partition(n, part_of)

    @property
    def N(self) -> int:
        return self.part_of.shape[0]

    @property
    def k(self) -> int:
        return self._sizes.shape[0]

    @property
    def part_sizes(self) -> np.ndarray:
        return self._sizes

    @cached_property
    def members(self) -> tuple[np.ndarray, ...]:
        """Edge indices of each part, ascending."""
        order = np.argsort(self.part_of, kind="stable")
        bounds = np.cumsum(self._sizes)[:-1]
        out = tuple(np.split(order, bounds))
        for arr in out:
            arr.setflags(write=False)
        return out

    def __eq__(self, other):
        if not isinstance(other, Partition):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.part_of, other.part_of)

    def __hash__(self):
        return hash((self.n, self.part_of.tobytes()))

    def __repr__(self):
        return f"{type(self).__name__}(n={self.n}, k={self.k}, part_sizes={self._sizes.tolist()})"

    def check_profile(self, m, integer: bool = False) -> np.ndarray:
        """Validate ``0 <= m_i <= p_i`` and return ``m`` as an array."""
        m = np.asarray(m, dtype=float)
        if m.shape != (self.k,):
            raise InvalidInputError(f"profile must have length k={self.k}, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise InvalidInputError("profile entries must be finite")
        if np.any(m < 0) or np.any(m > self._sizes):
            raise InvalidInputError(f"profile {m.tolist()} outside [0, p] with p={self._sizes.tolist()}")
        if integer:
            if not np.all(m == np.round(m)):
                raise InvalidInputError(f"profile {m.tolist()} must be integral")
            return m.astype(np.int64)
        return m


@dataclass(frozen=True, eq=False)
class EdgePartition(Partition):
    """Partition of all ``N = n(n-1)/2`` potential edges, in canonical edge order."""

    def _check_size(self, N):
        if N != num_edges(self.n):
            raise InvalidInputError(f"part_of must have length N={num_edges(self.n)}, got {N}")

    @classmethod
    def trivial(cls, n: int) -> "EdgePartition":
        """Single part holding every edge."""
        return cls(n, np.zeros(num_edges(n), dtype=np.int64))


@dataclass(frozen=True, eq=False)
class Graph:
    """Simple undirected graph stored as an indicator over canonical edge indices."""

    n: int
    edges: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.edges)
        if edges.shape != (num_edges(self.n),):
            raise InvalidInputError(
                f"edge indicator must have length N={num_edges(self.n)}, got shape {edges.shape}"
            )
        edges = edges.astype(bool)
        edges.setflags(write=False)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "n", int(self.n))

    @classmethod
    def empty(cls, n: int) -> "Graph":
        return cls(n, np.zeros(num_edges(n), dtype=bool))

    @classmethod
    def complete(cls, n: int) -> "Graph":
        return cls(n, np.ones(num_edges(n), dtype=bool))

    @classmethod
    def from_pairs(cls, n: int, pairs: Iterable[tuple[int, int]]) -> "Graph":
        edges = np.zeros(num_edges(n), dtype=bool)
        for u, v in pairs:
            edges[edge_index(u, v, n)] = True
        return cls(n, edges)

    @property
    def num_edges(self) -> int:
        return int(self.edges.sum())

    def pairs(self) -> list[tuple[int, int]]:
        rows, cols = _pair_arrays(self.n)
        idx = np.flatnonzero(self.edges)
        return list(zip(rows[idx].tolist(), cols[idx].tolist()))

    def complement(self) -> "Graph":
        return Graph(self.n, ~self.edges)

    def issubset(self, other: "Graph") -> bool:
        return bool(np.all(~self.edges | other.edges))

    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.n, self.n), dtype=bool)
        rows, cols = _pair_arrays(self.n)
        A[rows, cols] = self.edges
        return A | A.T

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.edges, other.edges)

    def __hash__(self):
        return hash((self.n, np.packbits(self.edges).tobytes()))

    def __repr__(self):
        return f"Graph(n={self.n}, num_edges={self.num_edges})"


def partition_from_costs(costs, bin_ratio: float) -> EdgePartition:
    """Bin edges geometrically by cost.

    Edges with cost in ``[c_min (1+bin_ratio)^i, c_min (1+bin_ratio)^(i+1))``
    share a part, where ``c_min`` is the smallest positive cost. Zero-cost
    edges get a part of their own (index 0). Empty bins are dropped so part
    indices stay contiguous.
    """
    costs = np.asarray(costs, dtype=float)
    if costs.ndim != 1:
        raise InvalidInputError("costs must be one-dimensional")
    n = vertices_from_num_edges(costs.shape[0])
    if not bin_ratio > 0:
        raise InvalidInputError(f"bin_ratio must be > 0, got {bin_ratio!r}")
    if np.any(~np.isfinite(costs)) or np.any(costs < 0):
        raise InvalidInputError("costs must be finite and nonnegative")
    positive = costs > 0
    if not positive.any():
        raise InvalidInputError("at least one positive cost is required")
    c_min = costs[positive].min()
    raw = np.full(costs.shape, -1, dtype=np.int64)
    ratio = costs[positive] / c_min
    # guard against log round-off pushing an exact boundary into the lower bin
    raw[positive] = np.floor(np.log(ratio) / math.log1p(bin_ratio) + 1e-9).astype(np.int64)
    _, compact = np.unique(raw, return_inverse=True)
    return EdgePartition(n, compact.reshape(-1))


def balanced_partition(n: int, k: int) -> EdgePartition:
    """Split the canonical edge order into ``k`` contiguous parts whose sizes differ by at most one."""
    N = num_edges(n)
    if not 1 <= k <= N:
        raise InvalidInputError(f"k must be in [1, {N}], got {k}")
    part_of = np.empty(N, dtype=np.int64)
    for i, chunk in enumerate(np.array_split(np.arange(N), k)):
        part_of[chunk] = i
    return EdgePartition(n, part_of)


def partition_from_groups(groups: Sequence[int]) -> EdgePartition:
    """Group-pair (block-model) partition induced by a vertex labelling.

    ``groups[v]`` is the group of vertex ``v`` in ``0..l-1``. Parts are the
    unordered group pairs ``(a, b)``, ``a <= b``, in lexicographic order; the
    pair for each part is stored in ``labels``. Every group needs at least
    two vertices so that within-group parts are nonempty.
    """
    groups = np.asarray(groups, dtype=np.int64)
    n = groups.shape[0]
    ell = int(groups.max()) + 1 if n else 0
    counts = np.bincount(groups, minlength=ell)
    if groups.min() < 0 or np.any(counts < 2):
        raise InvalidInputError("every group 0..l-1 needs at least two vertices")
    pairs = [(a, b) for a in range(ell) for b in range(a, ell)]
    lookup = {pair: i for i, pair in enumerate(pairs)}
    rows, cols = _pair_arrays(n)
    ga, gb = groups[rows], groups[cols]
    lo, hi = np.minimum(ga, gb), np.maximum(ga, gb)
    part_of = np.array([lookup[(a, b)] for a, b in zip(lo.tolist(), hi.tolist())], dtype=np.int64)
    return EdgePartition(n, part_of, labels=tuple(pairs))


def edge_profile(g: Graph, part: EdgePartition) -> np.ndarray:
    """Number of edges of ``g`` in each part."""
    if g.n != part.n:
        raise InvalidInputError(f"graph has n={g.n} but partition has n={part.n}")
    return np.bincount(part.part_of[g.edges], minlength=part.k).astype(np.int64)


def edge_profiles(X, part: Partition) -> np.ndarray:
    """Edge profiles of a batch of graphs given as rows of a ``(s, N)`` indicator array."""
    X = np.asarray(X)
    if X.ndim != 2 or X.shape[1] != part.N:
        raise InvalidInputError(f"expected shape (s, {part.N}), got {X.shape}")
    X = X.astype(bool)
    out = np.empty((X.shape[0], part.k), dtype=np.int64)
    for i, idx in enumerate(part.members):
        out[:, i] = X[:, idx].sum(axis=1)
    return out


def density_profile(m, part: Partition) -> np.ndarray:
    """Per-part edge densities ``m_i / p_i``."""
    return part.check_profile(m) / part.part_sizes


# -- text formats ----------------------------------------------------------


def write_graph(g: Graph, fh) -> None:
    fh.write(f"n {g.n}\n")
    for u, v in g.pairs():
        fh.write(f"{u} {v}\n")


def read_graph(fh) -> Graph:
    lines = [ln.split() for ln in fh if ln.strip()]
    if not lines or lines[0][0] != "n" or len(lines[0]) != 2:
        raise InvalidInputError("graph file must start with 'n <n>'")
    n = int(lines[0][1])
    return Graph.from_pairs(n, ((int(u), int(v)) for u, v in lines[1:]))


def write_partition(part: EdgePartition, fh) -> None:
    fh.write(f"n {part.n} k {part.k}\n")
    for e, i in enumerate(part.part_of.tolist()):
        fh.write(f"{e} {i}\n")


def read_partition(fh) -> EdgePartition:
    lines = [ln.split() for ln in fh if ln.strip()]
    head = lines[0] if lines else []
    if len(head) != 4 or head[0] != "n" or head[2] != "k":
        raise InvalidInputError("partition file must start with 'n <n> k <k>'")
    n, k = int(head[1]), int(head[3])
    part_of = np.full(num_edges(n), -1, dtype=np.int64)
    for e, i in lines[1:]:
        part_of[int(e)] = int(i)
    if np.any(part_of < 0):
        raise InvalidInputError("partition file does not assign every edge")
    part = EdgePartition(n, part_of)
    if part.k != k:
        raise InvalidInputError(f"header says k={k} but file has {part.k} parts")
    return part
