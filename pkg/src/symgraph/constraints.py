"""Edge-profile constraints describing partition-symmetric graph sets.

A constraint spec is a predicate on the edge profile ``m`` of a graph: a set
``S`` of graphs is described by ``{G : spec.contains(m(G))}``. The variants
are budgets, linear systems, boxes, a spectral (branching-process) condition
and intersections of these.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from .exceptions import CapacityError, InvalidInputError
from .graphspace import Partition

__all__ = [
    "ConstraintSpec",
    "Budget",
    "LinearSystem",
    "Box",
    "Spectral",
    "Intersection",
    "contains",
    "branching_matrix",
    "spectral_norm",
    "verify_convexity",
    "enumerate_profiles",
    "profile_space_size",
    "spec_from_dict",
    "DEFAULT_ENUMERATION_CAP",
]

DEFAULT_ENUMERATION_CAP = 10**7

# slack for linear rows evaluated at real-valued profiles
_LINEAR_ATOL = 1e-9


def _as_vector(x, name):
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise InvalidInputError(f"{name} must be a vector")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} must be finite")
    arr.setflags(write=False)
    return arr


class ConstraintSpec:
    """Base class for profile predicates.

    Subclasses implement :meth:`contains_many` on a ``(s, k)`` array of
    profiles, :meth:`to_dict`, and optionally :meth:`linear_rows` when the
    predicate is an intersection of halfspaces and box bounds.
    """

    is_linear = False

    def validate(self, part: Partition) -> None:
        """Raise :class:`InvalidInputError` if the constraint does not fit ``part``."""

    def contains_many(self, M: np.ndarray, part: Partition) -> np.ndarray:
        raise NotImplementedError

    def contains(self, m, part: Partition) -> bool:
        m = part.check_profile(m)
        return bool(self.contains_many(m[None, :], part)[0])

    def linear_rows(self, part: Partition):
        """``(A, b, lo, hi)`` with the set equal to ``{lo <= v <= hi, A v <= b}``, or ``None``."""
        return None

    def nonlinear_parts(self) -> list["ConstraintSpec"]:
        """Members that are not representable by :meth:`linear_rows`."""
        return [] if self.is_linear else [self]

    def to_dict(self) -> dict:
        raise NotImplementedError


def _check_dim(M, part):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[1] != part.k:
        raise InvalidInputError(f"profiles must have shape (s, {part.k}), got {M.shape}")
    return M


@dataclass(frozen=True, eq=False)
class LinearSystem(ConstraintSpec):
    """``A m <= b`` componentwise."""

    A: np.ndarray
    b: np.ndarray
    is_linear = True

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        if not np.all(np.isfinite(A)):
            raise InvalidInputError("A must be finite")
        A.setflags(write=False)
        b = _as_vector(np.atleast_1d(self.b), "b")
        if A.shape[0] != b.shape[0]:
            raise InvalidInputError(f"A has {A.shape[0]} rows but b has {b.shape[0]} entries")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    def validate(self, part):
        if self.A.shape[1] != part.k:
            raise InvalidInputError(f"A has {self.A.shape[1]} columns, partition has k={part.k}")

    def contains_many(self, M, part):
        self.validate(part)
        M = _check_dim(M, part)
        tol = _LINEAR_ATOL * (1.0 + np.abs(self.b))
        return np.all(M @ self.A.T <= self.b + tol, axis=1)

    def linear_rows(self, part):
        self.validate(part)
        return self.A, self.b, np.zeros(part.k), part.part_sizes.astype(float)

    def to_dict(self):
        return {"type": "linear", "A": self.A.tolist(), "b": self.b.tolist()}


@dataclass(frozen=True, eq=False)
class Budget(ConstraintSpec):
    """``sum_i costs_i m_i <= budget`` with nonnegative per-part costs."""

    costs: np.ndarray
    budget: float
    is_linear = True

    def __post_init__(self):
        costs = _as_vector(self.costs, "costs")
        if np.any(costs < 0):
            raise InvalidInputError("budget costs must be nonnegative")
        if not np.isfinite(self.budget):
            raise InvalidInputError("budget must be finite")
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "budget", float(self.budget))

    def as_linear(self) -> LinearSystem:
        return LinearSystem(self.costs[None, :], [self.budget])

    def validate(self, part):
        if self.costs.shape[0] != part.k:
            raise InvalidInputError(f"costs has length {self.costs.shape[0]}, partition has k={part.k}")

    def contains_many(self, M, part):
        self.validate(part)
        return self.as_linear().contains_many(M, part)

    def linear_rows(self, part):
        self.validate(part)
        return self.as_linear().linear_rows(part)

    def to_dict(self):
        return {"type": "budget", "costs": self.costs.tolist(), "budget": self.budget}


@dataclass(frozen=True, eq=False)
class Box(ConstraintSpec):
    """``lo_i <= m_i <= hi_i`` with integer bounds."""

    lo: np.ndarray
    hi: np.ndarray
    is_linear = True

    def __post_init__(self):
        lo = _as_vector(self.lo, "lo")
        hi = _as_vector(self.hi, "hi")
        if lo.shape != hi.shape:
            raise InvalidInputError("lo and hi must have equal length")
        if np.any(lo != np.round(lo)) or np.any(hi != np.round(hi)):
            raise InvalidInputError("box bounds must be integers")
        if np.any(lo < 0) or np.any(lo > hi):
            raise InvalidInputError("box bounds must satisfy 0 <= lo <= hi")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def validate(self, part):
        if self.lo.shape[0] != part.k:
            raise InvalidInputError(f"box has length {self.lo.shape[0]}, partition has k={part.k}")
        if np.any(self.hi > part.part_sizes):
            raise InvalidInputError("box upper bounds exceed part sizes")

    def contains_many(self, M, part):
        self.validate(part)
        M = _check_dim(M, part)
        return np.all((M >= self.lo) & (M <= self.hi), axis=1)

    def linear_rows(self, part):
        self.validate(part)
        return np.zeros((0, part.k)), np.zeros(0), self.lo.copy(), self.hi.copy()

    def to_dict(self):
        return {"type": "box", "lo": self.lo.astype(int).tolist(), "hi": self.hi.astype(int).tolist()}


def branching_matrix(m_blocks, rho, s: int, n: int) -> np.ndarray:
    """Branching matrix ``T_ij = m_ij / (n^2 rho_i)`` over groups ``i, j != s``.

    ``m_blocks`` is the ``l x l`` matrix of edge counts between groups and
    ``s`` is the 0-based connector group, whose row and column are dropped.
    """
    M = np.asarray(m_blocks, dtype=float)
    rho = np.asarray(rho, dtype=float)
    ell = rho.shape[0]
    if M.shape[-2:] != (ell, ell):
        raise InvalidInputError(f"m_blocks must be {ell}x{ell}, got {M.shape}")
    if np.any(rho <= 0):
        raise InvalidInputError("group fractions must be positive")
    if not 0 <= s < ell:
        raise InvalidInputError(f"connector index {s} out of range for {ell} groups")
    keep = np.array([g for g in range(ell) if g != s], dtype=np.int64)
    sub = M[..., keep[:, None], keep[None, :]]
    return sub / (n**2 * rho[keep][:, None])


def spectral_norm(T, tol: float = 1e-10, max_iter: int = 100_000) -> float | np.ndarray:
    """Largest singular value by power iteration on ``T^T T``.

    Accepts a single matrix or a stack ``(..., r, c)``; the start vector is
    fixed so results are deterministic.
    """
    T = np.asarray(T, dtype=float)
    if not np.all(np.isfinite(T)):
        raise InvalidInputError("matrix entries must be finite")
    single = T.ndim == 2
    if single:
        T = T[None]
    stack_shape = T.shape[:-2]
    T = T.reshape((-1,) + T.shape[-2:])
    c = T.shape[-1]
    if c == 0 or T.shape[-2] == 0:
        out = np.zeros(T.shape[0])
        return float(out[0]) if single else out.reshape(stack_shape)
    G = np.einsum("sri,srj->sij", T, T)
    x = np.broadcast_to(1.0 + np.arange(c) / (2.0 * c), (T.shape[0], c)).copy()
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    est = np.zeros(T.shape[0])
    active = np.ones(T.shape[0], dtype=bool)
    for _ in range(max_iter):
        y = np.einsum("sij,sj->si", G[active], x[active])
        lam = np.einsum("si,si->s", x[active], y)
        norm = np.linalg.norm(y, axis=1)
        zero = norm == 0
        y[zero] = x[active][zero]
        norm[zero] = 1.0
        prev = est[active]
        est[active] = lam
        x[active] = y / norm[:, None]
        done = np.abs(lam - prev) <= tol * np.maximum(np.abs(lam), 1e-300) * 1e-2
        done |= lam == 0
        idx = np.flatnonzero(active)
        active[idx[done]] = False
        if not active.any():
            break
    out = np.sqrt(np.maximum(est, 0.0))
    return float(out[0]) if single else out.reshape(stack_shape)


@dataclass(frozen=True, eq=False)
class Spectral(ConstraintSpec):
    """``||T(M)||_2 < threshold`` for the branching matrix of the group-pair profile.

    The partition must be the group-pair partition of ``l`` groups: part ``i``
    holds the edges between groups ``block_index[i] = (a, b)``. When
    ``block_index`` is omitted the parts are taken in the order produced by
    :func:`symgraph.graphspace.partition_from_groups` (or from the
    partition's own labels when it carries them).
    """

    rho: np.ndarray
    connector: int
    threshold: float = 1.0
    block_index: tuple = field(default=())

    def __post_init__(self):
        rho = _as_vector(self.rho, "rho")
        if np.any(rho <= 0):
            raise InvalidInputError("group fractions must be positive")
        if abs(rho.sum() - 1.0) > 1e-9:
            raise InvalidInputError(f"group fractions must sum to 1, got {rho.sum()}")
        ell = rho.shape[0]
        if not 0 <= int(self.connector) < ell:
            raise InvalidInputError(f"connector {self.connector} out of range for {ell} groups")
        blocks = tuple(tuple(int(x) for x in pair) for pair in self.block_index)
        if not blocks:
            blocks = tuple((a, b) for a in range(ell) for b in range(a, ell))
        expected = ell * (ell - 1) // 2 + ell
        seen = {tuple(sorted(p)) for p in blocks}
        if len(blocks) != expected or len(seen) != expected or any(
            not (0 <= a < ell and 0 <= b < ell) for a, b in seen
        ):
            raise InvalidInputError(
                f"block_index must list each of the {expected} unordered group pairs exactly once"
            )
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "connector", int(self.connector))
        object.__setattr__(self, "threshold", float(self.threshold))
        object.__setattr__(self, "block_index", blocks)

    @property
    def num_groups(self) -> int:
        return self.rho.shape[0]

    def validate(self, part):
        if part.k != len(self.block_index):
            raise InvalidInputError(
                f"spectral spec needs the group-pair partition with k={len(self.block_index)}, got k={part.k}"
            )
        if part.labels and tuple(tuple(sorted(p)) for p in part.labels) != tuple(
            tuple(sorted(p)) for p in self.block_index
        ):
            raise InvalidInputError("partition labels disagree with the block_index of the constraint")

    def block_counts(self, M) -> np.ndarray:
        """Symmetric ``(s, l, l)`` group-pair count matrices for profiles ``M``."""
        M = np.atleast_2d(np.asarray(M, dtype=float))
        ell = self.num_groups
        out = np.zeros((M.shape[0], ell, ell))
        for i, (a, b) in enumerate(self.block_index):
            out[:, a, b] = M[:, i]
            out[:, b, a] = M[:, i]
        return out

    def norm(self, M, n: int) -> np.ndarray:
        T = branching_matrix(self.block_counts(M), self.rho, self.connector, n)
        return np.atleast_1d(spectral_norm(T))

    def norm_subgradient(self, m, n: int) -> tuple[float, np.ndarray]:
        """Value and a subgradient (w.r.t. the profile) of ``||T(m)||_2``."""
        T = branching_matrix(self.block_counts(m)[0], self.rho, self.connector, n)
        value = spectral_norm(T)
        grad = np.zeros(len(self.block_index))
        if value == 0 or T.size == 0:
            return value, grad
        U, _, Vt = np.linalg.svd(T)
        u, v = U[:, 0], Vt[0]
        keep = [g for g in range(self.num_groups) if g != self.connector]
        pos = {g: i for i, g in enumerate(keep)}
        scale = n**2 * self.rho
        for idx, (a, b) in enumerate(self.block_index):
            if a == self.connector or b == self.connector:
                continue
            ia, ib = pos[a], pos[b]
            g = u[ia] * v[ib] / scale[a]
            if a != b:
                g += u[ib] * v[ia] / scale[b]
            grad[idx] = g
        return value, grad

    def contains_many(self, M, part):
        self.validate(part)
        M = _check_dim(M, part)
        # strict inequality, no tolerance
        return self.norm(M, part.n) < self.threshold

    def to_dict(self):
        return {
            "type": "spectral",
            "rho": self.rho.tolist(),
            "connector": self.connector,
            "threshold": self.threshold,
            "block_index": [list(p) for p in self.block_index],
        }


@dataclass(frozen=True, eq=False)
class Intersection(ConstraintSpec):
    """Conjunction of member specs."""

    specs: tuple

    def __post_init__(self):
        specs = tuple(self.specs)
        if not specs:
            raise InvalidInputError("intersection needs at least one member")
        for s in specs:
            if not isinstance(s, ConstraintSpec):
                raise InvalidInputError(f"{s!r} is not a ConstraintSpec")
        object.__setattr__(self, "specs", specs)

    @property
    def is_linear(self):
        return all(s.is_linear for s in self.specs)

    def validate(self, part):
        for s in self.specs:
            s.validate(part)

    def contains_many(self, M, part):
        M = _check_dim(M, part)
        out = np.ones(M.shape[0], dtype=bool)
        for s in self.specs:
            out &= s.contains_many(M, part)
        return out

    def linear_rows(self, part):
        lo = np.zeros(part.k)
        hi = part.part_sizes.astype(float)
        As, bs = [np.zeros((0, part.k))], [np.zeros(0)]
        for s in self.specs:
            rows = s.linear_rows(part)
            if rows is None:
                continue
            A, b, l, h = rows
            As.append(A)
            bs.append(b)
            lo = np.maximum(lo, l)
            hi = np.minimum(hi, h)
        return np.vstack(As), np.concatenate(bs), lo, hi

    def nonlinear_parts(self):
        return [p for s in self.specs for p in s.nonlinear_parts()]

    def to_dict(self):
        return {"type": "intersection", "specs": [s.to_dict() for s in self.specs]}


def contains(spec: ConstraintSpec, m, part: Partition) -> bool:
    """Whether the profile ``m`` satisfies every condition of ``spec``."""
    return spec.contains(m, part)


def profile_space_size(part: Partition) -> int:
    return int(np.prod([int(p) + 1 for p in part.part_sizes], dtype=object))


def enumerate_profiles(part: Partition, cap: int = DEFAULT_ENUMERATION_CAP) -> np.ndarray:
    """All integer profiles in ``prod_i [0, p_i]`` as a ``(size, k)`` array, lexicographic."""
    size = profile_space_size(part)
    if size > cap:
        raise CapacityError(f"profile space has {size} points, above the enumeration cap {cap}", cap)
    grids = np.indices([int(p) + 1 for p in part.part_sizes])
    return grids.reshape(part.k, -1).T.astype(np.int64)


def _in_hull(points: np.ndarray, target: np.ndarray) -> bool:
    """LP test for ``target`` in the convex hull of ``points``."""
    s = points.shape[0]
    A_eq = np.vstack([points.T, np.ones((1, s))])
    b_eq = np.concatenate([target, [1.0]])
    res = linprog(np.zeros(s), A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    return res.status == 0


def verify_convexity(spec: ConstraintSpec, part: Partition, cap: int = DEFAULT_ENUMERATION_CAP) -> bool:
    """Check that the convex hull of the feasible profiles adds no integer point."""
    grid = enumerate_profiles(part, cap)
    feasible = spec.contains_many(grid, part)
    pts = grid[feasible]
    if pts.shape[0] <= 1:
        return True
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    candidates = grid[~feasible]
    candidates = candidates[np.all((candidates >= lo) & (candidates <= hi), axis=1)]
    if part.k == 1:
        return candidates.shape[0] == 0
    return not any(_in_hull(pts.astype(float), c.astype(float)) for c in candidates)


_REGISTRY = {
    "linear": lambda d: LinearSystem(d["A"], d["b"]),
    "budget": lambda d: Budget(d["costs"], d["budget"]),
    "box": lambda d: Box(d["lo"], d["hi"]),
    "spectral": lambda d: Spectral(
        d["rho"], d["connector"], d.get("threshold", 1.0), tuple(map(tuple, d.get("block_index", ())))
    ),
    "intersection": lambda d: Intersection(tuple(spec_from_dict(s) for s in d["specs"])),
}


def spec_from_dict(d: dict) -> ConstraintSpec:
    """Build a spec from its JSON tagged-union form ``{"type": ..., ...}``."""
    if not isinstance(d, dict) or "type" not in d:
        raise InvalidInputError("constraint must be an object with a 'type' field")
    kind = d["type"]
    if kind not in _REGISTRY:
        raise InvalidInputError(f"unknown constraint type {kind!r}; expected one of {sorted(_REGISTRY)}")
    try:
        return _REGISTRY[kind](d)
    except KeyError as exc:
        raise InvalidInputError(f"constraint of type {kind!r} is missing field {exc.args[0]!r}") from None
