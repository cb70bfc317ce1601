"""Brute-force ground truth for tiny instances.

Two modes. ``explicit`` walks all ``2^N`` edge sets as integer bit codes
(bit ``e`` set iff edge ``e`` is present) and counts profiles directly;
``counts`` skips the graphs and uses products of binomials, which is all the
counting statements need.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.special import logsumexp

from .constraints import _REGISTRY, DEFAULT_ENUMERATION_CAP, ConstraintSpec, _check_dim, enumerate_profiles
from .constraints import profile_space_size as _grid_size
from .exceptions import CapacityError, InvalidInputError, InvalidStateError
from .graphspace import EdgePartition, Graph, Partition
from .maxent import ent, log_binomial
from .streams import as_stream

__all__ = [
    "ExplicitProfiles",
    "ExactSetSummary",
    "enumerate_set",
    "exact_profile_distribution",
    "total_variation",
    "verify_conditional_factorization",
    "profile_space_size",
    "entropy_gap_full_space",
    "check_orbit_constancy",
    "codes_to_indicators",
    "MAX_EXPLICIT_EDGES",
]

MAX_EXPLICIT_EDGES = 24


@dataclass(frozen=True, eq=False)
class ExplicitProfiles(ConstraintSpec):
    """Set given by an explicit list of allowed profiles (need not be convex)."""

    profiles: tuple

    def __post_init__(self):
        rows = tuple(tuple(int(x) for x in v) for v in self.profiles)
        if len({len(r) for r in rows}) > 1:
            raise InvalidInputError("all profiles must have the same length")
        object.__setattr__(self, "profiles", tuple(sorted(set(rows))))

    def validate(self, part):
        if self.profiles and len(self.profiles[0]) != part.k:
            raise InvalidInputError(f"profiles have length {len(self.profiles[0])}, partition has k={part.k}")

    def contains_many(self, M, part):
        M = _check_dim(M, part)
        allowed = set(self.profiles)
        return np.array([tuple(int(x) for x in row) in allowed for row in M], dtype=bool)

    def to_dict(self):
        return {"type": "explicit", "profiles": [list(v) for v in self.profiles]}


_REGISTRY["explicit"] = lambda d: ExplicitProfiles(tuple(map(tuple, d["profiles"])))


def _strides(part: Partition) -> np.ndarray:
    # mixed radix matching the lexicographic order of enumerate_profiles
    radix = part.part_sizes + 1
    return np.concatenate([np.cumprod(radix[::-1])[::-1][1:], [1]]).astype(np.int64)


def _part_masks(part: Partition) -> list[int]:
    return [sum(1 << int(e) for e in idx) for idx in part.members]


def _flat_profile_index(codes, part: Partition) -> np.ndarray:
    """Row of each code's profile in the full lexicographic profile grid."""
    flat = np.zeros(codes.shape[0], dtype=np.int64)
    for mask, stride in zip(_part_masks(part), _strides(part)):
        flat += np.bitwise_count(codes & np.uint32(mask)).astype(np.int64) * stride
    return flat


def codes_to_indicators(codes, N: int) -> np.ndarray:
    """Boolean ``(s, N)`` edge indicators of integer edge-set codes."""
    codes = np.asarray(codes, dtype=np.uint32)
    return ((codes[:, None] >> np.arange(N, dtype=np.uint32)[None, :]) & 1).astype(bool)


@dataclass(frozen=True, eq=False)
class ExactSetSummary:
    """Exact description of ``S``.

    ``profiles`` are the feasible profiles (lexicographic) with ``counts``
    the number of members having each; in explicit mode ``direct_counts``
    comes from walking the graphs and ``codes`` holds the member bit codes.
    """

    part: Partition
    profiles: np.ndarray
    counts: tuple
    direct_counts: tuple | None
    codes: np.ndarray | None
    mode: str

    @property
    def size(self) -> int:
        return int(sum(self.counts))

    @property
    def empty(self) -> bool:
        return self.size == 0

    @property
    def log_size(self) -> float:
        return math.log(self.size) if self.size else float("-inf")

    @property
    def profile_distribution(self) -> dict:
        return exact_profile_distribution(self)

    def graphs(self) -> list:
        """All members, as :class:`Graph` objects on an edge partition and indicator rows otherwise."""
        if self.codes is None:
            raise InvalidStateError("member list is only available in explicit mode")
        X = codes_to_indicators(self.codes, self.part.N)
        if isinstance(self.part, EdgePartition):
            return [Graph(self.part.n, x) for x in X]
        return list(X)

    def counting_identity_holds(self) -> bool:
        """Direct counts equal ``prod_i C(p_i, v_i)`` for every feasible ``v`` (explicit mode)."""
        if self.direct_counts is None:
            return True
        return tuple(self.direct_counts) == tuple(self.counts)

    def to_dict(self) -> dict:
        probs = exact_profile_distribution(self) if not self.empty else {}
        return {
            "size": self.size,
            "log_size": None if self.empty else self.log_size,
            "profiles": [
                {"v": [int(x) for x in v], "count": int(c), "prob": probs.get(tuple(int(x) for x in v), 0.0)}
                for v, c in zip(self.profiles, self.counts)
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _binomial_count(sizes, v) -> int:
    return math.prod(math.comb(int(p), int(x)) for p, x in zip(sizes, v))


def enumerate_set(part: Partition, spec: ConstraintSpec | None = None, mode: str = "auto",
                  cap: int = DEFAULT_ENUMERATION_CAP) -> ExactSetSummary:
    """Enumerate ``S`` exactly.

    ``mode="auto"`` picks explicit enumeration when ``N <= 24`` and ``2^N``
    fits under ``cap``, else counting mode. Raises :class:`CapacityError`
    when the profile grid (counts) or ``2^N`` (explicit) exceeds ``cap``.
    """
    if spec is not None:
        spec.validate(part)
    if mode == "auto":
        mode = "explicit" if part.N <= MAX_EXPLICIT_EDGES and 2 ** part.N <= cap else "counts"
    if mode not in ("explicit", "counts"):
        raise InvalidInputError(f"mode must be 'auto', 'explicit' or 'counts', got {mode!r}")
    grid = enumerate_profiles(part, cap)
    feasible = np.ones(grid.shape[0], dtype=bool) if spec is None else spec.contains_many(grid, part)
    sizes = [int(p) for p in part.part_sizes]
    profiles = grid[feasible]
    counts = tuple(_binomial_count(sizes, v) for v in profiles)
    if mode == "counts":
        return ExactSetSummary(part, profiles, counts, None, None, "counts")

    if part.N > MAX_EXPLICIT_EDGES or 2 ** part.N > cap:
        raise CapacityError(f"explicit enumeration of 2^{part.N} graphs exceeds the cap {cap}", cap)
    codes = np.arange(2 ** part.N, dtype=np.uint32)
    flat = _flat_profile_index(codes, part)
    member = feasible[flat]
    direct = np.bincount(flat[member], minlength=grid.shape[0])[feasible]
    return ExactSetSummary(part, profiles, counts, tuple(int(c) for c in direct), codes[member], "explicit")


def exact_profile_distribution(summary: ExactSetSummary, ent_fn=ent, atol: float = 1e-12) -> dict:
    """Map profile -> probability, ``exp(Ent(v)) / sum_w exp(Ent(w))``.

    The result is cross-checked against ``count(v) / |S|``; a mismatch above
    ``atol`` raises :class:`InvalidStateError`. ``ent_fn`` exists so that a
    corrupted entropy can be injected in tests.
    """
    if summary.empty:
        raise InvalidInputError("set is empty; no profile distribution")
    part = summary.part
    lw = np.array([ent_fn(v, part) for v in summary.profiles], dtype=float)
    probs = np.exp(lw - logsumexp(lw))
    size = summary.size
    direct = summary.direct_counts if summary.direct_counts is not None else summary.counts
    by_count = np.array([c / size for c in direct])
    err = float(np.max(np.abs(probs - by_count)))
    if not err <= atol:
        raise InvalidStateError(f"entropy weights disagree with direct counts by {err:.3e}")
    return {tuple(int(x) for x in v): float(p) for v, p in zip(summary.profiles, probs)}


def total_variation(d1, d2) -> float:
    """Half the L1 distance between two distributions.

    Accepts dicts (missing keys count as zero mass) or aligned arrays.
    """
    if isinstance(d1, dict) or isinstance(d2, dict):
        keys = set(d1) | set(d2)
        return 0.5 * math.fsum(abs(d1.get(x, 0.0) - d2.get(x, 0.0)) for x in keys)
    a, b = np.asarray(d1, dtype=float), np.asarray(d2, dtype=float)
    if a.shape != b.shape:
        raise InvalidInputError("distributions must share a support")
    return 0.5 * float(np.abs(a - b).sum())


def _random_events(part: Partition, rng):
    events = []
    for idx in part.members:
        labels = rng.integers(0, 3, size=idx.shape[0])  # 0 free, 1 forced in, 2 forced out
        events.append((idx[labels == 1].tolist(), idx[labels == 2].tolist()))
    return events


def _check_event(part, events):
    if len(events) != part.k:
        raise InvalidInputError(f"need one (I, O) pair per part, got {len(events)}")
    for i, (I, O) in enumerate(events):
        I, O = set(int(e) for e in I), set(int(e) for e in O)
        if I & O:
            raise InvalidInputError(f"event for part {i} forces edges both in and out: {sorted(I & O)}")
        allowed = set(part.members[i].tolist())
        if not (I | O) <= allowed:
            raise InvalidInputError(f"event for part {i} uses edges outside the part")


def verify_conditional_factorization(summary: ExactSetSummary, part: Partition | None = None, families: int = 100,
                                     rng=None, events=None) -> bool:
    """Check that, given the profile, events on different parts are independent.

    Each event family is a list of ``(I_i, O_i)`` per part: edges forced in
    and forced out of part ``i``. For every feasible ``v`` this checks
    ``P(all A_i | v) = prod_i P(A_i | v)`` in exact integer arithmetic. When
    ``events`` is not given, ``families`` random families are drawn.
    """
    part = summary.part if part is None else part
    if summary.codes is None:
        raise InvalidStateError("conditional factorization needs explicit enumeration")
    if summary.empty:
        return True
    if events is None:
        rng = as_stream(rng if rng is not None else 0)
        events = [_random_events(part, rng) for _ in range(families)]
    for fam in events:
        _check_event(part, fam)

    codes = summary.codes
    n_prof = summary.profiles.shape[0]
    flat = _flat_profile_index(codes, part)
    pos = np.full(_grid_size(part), -1, dtype=np.int64)
    pos[summary.profiles @ _strides(part)] = np.arange(n_prof)
    prof_of = pos[flat]
    base = np.bincount(prof_of, minlength=n_prof)

    for fam in events:
        joint = np.ones(codes.shape[0], dtype=bool)
        singles = []
        for I, O in fam:
            mi = np.uint32(sum(1 << int(e) for e in I))
            mo = np.uint32(sum(1 << int(e) for e in O))
            ok = ((codes & mi) == mi) & ((codes & mo) == 0)
            joint &= ok
            singles.append(np.bincount(prof_of[ok], minlength=n_prof))
        cj = np.bincount(prof_of[joint], minlength=n_prof)
        for j in range(n_prof):
            tot = int(base[j])
            lhs = Fraction(int(cj[j]), tot)
            rhs = math.prod((Fraction(int(s[j]), tot) for s in singles), start=Fraction(1))
            if lhs != rhs:
                return False
    return True


def profile_space_size(part: Partition) -> tuple[int, bool]:
    """``(prod_i (p_i + 1), value <= n^(2k))``."""
    value = _grid_size(part)
    return value, value <= part.n ** (2 * part.k)


def entropy_gap_full_space(part: Partition) -> float:
    """``ln 2^N - Ent(floor(p/2))``: point-estimate loss for the set of all graphs."""
    p = part.part_sizes
    return float(part.N * math.log(2.0) - log_binomial(p, p // 2).sum())


def check_orbit_constancy(member, part: Partition, X, permutations: int = 100, rng=None) -> bool:
    """Membership is unchanged by random permutations of edges within each part.

    ``member`` maps a boolean ``(s, N)`` array to ``(s,)`` membership and
    ``X`` holds the graphs to test.
    """
    rng = as_stream(rng if rng is not None else 0)
    X = np.atleast_2d(np.asarray(X, dtype=bool))
    if X.shape[0] == 0:
        return True
    before = np.asarray(member(X), dtype=bool)
    for _ in range(permutations):
        perm = np.arange(part.N)
        for idx in part.members:
            perm[idx] = idx[np.argsort(rng.random(idx.shape[0]), kind="stable")]
        if not np.array_equal(np.asarray(member(X[:, perm]), dtype=bool), before):
            return False
    return True
