"""Exact and approximate sampling from the uniform measure on a symmetric set.

A uniform member of ``S`` is drawn in two stages: first an edge profile
``v`` with probability proportional to ``exp(Ent(v))`` over the feasible
profiles, then, independently for every part, a uniformly random
``v_i``-subset of the part's edges. The first stage has three strategies:

``enumeration``
    exact categorical draw over every feasible profile (small profile spaces);
``budget-dp``
    exact draw for a single budget constraint with integer (or rationally
    scalable) costs, via a dynamic program over parts and remaining budget;
``mcmc``
    Metropolis chain on the profile lattice; approximate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce

import numpy as np
from scipy.special import logsumexp

from .constraints import (
    DEFAULT_ENUMERATION_CAP,
    Budget,
    ConstraintSpec,
    Intersection,
    enumerate_profiles,
)
from .exceptions import EmptySetError, InvalidInputError, InvalidStrategyError
from .graphspace import EdgePartition, Graph, Partition
from .maxent import log_binomial, maximize_entropy
from .streams import RandomStream, as_stream

__all__ = [
    "ProfileDistribution",
    "BudgetDP",
    "MetropolisProfileChain",
    "STRATEGIES",
    "build_profile_sampler",
    "sample_profile",
    "sample_within_parts",
    "subsets_from_keys",
    "sample_uniform",
    "sample_product",
    "sample_product_profile",
]

STRATEGIES = ("enumeration", "budget-dp", "mcmc")
_ALIASES = {"enum": "enumeration", "dp": "budget-dp", "budget_dp": "budget-dp"}


def _normalize_strategy(strategy: str) -> str:
    s = _ALIASES.get(strategy, strategy)
    if s not in STRATEGIES:
        raise InvalidStrategyError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    return s


def _inverse_cdf(log_weights: np.ndarray, u: np.ndarray) -> np.ndarray:
    w = np.exp(log_weights - log_weights.max())
    cdf = np.cumsum(w)
    idx = np.searchsorted(cdf, np.asarray(u) * cdf[-1], side="right")
    return np.minimum(idx, len(w) - 1)


@dataclass(frozen=True, eq=False)
class ProfileDistribution:
    """Exact distribution of the edge profile of a uniform member of ``S``.

    ``support`` rows are the feasible profiles in lexicographic order and
    ``log_weights`` their entropies; ``log_Z`` is ``log |S|``.
    """

    support: np.ndarray
    log_weights: np.ndarray
    log_Z: float
    strategy: str = "enumeration"
    exact: bool = True

    @property
    def probabilities(self) -> np.ndarray:
        return np.exp(self.log_weights - self.log_Z)

    def as_dict(self) -> dict:
        return {tuple(int(x) for x in v): float(p) for v, p in zip(self.support, self.probabilities)}

    def inverse_cdf(self, u) -> np.ndarray:
        """Profiles at quantiles ``u`` (one uniform per draw)."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        return self.support[_inverse_cdf(self.log_weights, u)]

    def sample(self, rng, size=None) -> np.ndarray:
        rng = as_stream(rng)
        u = rng.random(1 if size is None else size)
        out = self.inverse_cdf(u)
        return out[0] if size is None else out

    @classmethod
    def enumerate(cls, part: Partition, spec: ConstraintSpec | None, cap: int = DEFAULT_ENUMERATION_CAP):
        grid = enumerate_profiles(part, cap)
        if spec is not None:
            grid = grid[spec.contains_many(grid, part)]
        if grid.shape[0] == 0:
            raise EmptySetError("no profile satisfies the constraint")
        lw = log_binomial(part.part_sizes[None, :], grid).sum(axis=1)
        return cls(grid, lw, float(logsumexp(lw)), "enumeration", True)


def _integer_scale(values, max_denominator: int = 10**6) -> int:
    """Least common denominator making every value an integer; reject if above the cap."""
    dens = []
    for x in values:
        frac = Fraction(float(x)).limit_denominator(max_denominator)
        if abs(float(frac) - float(x)) > 1e-12 * max(1.0, abs(float(x))):
            raise InvalidStrategyError(f"cost {x} is not a rational with denominator <= {max_denominator}")
        dens.append(frac.denominator)
    lcd = reduce(lambda a, b: a * b // math.gcd(a, b), dens, 1)
    if lcd > max_denominator:
        raise InvalidStrategyError(f"common denominator {lcd} of the costs exceeds {max_denominator}")
    return lcd


def _single_budget(spec) -> Budget | None:
    if isinstance(spec, Budget):
        return spec
    if isinstance(spec, Intersection) and len(spec.specs) == 1:
        return _single_budget(spec.specs[0])
    return None


class BudgetDP:
    """Exact profile sampler for ``sum_i c_i v_i <= B`` with integer costs.

    ``table[j, b]`` is the log of the number of graphs restricted to parts
    ``0..j-1`` whose (scaled) cost is at most ``b``.
    """

    strategy = "budget-dp"
    exact = True

    def __init__(self, part: Partition, spec: Budget, max_denominator: int = 10**6, max_budget: int = 10**8):
        spec.validate(part)
        scale = _integer_scale(list(spec.costs) + [spec.budget], max_denominator) if not np.all(
            spec.costs == np.round(spec.costs)) else 1
        costs = np.round(spec.costs * scale).astype(np.int64)
        budget = math.floor(spec.budget * scale + 1e-9)
        if budget < 0:
            raise EmptySetError(f"budget {spec.budget} is negative; the set is empty")
        p = part.part_sizes.astype(np.int64)
        budget = int(min(budget, int(np.dot(costs, p))))
        if budget > max_budget:
            raise InvalidStrategyError(f"scaled budget {budget} exceeds the table cap {max_budget}")
        self.part, self.costs, self.budget, self.p = part, costs, budget, p
        self.logC = [log_binomial(pi, np.arange(pi + 1)) for pi in p]
        k = part.k
        table = np.empty((k + 1, budget + 1))
        table[0] = 0.0
        for j in range(k):
            table[j + 1] = self._convolve(table[j], self.logC[j], int(costs[j]))
        self.table = table
        self.log_Z = float(table[k, budget])

    def _convolve(self, prev, logc, c):
        B = prev.shape[0] - 1
        if c == 0:
            return prev + logsumexp(logc)
        acc = np.full(B + 1, -np.inf)
        vmax = min(len(logc) - 1, B // c)
        for v in range(vmax + 1):
            s = c * v
            np.logaddexp(acc[s:], logc[v] + prev[: B + 1 - s], out=acc[s:])
        return acc

    def _conditional(self, j, b):
        """Log weights of ``v_j`` given remaining budget ``b`` for parts ``0..j``."""
        c = int(self.costs[j])
        vmax = len(self.logC[j]) - 1 if c == 0 else min(len(self.logC[j]) - 1, b // c)
        v = np.arange(vmax + 1)
        return self.logC[j][: vmax + 1] + self.table[j, b - c * v]

    def inverse_cdf(self, u) -> np.ndarray:
        """Profiles at quantiles ``u`` of the lexicographic (last part first) order.

        A single uniform per draw is refined part by part: after choosing a
        value its position within the chosen cell is rescaled to a fresh
        uniform.
        """
        u = np.atleast_1d(np.asarray(u, dtype=float))
        out = np.empty((u.shape[0], self.part.k), dtype=np.int64)
        for r, ur in enumerate(u):
            b = self.budget
            for j in range(self.part.k - 1, -1, -1):
                lw = self._conditional(j, b)
                w = np.exp(lw - lw.max())
                cdf = np.cumsum(w)
                total = cdf[-1]
                x = ur * total
                v = min(int(np.searchsorted(cdf, x, side="right")), len(w) - 1)
                lo = cdf[v - 1] if v > 0 else 0.0
                ur = min(max((x - lo) / w[v], 0.0), np.nextafter(1.0, 0.0))
                out[r, j] = v
                b -= int(self.costs[j]) * v
        return out

    def sample(self, rng, size=None) -> np.ndarray:
        rng = as_stream(rng)
        out = self.inverse_cdf(rng.random(1 if size is None else size))
        return out[0] if size is None else out

    def log_weight(self, v) -> float:
        return float(sum(self.logC[j][int(x)] for j, x in enumerate(v)))

    def to_distribution(self, cap: int = DEFAULT_ENUMERATION_CAP) -> ProfileDistribution:
        """Enumerate the support (small instances only) for comparison with :class:`ProfileDistribution`."""
        grid = enumerate_profiles(self.part, cap)
        grid = grid[grid @ self.costs <= self.budget]
        lw = log_binomial(self.p[None, :], grid).sum(axis=1)
        return ProfileDistribution(grid, lw, self.log_Z, "budget-dp", True)


def _feasible_start(part, spec, m_star) -> np.ndarray:
    """Nearest feasible integer profile among the floor/ceil roundings of ``m_star``."""
    k = part.k
    fl = np.floor(m_star).astype(np.int64)
    if k <= 16:
        combos = ((np.arange(2**k)[:, None] >> np.arange(k)) & 1).astype(np.int64)
        cand = np.minimum(fl[None, :] + combos, part.part_sizes)
        ok = spec.contains_many(cand, part) if spec is not None else np.ones(len(cand), bool)
        if ok.any():
            cand = cand[ok]
            return cand[np.argmin(np.abs(cand - m_star).sum(axis=1))]
    start = np.round(m_star).astype(np.int64)
    if spec is None or spec.contains(start, part):
        return start
    # shrink towards the origin, which satisfies budget-type constraints
    for t in np.linspace(1, 0, 101):
        cand = np.floor(t * m_star).astype(np.int64)
        if spec.contains(cand, part):
            return cand
    raise EmptySetError("could not find a feasible starting profile near the optimizer")


class MetropolisProfileChain:
    """Metropolis chain on feasible integer profiles with target ``exp(Ent(v))``.

    Proposal: pick a part uniformly and move its count by +1 or -1 with equal
    probability; infeasible or out-of-range proposals are rejected. Output is
    approximate.
    """

    strategy = "mcmc"
    exact = False

    def __init__(self, part, spec, burn_in: int = 100_000, thinning: int | None = None, start=None):
        self.part, self.spec = part, spec
        self.burn_in = int(burn_in)
        self.thinning = int(thinning) if thinning is not None else int(part.k * part.part_sizes.max())
        if start is None:
            sol = maximize_entropy(part, spec)
            if sol.status == "infeasible":
                raise EmptySetError("no profile satisfies the constraint")
            start = _feasible_start(part, spec, sol.m_star)
        self.start = np.asarray(start, dtype=np.int64)
        self.accepted = 0
        self.proposed = 0
        self.trace = None

    def _run(self, rng, steps, state, record_every):
        p = self.part.part_sizes
        k = self.part.k
        parts = rng.integers(0, k, size=steps)
        signs = rng.integers(0, 2, size=steps) * 2 - 1
        logu = np.log(rng.random(steps))
        out = []
        state = state.copy()
        for t in range(steps):
            i, s = parts[t], signs[t]
            new = state[i] + s
            self.proposed += 1
            if 0 <= new <= p[i]:
                # log C(p, v+1) - log C(p, v) = log((p - v) / (v + 1))
                d = math.log((p[i] - state[i]) / (state[i] + 1)) if s > 0 else math.log(state[i] / (p[i] - state[i] + 1))
                if logu[t] < d:
                    prop = state.copy()
                    prop[i] = new
                    if self.spec is None or self.spec.contains(prop, self.part):
                        state = prop
                        self.accepted += 1
            if record_every and (t + 1) % record_every == 0:
                out.append(state.copy())
        return state, out

    def sample(self, rng, size=None) -> np.ndarray:
        rng = as_stream(rng)
        n_draws = 1 if size is None else size
        state, _ = self._run(rng, self.burn_in, self.start, 0)
        _, out = self._run(rng, n_draws * self.thinning, state, self.thinning)
        out = np.array(out, dtype=np.int64).reshape(n_draws, self.part.k)
        self.trace = out
        return out[0] if size is None else out

    def inverse_cdf(self, u) -> np.ndarray:
        raise InvalidStrategyError("the mcmc strategy has no inverse CDF; draws come from the chain")

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.proposed if self.proposed else float("nan")

    def geweke(self, first: float = 0.1, last: float = 0.5) -> np.ndarray:
        """Per-coordinate z-scores comparing early and late means of the recorded trace."""
        if self.trace is None or self.trace.shape[0] < 10:
            return np.full(self.part.k, np.nan)
        x = self.trace.astype(float)
        a = x[: max(1, int(first * len(x)))]
        b = x[int((1 - last) * len(x)):]
        se = np.sqrt(a.var(axis=0) / len(a) + b.var(axis=0) / len(b))
        return np.divide(a.mean(0) - b.mean(0), se, out=np.zeros(x.shape[1]), where=se > 0)


def build_profile_sampler(part: Partition, spec: ConstraintSpec | None, strategy: str = "enumeration",
                          cap: int = DEFAULT_ENUMERATION_CAP, **mcmc_options):
    """Profile-stage sampler for ``strategy``; raises :class:`EmptySetError` if ``S`` is empty."""
    strategy = _normalize_strategy(strategy)
    if strategy == "enumeration":
        return ProfileDistribution.enumerate(part, spec, cap)
    if strategy == "budget-dp":
        budget = _single_budget(spec)
        if budget is None:
            raise InvalidStrategyError("budget-dp needs a single Budget constraint")
        return BudgetDP(part, budget)
    return MetropolisProfileChain(part, spec, **mcmc_options)


def sample_profile(part: Partition, spec: ConstraintSpec | None, strategy: str = "enumeration",
                   rng=None, size=None, cap: int = DEFAULT_ENUMERATION_CAP) -> np.ndarray:
    """Edge profile(s) of uniform member(s) of ``S``."""
    return build_profile_sampler(part, spec, strategy, cap).sample(as_stream(rng), size)


def subsets_from_keys(keys: np.ndarray, counts) -> np.ndarray:
    """Mark the ``counts[r]`` smallest keys of each row (ties broken by position)."""
    keys = np.atleast_2d(keys)
    counts = np.broadcast_to(np.asarray(counts).reshape(-1, 1), (keys.shape[0], 1))
    order = np.argsort(keys, axis=1, kind="stable")
    ranks = np.empty_like(order)
    np.put_along_axis(ranks, order, np.arange(keys.shape[1])[None, :].repeat(keys.shape[0], 0), axis=1)
    return ranks < counts


def sample_within_parts(v, part: Partition, rng=None) -> np.ndarray:
    """Edge indicators with a uniform ``v_i``-subset of every part.

    ``v`` may be one profile ``(k,)`` or a batch ``(s, k)``; the result has
    shape ``(N,)`` or ``(s, N)`` respectively. Each subset is the set of the
    ``v_i`` smallest of ``p_i`` i.i.d. uniform keys, so every one of the
    ``C(p_i, v_i)`` subsets is equally likely.
    """
    rng = as_stream(rng)
    V = np.asarray(v)
    single = V.ndim == 1
    V = np.atleast_2d(V)
    if V.shape[1] != part.k:
        raise InvalidInputError(f"profiles must have length k={part.k}")
    if np.any(V < 0) or np.any(V > part.part_sizes) or np.any(V != np.round(V)):
        raise InvalidInputError("profiles must be integers in [0, p_i]")
    V = V.astype(np.int64)
    X = np.zeros((V.shape[0], part.N), dtype=bool)
    for i, idx in enumerate(part.members):
        keys = rng.random((V.shape[0], idx.shape[0]))
        X[:, idx] = subsets_from_keys(keys, V[:, i])
    return X[0] if single else X


def _wrap(X, part, single):
    if single and isinstance(part, EdgePartition):
        return Graph(part.n, X)
    return X


def sample_uniform(part: Partition, spec: ConstraintSpec | None, strategy: str = "enumeration", rng=None,
                   size=None, sampler=None, cap: int = DEFAULT_ENUMERATION_CAP):
    """Uniform member(s) of ``S``.

    Returns a :class:`Graph` for a single draw on an :class:`EdgePartition`,
    otherwise a boolean ``(N,)`` or ``(size, N)`` edge-indicator array. Pass
    a prebuilt ``sampler`` to avoid rebuilding the profile stage.
    """
    rng = as_stream(rng)
    if sampler is None:
        sampler = build_profile_sampler(part, spec, strategy, cap)
    V = sampler.sample(rng, size)
    return _wrap(sample_within_parts(V, part, rng), part, size is None)


def _check_probability_matrix(Q, n=None):
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or (n is not None and Q.shape[0] != n):
        raise InvalidInputError("Q must be a square n x n matrix")
    if not np.all(np.isfinite(Q)) or np.any(Q < 0) or np.any(Q > 1):
        raise InvalidInputError("Q entries must lie in [0, 1]")
    if not np.allclose(Q, Q.T, atol=0, rtol=0) or np.any(np.diag(Q) != 0):
        raise InvalidInputError("Q must be symmetric with zero diagonal")
    return Q


def sample_product(Q, rng=None, size=None):
    """Graph(s) with each edge ``{u, v}`` present independently with probability ``Q[u, v]``."""
    Q = _check_probability_matrix(Q)
    n = Q.shape[0]
    rows, cols = np.triu_indices(n, k=1)
    q = Q[rows, cols]
    rng = as_stream(rng)
    X = rng.random((1 if size is None else size, q.shape[0])) < q
    if size is None:
        return Graph(n, X[0])
    return X


def sample_product_profile(q, part: Partition, rng=None, size=None):
    """Product-measure draw(s) with per-part edge probabilities ``q``."""
    q = np.asarray(q, dtype=float)
    if q.shape != (part.k,) or np.any(q < 0) or np.any(q > 1):
        raise InvalidInputError("q must have one probability in [0, 1] per part")
    rng = as_stream(rng)
    X = rng.random((1 if size is None else size, part.N)) < q[part.part_of]
    return _wrap(X[0], part, True) if size is None else X
