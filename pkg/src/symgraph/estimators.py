"""scikit-learn style wrappers.

Thin layer over the functional API: parameters go to ``__init__``,
``fit`` does the expensive preparation (solving, building profile tables)
and stores results in trailing-underscore attributes. Graph batches are
boolean ``(n_samples, N)`` edge-indicator arrays.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .analysis import diagnose
from .constraints import DEFAULT_ENUMERATION_CAP, ConstraintSpec
from .coupling import Sandwich, _rate_ci
from .exceptions import EmptySetError, InvalidInputError, InvalidStateError
from .graphspace import Partition, edge_profiles
from .maxent import INFEASIBLE, maximize_entropy
from .sampler import build_profile_sampler, sample_product_profile, sample_within_parts
from .streams import as_stream

__all__ = ["EdgeProfileTransformer", "MaxEntProductMeasure", "UniformGraphSampler", "SandwichCoupler"]


def _check_partition(part):
    if not isinstance(part, Partition):
        raise InvalidInputError(f"partition must be a Partition, got {type(part).__name__}")
    return part


def _check_graphs(X, part: Partition) -> np.ndarray:
    X = check_array(X, dtype=None, ensure_2d=True)
    if X.shape[1] != part.N:
        raise InvalidInputError(f"expected {part.N} edge columns, got {X.shape[1]}")
    if not np.all((X == 0) | (X == 1)):
        raise InvalidInputError("edge indicators must be 0/1")
    return X.astype(bool)


class EdgeProfileTransformer(TransformerMixin, BaseEstimator):
    """Map edge-indicator rows to edge profiles (edges per part)."""

    def __init__(self, partition=None):
        self.partition = partition

    def fit(self, X=None, y=None):
        part = _check_partition(self.partition)
        if X is not None:
            _check_graphs(X, part)
        self.n_features_in_ = part.N
        self.k_ = part.k
        return self

    def transform(self, X):
        check_is_fitted(self, "k_")
        return edge_profiles(_check_graphs(X, self.partition), self.partition)

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "k_")
        return np.array([f"v_{i + 1}" for i in range(self.k_)], dtype=object)


class MaxEntProductMeasure(BaseEstimator):
    """Product measure at the entropic optimizer of ``S``.

    After ``fit``: ``m_star_``, ``q_star_``, ``duals_``, ``status_``,
    ``solution_`` and ``diagnostics_`` (``None`` at zero thickness).
    """

    def __init__(self, partition=None, spec: ConstraintSpec | None = None, tol: float = 1e-10, max_cuts: int = 2000):
        self.partition = partition
        self.spec = spec
        self.tol = tol
        self.max_cuts = max_cuts

    def fit(self, X=None, y=None):
        part = _check_partition(self.partition)
        sol = maximize_entropy(part, self.spec, tol=self.tol, max_cuts=self.max_cuts)
        if sol.status == INFEASIBLE:
            raise EmptySetError("no profile satisfies the constraint")
        self.solution_ = sol
        self.m_star_, self.q_star_, self.duals_, self.status_ = sol.m_star, sol.q_star, sol.duals, sol.status
        self.diagnostics_ = diagnose(sol.m_star, part) if sol.converged else None
        return self

    def predict_proba(self, X=None):
        """Per-edge inclusion probabilities ``(N,)``."""
        check_is_fitted(self, "q_star_")
        return self.q_star_[self.partition.part_of]

    def score_samples(self, X):
        """Log-likelihood of each graph under the product measure."""
        check_is_fitted(self, "q_star_")
        part = self.partition
        V = edge_profiles(_check_graphs(X, part), part)
        q, p = self.q_star_, part.part_sizes
        with np.errstate(divide="ignore", invalid="ignore"):
            lq, l1q = np.log(q), np.log1p(-q)
            terms = np.where(V > 0, V * lq, 0.0) + np.where(p - V > 0, (p - V) * l1q, 0.0)
        return terms.sum(axis=1)

    def score(self, X, y=None):
        return float(np.mean(self.score_samples(X)))

    def sample(self, n_samples=1, random_state=None):
        check_is_fitted(self, "q_star_")
        if not self.solution_.converged:
            raise InvalidStateError(f"solver status is {self.status_!r}")
        return sample_product_profile(self.q_star_, self.partition, as_stream(random_state), n_samples)


class UniformGraphSampler(BaseEstimator):
    """Exact (or MCMC) uniform sampler on ``S``.

    After ``fit``: ``sampler_`` and, for exact strategies, ``log_size_`` (``ln |S|``).
    """

    def __init__(self, partition=None, spec: ConstraintSpec | None = None, strategy: str = "enumeration",
                 cap: int = DEFAULT_ENUMERATION_CAP):
        self.partition = partition
        self.spec = spec
        self.strategy = strategy
        self.cap = cap

    def fit(self, X=None, y=None):
        part = _check_partition(self.partition)
        self.sampler_ = build_profile_sampler(part, self.spec, self.strategy, self.cap)
        self.log_size_ = getattr(self.sampler_, "log_Z", None)
        return self

    def sample_profiles(self, n_samples=1, random_state=None):
        check_is_fitted(self, "sampler_")
        return self.sampler_.sample(as_stream(random_state), n_samples)

    def sample(self, n_samples=1, random_state=None):
        rng = as_stream(random_state)
        V = self.sample_profiles(n_samples, rng)
        return sample_within_parts(V, self.partition, rng)

    def score_samples(self, X):
        """``-ln |S|`` for members of ``S``, ``-inf`` otherwise."""
        check_is_fitted(self, "sampler_")
        if self.log_size_ is None:
            raise InvalidStateError("approximate samplers do not know |S|")
        part = self.partition
        V = edge_profiles(_check_graphs(X, part), part)
        inside = np.ones(V.shape[0], dtype=bool) if self.spec is None else self.spec.contains_many(V, part)
        return np.where(inside, -self.log_size_, -np.inf)


class SandwichCoupler(BaseEstimator):
    """Coupling ``G- <= G <= G+`` with ``G`` uniform on ``S`` and ``G+-`` product measures.

    After ``fit``: ``sandwich_`` (the prepared :class:`~symgraph.coupling.Sandwich`),
    ``bound_delta_`` and ``bound_valid_``.
    """

    def __init__(self, partition=None, spec: ConstraintSpec | None = None, epsilon: float = 0.5,
                 strategy: str = "enumeration", cap: int = DEFAULT_ENUMERATION_CAP, n_jobs: int = 1):
        self.partition = partition
        self.spec = spec
        self.epsilon = epsilon
        self.strategy = strategy
        self.cap = cap
        self.n_jobs = n_jobs

    def fit(self, X=None, y=None):
        part = _check_partition(self.partition)
        self.sandwich_ = Sandwich(part, self.spec, self.epsilon, self.strategy, cap=self.cap)
        self.bound_delta_, self.bound_valid_ = self.sandwich_.bound_delta()
        return self

    def sample(self, n_samples=1, random_state=None):
        """A :class:`~symgraph.coupling.CouplingBatch` of ``n_samples`` trials."""
        check_is_fitted(self, "sandwich_")
        return self.sandwich_.run(n_samples, as_stream(random_state), jobs=self.n_jobs)

    def score(self, n_samples=10_000, random_state=None):
        """Empirical rate of ``G- <= G <= G+``."""
        return _rate_ci(self.sample(n_samples, random_state).holds)[0]
