import math

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from symgraph.constraints import Box, Budget
from symgraph.coupling import CouplingBatch
from symgraph.estimators import EdgeProfileTransformer, MaxEntProductMeasure, SandwichCoupler, UniformGraphSampler
from symgraph.exceptions import EmptySetError, InvalidInputError
from symgraph.graphspace import EdgePartition, Partition, balanced_partition


def test_transformer():
    part = balanced_partition(4, 2)
    X = np.eye(6, dtype=int)
    t = EdgeProfileTransformer(part).fit(X)
    V = t.transform(X)
    assert V.shape == (6, 2) and np.all(V.sum(axis=1) == 1)
    assert t.get_feature_names_out().tolist() == ["v_1", "v_2"]
    with pytest.raises(InvalidInputError):
        t.transform(np.ones((1, 5)))
    with pytest.raises(InvalidInputError):
        t.transform(np.full((1, 6), 2))
    with pytest.raises(NotFittedError):
        EdgeProfileTransformer(part).transform(X)
    assert np.array_equal(EdgeProfileTransformer(part).fit_transform(X), V)


def test_transformer_rejects_non_partition():
    with pytest.raises(InvalidInputError):
        EdgeProfileTransformer([1, 2]).fit()


def test_maxent_measure_budget():
    part = Partition.from_sizes([10, 10])
    est = MaxEntProductMeasure(part, Budget([1, 2], 12)).fit()
    assert est.status_ == "converged"
    assert est.m_star_ == pytest.approx([4.392945302323583, 3.803527348838209], abs=1e-8)
    assert est.predict_proba().shape == (20,)
    assert est.diagnostics_.mu == pytest.approx(3.803527348838209, abs=1e-8)
    X = est.sample(50, random_state=3)
    assert X.shape == (50, 20)
    s = est.score_samples(X)
    V = np.stack([X[:, idx].sum(1) for idx in part.members], axis=1)
    q = est.q_star_
    expect = (V * np.log(q) + (part.part_sizes - V) * np.log1p(-q)).sum(1)
    assert np.allclose(s, expect)
    assert est.score(X) == pytest.approx(expect.mean())


def test_maxent_measure_degenerate_probabilities():
    part = EdgePartition.trivial(4)
    est = MaxEntProductMeasure(part, Box([0], [0])).fit()
    X = np.zeros((2, 6), int)
    X[1, 0] = 1
    s = est.score_samples(X)
    assert s[0] == 0.0 and s[1] == -math.inf


def test_maxent_measure_infeasible():
    with pytest.raises(EmptySetError):
        MaxEntProductMeasure(Partition.from_sizes([3]), Budget([1], -1)).fit()


def test_uniform_sampler():
    part = EdgePartition.trivial(4)
    est = UniformGraphSampler(part, Box([0], [2])).fit()
    assert est.log_size_ == pytest.approx(math.log(22))
    X = est.sample(200, random_state=1)
    assert X.shape == (200, 6) and np.all(X.sum(1) <= 2)
    s = est.score_samples(np.vstack([X[:1], np.ones((1, 6), int)]))
    assert s[0] == pytest.approx(-math.log(22)) and s[1] == -math.inf
    assert np.array_equal(est.sample(20, random_state=7), est.sample(20, random_state=7))


def test_uniform_sampler_strategies_agree_on_size():
    part = Partition.from_sizes([6, 6])
    a = UniformGraphSampler(part, Budget([1, 2], 8), strategy="enumeration").fit()
    b = UniformGraphSampler(part, Budget([1, 2], 8), strategy="budget-dp").fit()
    assert a.log_size_ == pytest.approx(b.log_size_, abs=1e-12)


def test_clone_and_params():
    est = SandwichCoupler(Partition.from_sizes([10, 10]), Budget([1, 2], 12), epsilon=0.8, n_jobs=2)
    c = clone(est)
    assert c.get_params()["epsilon"] == 0.8 and c.get_params()["n_jobs"] == 2


def test_sandwich_coupler():
    est = SandwichCoupler(Partition.from_sizes([10, 10]), Budget([1, 2], 12), epsilon=0.8).fit()
    batch = est.sample(200, random_state=4)
    assert isinstance(batch, CouplingBatch) and len(batch) == 200
    assert 0 <= est.score(500, random_state=4) <= 1
    assert est.bound_valid_ is False
    with pytest.raises(NotFittedError):
        SandwichCoupler(Partition.from_sizes([3])).sample(1)
