import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from symgraph.constraints import (
    Box,
    Budget,
    Intersection,
    LinearSystem,
    Spectral,
    branching_matrix,
    contains,
    enumerate_profiles,
    spec_from_dict,
    spectral_norm,
    verify_convexity,
)
from symgraph.exceptions import CapacityError, InvalidInputError
from symgraph.graphspace import Partition, partition_from_groups
from symgraph.oracle import ExplicitProfiles


def test_budget_examples():
    part = Partition.from_sizes([3, 3])
    spec = Budget([1, 2], 3)
    assert contains(spec, [1, 1], part)
    assert not contains(spec, [2, 1], part)


def test_contains_dimension_mismatch():
    with pytest.raises(InvalidInputError):
        Budget([1, 2], 3).contains([1, 1, 1], Partition.from_sizes([3, 3]))


@given(st.lists(st.integers(0, 5), min_size=2, max_size=3), st.integers(0, 20))
def test_budget_equals_linear_system(costs, budget):
    part = Partition.from_sizes([4] * len(costs))
    grid = enumerate_profiles(part)
    a = Budget(costs, budget).contains_many(grid, part)
    b = LinearSystem([costs], [budget]).contains_many(grid, part)
    assert np.array_equal(a, b)


@given(st.lists(st.integers(0, 5), min_size=2, max_size=2), st.integers(0, 15))
def test_budget_downward_closed(costs, budget):
    part = Partition.from_sizes([4, 4])
    spec = Budget(costs, budget)
    for m in enumerate_profiles(part):
        if spec.contains(m, part):
            for i in range(2):
                if m[i] > 0:
                    lower = m.copy()
                    lower[i] -= 1
                    assert spec.contains(lower, part)


def test_box_validation():
    with pytest.raises(InvalidInputError):
        Box([2], [1])
    with pytest.raises(InvalidInputError):
        Box([0], [7]).validate(Partition.from_sizes([6]))


def test_branching_matrix_examples():
    M = np.zeros((3, 3))
    M[0, 0], M[0, 1], M[1, 0], M[1, 1] = 800, 600, 600, 450
    T = branching_matrix(M, [0.4, 0.3, 0.3], 2, 100)
    # hand evaluation: 800/(1e4*0.4)=0.2, 600/(1e4*0.4)=0.15, 600/(1e4*0.3)=0.2, 450/(1e4*0.3)=0.15
    assert np.allclose(T, [[0.2, 0.15], [0.2, 0.15]], atol=1e-15)
    assert np.all(branching_matrix(np.zeros((3, 3)), [0.4, 0.3, 0.3], 2, 100) == 0)
    assert np.allclose(branching_matrix(3 * M, [0.4, 0.3, 0.3], 2, 100), 3 * T)
    with pytest.raises(InvalidInputError):
        branching_matrix(M, [0.5, 0.5, 0.0], 2, 100)


def test_spectral_norm_examples():
    assert spectral_norm(np.eye(2)) == pytest.approx(1.0, rel=1e-10)
    assert spectral_norm(np.zeros((2, 2))) == 0.0
    assert spectral_norm([[3.0, 4.0], [0.0, 0.0]]) == pytest.approx(5.0, rel=1e-10)
    # rank one: sqrt(2) * sqrt(0.2^2 + 0.15^2)
    assert spectral_norm([[0.2, 0.15], [0.2, 0.15]]) == pytest.approx(0.35355339059327373, rel=1e-10)


@given(st.integers(0, 2**32 - 1), st.integers(1, 5), st.integers(1, 5))
def test_spectral_norm_matches_svd(seed, r, c):
    T = np.random.default_rng(seed).normal(size=(r, c))
    assert spectral_norm(T) == pytest.approx(np.linalg.svd(T, compute_uv=False)[0], rel=1e-8)


def _groups_part():
    return partition_from_groups([0, 0, 0, 0, 1, 1, 1, 2, 2, 2])


def test_spectral_containment_strict():
    part = _groups_part()
    m = np.minimum(part.part_sizes, 2)
    base = Spectral([0.4, 0.3, 0.3], 0)
    value = base.norm(m[None, :], part.n)[0]
    assert value > 0
    assert not Spectral([0.4, 0.3, 0.3], 0, value).contains(m, part)
    assert Spectral([0.4, 0.3, 0.3], 0, np.nextafter(value, 1.0)).contains(m, part)
    assert Spectral([0.4, 0.3, 0.3], 0, 0.05).contains(np.zeros(part.k), part)


def test_spectral_relabel_invariance():
    part = _groups_part()
    a = Spectral([0.4, 0.3, 0.3], 0, 0.2)
    # swapping groups 1 and 2 (and the block index accordingly) leaves containment unchanged
    swap = {0: 0, 1: 2, 2: 1}
    blocks = tuple(tuple(sorted((swap[x], swap[y]))) for x, y in a.block_index)
    b = Spectral([0.4, 0.3, 0.3], 0, 0.2, blocks)
    gen = np.random.default_rng(0)
    M = gen.integers(0, part.part_sizes + 1, size=(200, part.k))
    assert np.allclose(a.norm(M, part.n), b.norm(M, part.n))


def test_spectral_validation():
    with pytest.raises(InvalidInputError):
        Spectral([0.5, 0.6], 0)
    with pytest.raises(InvalidInputError):
        Spectral([0.5, 0.5], 3)
    with pytest.raises(InvalidInputError):
        Spectral([0.5, 0.5], 0).validate(Partition.from_sizes([3, 3]))


def test_intersection_is_conjunction():
    part = Partition.from_sizes([5, 5])
    specs = (Budget([1, 1], 6), Box([1, 0], [5, 4]), LinearSystem([[1, -1]], [1]))
    both = Intersection(specs)
    grid = enumerate_profiles(part)
    expect = np.logical_and.reduce([s.contains_many(grid, part) for s in specs])
    assert np.array_equal(both.contains_many(grid, part), expect)


def test_convexity_examples():
    part = Partition.from_sizes([2, 2])
    assert verify_convexity(Budget([1, 1], 2), part)
    assert verify_convexity(LinearSystem([[1, -2], [-1, 1]], [1, 1]), Partition.from_sizes([4, 4]))
    assert not verify_convexity(ExplicitProfiles(((1,), (3,))), Partition.from_sizes([4]))
    assert not verify_convexity(ExplicitProfiles(((0, 0), (2, 2))), part)


def test_convexity_cap():
    with pytest.raises(CapacityError) as info:
        verify_convexity(Budget([1, 1], 2), Partition.from_sizes([1000, 1000]), cap=10**5)
    assert info.value.cap == 10**5


@pytest.mark.parametrize("spec", [
    Budget([1, 2], 3),
    LinearSystem([[1, 0], [0, 1]], [2, 3]),
    Box([0, 1], [2, 3]),
    Intersection((Budget([1, 1], 4), Box([0, 0], [3, 3]))),
])
def test_dict_roundtrip(spec):
    part = Partition.from_sizes([3, 3])
    again = spec_from_dict(spec.to_dict())
    grid = enumerate_profiles(part)
    assert np.array_equal(again.contains_many(grid, part), spec.contains_many(grid, part))
    assert again.to_dict() == spec.to_dict()


def test_dict_errors():
    with pytest.raises(InvalidInputError, match="unknown constraint type"):
        spec_from_dict({"type": "nope"})
    with pytest.raises(InvalidInputError, match="budget"):
        spec_from_dict({"type": "budget", "costs": [1]})


def test_enumerate_profiles_lexicographic():
    grid = enumerate_profiles(Partition.from_sizes([1, 2]))
    assert [tuple(r) for r in grid] == list(itertools.product(range(2), range(3)))
