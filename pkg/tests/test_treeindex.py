import numpy as np
import pytest
from hypothesis import given, strategies as st

from bartree import treeindex as ti
from bartree.errors import DomainError


@pytest.mark.parametrize("k, g", [(1, 0), (7, 2), (1024, 10), (8, 3), (2**62, 62)])
def test_generation_of(k, g):
    assert ti.generation_of(k) == g


@pytest.mark.parametrize("k, j, expected", [(13, 2, 3), (6, 1, 3), (9, 0, 9), (1, 0, 1)])
def test_ancestor(k, j, expected):
    assert ti.ancestor(k, j) == expected


def test_ancestor_beyond_root_rejected():
    with pytest.raises(DomainError):
        ti.ancestor(5, 3)


def test_subtree_counts():
    assert ti.subtree_counts(3, 0) == (15, 8, 15)
    assert ti.subtree_counts(3, 2) == (15, 8, 12)
    for p in range(6):
        assert ti.subtree_counts(p, p) == (2 ** (p + 1) - 1, 2**p, 2**p)


def test_subtree_counts_match_enumeration():
    for n in range(7):
        for p in range(n + 1):
            nodes = range(1, 2 ** (n + 1))
            expected = sum(1 for k in nodes if ti.generation_of(k) >= p)
            assert ti.subtree_counts(n, p)[2] == expected


def test_invalid_node_rejected():
    with pytest.raises(DomainError):
        ti.generation_of(0)
    with pytest.raises(DomainError):
        ti.parent(1)


@given(st.integers(min_value=1, max_value=2**60))
def test_children_parent_roundtrip(k):
    even, odd = ti.children(k)
    assert (even, odd) == (2 * k, 2 * k + 1)
    assert ti.parent(even) == ti.parent(odd) == k
    assert ti.generation_of(even) == ti.generation_of(k) + 1


@given(st.integers(min_value=0, max_value=20))
def test_generation_ids_cover_generation(g):
    ids = ti.generation_ids(g)
    assert len(ids) == ti.generation_size(g) == 2**g
    assert ti.generation_of(ids[0]) == g and ti.generation_of(ids[-1]) == g


def test_mother_ids():
    assert ti.mother_ids(3, 1).tolist() == list(range(1, 8))
    assert ti.mother_ids(3, 2).tolist() == list(range(2, 8))
    assert ti.mother_ids(2, 2).tolist() == [2, 3]
    with pytest.raises(DomainError):
        ti.mother_ids(1, 2)
    assert ti.node_range(3, 2).size == 0
    assert ti.node_range(2, 3).dtype == np.int64
