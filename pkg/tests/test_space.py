import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ptdlp.space import DiscreteSpace, SpaceTooLargeError, enumerate_states


def test_binary_d2_enumeration():
    s = enumerate_states(DiscreteSpace.binary(2))
    assert s.tolist() == [[0, 0], [0, 1], [1, 0], [1, 1]]


def test_ordinal_single_coordinate():
    s = enumerate_states(DiscreteSpace.ordinal(1, 2))
    assert s.tolist() == [[0], [1], [2]]


def test_cap_exceeded():
    with pytest.raises(SpaceTooLargeError, match="too large"):
        enumerate_states(DiscreteSpace.binary(21), cap=2**20)


def test_invalid_spaces():
    with pytest.raises(ValueError):
        DiscreteSpace.binary(0)
    with pytest.raises(ValueError):
        DiscreteSpace.one_hot(2, 0)


def test_point_space():
    s = DiscreteSpace.ordinal(3, 0)
    assert s.n_states == 1
    assert enumerate_states(s).tolist() == [[0, 0, 0]]


spaces = st.one_of(
    st.integers(1, 8).map(DiscreteSpace.binary),
    st.tuples(st.integers(1, 3), st.integers(1, 4)).map(lambda t: DiscreteSpace.ordinal(*t)),
    st.tuples(st.integers(1, 3), st.integers(2, 4)).map(lambda t: DiscreteSpace.one_hot(*t)),
)


@settings(max_examples=40, deadline=None)
@given(spaces)
def test_enumeration_is_bijection(space):
    s = enumerate_states(space)
    assert len(s) == space.n_states == np.prod([space.n_values] * space.dim)
    assert len({tuple(r) for r in s}) == len(s)
    assert space.contains(s)
    idx = space.index_of(s)
    assert np.array_equal(idx, np.arange(len(s)))
    assert np.array_equal(space.state_at(idx), s)


def test_one_hot_expansion_groups_sum_to_one():
    space = DiscreteSpace.one_hot(3, 4)
    z = space.expand(enumerate_states(space)).reshape(-1, 3, 4)
    assert np.all(z.sum(-1) == 1)


def test_contains_rejects_out_of_support():
    space = DiscreteSpace.binary(3)
    assert not space.contains(np.array([0, 2, 1]))
    with pytest.raises(ValueError):
        space.validate([0, 1])
