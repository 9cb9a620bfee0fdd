import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hco.errors import CapacityError, ParamError
from hco.statecore import (
    BOT,
    BasisState,
    OracleParams,
    SparseState,
    count_consistent,
    db_get,
    db_set,
    deserialize,
    enumerate_consistent,
    history_append,
    history_function,
    is_consistent,
    random_state_in_A,
    serialize,
)


def brute_force_count(params, c, q):
    """Filter every (H, D) with |H| <= c through is_consistent (oracle for the enumeration)."""
    M, N = params.M, params.N
    vals = [BOT] + list(range(N))
    dbs = [tuple((i, v) for i, v in enumerate(ds) if v != BOT) for ds in itertools.product(vals, repeat=M)]
    pairs = list(itertools.product(range(M), vals))
    n = 0
    for length in range(c + 1):
        for H in itertools.product(pairs, repeat=length):
            n += sum(is_consistent(BasisState(0, 0, 0, H, D), c, q) for D in dbs)
    return n * params.a_dim


def test_db_edits():
    assert db_set((), 0, 0) == ((0, 0),)
    D = db_set(db_set((), 3, 1), 1, 2)
    assert D == ((1, 2), (3, 1))
    assert db_get(D, 3) == 1 and db_get(D, 0) == BOT
    assert db_set(D, 3, BOT) == ((1, 2),)
    with pytest.raises(ParamError):
        db_set((), 5, 0, OracleParams(3, 2))


def test_history_append():
    assert history_append(((2, 7),), 5, 3, 3) == ((2, 7), (5, 3))
    assert history_append((), 0, BOT, 1) == ((0, BOT),)
    with pytest.raises(CapacityError):
        history_append(((1, 1),), 0, 0, 1)


def test_consistency_examples():
    assert is_consistent(BasisState(0, 0, 0, ((3, 5),), ((3, 5), (7, 2))), 1, 2)
    assert not is_consistent(BasisState(0, 0, 0, ((3, 5),), ((3, 4),)))
    assert not is_consistent(BasisState(0, 0, 0, ((3, 5), (3, 4)), ((3, 5),)), 2, 1)
    # (x, bottom) in the history forces D(x) = bottom
    assert is_consistent(BasisState(0, 0, 0, ((1, BOT),), ()), 1, 0)
    assert not is_consistent(BasisState(0, 0, 0, ((1, BOT),), ((1, 0),)), 1, 1)


def test_database_size_counts_entries_outside_history():
    # one classical query and no quantum query leaves D(x) = H(x) filled
    b = BasisState(0, 0, 0, ((0, 1),), ((0, 1),))
    assert is_consistent(b, 1, 0)
    assert not is_consistent(b._replace(D=((0, 1), (2, 0))), 1, 0)
    assert is_consistent(b._replace(D=((0, 1), (2, 0))), 1, 1)


def test_history_function():
    assert history_function(((1, 2), (1, 2))) == {1: 2}
    assert history_function(((1, 2), (1, 3))) is None


@pytest.mark.parametrize("M,N,c,q,expected", [(1, 2, 0, 0, 2), (1, 2, 0, 1, 6)])
def test_enumeration_small_counts(M, N, c, q, expected):
    params = OracleParams(M, N, c_max=c)
    assert len(list(enumerate_consistent(params, c, q))) == expected
    assert count_consistent(params, c, q) == expected


@pytest.mark.parametrize("M,N,c,q", [(2, 2, 1, 1), (3, 2, 2, 1), (2, 3, 2, 2), (3, 3, 1, 2), (2, 2, 2, 0)])
def test_enumeration_matches_brute_force(M, N, c, q):
    params = OracleParams(M, N, c_max=c)
    states = list(enumerate_consistent(params, c, q))
    assert len(set(states)) == len(states)
    assert all(is_consistent(b, c, q) for b in states)
    assert len(states) == count_consistent(params, c, q) == brute_force_count(params, c, q)


def test_enumeration_with_zero_budget_is_empty_registers():
    params = OracleParams(3, 3, c_max=2, w_dim=2)
    assert all(b.H == () and b.D == () for b in enumerate_consistent(params, 0, 0))


def test_enumeration_errors():
    with pytest.raises(ParamError):
        list(enumerate_consistent(OracleParams(2, 2, c_max=1), 2, 0))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), st.integers(2, 3), st.integers(0, 2), st.integers(0, 2),
       st.integers(0, 1), st.integers(0, 1))
def test_enumeration_is_monotone_in_budget(M, N, c, q, dc, dq):
    params = OracleParams(M, N, c_max=c + dc)
    small = set(enumerate_consistent(params, c, q))
    big = set(enumerate_consistent(params, c + dc, q + dq))
    assert small <= big


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 4), st.integers(2, 4), st.integers(0, 3), st.data())
def test_serialize_roundtrip(M, N, c_max, data):
    params = OracleParams(M, N, c_max=c_max, w_dim=2)
    idx = st.integers(0, M - 1)
    H = tuple(data.draw(st.lists(st.tuples(idx, st.integers(BOT, N - 1)), max_size=c_max)))
    D = tuple(sorted(data.draw(st.dictionaries(idx, st.integers(0, N - 1))).items()))
    b = BasisState(data.draw(idx), data.draw(st.integers(0, N - 1)), data.draw(st.integers(0, 1)), H, D)
    text = serialize(b, params.c_max)
    assert deserialize(text) == (b, params.c_max)


def test_serialize_format():
    b = BasisState(1, 0, 0, ((0, BOT),), ((2, 1),))
    assert serialize(b, 3) == "1|0|0|H:(0,_),*2|D:{2->1}"
    with pytest.raises(ParamError):
        deserialize("garbage")


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2), st.integers(0, 2), st.integers(0, 10_000))
def test_db_set_laws(x, y, z):
    D = ((0, 1), (3, 2))
    assert db_set(db_set(D, x, y), x, y) == db_set(D, x, y)
    assert db_set(db_set(D, x, y), x, BOT) == db_set(D, x, BOT)


def test_sparse_algebra():
    params = OracleParams(2, 2)
    b1 = BasisState(0, 0, 0, (), ())
    b2 = BasisState(1, 0, 0, (), ())
    s1, s2 = SparseState.basis(params, b1), SparseState.basis(params, b2)
    assert s1.inner(s1) == 1
    assert s1.inner(s2) == 0
    s = s1.combine(1 / math.sqrt(2), s2, 1 / math.sqrt(2))
    assert s.norm() == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ParamError):
        s1.inner(SparseState.basis(OracleParams(3, 2), b1))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 1000), st.integers(0, 1000))
def test_inner_conjugate_symmetric(s1, s2):
    params = OracleParams(2, 2, c_max=1)
    a = random_state_in_A(params, 1, 1, s1)
    b = random_state_in_A(params, 1, 1, s2)
    assert a.inner(b) == pytest.approx(np.conj(b.inner(a)), abs=1e-12)
    assert a.norm2() == pytest.approx(a.inner(a).real, rel=1e-12)


def test_random_state_in_A():
    params = OracleParams(3, 2, c_max=2)
    a = random_state_in_A(params, 2, 1, 7)
    b = random_state_in_A(params, 2, 1, 7)
    assert a.terms == b.terms
    assert a.norm() == pytest.approx(1.0, abs=1e-12)
    assert all(is_consistent(k, 2, 1) for k in a.terms)


def test_prune():
    params = OracleParams(2, 2)
    s = SparseState(params, {BasisState(0, 0, 0, (), ()): 1.0, BasisState(1, 0, 0, (), ()): 1e-15})
    assert len(s.prune(1e-12)) == 1
