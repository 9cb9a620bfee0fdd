import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hco.errors import CapacityError, ConsistencyError
from hco.oracles import (
    QueryKind,
    RootsTable,
    apply_S,
    apply_S_all,
    apply_compressed_classical,
    apply_compressed_quantum,
    apply_query,
    apply_standard_classical,
    apply_standard_quantum,
    fourier_state,
    s_matrix,
    standard_initial_state,
)
from hco.statecore import BOT, BasisState, OracleParams, SparseState, enumerate_consistent, random_state_in_A


def one_cell_S(N):
    """Independent S_x: columns are images of |0>..|N-1>, |bot> via the Fourier description."""
    basis = np.eye(N + 1, dtype=complex)
    zero_hat = np.concatenate([np.full(N, 1 / math.sqrt(N)), [0]])
    bot = basis[N]
    # S swaps |bot> and |0^>, fixes |p^> for p != 0
    S = np.eye(N + 1, dtype=complex) - np.outer(zero_hat, zero_hat) - np.outer(bot, bot)
    return S + np.outer(bot, zero_hat) + np.outer(zero_hat, bot)


def amp(s, **kw):
    return s.amplitude(BasisState(**kw))


@pytest.mark.parametrize("N", [2, 3, 4, 5])
def test_s_matrix_matches_fourier_description(N):
    assert np.allclose(s_matrix(N), one_cell_S(N), atol=1e-12)
    assert np.allclose(s_matrix(N) @ s_matrix(N), np.eye(N + 1), atol=1e-12)


@pytest.mark.parametrize("N", [2, 3, 4, 6])
def test_roots_table(N):
    r = RootsTable(N)
    for a in range(N):
        assert abs(r(a)) == pytest.approx(1.0, abs=1e-12)
        assert r(a) == pytest.approx(cmath.exp(2j * math.pi * a / N), abs=1e-12)
        for b in range(N):
            assert r(a) * r(b) == pytest.approx(r(a + b), abs=1e-12)
    assert r.phase(1, BOT) == 1


def test_query_kind_exhaustive():
    assert len(QueryKind) == 4
    assert QueryKind.for_picture("compressed", "C").is_classical


def test_fourier_state():
    assert np.allclose(fourier_state(0, 4), 0.5)
    assert np.allclose(fourier_state(1, 2), np.array([1, -1]) / math.sqrt(2))
    F = np.array([fourier_state(p, 5) for p in range(5)])
    assert np.allclose(F.conj() @ F.T, np.eye(5), atol=1e-12)


def test_standard_quantum_examples():
    params = OracleParams(2, 2)
    b = BasisState(0, 1, 0, (), ((0, 1),))
    assert amp(apply_standard_quantum(SparseState.basis(params, b)), **b._asdict()) == pytest.approx(-1)
    b0 = b._replace(p=0)
    assert apply_standard_quantum(SparseState.basis(params, b0)).terms == {b0: 1}
    bb = b._replace(D=())
    assert apply_standard_quantum(SparseState.basis(params, bb)).terms == {bb: 1}


def test_standard_classical_examples():
    params = OracleParams(3, 5, c_max=1)
    b = BasisState(2, 0, 0, (), ((2, 4),))
    out = apply_standard_classical(SparseState.basis(params, b))
    assert out.terms == {b._replace(H=((2, 4),)): 1}
    out = apply_standard_classical(SparseState.basis(params, b._replace(D=())))
    assert out.terms == {BasisState(2, 0, 0, ((2, BOT),), ()): 1}
    with pytest.raises(CapacityError):
        apply_standard_classical(SparseState.basis(params, b._replace(H=((0, BOT),))))


def test_apply_S_examples():
    params = OracleParams(2, 3, c_max=1)
    b = BasisState(0, 0, 0, (), ())
    out = apply_S(SparseState.basis(params, b))
    assert len(out) == 3
    for y in range(3):
        assert amp(out, x=0, p=0, w=0, H=(), D=((0, y),)) == pytest.approx(1 / math.sqrt(3))
    fixed = BasisState(0, 0, 0, ((0, 2),), ((0, 2),))
    assert apply_S(SparseState.basis(params, fixed)).terms == {fixed: 1}


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([(2, 2), (3, 2), (2, 3), (3, 3)]))
def test_S_and_S_all_are_involutions(seed, MN):
    params = OracleParams(*MN, c_max=1)
    s = random_state_in_A(params, 1, 1, seed)
    assert apply_S(apply_S(s)).distance(s) < 1e-9
    assert apply_S_all(apply_S_all(s)).distance(s) < 1e-9


def test_initial_state_uncompresses_to_uniform_databases():
    params = OracleParams(3, 2)
    assert standard_initial_state(params).distance(standard_initial_state(params, explicit=True)) < 1e-12


def test_S_all_leaves_recorded_cells():
    params = OracleParams(2, 2, c_max=2)
    b = BasisState(0, 1, 0, ((0, 1), (1, 0)), ((0, 1), (1, 0)))
    assert apply_S_all(SparseState.basis(params, b)).terms == {b: 1}


def test_recordQ_case3_n2():
    params = OracleParams(1, 2)
    b = BasisState(0, 1, 0, (), ((0, 0),))
    for mode in ("fastpath", "composed"):
        out = apply_compressed_quantum(SparseState.basis(params, b), mode)
        assert amp(out, x=0, p=1, w=0, H=(), D=((0, 0),)) == pytest.approx(0.5, abs=1e-12)
        assert amp(out, x=0, p=1, w=0, H=(), D=()) == pytest.approx(1 / math.sqrt(2), abs=1e-12)
        assert amp(out, x=0, p=1, w=0, H=(), D=((0, 1),)) == pytest.approx(0.5, abs=1e-12)


def test_recordQ_cases_1_and_2():
    params = OracleParams(2, 3, c_max=1)
    b = BasisState(1, 0, 0, (), ((1, 2),))
    assert apply_compressed_quantum(SparseState.basis(params, b)).terms == {b: 1}
    b2 = BasisState(1, 2, 0, (), ())
    out = apply_compressed_quantum(SparseState.basis(params, b2))
    w = cmath.exp(2j * math.pi / 3)
    for y in range(3):
        assert amp(out, x=1, p=2, w=0, H=(), D=((1, y),)) == pytest.approx(w ** (2 * y) / math.sqrt(3))


def test_recordC_cases():
    params = OracleParams(1, 2, c_max=1)
    b = BasisState(0, 0, 0, (), ((0, 0),))
    for mode in ("fastpath", "composed"):
        out = apply_compressed_classical(SparseState.basis(params, b), mode)
        assert amp(out, x=0, p=0, w=0, H=((0, 0),), D=((0, 0),)) == pytest.approx(0.5, abs=1e-12)
        assert amp(out, x=0, p=0, w=0, H=((0, BOT),), D=()) == pytest.approx(1 / math.sqrt(2), abs=1e-12)
        assert amp(out, x=0, p=0, w=0, H=((0, 1),), D=((0, 1),)) == pytest.approx(-0.5, abs=1e-12)
    fresh = BasisState(0, 1, 0, (), ())
    out = apply_compressed_classical(SparseState.basis(params, fresh))
    assert amp(out, x=0, p=1, w=0, H=((0, 0),), D=((0, 0),)) == pytest.approx(1 / math.sqrt(2))
    assert amp(out, x=0, p=1, w=0, H=((0, 1),), D=((0, 1),)) == pytest.approx(-1 / math.sqrt(2))
    params2 = OracleParams(1, 2, c_max=2)
    rec = BasisState(0, 1, 0, ((0, 1),), ((0, 1),))
    out = apply_compressed_classical(SparseState.basis(params2, rec))
    assert out.terms == {rec._replace(H=((0, 1), (0, 1))): pytest.approx(-1)}


def test_fastpath_rejects_inconsistent_terms():
    params = OracleParams(2, 2, c_max=2)
    bad = BasisState(0, 1, 0, ((0, 1),), ((0, 0),))
    with pytest.raises(ConsistencyError):
        apply_compressed_quantum(SparseState.basis(params, bad))
    with pytest.raises(ConsistencyError):
        apply_compressed_classical(SparseState.basis(params, bad))
    with pytest.raises(CapacityError):
        apply_compressed_classical(SparseState.basis(OracleParams(2, 2, c_max=0), BasisState(0, 0, 0, (), ())))


@pytest.mark.parametrize("M,N,c,q", [(2, 2, 1, 1), (2, 3, 2, 1), (3, 2, 1, 2), (2, 4, 1, 1)])
def test_fastpath_equals_composed_and_staged_on_basis(M, N, c, q):
    params = OracleParams(M, N, c_max=c + 1)
    for b in enumerate_consistent(params, c, q):
        s = SparseState.basis(params, b)
        for op in (apply_compressed_quantum, apply_compressed_classical):
            fast = op(s, "fastpath")
            assert fast.max_abs_diff(op(s, "composed")) < 1e-9
            assert fast.max_abs_diff(op(s, "staged")) < 1e-9


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([(2, 2, 1, 1), (3, 2, 2, 1), (2, 3, 1, 2), (4, 2, 1, 1)]))
def test_conjugation_by_S_all_matches(seed, point):
    M, N, c, q = point
    params = OracleParams(M, N, c_max=c + 1)
    s = random_state_in_A(params, c, q, seed)
    via_all = apply_S_all(apply_standard_quantum(apply_S_all(s)))
    assert via_all.distance(apply_compressed_quantum(s)) < 1e-9
    via_all = apply_S_all(apply_standard_classical(apply_S_all(s)))
    assert via_all.distance(apply_compressed_classical(s)) < 1e-9


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(list(QueryKind)))
def test_operators_preserve_norm(seed, kind):
    params = OracleParams(3, 3, c_max=2)
    s = random_state_in_A(params, 1, 1, seed)
    assert apply_query(s, kind).norm2() == pytest.approx(1.0, abs=1e-9)
