import numpy as np
import pytest

from hco import inequalities as I
from hco.progress import PRIMITIVES, CollH, CollQ, CollX, PreQ
from hco.statecore import BasisState, OracleParams, count_consistent

SMALL = [(3, 2, 1, 1), (3, 3, 2, 1), (2, 3, 1, 2)]


def space(M, N, c, q, w_dim=1, reference=False):
    return I.CompiledSpace(OracleParams(M, N, c_max=c + 1, w_dim=w_dim), c, q, reference=reference)


@pytest.mark.parametrize("pt", SMALL)
def test_table_compile_matches_pushing_every_state(pt):
    fast, ref = space(*pt), space(*pt, reference=True)
    assert fast.n_in == ref.n_in == count_consistent(fast.params, pt[2], pt[3])
    for kind in "QC":
        # both index the same outputs, possibly under different (H, D) ids
        a, b = fast.operator(kind).tocoo(), ref.operator(kind).tocoo()
        key_a = {(fast.hd[r // fast.a_dim], r % fast.a_dim, col): v
                 for r, col, v in zip(fast.rows[kind][a.row], a.col, a.data)}
        key_b = {(ref.hd[r // ref.a_dim], r % ref.a_dim, col): v
                 for r, col, v in zip(ref.rows[kind][b.row], b.col, b.data)}
        assert key_a.keys() == {k for k, v in key_b.items() if v != 0}
        assert max(abs(v - key_b[k]) for k, v in key_a.items()) < 1e-12


@pytest.mark.parametrize("pt", SMALL + [(4, 3, 2, 2)])
def test_vectorised_primitives_match_definitions(pt):
    sp_ = space(*pt)
    M = sp_.params.M
    ok = sp_.hx_mask(~PreQ) | sp_.hx_mask(PreQ)  # consistency mask
    for P in PRIMITIVES.values():
        slow = ok & np.array([[P.raw(BasisState(x, 0, 0, H_, D_)) for x in range(M)] for H_, D_ in sp_.hd],
                             dtype=bool).reshape(-1)
        assert (sp_.hx_mask(P) == slow).all(), P.name


@pytest.mark.parametrize("pt", SMALL)
def test_empirical_gammas_match_direct_loop(pt):
    sp_ = space(*pt)
    for P in (CollQ, CollH, CollQ | CollH, PreQ, ~(CollH | I.C)):
        assert I.empirical_gammas(sp_, P) == pytest.approx(I.empirical_gammas_direct(sp_, P), abs=1e-12)


@pytest.mark.parametrize("w_dim", [1, 2])
def test_batched_quantities_match_dense_products(w_dim):
    sp_ = space(3, 3, 2, 2, w_dim=w_dim)
    Phi = np.stack([I.random_amplitudes(sp_.n_in, s) for s in range(4)], axis=1)
    b = I.Batch(sp_, Phi)
    for ch in I.all_checks():
        ch.fn(b, 2, 2, 3)
    b.evaluate()
    for key in b._req:
        if key[0] == "n2":
            m = np.ones(sp_.n_in) if key[1] is None else sp_.mask(b._preds[key[1]])
            assert np.allclose((m[:, None] * abs(Phi) ** 2).sum(0), b._vals[key], atol=1e-12)
        elif key[0] == "out2":
            _, p_out, kind, p_in = key
            m_in = np.ones(sp_.n_in) if p_in is None else sp_.mask(b._preds[p_in])
            Y = sp_.operator(kind) @ (Phi * m_in[:, None])
            rows = sp_.rows[kind]
            m_out = np.ones(len(rows)) if p_out is None else sp_.hx_mask(b._preds[p_out])[sp_.hx_of(rows)]
            assert np.allclose((m_out[:, None] * abs(Y) ** 2).sum(0), b._vals[key], atol=1e-12)


def test_sparse_identity_matches_dense_identity():
    sp_ = space(3, 2, 1, 1)
    dense = I.Batch(sp_, np.eye(sp_.n_in, dtype=complex))
    sparse = I.Batch(sp_, I.sp.identity(sp_.n_in, dtype=complex, format="csc"))
    for b in (dense, sparse):
        for ch in I.all_checks():
            ch.fn(b, 1, 1, 2)
        b.evaluate()
    for key, val in dense._vals.items():
        assert np.allclose(val, sparse._vals[key], atol=1e-12), key


@pytest.mark.parametrize("pt", [(3, 3, 1, 1), (3, 3, 2, 2), (4, 3, 1, 2)])
def test_grid_point_passes(pt):
    recs = I.run_grid_point(*pt, trials=20)
    assert recs and all(r["pass"] is not False for r in recs)
    families = {r["inputs"] for r in recs}
    assert families == {"random", "basis"}


def test_basis_pass_reported_as_skipped_over_limit():
    recs = I.run_grid_point(3, 3, 1, 1, trials=3, basis_limit=10, suites=("sampl",))
    basis = [r for r in recs if r["inputs"] == "basis"]
    assert basis and all(r["pass"] is None and r["note"].startswith("skipped") for r in basis)


@pytest.mark.parametrize("key,suite", [("sampl_q", "sampl"), ("search_c", "progress-search"),
                                       ("clprog_c", "progress-collision")])
def test_corrupted_constant_is_caught(monkeypatch, key, suite):
    monkeypatch.setitem(I.CONST, key, I.CONST[key] / 10)
    grid = [(3, 3, 1, 2), (3, 3, 2, 1), (3, 3, 2, 2)]
    recs = I.run_suite(grid, trials=30, suites=(suite,), workers=1)
    assert any(r["pass"] is False for r in recs)


def test_generic_checks_skip_with_reason():
    sp_ = space(3, 3, 1, 1)
    out = I.generic_checks(sp_)
    skipped = [note for ch, _, note in out if ch is None]
    assert skipped and all("append" in note for note in skipped)


def test_run_suite_order_independent_of_workers():
    grid = [(3, 2, 1, 1), (3, 3, 1, 0)]
    one = I.run_suite(grid, trials=4, suites=("ortho",), workers=1)
    two = I.run_suite(grid, trials=4, suites=("ortho",), workers=2)
    assert one == two


def test_x_dependent_predicate_uses_direct_loop():
    sp_ = space(3, 3, 1, 1)
    assert I.empirical_gammas(sp_, CollX) == I.empirical_gammas_direct(sp_, CollX)
