"""Batched checks of the explicit-constant progress inequalities.

A grid point ``(M, N, c, q)`` is compiled once: every basis state of
``A_{c,q}`` is pushed through the fastpath ``R^Q`` and ``R^C`` and the results
are stored as sparse matrices over an index of ``(H, D)`` pairs times the
``(x, p, w)`` labels. Predicate projectors become 0/1 row masks, so each
inequality is evaluated for many input states at once (dense random columns,
or the identity for the every-basis-state pass).

Each check returns per-column ``lhs - rhs``; the record keeps the maximum.
The numeric constants live in :data:`CONST` so that a test can corrupt one and
watch the suite fail.
"""

from __future__ import annotations

import itertools
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from typing import Callable

import numpy as np
import scipy.sparse as sp

from hco.progress import (
    GAMMA_GUARD,
    PRIMITIVES,
    CollC,
    CollH,
    CollQ,
    CollQQ,
    CollX,
    Predicate,
    PreC,
    PreQ,
    query,
)
from hco.statecore import (
    BOT,
    BasisState,
    OracleParams,
    SparseState,
    enumerate_hd,
    is_hd_consistent,
    random_amplitudes,
)

# Constants appearing in the bounds, keyed by where they occur.
CONST = {
    "sampl_q": 10.0,  # Gamma^Q <= sqrt(K * gamma)
    "sampl_c": 2.0,  # Gamma^C <= K * gamma
    "pxh_c": 1.0,  # ||Pi_H R^C Pi_XH||^2 <= K q/N ||Pi_XH||^2
    "phorc_c": 2.0,  # ||Pi_C R^C Pi_not(H+C)||^2 <= K c/N ||.||^2
    "search_q": 10.0,
    "search_c": 4.0,
    "quprog_loose": 20.0,
    "clprog_c": 4.0,
    "clprog_h_sq": 2.0,
    "clprog_h_add": 7.0,
    "clprog_q_cross": 8.0,
    "clprog_q_add": 2.0,
    "clqh_lin": 8.0,
    "clqh_add": 5.0,
    "clqqh_sq": 5.0,
    "clqqh_cross": 3.0,
    "rec_search_c": 4.0,
    "rec_search_q": 7.0,
    "rec_coll_q": 10.0,
    "rec_coll_c_cross": 128.0,
}

SUITES = ("ortho", "sampl", "progress-search", "progress-collision", "recurrence", "generic")
DEFAULT_GRID = tuple(itertools.product((3, 4, 5), (3, 4, 5), (0, 1, 2), (0, 1, 2)))

# named predicates used by the suite
Q, H, C, QQ, X = CollQ, CollH, CollC, CollQQ, CollX
QH = Q & H
NQ, NC, NH = ~Q, ~C, ~H
HNC = H & NC
QNHNC = Q & NH & NC
NXH = ~X & H
XH = X & H
Q_OR_H = Q | H
QQ_OR_QH = QQ | QH
N_HORC = ~(H | C)
PRE_QNC = PreQ & ~PreC


def local_query_table(N: int, kind: str) -> dict:
    """``(x in H, D(x)) -> [(new D(x), amplitudes over p), ...]`` from the fastpath.

    Obtained by running the fastpath on a one-cell database; the entries are
    exactly the amplitudes the full-size fastpath produces on cell ``x``.
    """
    params = OracleParams(1, N, c_max=2)
    table: dict = {}
    for in_h in (False, True):
        for z in (BOT, *range(N)):
            H_ = ((0, z),) if in_h else ()
            D_ = () if z == BOT else ((0, z),)
            acc: dict = {}
            for p in range(N):
                out = query(SparseState.basis(params, BasisState(0, p, 0, H_, D_)), kind)
                for b2, amp in out.terms.items():
                    nz = dict(b2.D).get(0, BOT)
                    acc.setdefault(nz, np.zeros(N, dtype=complex))[p] += amp
            table[(in_h, z)] = sorted(acc.items())
    return table


class CompiledSpace:
    """Sparse ``R^Q``/``R^C`` restricted to inputs from ``A_{c,q}``.

    Global index ``hd_id * a_dim + a_idx`` labels basis state
    ``(a_labels[a_idx], H, D)``; the input ``(H, D)`` pairs come first in
    :func:`enumerate_consistent` order, so the first ``n_in`` indices coincide
    with that enumeration. ``R[kind]`` has one row per reachable output,
    listed in ``rows[kind]``.
    """

    def __init__(self, params: OracleParams, c: int, q: int, reference: bool = False):
        self.params, self.c, self.q = params, c, q
        self.a_labels = list(itertools.product(range(params.M), range(params.N), range(params.w_dim)))
        self.a_index = {a: i for i, a in enumerate(self.a_labels)}
        self.a_dim = len(self.a_labels)
        self.hd: list = list(enumerate_hd(params, c, q))
        self.hd_index = {hd: i for i, hd in enumerate(self.hd)}
        self.n_in = len(self.hd) * self.a_dim
        self.run_in = params.N * params.w_dim  # consecutive inputs sharing (H, D, x)
        t0 = time.perf_counter()
        self.cells: dict = {}  # per kind: (hd_in, x, hd_out, fresh cell, new D(x)) per local output
        if reference:
            coo = {kind: self._compile_reference(kind) for kind in ("Q", "C")}
        else:
            coo = self._compile()
        self.n_all = len(self.hd) * self.a_dim
        # each image keeps only the rows it can reach, stored as row blocks
        self.rows, self.blocks = {}, {}
        for kind, (r, col, v) in coo.items():
            used, local = np.unique(r, return_inverse=True)
            self.rows[kind] = used
            R = sp.csr_matrix((v, (local, col)), shape=(len(used), self.n_in))
            self.blocks[kind] = [(r0, R[r0:r0 + ROW_BLOCK]) for r0 in range(0, R.shape[0], ROW_BLOCK)]
            del R
        del coo
        self.compile_seconds = time.perf_counter() - t0
        self._masks: dict = {}
        self._consistent = None

    def operator(self, kind: str) -> sp.csr_matrix:
        """``R^kind`` from inputs to reachable rows (``rows[kind]``)."""
        return sp.vstack([b for _, b in self.blocks[kind]], format="csr")

    def hx_of(self, index: np.ndarray) -> np.ndarray:
        """Map global indices to the ``hd * M + x`` index used by the masks."""
        per_x = self.params.N * self.params.w_dim
        return (index // self.a_dim) * self.params.M + (index % self.a_dim) // per_x

    def _hd_id(self, key) -> int:
        hd_id = self.hd_index.get(key)
        if hd_id is None:
            hd_id = len(self.hd)
            self.hd.append(key)
            self.hd_index[key] = hd_id
        return hd_id

    def _row(self, b: BasisState) -> int:
        return self._hd_id((b.H, b.D)) * self.a_dim + self.a_index[(b.x, b.p, b.w)]

    def _compile_reference(self, kind: str):
        """Push every input basis state through the fastpath (slow; used to cross-check)."""
        rows, cols, vals = [], [], []
        col = 0
        for H_, D_ in list(self.hd[: self.n_in // self.a_dim]):
            for x, p, w in self.a_labels:
                s = SparseState.basis(self.params, BasisState(x, p, w, H_, D_))
                for b2, amp in query(s, kind).terms.items():
                    rows.append(self._row(b2))
                    cols.append(col)
                    vals.append(amp)
                col += 1
        return np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64), np.array(vals, dtype=complex)

    def _compile(self) -> dict:
        """Table-driven compile of both operators in one pass.

        Both recording queries only touch cell ``x`` (and, for ``C``, append
        ``(x, new D(x))`` to the history), so the action is tabulated once per
        ``(x in H, D(x))`` as amplitude vectors over ``p`` and then broadcast
        over the ``(H, D)`` index.
        """
        M, N, wd = self.params.M, self.params.N, self.params.w_dim
        tables = {kind: local_query_table(N, kind) for kind in ("Q", "C")}
        new_zs = {key: sorted({nz for kind in tables for nz, _ in tables[kind][key]}) for key in tables["Q"]}
        n_hd_in = self.n_in // self.a_dim
        # Python only resolves output (H, D) ids; records are assembled with numpy below
        out_id = {kind: np.full((n_hd_in * M, N + 1), -1, dtype=np.int64) for kind in tables}
        out_q, out_c = out_id["Q"], out_id["C"]
        code = np.empty(n_hd_in * M, dtype=np.int64)  # inside * (N + 1) + D(x) + 1
        appended_bot = []
        hd_id = self._hd_id
        for hd_in in range(n_hd_in):
            H_, D_ = self.hd[hd_in]
            dmap = dict(D_)
            in_h = {hx for hx, _ in H_}
            for x in range(M):
                i = hd_in * M + x
                z = dmap.get(x, BOT)
                inside = x in in_h
                code[i] = inside * (N + 1) + z + 1
                rest = [kv for kv in D_ if kv[0] != x]
                if z == BOT and not inside:
                    appended_bot.append((hd_in, x, hd_id((H_ + ((x, BOT),), D_))))
                for new_z in new_zs[(inside, z)]:
                    if new_z == z:
                        D2 = D_
                    elif new_z == BOT:
                        D2 = tuple(rest)
                    else:
                        D2 = tuple(sorted(rest + [(x, new_z)]))
                    out_q[i, new_z + 1] = hd_id((H_, D2))
                    out_c[i, new_z + 1] = hd_id((H_ + ((x, new_z),), D2))
        self.appended_bot = np.asarray(appended_bot, dtype=np.int64).reshape(-1, 3)
        p_idx = np.arange(N)[None, :, None]
        w_idx = np.arange(wd)[None, None, :]
        coo = {}
        for kind, table in tables.items():
            parts = []  # (hx, new D(x), fresh, amplitudes) per table entry
            for (inside, z), entries in sorted(table.items()):
                hx = np.flatnonzero(code == inside * (N + 1) + z + 1)
                fresh = z == BOT and not inside
                for new_z, amps in entries:
                    parts.append((hx, new_z, fresh, amps))
            hx = np.concatenate([pt[0] for pt in parts])
            new = np.concatenate([np.full(len(pt[0]), pt[1]) for pt in parts])
            fresh = np.concatenate([np.full(len(pt[0]), pt[2]) for pt in parts])
            vals = np.concatenate([np.broadcast_to(pt[3], (len(pt[0]), N)) for pt in parts])
            rec_in, rec_x = hx // M, hx % M
            rec_out = out_id[kind][hx, new + 1]
            self.cells[kind] = (rec_in, rec_x, rec_out, fresh, new)
            a_idx = (rec_x[:, None, None] * N + p_idx) * wd + w_idx
            rows = rec_out[:, None, None] * self.a_dim + a_idx
            cols = rec_in[:, None, None] * self.a_dim + a_idx
            vals = np.broadcast_to(vals[:, :, None], rows.shape)
            keep = vals != 0
            coo[kind] = rows[keep], cols[keep], vals[keep].astype(complex)
        return coo

    def row_runs(self, kind: str) -> list:
        """Per row block: a 0/1 matrix summing runs of rows that share ``hd * M + x``, and that index."""
        key = ("runs", kind)
        if key not in self._masks:
            runs = []
            for r0, Rb in self.blocks[kind]:
                hx = self.hx_of(self.rows[kind][r0:r0 + Rb.shape[0]])
                run_id = np.cumsum(np.r_[False, hx[1:] != hx[:-1]])
                n = len(hx)
                agg = sp.csr_matrix((np.ones(n), (run_id, np.arange(n))), shape=(run_id[-1] + 1, n))
                runs.append((agg, hx[np.r_[0, np.flatnonzero(np.diff(run_id)) + 1]]))
            self._masks[key] = runs
        return self._masks[key]

    def run_masks(self, kind: str, names: tuple, preds: list) -> list:
        """Per row block, boolean output masks (one row per predicate) over row runs."""
        key = ("out", kind, names)
        if key not in self._masks:
            full = [None if P is None else self.hx_mask(P) for P in preds]
            self._masks[key] = [np.stack([np.ones(len(run_hx), dtype=bool) if m is None else m[run_hx]
                                          for m in full])
                                for _, run_hx in self.row_runs(kind)]
        return self._masks[key]

    def hd_mask(self, P: Predicate) -> np.ndarray:
        """Per ``(H, D)`` boolean value of an ``(H, D)``-only predicate."""
        return self.hx_mask(P).reshape(-1, self.params.M)[:, 0]

    def cell_values(self) -> np.ndarray:
        """``D(x)`` for every input ``(H, D)`` and ``x``, flattened ``hd * M + x``."""
        if getattr(self, "_cell_values", None) is None:
            M = self.params.M
            n_hd_in = self.n_in // self.a_dim
            out = np.full(n_hd_in * M, BOT, dtype=np.int64)
            for i, (_, D_) in enumerate(self.hd[:n_hd_in]):
                for k, v in D_:
                    out[i * M + k] = v
            self._cell_values = out
        return self._cell_values

    def mask(self, P: Predicate, index: np.ndarray | None = None) -> np.ndarray:
        """Boolean ``Pi_P`` diagonal at the given global indices (default: all inputs)."""
        if index is None:
            key = ("in", P.name)
            if key not in self._masks:
                self._masks[key] = self.hx_mask(P)[self.hx_of(np.arange(self.n_in))]
            return self._masks[key]
        return self.hx_mask(P)[self.hx_of(index)]

    def dense_hd(self) -> tuple[np.ndarray, np.ndarray]:
        """``D`` as an ``(n_hd, M)`` array (bottom = BOT) and the in-history flags."""
        if getattr(self, "_dense", None) is None:
            M = self.params.M
            rows, cols, vals, h_rows, h_cols = [], [], [], [], []
            for i, (H_, D_) in enumerate(self.hd):
                for k, v in D_:
                    rows.append(i)
                    cols.append(k)
                    vals.append(v)
                for k, _ in H_:
                    h_rows.append(i)
                    h_cols.append(k)
            dense = np.full((len(self.hd), M), BOT, dtype=np.int64)
            dense[rows, cols] = vals
            in_h = np.zeros((len(self.hd), M), dtype=bool)
            in_h[h_rows, h_cols] = True
            self._dense = dense, in_h
        return self._dense

    def primitive_hx(self, name: str) -> np.ndarray:
        """Vectorised raw value of a primitive predicate per ``(H, D, x)``.

        Agrees with the per-state definition on history-database consistent
        pairs (there ``H(x) = D(x)``, so ``PreC`` reads zeros off ``D``).
        """
        vals, in_h = self.dense_hd()
        M = self.params.M
        n = len(vals)
        if name in ("PreQ", "PreC"):
            hit = (vals == 0) & (in_h if name == "PreC" else ~in_h)
            return np.repeat(hit.any(axis=1), M)
        nq, nh, nc = (np.zeros(n, dtype=np.int64) for _ in range(3))
        free = np.zeros((n, M), dtype=bool)  # outside endpoints of hybrid collisions
        for i, j in itertools.combinations(range(M), 2):
            eq = (vals[:, i] == vals[:, j]) & (vals[:, i] != BOT)
            a, b = in_h[:, i], in_h[:, j]
            nq += eq & ~a & ~b
            nc += eq & a & b
            hyb = eq & (a != b)
            nh += hyb
            free[:, i] |= hyb & ~a
            free[:, j] |= hyb & ~b
        if name == "CollX":
            n_free = free.sum(axis=1)
            out = ~in_h & ((n_free[:, None] == 0) | ((n_free[:, None] == 1) & free))
            return out.reshape(-1)
        per_hd = {"CollQ": nq >= 1, "CollQQ": nq >= 2, "CollH": nh >= 1, "CollC": nc >= 1}[name]
        return np.repeat(per_hd, M)

    def hx_mask(self, P: Predicate) -> np.ndarray:
        """Value of ``P`` per ``(H, D, x)``, flattened ``hd * M + x``; false off consistency."""
        key = ("hx", P.name)
        if key in self._masks:
            return self._masks[key]
        M = self.params.M
        if self._consistent is None:
            per_hd = np.fromiter((is_hd_consistent(H_, D_) for H_, D_ in self.hd), dtype=bool, count=len(self.hd))
            self._consistent = np.repeat(per_hd, M)
        ok = self._consistent
        if P.op is None and PRIMITIVES.get(P.name) is P:
            m = ok & self.primitive_hx(P.name)
        elif P.op == "not":
            m = ok & ~self.hx_mask(P.args[0])
        elif P.op == "and":
            m = self.hx_mask(P.args[0]) & self.hx_mask(P.args[1])
        elif P.op == "or":
            m = self.hx_mask(P.args[0]) | self.hx_mask(P.args[1])
        elif P.hd_only:
            per_hd = np.fromiter((P.raw(BasisState(0, 0, 0, H_, D_)) for H_, D_ in self.hd),
                                 dtype=bool, count=len(self.hd))
            m = ok & np.repeat(per_hd, M)
        else:
            m = ok & np.array([[P.raw(BasisState(x, 0, 0, H_, D_)) for x in range(M)] for H_, D_ in self.hd],
                              dtype=bool).reshape(-1)
        self._masks[key] = m
        return m


# -- batched evaluation ----------------------------------------------------------

ROW_BLOCK = 1 << 16


def _name(P: Predicate | None):
    return None if P is None else P.name


class Batch:
    """Input columns ``Phi`` (dense ``n_in x k`` or a sparse identity).

    Checks are run twice. The first pass only records which quantities are
    requested (and returns placeholders); :meth:`evaluate` then computes them
    grouped by image ``R^kind Pi_in Phi``, so each sparse product happens
    once and every output projector is a single masked column sum.
    """

    def __init__(self, space: CompiledSpace, Phi):
        self.sp = space
        self.Phi = Phi
        self.k = Phi.shape[1]
        self.recording = True
        self._preds: dict = {None: None}
        self._req: set = set()
        self._vals: dict = {}

    def _get(self, key, *preds):
        for P in preds:
            if P is not None:
                self._preds[P.name] = P
        if self.recording:
            self._req.add(key)
            return 0.0 if key[0] == "gram" else np.ones(self.k)
        return self._vals[key]

    # requested quantities
    def n2(self, P: Predicate | None = None) -> np.ndarray:
        return self._get(("n2", _name(P)), P)

    def n(self, P: Predicate | None = None) -> np.ndarray:
        return np.sqrt(self.n2(P))

    def out2(self, P_out: Predicate | None, kind: str, P_in: Predicate | None = None) -> np.ndarray:
        """``||Pi_out R^kind Pi_in phi||^2`` per column."""
        return self._get(("out2", _name(P_out), kind, _name(P_in)), P_out, P_in)

    def gram_max(self, kind: str, P1: Predicate, P2: Predicate) -> float:
        """``max |<R Pi_1 phi_i, R Pi_2 phi_j>|`` over all column pairs."""
        return self._get(("gram", kind, P1.name, P2.name), P1, P2)

    # derived quantities
    def delta(self, P: Predicate, kind: str) -> np.ndarray:
        if kind == "Q":
            return np.sqrt(self.out2(P, "Q")) - self.n(P)
        return self.out2(P, "C") - self.n2(P)

    def gamma(self, P: Predicate, kind: str) -> np.ndarray:
        notP = ~P
        den = self.n2(notP)
        num = self.out2(P, kind, notP)
        ok = den >= GAMMA_GUARD**2
        ratio = np.where(ok, num / np.where(ok, den, 1.0), 0.0)
        return np.sqrt(ratio) if kind == "Q" else ratio

    # evaluation
    def _in_mask(self, name):
        if name is None:
            return np.ones(self.sp.n_in)
        return self.sp.mask(self._preds[name]).astype(float)

    def _hx_in(self, name) -> np.ndarray:
        """Input mask per ``(H, D, x)`` run (inputs come in runs of ``N * w_dim`` rows)."""
        n = self.sp.n_in // self.sp.run_in
        if name is None:
            return np.ones(n, dtype=bool)
        return self.sp.hx_mask(self._preds[name])[:n]

    def _scaled_input(self, name, out=None):
        if name is None:
            return self.Phi
        if sp.issparse(self.Phi):
            return sp.diags(self._in_mask(name)) @ self.Phi
        if out is None:
            return self.Phi * self._in_mask(name)[:, None]
        # real view, one mask value per run of rows
        runs = (-1, self.sp.run_in, 2 * self.k)
        np.multiply(self.Phi.view(float).reshape(runs), self._hx_in(name)[:, None, None],
                    out=out.view(float).reshape(runs))
        return out

    def evaluate(self) -> None:
        sparse = sp.issparse(self.Phi)
        n2_keys = sorted((k for k in self._req if k[0] == "n2"), key=repr)
        if n2_keys and sparse:
            A2 = abs(self.Phi).power(2)
            masks = np.stack([self._in_mask(k[1]) for k in n2_keys])
            res = (A2.T @ masks.T).T
            for key, row in zip(n2_keys, np.asarray(res)):
                self._vals[key] = np.asarray(row).ravel()
        elif n2_keys:
            A2 = self.Phi.real**2 + self.Phi.imag**2
            per_run = A2.reshape(-1, self.sp.run_in, self.k).sum(axis=1)
            masks = np.stack([self._hx_in(k[1]) for k in n2_keys]).astype(float)
            for key, row in zip(n2_keys, masks @ per_run):
                self._vals[key] = row
        groups: dict = {}
        for key in self._req:
            if key[0] == "out2":
                groups.setdefault((key[2], key[3]), []).append(key)
        buf = None if sparse else np.empty_like(self.Phi)
        current = object()
        for (pin, kind), keys in sorted((((pin, kind), keys) for (kind, pin), keys in groups.items()), key=repr):
            keys.sort(key=repr)
            if pin != current:  # groups sharing an input projector reuse the scaled input
                X, current = self._scaled_input(pin, buf), pin
            names = [k[1] for k in keys]
            run_masks = self.sp.run_masks(kind, tuple(names), [self._preds[nm] for nm in names])
            acc = np.zeros((len(keys), self.k))
            for (r0, Rb), (agg, run_hx), masks in zip(self.sp.blocks[kind], self.sp.row_runs(kind), run_masks):
                Y = Rb @ X
                if sparse:
                    A2 = abs(Y).power(2)
                    acc += np.asarray((agg @ A2).T @ masks.T.astype(float)).T
                else:
                    # masks are constant on runs of rows sharing (H, D, x): sum the runs first
                    Yf = Y.view(float)
                    np.square(Yf, out=Yf)
                    part = masks.astype(float) @ (agg @ Yf)
                    acc += part[:, 0::2] + part[:, 1::2]
            for key, row in zip(keys, acc):
                self._vals[key] = row
        for key in sorted((k for k in self._req if k[0] == "gram"), key=repr):
            _, kind, p1, p2 = key
            X1, X2 = self._scaled_input(p1), self._scaled_input(p2)
            worst = 0.0
            if sparse:
                G = sum(((Rb @ X1).conj().T @ (Rb @ X2) for _, Rb in self.sp.blocks[kind]),
                        sp.csr_matrix((self.k, self.k), dtype=complex))
                worst = float(abs(G).max()) if G.nnz else 0.0
            else:
                G = np.zeros((self.k, self.k), dtype=complex)
                for _, Rb in self.sp.blocks[kind]:
                    G += (Rb @ X1).conj().T @ (Rb @ X2)
                worst = float(np.abs(G).max())
            self._vals[key] = worst
        self.recording = False


# -- the checks ------------------------------------------------------------------


@dataclass(frozen=True)
class Check:
    suite: str
    name: str
    fn: Callable[[Batch, float, float, float], np.ndarray]  # (batch, c, q, N) -> lhs - rhs


def _r(x):
    return math.sqrt(x)


def _checks() -> list[Check]:
    K = CONST
    out: list[Check] = []

    def add(suite, name):
        def deco(fn):
            out.append(Check(suite, name, fn))
            return fn
        return deco

    # zero maps and orthogonality
    for label, P_out, kind, P_in in (
        ("Pi_Q R^C Pi_~Q", Q, "C", NQ),
        ("Pi_~C R^C Pi_C", NC, "C", C),
        ("Pi_~C R^Q Pi_C", NC, "Q", C),
        ("Pi_C R^Q Pi_~C", C, "Q", NC),
        ("Pi_QQ R^Q Pi_~Q", QQ, "Q", NQ),
        ("Pi_QH R^Q Pi_~Q~H", QH, "Q", NQ & NH),
        ("Pi_~H R^Q Pi_~XH", NH, "Q", NXH),
    ):
        add("ortho", label)(lambda b, c, q, N, P_out=P_out, kind=kind, P_in=P_in: np.sqrt(b.out2(P_out, kind, P_in)))
    add("ortho", "<R^C Pi_~XH s1, R^C Pi_~H s2>")(lambda b, c, q, N: b.gram_max("C", NXH, NH))
    add("ortho", "<R^C Pi_~C s1, R^C Pi_C s2>")(lambda b, c, q, N: b.gram_max("C", NC, C))

    # overlap bounds
    for label, P, gam in (
        ("GammaQ(Q)", Q, lambda c, q, N: q / N),
        ("GammaQ(QQ)", QQ, lambda c, q, N: q / N),
        ("GammaQ(H)", H, lambda c, q, N: c / N),
        ("GammaQ(Q+H)", Q_OR_H, lambda c, q, N: (c + q) / N),
        ("GammaQ(QQ+QH)", QQ_OR_QH, lambda c, q, N: (c + q) / N),
        ("GammaQ(~(H+C))", N_HORC, lambda c, q, N: c / N),
    ):
        add("sampl", label)(lambda b, c, q, N, P=P, gam=gam: b.gamma(P, "Q") - _r(K["sampl_q"] * gam(c, q, N)))
    for label, P, gam in (
        ("GammaC(Q)", Q, lambda c, q, N: 0.0),
        ("GammaC(QQ)", QQ, lambda c, q, N: 0.0),
        ("GammaC(Q+H)", Q_OR_H, lambda c, q, N: q / N),
        ("GammaC(QQ+QH)", QQ_OR_QH, lambda c, q, N: q / N),
        ("GammaC(~(H+C))", N_HORC, lambda c, q, N: c / N),
    ):
        add("sampl", label)(lambda b, c, q, N, P=P, gam=gam: b.gamma(P, "C") - K["sampl_c"] * gam(c, q, N))
    add("sampl", "|Pi_H R^C Pi_XH|^2")(
        lambda b, c, q, N: b.out2(H, "C", XH) - K["pxh_c"] * q / N * b.n2(XH))
    add("sampl", "|Pi_C R^C Pi_~(H+C)|^2")(
        lambda b, c, q, N: b.out2(C, "C", N_HORC) - K["phorc_c"] * c / N * b.n2(N_HORC))
    add("sampl", "|Pi_~H R^Q Pi_XH|^2")(
        lambda b, c, q, N: b.out2(NH, "Q", XH) - K["sampl_q"] * c / N * b.n2(XH))

    # preimage search
    add("progress-search", "|DeltaQ(PreC)|")(lambda b, c, q, N: np.abs(b.delta(PreC, "Q")))
    add("progress-search", "DeltaQ(PreQ~PreC)")(
        lambda b, c, q, N: b.delta(PRE_QNC, "Q") - _r(K["search_q"] / N))
    add("progress-search", "DeltaC(PreC)")(
        lambda b, c, q, N: b.delta(PreC, "C") - (2 * b.out2(PreC, "C", PRE_QNC) + K["search_c"] / N))
    add("progress-search", "DeltaC(PreQ~PreC)")(
        lambda b, c, q, N: b.delta(PRE_QNC, "C") + b.out2(PreC, "C", PRE_QNC))

    # collision finding
    add("progress-collision", "|DeltaQ(C)|")(lambda b, c, q, N: np.abs(b.delta(C, "Q")))
    add("progress-collision", "DeltaQ(H~C)")(
        lambda b, c, q, N: b.delta(HNC, "Q") - _r(K["sampl_q"] * c / N))
    add("progress-collision", "DeltaQ(Q~H~C)")(
        lambda b, c, q, N: b.delta(QNHNC, "Q") - _r(K["quprog_loose"] * (c + q) / N))
    add("progress-collision", "DeltaQ(Q~H~C) tight")(
        lambda b, c, q, N: b.delta(QNHNC, "Q") - (_r(K["sampl_q"] * c / N) + _r(K["sampl_q"] * q / N)))
    add("progress-collision", "DeltaC(C)")(
        lambda b, c, q, N: b.delta(C, "C") - (2 * b.out2(C, "C", HNC) + K["clprog_c"] * c / N))
    add("progress-collision", "DeltaC(H~C)")(
        lambda b, c, q, N: b.delta(HNC, "C") - (
            -b.out2(C, "C", HNC) + K["clprog_h_sq"] * b.out2(HNC, "C", QNHNC)
            + 2 * _r(q / N) * b.n(Q) + K["clprog_h_add"] * q / N))
    add("progress-collision", "DeltaC(Q~H~C)")(
        lambda b, c, q, N: b.delta(QNHNC, "C") - (
            -b.out2(HNC, "C", QNHNC) + _r(K["clprog_q_cross"] * c / N) * b.n(Q) * b.n(QH)
            + K["clprog_q_add"] * c / N))
    add("progress-collision", "DeltaQ(Q)")(lambda b, c, q, N: b.delta(Q, "Q") - _r(K["sampl_q"] * q / N))
    add("progress-collision", "DeltaQ(QQ)")(
        lambda b, c, q, N: b.delta(QQ, "Q") - _r(K["sampl_q"] * q / N) * b.n(Q))
    add("progress-collision", "DeltaQ(Q+H)")(
        lambda b, c, q, N: b.delta(Q_OR_H, "Q") - _r(K["sampl_q"] * (c + q) / N))
    add("progress-collision", "DeltaQ(QQ+QH)")(
        lambda b, c, q, N: b.delta(QQ_OR_QH, "Q") - (
            _r(K["sampl_q"] * (c + q) / N) * b.n(Q) + _r(K["sampl_q"] * q / N) * b.n(H)))
    add("progress-collision", "DeltaC(Q)")(lambda b, c, q, N: b.delta(Q, "C"))
    add("progress-collision", "DeltaC(QQ)")(lambda b, c, q, N: b.delta(QQ, "C"))
    add("progress-collision", "DeltaC(Q+H)")(
        lambda b, c, q, N: b.delta(Q_OR_H, "C") - (_r(K["clqh_lin"] * q / N) * b.n(Q) + K["clqh_add"] * q / N))
    add("progress-collision", "DeltaC(QQ+QH)")(
        lambda b, c, q, N: b.delta(QQ_OR_QH, "C") - (
            K["clqqh_sq"] * q / N * b.n2(Q) + _r(K["clqqh_cross"] * q / N) * b.n(QQ) * b.n(Q)))

    # one-step potential recurrences on arbitrary unit states of A_{c,q}
    def psi_search(b, kind=None):
        if kind is None:
            return b.n2(PreC) + 2 * b.n2(PRE_QNC)
        return b.out2(PreC, kind) + 2 * b.out2(PRE_QNC, kind)

    def psi_coll(b, kind=None):
        if kind is None:
            return b.n2(C) + 2 * b.n2(HNC) + 4 * b.n2(QNHNC)
        return b.out2(C, kind) + 2 * b.out2(HNC, kind) + 4 * b.out2(QNHNC, kind)

    add("recurrence", "search classical: Psi' - Psi - 4/N")(
        lambda b, c, q, N: psi_search(b, "C") - psi_search(b) - K["rec_search_c"] / N)
    add("recurrence", "search quantum: sqrt(Psi') - sqrt(Psi) - 7/sqrt(N)")(
        lambda b, c, q, N: np.sqrt(psi_search(b, "Q")) - np.sqrt(psi_search(b)) - K["rec_search_q"] / _r(N))
    add("recurrence", "collision quantum: sqrt(Psi') - sqrt(Psi) - 10 sqrt((c+q)/N)")(
        lambda b, c, q, N: np.sqrt(psi_coll(b, "Q")) - np.sqrt(psi_coll(b)) - K["rec_coll_q"] * _r((c + q) / N))
    add("recurrence", "collision classical: Psi' - Psi - explicit bound")(
        lambda b, c, q, N: psi_coll(b, "C") - psi_coll(b) - collision_classical_slack(
            c, q, N, b.n(Q), b.n(QH)))
    return out


def collision_classical_slack(c, q, N, norm_q, norm_qh):
    """Allowed classical-query growth of the collision potential (sum of the clProg bounds)."""
    return (4 * _r(q / N) * norm_q + _r(CONST["rec_coll_c_cross"] * c / N) * norm_q * norm_qh
            + (12 * c + 14 * q) / N)


def all_checks(suites=SUITES) -> list[Check]:
    # rebuilt per call so edits to CONST take effect
    return [ch for ch in _checks() if ch.suite in suites]


# -- generic lemmas with empirical gamma ---------------------------------------------

GENERIC_PREDICATES = {
    "PreQ": PreQ, "PreC": PreC, "CollQ": Q, "CollQQ": QQ, "CollH": H,
    "CollQ+CollH": Q_OR_H, "CollQQ+CollQ.CollH": QQ_OR_QH,
}


def empirical_gammas(space: CompiledSpace, P: Predicate) -> tuple[float, float, bool]:
    """``(gamma_Q, gamma_C, append_ok)`` by exhaustive evaluation over ``y``.

    Predicates in this table ignore ``p`` and ``w``, so one ``(x, H, D)``
    stands for all of its ``(p, w)`` copies. The states with ``D(x) = y``
    filled in (and, classically, ``(x, y)`` appended) are read off the
    compiled per-cell outputs.
    """
    if not P.hd_only or not space.cells:
        return empirical_gammas_direct(space, P)
    N, M = space.params.N, space.params.M
    m = space.hd_mask(P)
    n_hd_in = space.n_in // space.a_dim
    false_in = ~m[:n_hd_in]
    gammas = []
    for kind in ("Q", "C"):
        hd_in, x, hd_out, fresh, new = space.cells[kind]
        sel = fresh & (new != BOT) & false_in[hd_in]
        hits = np.zeros(n_hd_in * M)
        np.add.at(hits, hd_in[sel] * M + x[sel], m[hd_out[sel]])
        gammas.append(float(hits.max()) / N if hits.size else 0.0)
    # appending (x, D(x)) leaves D alone: on a recorded or filled cell that is the
    # classical output keeping the old value; fresh cells were indexed separately
    hd_in, x, hd_out, fresh, new = space.cells["C"]
    keep = ~fresh
    ab = space.appended_bot
    cand_in = np.concatenate([hd_in[keep], ab[:, 0]])
    cand_out = np.concatenate([hd_out[keep], ab[:, 2]])
    cand_new = np.concatenate([new[keep], np.full(len(ab), BOT)])
    cand_x = np.concatenate([x[keep], ab[:, 1]])
    dvals = space.cell_values()
    is_append = cand_new == dvals[cand_in * M + cand_x]
    bad = is_append & false_in[cand_in] & m[cand_out]
    return gammas[0], gammas[1], not bool(bad.any())


def empirical_gammas_direct(space: CompiledSpace, P: Predicate) -> tuple[float, float, bool]:
    """Reference loop for :func:`empirical_gammas`; also handles ``x``-dependent predicates."""
    N, M = space.params.N, space.params.M
    gq = gc = 0.0
    append_ok = True
    raw = P.raw
    n_hd_in = space.n_in // space.a_dim
    for H_, D_ in space.hd[:n_hd_in]:
        dmap = dict(D_)
        in_h = {hx for hx, _ in H_}
        for x in range(M):
            b = BasisState(x, 0, 0, H_, D_)
            if raw(b):
                continue
            dx = dmap.get(x, BOT)
            if raw(b._replace(H=H_ + ((x, dx),))):
                append_ok = False
            if dx != BOT or x in in_h:
                # x in H with D(x) bottom: every filled value breaks consistency
                continue
            hits_q = hits_c = 0
            for y in range(N):
                D2 = tuple(sorted(D_ + ((x, y),)))
                hits_q += raw(b._replace(D=D2))
                hits_c += raw(b._replace(H=H_ + ((x, y),), D=D2))
            gq = max(gq, hits_q / N)
            gc = max(gc, hits_c / N)
    return gq, gc, append_ok


def generic_checks(space: CompiledSpace) -> list[tuple[Check | None, str, str]]:
    """``Gamma^Q <= sqrt(10 gamma_Q)`` and, under the append condition, ``Gamma^C <= 2 gamma_C``.

    Returns ``(check or None, name, note)``; None marks a check that does not apply.
    """
    rows = []
    for name, P in GENERIC_PREDICATES.items():
        gq, gc, append_ok = _gammas_cached(space, name, P)
        lab = f"GammaQ({name}) <= sqrt(10 gamma)"
        rows.append((Check("generic", lab, lambda b, c, q, N, P=P, g=gq: b.gamma(P, "Q") - _r(CONST["sampl_q"] * g)),
                     lab, f"gamma={gq!r}"))
        lab = f"GammaC({name}) <= 2 gamma"
        if append_ok:
            rows.append((Check("generic", lab, lambda b, c, q, N, P=P, g=gc: b.gamma(P, "C") - CONST["sampl_c"] * g),
                         lab, f"gamma={gc!r}"))
        else:
            rows.append((None, lab, "skipped: append condition fails, classical lemma does not apply"))
    return rows


def _gammas_cached(space: CompiledSpace, name: str, P: Predicate):
    cache = space.__dict__.setdefault("_gamma_cache", {})
    if name not in cache:
        cache[name] = empirical_gammas(space, P)
    return cache[name]


# -- driver ----------------------------------------------------------------------

CHUNK = 50  # random columns per batch, at most
ELEMENT_BUDGET = 1 << 24  # input amplitudes held per batch


def _evaluate(space: CompiledSpace, Phi, checks: list[Check], c: int, q: int, acc: dict) -> None:
    b = Batch(space, Phi)
    for ch in checks:  # recording pass
        ch.fn(b, c, q, space.params.N)
    b.evaluate()
    for ch in checks:
        val = ch.fn(b, c, q, space.params.N)
        v = float(np.max(val)) if np.size(val) else -math.inf
        acc[ch.name] = max(acc.get(ch.name, -math.inf), v)


def run_grid_point(M: int, N: int, c: int, q: int, trials: int = 100, seed: int = 0,
                   tol: float = 1e-9, suites=SUITES, basis: bool | None = None,
                   basis_limit: int = 60000) -> list[dict]:
    """All requested checks at one grid point; one record per check and input family.

    Random inputs use seeds ``seed .. seed + trials - 1``. ``basis=None`` runs
    the every-basis-state pass when ``n_in <= basis_limit`` and otherwise
    reports it as skipped.
    """
    params = OracleParams(M, N, c_max=c + 1)
    space = CompiledSpace(params, c, q)
    checks = all_checks(suites)
    notes = {ch.name: "" for ch in checks}
    skipped = []
    if "generic" in suites:
        for ch, lab, note in generic_checks(space):
            if ch is None:
                skipped.append((lab, note))
            else:
                checks.append(ch)
                notes[lab] = note
    pts = {"M": M, "N": N, "c": c, "q": q}
    records: list[dict] = []

    acc: dict = {}
    chunk = max(1, min(CHUNK, ELEMENT_BUDGET // space.n_in))
    for start in range(0, trials, chunk):
        seeds = range(seed + start, seed + min(trials, start + chunk))
        Phi = np.stack([random_amplitudes(space.n_in, s) for s in seeds], axis=1)
        _evaluate(space, Phi, checks, c, q, acc)
    families = [("random", trials, acc)]
    do_basis = space.n_in <= basis_limit if basis is None else basis
    if do_basis:
        acc = {}
        _evaluate(space, sp.identity(space.n_in, dtype=complex, format="csc"), checks, c, q, acc)
        families.append(("basis", space.n_in, acc))
    for family, ntrials, acc in families:
        for ch in checks:
            records.append(_record(ch.suite, ch.name, pts, family, ntrials, acc.get(ch.name), tol, notes[ch.name]))
        for lab, note in skipped:
            records.append(_record("generic", lab, pts, family, 0, None, tol, note))
    if not do_basis:
        for ch in checks:
            records.append(_record(ch.suite, ch.name, pts, "basis", 0, None, tol,
                                   f"skipped: {space.n_in} basis states exceed limit {basis_limit}"))
    return records


def _record(suite, name, pts, family, trials, worst, tol, note=""):
    if worst is not None and not math.isfinite(worst):
        worst = None
    rec = {"suite": suite, "predicate": name, "params": dict(pts), "inputs": family,
           "trials": trials, "max_lhs_minus_rhs": worst,
           "pass": None if worst is None else bool(worst <= tol)}
    if note:
        rec["note"] = note
    return rec


def worker_count() -> int:
    """Worker processes: ``HCO_THREADS`` if set, capped by the CPU count."""
    cpus = os.cpu_count() or 1
    env = os.environ.get("HCO_THREADS")
    return max(1, min(cpus, int(env))) if env else cpus


def run_suite(grid=DEFAULT_GRID, trials: int = 100, seed: int = 0, tol: float = 1e-9,
              suites=SUITES, basis: bool | None = None, basis_limit: int = 60000,
              workers: int | None = None) -> list[dict]:
    """Records for every grid point, in grid order regardless of worker count."""
    workers = worker_count() if workers is None else workers
    job = partial(_grid_job, trials=trials, seed=seed, tol=tol, suites=tuple(suites),
                  basis=basis, basis_limit=basis_limit)
    if workers <= 1 or len(grid) <= 1:
        chunks = [job(pt) for pt in grid]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            chunks = list(ex.map(job, grid))
    return [r for chunk in chunks for r in chunk]


def _grid_job(pt, **kw):
    return run_grid_point(*pt, **kw)


def summarize(records: list[dict]) -> dict[tuple[str, str], float]:
    """Worst ``lhs - rhs`` per ``(suite, check)`` across the grid."""
    worst: dict = {}
    for r in records:
        if r["max_lhs_minus_rhs"] is None:
            continue
        key = (r["suite"], r["predicate"])
        worst[key] = max(worst.get(key, -math.inf), r["max_lhs_minus_rhs"])
    return worst
