"""Hybrid programs, built-in strategies, trajectories and exact success probabilities.

A program alternates unitaries on the algorithm register ``A = (x, p, w)``
with query slots tagged ``"Q"`` or ``"C"``. The same program runs in the
standard picture (full random database in superposition, plain oracles) or
in the compressed picture (lazy database, recording oracles). Programs never
read ``H``: classical answers reach ``A`` through the Fourier lookup pattern
``F_P . O^C . F_P^dagger``, which leaves ``D(x)`` in the ``P`` register.

Workspace ``w`` is a single integer; built-ins pack several values of ``[N]``
into it with :class:`Fields`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.stats import unitary_group

from hco.errors import CapacityError, NonUnitaryError, ParamError, SizeError
from hco.oracles import (
    apply_S_all,
    apply_compressed_classical,
    apply_compressed_quantum,
    apply_standard_classical,
    apply_standard_quantum,
    roots,
    standard_initial_state,
)
from hco.progress import (
    CollC,
    CollH,
    CollQ,
    PreC,
    PreQ,
    cross_term,
    delta,
    gamma,
    potential_collision,
    potential_search,
    project,
)
from hco.statecore import BOT, BasisState, OracleParams, SparseState, db_get, initial_basis

UNITARY_TOL = 1e-9
ENUM_LIMIT_BITS = 12


# -- operators on A -----------------------------------------------------------------


def a_labels(params: OracleParams) -> list[tuple[int, int, int]]:
    return list(itertools.product(range(params.M), range(params.N), range(params.w_dim)))


def a_index(params: OracleParams, x: int, p: int, w: int) -> int:
    return (x * params.N + p) * params.w_dim + w


class AUnitary:
    """Linear map on the ``(x, p, w)`` register, stored as a sparse matrix.

    Build it from a label map (:meth:`from_map`), from a dense block over a
    subset of labels (:meth:`from_block`), or from a full matrix.
    """

    def __init__(self, params: OracleParams, matrix, name: str = "U", check: bool = True):
        self.params = params
        self.name = name
        self.matrix = sp.csc_matrix(matrix, dtype=complex)
        d = params.a_dim
        if self.matrix.shape != (d, d):
            raise ParamError(f"{name}: matrix shape {self.matrix.shape} does not match a_dim={d}")
        self.matrix.eliminate_zeros()
        self._cols = None
        if check:
            self.check_unitary()

    @classmethod
    def from_map(cls, params: OracleParams, fn: Callable[[int, int, int], dict], name: str = "U",
                 check: bool = True) -> "AUnitary":
        """``fn(x, p, w)`` returns ``{(x', p', w'): amplitude}``, the image of one label."""
        rows, cols, vals = [], [], []
        for j, (x, p, w) in enumerate(a_labels(params)):
            for (x2, p2, w2), a in fn(x, p, w).items():
                if a != 0:
                    rows.append(a_index(params, x2, p2, w2))
                    cols.append(j)
                    vals.append(a)
        d = params.a_dim
        return cls(params, sp.csc_matrix((vals, (rows, cols)), shape=(d, d)), name, check)

    @classmethod
    def from_perm(cls, params: OracleParams, fn: Callable[[int, int, int], tuple], name: str = "U") -> "AUnitary":
        return cls.from_map(params, lambda x, p, w: {fn(x, p, w): 1.0}, name)

    @classmethod
    def from_block(cls, params: OracleParams, block: np.ndarray, labels: Sequence[tuple], name: str = "U",
                   check: bool = True) -> "AUnitary":
        """Dense ``block`` acting on ``labels``; identity on every other label."""
        idx = [a_index(params, *lab) for lab in labels]
        if len(set(idx)) != len(idx) or block.shape != (len(idx), len(idx)):
            raise ParamError(f"{name}: block shape {block.shape} does not fit {len(idx)} distinct labels")
        d = params.a_dim
        m = sp.lil_matrix((d, d), dtype=complex)
        inside = set(idx)
        for k in range(d):
            if k not in inside:
                m[k, k] = 1.0
        for i, r in enumerate(idx):
            for j, c in enumerate(idx):
                if block[i, j] != 0:
                    m[r, c] = block[i, j]
        return cls(params, m.tocsc(), name, check)

    def check_unitary(self, tol: float = UNITARY_TOL) -> None:
        U = self.matrix
        err = abs(U.conj().T @ U - sp.identity(U.shape[0], format="csc"))
        worst = err.max() if err.nnz else 0.0
        if worst > tol:
            raise NonUnitaryError(f"{self.name}: |U^dagger U - I| = {worst:.3g} > {tol}")

    def __matmul__(self, other: "AUnitary") -> "AUnitary":
        """Composition: ``(self @ other)`` applies ``other`` first."""
        return AUnitary(self.params, self.matrix @ other.matrix, f"{self.name}*{other.name}", check=False)

    def dagger(self) -> "AUnitary":
        return AUnitary(self.params, self.matrix.conj().T, f"{self.name}^dagger", check=False)

    def columns(self) -> list[list[tuple[tuple, complex]]]:
        if self._cols is None:
            labels = a_labels(self.params)
            U = self.matrix
            self._cols = [
                [(labels[r], complex(v)) for r, v in zip(U.indices[U.indptr[j]:U.indptr[j + 1]],
                                                         U.data[U.indptr[j]:U.indptr[j + 1]])]
                for j in range(U.shape[1])
            ]
        return self._cols

    def apply(self, s: SparseState) -> SparseState:
        if s.params != self.params:
            raise ParamError("operator and state use different params")
        cols = self.columns()
        prm = self.params
        out: dict = {}
        for b, amp in s.terms.items():
            for (x, p, w), u in cols[a_index(prm, b.x, b.p, b.w)]:
                k = BasisState(x, p, w, b.H, b.D)
                out[k] = out.get(k, 0j) + u * amp
        return SparseState._raw(prm, out)


def identity(params: OracleParams) -> AUnitary:
    return AUnitary(params, sp.identity(params.a_dim, format="csc"), "I", check=False)


def fourier_matrix(n: int) -> np.ndarray:
    """``F|p> = sum_y w^{py} |y> / sqrt(n)``."""
    k = np.arange(n)
    return np.exp(2j * np.pi * np.outer(k, k) / n) / math.sqrt(n)


def on_p(params: OracleParams, mat: np.ndarray, name: str) -> AUnitary:
    """``mat`` on the ``P`` register, identity on ``x`` and ``w``."""
    N = params.N
    return AUnitary.from_map(
        params, lambda x, p, w: {(x, y, w): mat[y, p] for y in range(N) if mat[y, p] != 0}, name)


def on_x(params: OracleParams, mat: np.ndarray, name: str) -> AUnitary:
    M = params.M
    return AUnitary.from_map(
        params, lambda x, p, w: {(y, p, w): mat[y, x] for y in range(M) if mat[y, x] != 0}, name)


def set_x(params: OracleParams, frm: int, to: int) -> AUnitary:
    """Cyclic shift of ``x`` taking ``frm`` to ``to``."""
    M = params.M
    return AUnitary.from_perm(params, lambda x, p, w: ((x + to - frm) % M, p, w), f"X{frm}->{to}")


class Fields:
    """Mixed-radix packing of ``k`` values of ``[N]`` into the workspace integer."""

    def __init__(self, k: int, N: int):
        self.k, self.N = k, N
        self.size = N**k

    def unpack(self, w: int) -> tuple[int, ...]:
        out = []
        for _ in range(self.k):
            out.append(w % self.N)
            w //= self.N
        return tuple(out)

    def pack(self, vals: Sequence[int]) -> int:
        w = 0
        for v in reversed(vals):
            w = w * self.N + v
        return w


def swap_p_into(params: OracleParams, fields: Fields, slot: int) -> AUnitary:
    """Exchange ``P`` with workspace field ``slot``."""
    def fn(x, p, w):
        vals = list(fields.unpack(w))
        vals[slot], p2 = p, vals[slot]
        return (x, p2, fields.pack(vals))
    return AUnitary.from_perm(params, fn, f"swapP{slot}")


# -- programs ------------------------------------------------------------------------


@dataclass
class HybridProgram:
    """Unitaries on ``A`` interleaved with query slots ``"Q"``/``"C"``.

    ``decode(x, p, w)`` returns the answer read off the algorithm register: an
    index for ``problem='preimage'``, a pair for ``'collision'``, or None.
    """

    params: OracleParams
    steps: list
    decode: Callable[[int, int, int], object]
    problem: str = "preimage"
    name: str = "program"
    notes: str = ""
    declared: tuple | None = None  # (c, q)

    def __post_init__(self):
        if self.problem not in ("preimage", "collision"):
            raise ParamError(f"unknown problem {self.problem!r}")
        for st in self.steps:
            if isinstance(st, str):
                if st not in ("Q", "C"):
                    raise ParamError(f"query slot must be 'Q' or 'C', got {st!r}")
            elif not isinstance(st, AUnitary):
                raise ParamError(f"step {st!r} is neither a query nor an AUnitary")
            elif st.params != self.params:
                raise ParamError(f"step {st.name} built for different params")
        c, q = self.counts
        if c > self.params.c_max:
            raise ParamError(f"{c} classical queries exceed c_max={self.params.c_max}")
        if self.declared is not None and tuple(self.declared) != (c, q):
            raise ParamError(f"declared (c, q)={self.declared} but schedule {self.schedule!r} has {(c, q)}")

    @property
    def schedule(self) -> str:
        return "".join(st for st in self.steps if isinstance(st, str))

    @property
    def counts(self) -> tuple[int, int]:
        s = self.schedule
        return s.count("C"), s.count("Q")

    def metadata(self) -> dict:
        c, q = self.counts
        return {"name": self.name, "problem": self.problem, "c": c, "q": q,
                "schedule": self.schedule, "M": self.params.M, "N": self.params.N,
                "c_max": self.params.c_max, "w_dim": self.params.w_dim, "notes": self.notes}

    def with_trailing_identity(self) -> "HybridProgram":
        return HybridProgram(self.params, self.steps + [identity(self.params)], self.decode,
                             self.problem, self.name, self.notes, self.declared)


@dataclass
class ProgressReport:
    """Progress quantities for one query, measured on the state just before it."""

    step: int
    kind: str
    c: int  # classical queries before this one
    q: int  # quantum queries before this one
    delta_q: dict = field(default_factory=dict)
    delta_c: dict = field(default_factory=dict)
    gamma_q: dict = field(default_factory=dict)
    gamma_c: dict = field(default_factory=dict)
    cross: dict = field(default_factory=dict)
    psi_search: tuple = (0.0, 0.0)  # (before, after)
    psi_collision: tuple = (0.0, 0.0)


@dataclass
class Trajectory:
    picture: str
    states: list  # state after every program step; states[0] is the initial state
    query_steps: list  # indices into ``states`` right after each query
    schedule: str
    program: HybridProgram
    reports: list = field(default_factory=list)

    @property
    def final(self) -> SparseState:
        return self.states[-1]

    def after_queries(self) -> list[SparseState]:
        return [self.states[i] for i in self.query_steps]


def initial_state(params: OracleParams, picture: str) -> SparseState:
    if picture == "compressed":
        return SparseState.basis(params, initial_basis())
    if picture == "standard":
        return standard_initial_state(params)
    raise ParamError(f"picture must be 'standard' or 'compressed', got {picture!r}")


def _query_fn(picture: str, kind: str, mode: str):
    if picture == "standard":
        return apply_standard_quantum if kind == "Q" else apply_standard_classical
    if kind == "Q":
        return lambda s: apply_compressed_quantum(s, mode)
    return lambda s: apply_compressed_classical(s, mode)


_TRACKED = {
    "PreC": PreC, "PreQ~PreC": PreQ & ~PreC,
    "C": CollC, "H~C": CollH & ~CollC, "Q~H~C": CollQ & ~CollH & ~CollC,
}


def progress_report(s: SparseState, kind: str, step: int, c: int, q: int, mode: str = "fastpath") -> ProgressReport:
    rep = ProgressReport(step, kind, c, q)
    for name, P in _TRACKED.items():
        rep.delta_q[name] = delta(P, s, "Q", mode)
        rep.gamma_q[name] = gamma(P, s, "Q", mode)
        if kind == "C":
            rep.delta_c[name] = delta(P, s, "C", mode)
            rep.gamma_c[name] = gamma(P, s, "C", mode)
    rep.cross["PreC<-PreQ~PreC"] = cross_term(PreC, _TRACKED["PreQ~PreC"], s, kind, mode)
    rep.cross["C<-H~C"] = cross_term(CollC, _TRACKED["H~C"], s, kind, mode)
    rep.cross["H~C<-Q~H~C"] = cross_term(_TRACKED["H~C"], _TRACKED["Q~H~C"], s, kind, mode)
    rep.cross["|Q|"] = project(s, CollQ).norm()
    rep.cross["|QH|"] = project(s, CollQ & CollH).norm()
    return rep


def run(prog: HybridProgram, picture: str = "compressed", trace: bool = False, mode: str = "fastpath",
        prune_eps: float | None = None) -> Trajectory:
    """Execute ``prog`` from the picture's initial state.

    With ``trace`` (compressed picture only) a :class:`ProgressReport` is
    computed on the state entering every query. ``prune_eps`` drops tiny
    amplitudes after each step; verification code never sets it.
    """
    if trace and picture != "compressed":
        raise ParamError("progress traces are defined on the compressed picture only")
    s = initial_state(prog.params, picture)
    states, qsteps, reports = [s], [], []
    c = q = 0
    for st in prog.steps:
        if isinstance(st, str):
            if st == "C" and c >= prog.params.c_max:
                raise CapacityError(f"classical query {c + 1} exceeds c_max={prog.params.c_max}")
            s_before = s
            s = _query_fn(picture, st, mode)(s)
            if trace:
                rep = progress_report(s_before, st, len(states), c, q, mode)
                rep.psi_search = (potential_search(s_before), potential_search(s))
                rep.psi_collision = (potential_collision(s_before), potential_collision(s))
                reports.append(rep)
            c += st == "C"
            q += st == "Q"
            qsteps.append(len(states))
        else:
            s = st.apply(s)
        if prune_eps is not None:
            s = s.prune(prune_eps)
        states.append(s)
    return Trajectory(picture, states, qsteps, prog.schedule, prog, reports)


# -- success probability ----------------------------------------------------------------


def solves(problem: str, out, D: tuple) -> bool:
    """Whether decoded output ``out`` solves ``problem`` against database ``D``."""
    if out is None:
        return False
    if problem == "preimage":
        return db_get(D, out) == 0
    x1, x2 = out
    if x1 == x2:
        return False
    v1 = db_get(D, x1)
    return v1 != BOT and v1 == db_get(D, x2)


def success_probability(traj: Trajectory, problem: str | None = None) -> float:
    """Exact probability that measuring the final state yields a correct answer.

    Compressed final states are first mapped to the standard picture by ``S_all``.
    """
    prog = traj.program
    problem = problem or prog.problem
    s = traj.final if traj.picture == "standard" else apply_S_all(traj.final)
    cache: dict = {}
    acc = []
    for b, a in s.terms.items():
        key = (b.x, b.p, b.w)
        if key not in cache:
            cache[key] = prog.decode(*key)
        if solves(problem, cache[key], b.D):
            acc.append(a.real * a.real + a.imag * a.imag)
    return math.fsum(acc)


# -- independent per-database ground truth ---------------------------------------------


def enumeration_oracle(prog: HybridProgram) -> float:
    """Average over every ``D in [N]^M`` of the program's success against fixed ``D``.

    Runs on the ``A`` register only, with all databases as columns. Quantum
    queries are diagonal phases; a classical query measures ``x``, so the
    state splits into one branch per observed index (branches never
    interfere again because their histories differ).
    """
    prm = prog.params
    M, N = prm.M, prm.N
    if M * math.log2(N) > ENUM_LIMIT_BITS + 1e-12:
        raise SizeError(f"N^M = {N}^{M} exceeds 2^{ENUM_LIMIT_BITS} databases")
    dbs = np.array(list(itertools.product(range(N), repeat=M)), dtype=np.int64)  # (nD, M)
    labels = np.array(a_labels(prm), dtype=np.int64)  # (d, 3)
    xs, ps = labels[:, 0], labels[:, 1]
    vals = dbs[:, xs].T  # (d, nD): D(x) per label
    phase = np.exp(2j * np.pi * ((ps[:, None] * vals) % N) / N)
    nD = dbs.shape[0]
    start = np.zeros((prm.a_dim, nD), dtype=complex)
    start[0, :] = 1.0
    branches = [start]
    for st in prog.steps:
        if st == "Q":
            branches = [phase * v for v in branches]
        elif st == "C":
            nxt = []
            for v in branches:
                v = phase * v
                for x in range(M):
                    part = np.where((xs == x)[:, None], v, 0)
                    if np.any(part):
                        nxt.append(part)
            branches = nxt
        else:
            U = st.matrix
            branches = [U @ v for v in branches]
    win = np.zeros((prm.a_dim, nD), dtype=bool)
    for i, lab in enumerate(a_labels(prm)):
        out = prog.decode(*lab)
        if out is None:
            continue
        for j in range(nD):
            win[i, j] = solves(prog.problem, out, tuple(enumerate(dbs[j])))
    per_db = sum(np.sum(np.abs(v) ** 2 * win, axis=0) for v in branches)
    return float(np.sum(per_db) / nD)


# -- built-in strategies ------------------------------------------------------------------


def classical_lookup_pattern(params: OracleParams) -> list:
    """``F_P``, classical query, ``F_P^dagger``: maps ``|x, 0>`` to ``|x, D(x)>`` and records ``(x, D(x))``."""
    F = fourier_matrix(params.N)
    return [on_p(params, F, "F_P"), "C", on_p(params, F.conj().T, "F_P^dagger")]


def _lookups(params: OracleParams, fields: Fields, indices: Sequence[int], start_x: int = 0) -> tuple[list, int]:
    steps, cur = [], start_x
    for slot, i in enumerate(indices):
        if i != cur:
            steps.append(set_x(params, cur, i))
            cur = i
        steps += classical_lookup_pattern(params)
        steps.append(swap_p_into(params, fields, slot))
    return steps, cur


def builtin_classical_search(M: int, N: int, c: int) -> HybridProgram:
    """Look up indices ``0..c-1``; answer the first one holding 0."""
    if not 0 <= c <= M:
        raise ParamError(f"classical search needs 0 <= c <= M, got c={c}, M={M}")
    fields = Fields(c, N)
    params = OracleParams(M, N, c_max=c, w_dim=fields.size)
    steps, _ = _lookups(params, fields, range(c))

    def decode(x, p, w):
        for i, v in enumerate(fields.unpack(w)):
            if v == 0:
                return i
        return None

    return HybridProgram(params, steps, decode, "preimage", "classical-search",
                         "c classical lookups; each lookup is one classical query", (c, 0))


def builtin_classical_birthday(M: int, N: int, c: int) -> HybridProgram:
    """Look up indices ``0..c-1``; answer the first colliding pair."""
    if not 0 <= c <= M:
        raise ParamError(f"birthday needs 0 <= c <= M, got c={c}, M={M}")
    fields = Fields(c, N)
    params = OracleParams(M, N, c_max=c, w_dim=fields.size)
    steps, _ = _lookups(params, fields, range(c))

    def decode(x, p, w):
        return _first_pair(fields.unpack(w))

    return HybridProgram(params, steps, decode, "collision", "classical-birthday",
                         "c classical lookups; each lookup is one classical query", (c, 0))


def _first_pair(vals: Sequence[int]):
    for i, j in itertools.combinations(range(len(vals)), 2):
        if vals[i] == vals[j]:
            return (i, j)
    return None


def _uniform_prep(n: int) -> np.ndarray:
    """A unitary whose first column is the uniform vector over ``n`` entries."""
    return fourier_matrix(n)


def _diffusion(n: int) -> np.ndarray:
    return 2.0 * np.full((n, n), 1.0 / n) - np.eye(n)


def builtin_grover(M: int, N: int, q: int) -> HybridProgram:
    """Grover search for a zero preimage, answer recorded by one final classical query.

    ``N = 2``: one query per iteration (``p = 1`` gives ``(-1)^{D(x)}``, the
    zero-marking oracle up to a global sign). ``N > 2``: two queries per
    iteration (compute ``D(x)`` into ``P``, flip the phase on ``P = 0``,
    uncompute).
    """
    if q < 0:
        raise ParamError("q must be non-negative")
    if N > 2 and q % 2:
        raise ParamError(f"Grover with N={N} > 2 uses 2 quantum queries per iteration; q={q} is odd")
    params = OracleParams(M, N, c_max=1, w_dim=1)
    diff = on_x(params, _diffusion(M), "diffuse")
    steps: list = [on_x(params, _uniform_prep(M), "prep")]
    if N == 2:
        flip = on_p(params, np.array([[0, 1], [1, 0]], dtype=complex), "P^1")
        if q:
            steps.append(flip)
            for _ in range(q):
                steps += ["Q", diff]
            steps.append(flip)
        notes = "N=2: one quantum query per iteration"
    else:
        F = fourier_matrix(N)
        mark = on_p(params, np.diag([-1.0 if v == 0 else 1.0 for v in range(N)]).astype(complex), "flipP0")
        for _ in range(q // 2):
            steps += [on_p(params, F, "F_P"), "Q", on_p(params, F.conj().T, "F_P^dagger"), mark,
                      on_p(params, F.conj().T, "F_P^dagger"), "Q", on_p(params, F, "F_P"), diff]
        notes = "N>2: two quantum queries per iteration (compute, uncompute)"
    steps.append("C")
    return HybridProgram(params, steps, lambda x, p, w: x, "preimage", "grover",
                         notes + "; one final classical query records the answer", (1, q))


def builtin_bht_hybrid(M: int, N: int, c: int, q: int, convert_cq: bool = False) -> HybridProgram:
    """Collect ``k`` classical values, then Grover over the other indices for a match.

    Phase one looks up ``0..k-1`` into workspace fields. Phase two runs
    Grover over ``k..M-1`` marking ``x`` with ``D(x)`` among the stored
    values (two quantum queries per iteration) and finishes with a classical
    lookup of the found index into ``P``. With ``q = 0`` it is exactly the
    birthday program. ``convert_cq`` spends ``q/2`` of the quantum budget as
    extra classical lookups.
    """
    if q % 2:
        raise ParamError(f"bht-hybrid needs even q, got {q}")
    k, qg = c, q
    if convert_cq:
        if q % 4:
            raise ParamError(f"converted bht-hybrid needs q divisible by 4, got {q}")
        k, qg = c + q // 2, q // 2
    if k > M:
        raise ParamError(f"cannot collect {k} values from M={M} indices")
    if qg == 0:
        prog = builtin_classical_birthday(M, N, k)
        prog.name = "bht-hybrid"
        prog.notes = "no quantum queries: identical to classical-birthday"
        return prog
    K = M - k
    if K < 1:
        raise ParamError(f"no indices left for the Grover phase (M={M}, k={k})")
    fields = Fields(k, N)
    params = OracleParams(M, N, c_max=k + 1, w_dim=fields.size)
    steps, cur = _lookups(params, fields, range(k))
    if cur != k:
        steps.append(set_x(params, cur, k))
    block = list(range(k, M))

    def on_block(mat, name):
        def fn(x, p, w):
            if x < k:
                return {(x, p, w): 1.0}
            i = x - k
            return {(block[r], p, w): mat[r, i] for r in range(K) if mat[r, i] != 0}
        return AUnitary.from_map(params, fn, name)

    F = fourier_matrix(N)
    stored = [set(fields.unpack(w)) for w in range(fields.size)]
    mark = AUnitary.from_map(
        params, lambda x, p, w: {(x, p, w): -1.0 if p in stored[w] else 1.0}, "flip-if-stored")
    steps.append(on_block(_uniform_prep(K), "prep"))
    diff = on_block(_diffusion(K), "diffuse")
    for _ in range(qg // 2):
        steps += [on_p(params, F, "F_P"), "Q", on_p(params, F.conj().T, "F_P^dagger"), mark,
                  on_p(params, F.conj().T, "F_P^dagger"), "Q", on_p(params, F, "F_P"), diff]
    steps += classical_lookup_pattern(params)

    def decode(x, p, w):
        vals = fields.unpack(w)
        pair = _first_pair(vals)
        if pair is not None:
            return pair
        for i, v in enumerate(vals):
            if v == p:
                return (i, x)
        return None

    notes = (f"{k} classical lookups, {qg // 2} Grover iterations of 2 quantum queries, "
             "one final classical lookup")
    return HybridProgram(params, steps, decode, "collision", "bht-hybrid", notes, (k + 1, qg))


def builtin_hybrid_search(M: int, N: int, c: int, q: int) -> HybridProgram:
    """Preimage search with ``c`` classical lookups, then Grover on the remaining indices.

    With ``q = 0`` and ``c >= 1`` this is exactly classical-search; otherwise a
    final classical query records the Grover candidate (counted in ``c_used``).
    """
    if q == 0 and c >= 1:
        return builtin_classical_search(M, N, c)
    if N > 2 and q % 2:
        raise ParamError(f"N={N} > 2 uses 2 quantum queries per Grover iteration; q={q} is odd")
    if c >= M:
        raise ParamError(f"no indices left after {c} lookups (M={M})")
    slots = Fields(c, N)
    params = OracleParams(M, N, c_max=c + 1, w_dim=slots.size)
    steps, cur = _lookups(params, slots, range(c))
    if cur != c:
        steps.append(set_x(params, cur, c))
    K = M - c

    def on_block(mat, name):
        def fn(x, p, w):
            if x < c:
                return {(x, p, w): 1.0}
            return {(c + r, p, w): mat[r, x - c] for r in range(K) if mat[r, x - c] != 0}
        return AUnitary.from_map(params, fn, name)

    steps.append(on_block(_uniform_prep(K), "prep"))
    diff = on_block(_diffusion(K), "diffuse")
    F = fourier_matrix(N)
    if N == 2:
        flip = on_p(params, np.array([[0, 1], [1, 0]], dtype=complex), "P^1")
        if q:
            steps.append(flip)
            for _ in range(q):
                steps += ["Q", diff]
            steps.append(flip)
    else:
        mark = on_p(params, np.diag([-1.0 if v == 0 else 1.0 for v in range(N)]).astype(complex), "flipP0")
        for _ in range(q // 2):
            steps += [on_p(params, F, "F_P"), "Q", on_p(params, F.conj().T, "F_P^dagger"), mark,
                      on_p(params, F.conj().T, "F_P^dagger"), "Q", on_p(params, F, "F_P"), diff]
    steps.append("C")

    def decode(x, p, w):
        for i, v in enumerate(slots.unpack(w)):
            if v == 0:
                return i
        return x

    return HybridProgram(params, steps, decode, "preimage", "hybrid-search",
                         "c lookups, Grover over the rest, one recording query", (c + 1, q))


BUILTINS = {
    "classical-search": lambda M, N, c, q, **kw: builtin_classical_search(M, N, c),
    "classical-birthday": lambda M, N, c, q, **kw: builtin_classical_birthday(M, N, c),
    "grover": lambda M, N, c, q, **kw: builtin_grover(M, N, q),
    "hybrid-search": lambda M, N, c, q, **kw: builtin_hybrid_search(M, N, c, q),
    "bht-hybrid": lambda M, N, c, q, convert_cq=False, **kw: builtin_bht_hybrid(M, N, c, q, convert_cq),
}


def build(name: str, M: int, N: int, c: int = 0, q: int = 0, convert_cq: bool = False) -> HybridProgram:
    if name not in BUILTINS:
        raise ParamError(f"unknown algorithm {name!r}; choose from {sorted(BUILTINS)}")
    return BUILTINS[name](M, N, c, q, convert_cq=convert_cq)


def constant_guess(M: int, N: int, x0: int = 0) -> HybridProgram:
    """Answer ``x0`` without querying."""
    params = OracleParams(M, N)
    return HybridProgram(params, [], lambda x, p, w: x0, "preimage", "constant-guess", "", (0, 0))


# -- reference values ---------------------------------------------------------------------


def classical_search_closed_form(N: int, c: int) -> float:
    return 1.0 - (1.0 - 1.0 / N) ** c


def birthday_closed_form(N: int, c: int) -> float:
    if c > N:
        return 1.0
    return 1.0 - math.perm(N, c) / N**c


def textbook_grover(M: int, N: int, iterations: int) -> float:
    """Average over databases of ``sin^2((2t+1) theta)``, ``sin^2 theta = k/M`` for ``k`` zeros."""
    total = 0.0
    for k in range(M + 1):
        weight = math.comb(M, k) * (N - 1) ** (M - k) / N**M
        theta = math.asin(math.sqrt(k / M))
        total += weight * math.sin((2 * iterations + 1) * theta) ** 2
    return total


# -- random programs for property tests ------------------------------------------------


def random_program(seed: int, max_queries: int = 4, max_M: int = 4, max_N: int = 4,
                   max_block: int = 8) -> HybridProgram:
    """Seeded program: Haar-random unitaries on random blocks of ``A``, random schedule."""
    rng = np.random.default_rng(seed)
    M = int(rng.integers(2, max_M + 1))
    N = int(rng.integers(2, max_N + 1))
    w_dim = int(rng.integers(1, 3))
    t = int(rng.integers(1, max_queries + 1))
    sched = "".join(rng.choice(["Q", "C"], size=t))
    params = OracleParams(M, N, c_max=sched.count("C"), w_dim=w_dim)
    labels = a_labels(params)

    def rand_u(i):
        dim = int(rng.integers(2, min(max_block, len(labels)) + 1))
        pick = [labels[j] for j in sorted(rng.choice(len(labels), size=dim, replace=False))]
        block = unitary_group.rvs(dim, random_state=rng)
        return AUnitary.from_block(params, block, pick, f"U{i}")

    steps: list = [rand_u(0)]
    for i, kind in enumerate(sched, start=1):
        steps += [kind, rand_u(i)]
    return HybridProgram(params, steps, lambda x, p, w: x, "preimage", f"random-{seed}",
                         f"schedule {sched}", (sched.count("C"), sched.count("Q")))
