"""Standard and compressed oracles acting on :class:`SparseState`.

Conventions: ``omega = exp(2 i pi / N)``; a bottom database entry contributes
phase 1. The compression unitary ``S_x`` on one database cell is written in
the computational basis ``{0..N-1, bottom}``::

    S[y, y'] = delta(y, y') - 1/N     S[bot, y] = S[y, bot] = 1/sqrt(N)     S[bot, bot] = 0

which is the map ``|bot> <-> |0^>`` and identity on ``|p^>`` for ``p != 0``.
"""

from __future__ import annotations

import cmath
import enum
import math
from functools import lru_cache

import numpy as np

from hco.errors import CapacityError, ConsistencyError
from hco.statecore import (
    BOT,
    BasisState,
    SparseState,
    db_get,
    db_set,
    history_contains,
    is_hd_consistent,
)

# local composed matrices: entries this small are cancellation residue of exact zeros
_FLUSH = 1e-14


class QueryKind(enum.Enum):
    StandardQuantum = "standard-quantum"
    StandardClassical = "standard-classical"
    CompressedQuantum = "compressed-quantum"
    CompressedClassical = "compressed-classical"

    @property
    def is_classical(self) -> bool:
        return self in (QueryKind.StandardClassical, QueryKind.CompressedClassical)

    @classmethod
    def for_picture(cls, picture: str, tag: str) -> "QueryKind":
        table = {
            ("standard", "Q"): cls.StandardQuantum,
            ("standard", "C"): cls.StandardClassical,
            ("compressed", "Q"): cls.CompressedQuantum,
            ("compressed", "C"): cls.CompressedClassical,
        }
        return table[(picture, tag)]


class RootsTable:
    """``omega_N ** k`` for ``k in [N]``; quarter turns are exact."""

    def __init__(self, N: int):
        self.N = N
        pw = []
        for k in range(N):
            if (4 * k) % N == 0:
                pw.append((1 + 0j, 1j, -1 + 0j, -1j)[(4 * k) // N])
            else:
                pw.append(cmath.exp(2j * math.pi * k / N))
        self.omega_powers = tuple(pw)

    def __call__(self, k: int) -> complex:
        return self.omega_powers[k % self.N]

    def phase(self, p: int, y: int) -> complex:
        """``omega^(p*y)`` with the bottom convention."""
        if y == BOT:
            return 1 + 0j
        return self.omega_powers[(p * y) % self.N]


@lru_cache(maxsize=None)
def roots(N: int) -> RootsTable:
    return RootsTable(N)


@lru_cache(maxsize=None)
def s_matrix(N: int) -> np.ndarray:
    """``S_x`` on one cell, index ``N`` standing for bottom."""
    S = np.full((N + 1, N + 1), -1.0 / N, dtype=complex)
    S[np.arange(N), np.arange(N)] += 1.0
    S[N, :N] = S[:N, N] = 1.0 / math.sqrt(N)
    S[N, N] = 0.0
    return S


@lru_cache(maxsize=None)
def _s_columns(N: int) -> dict:
    S = s_matrix(N)
    cols = {}
    for j in range(N + 1):
        v_in = BOT if j == N else j
        cols[v_in] = tuple(
            (BOT if i == N else i, complex(S[i, j])) for i in range(N + 1) if S[i, j] != 0
        )
    return cols


@lru_cache(maxsize=None)
def _rq_local_columns(N: int, p: int) -> dict:
    """Columns of ``S^dag diag(omega^(p v)) S`` on one cell, exact zeros flushed."""
    S = s_matrix(N)
    ph = np.array([roots(N).phase(p, v) for v in range(N)] + [1.0], dtype=complex)
    L = S.conj().T @ (ph[:, None] * S)
    L[np.abs(L) < _FLUSH] = 0
    cols = {}
    for j in range(N + 1):
        cols[BOT if j == N else j] = tuple(
            (BOT if i == N else i, complex(L[i, j])) for i in range(N + 1) if L[i, j] != 0
        )
    return cols


def fourier_state(p: int, N: int) -> np.ndarray:
    """``|p^> = N^{-1/2} sum_y omega^(p y) |y>`` as a length-N vector."""
    r = roots(N)
    return np.array([r(p * y) for y in range(N)], dtype=complex) / math.sqrt(N)


def _acc(out: dict, k, a: complex) -> None:
    out[k] = out.get(k, 0j) + a


# -- standard (purified) oracles ---------------------------------------------


def apply_standard_quantum(s: SparseState) -> SparseState:
    phase = roots(s.params.N).phase
    out = {}
    for b, a in s.terms.items():
        if b.p == 0:
            out[b] = a
        else:
            out[b] = a * phase(b.p, db_get(b.D, b.x))
    return SparseState._raw(s.params, out)


def apply_standard_classical(s: SparseState) -> SparseState:
    params = s.params
    phase = roots(params.N).phase
    c_max = params.c_max
    out = {}
    for b, a in s.terms.items():
        if len(b.H) >= c_max:
            raise CapacityError(f"history is full ({c_max} slots) for term {b}")
        v = db_get(b.D, b.x)
        out[BasisState(b.x, b.p, b.w, b.H + ((b.x, v),), b.D)] = a * phase(b.p, v)
    return SparseState._raw(params, out)


# -- compression ----------------------------------------------------------------


def apply_S(s: SparseState) -> SparseState:
    """``S``: ``S_x`` on cell ``D_x`` unless ``x`` is already in the history."""
    cols = _s_columns(s.params.N)
    out: dict = {}
    for b, a in s.terms.items():
        if history_contains(b.H, b.x):
            _acc(out, b, a)
            continue
        x, D = b.x, b.D
        for v, coef in cols[db_get(D, x)]:
            _acc(out, BasisState(x, b.p, b.w, b.H, db_set(D, x, v)), a * coef)
    return SparseState._raw(s.params, out)


def apply_S_all(s: SparseState) -> SparseState:
    """``S_all``: ``S_{x', H}`` on every cell, one coordinate at a time."""
    cols = _s_columns(s.params.N)
    terms = s.terms
    for xc in range(s.params.M):
        out: dict = {}
        for b, a in terms.items():
            if history_contains(b.H, xc):
                _acc(out, b, a)
                continue
            for v, coef in cols[db_get(b.D, xc)]:
                _acc(out, BasisState(b.x, b.p, b.w, b.H, db_set(b.D, xc, v)), a * coef)
        terms = out
    return SparseState._raw(s.params, terms)


# -- compressed oracles ---------------------------------------------------------


def _require_consistent(b: BasisState) -> None:
    if not is_hd_consistent(b.H, b.D):
        raise ConsistencyError(f"closed-form rule needs a consistent basis state, got {b}")


def _rq_fast(s: SparseState) -> SparseState:
    N = s.params.N
    r = roots(N).omega_powers
    inv_sqrt = 1 / math.sqrt(N)
    out: dict = {}
    for b, a in s.terms.items():
        _require_consistent(b)
        x, p, D = b.x, b.p, b.D
        z = db_get(D, x)
        if p == 0 or history_contains(b.H, x):
            _acc(out, b, a if z == BOT else a * r[(p * z) % N])
        elif z == BOT:
            for y in range(N):
                _acc(out, BasisState(x, p, b.w, b.H, db_set(D, x, y)), a * r[(p * y) % N] * inv_sqrt)
        else:
            wz = r[(p * z) % N]
            _acc(out, b, a * wz)
            _acc(out, BasisState(x, p, b.w, b.H, db_set(D, x, BOT)), a * wz * inv_sqrt)
            for y in range(N):
                coef = (1 - wz - r[(p * y) % N]) / N
                _acc(out, BasisState(x, p, b.w, b.H, db_set(D, x, y)), a * coef)
    return SparseState._raw(s.params, out)


def _rq_composed(s: SparseState) -> SparseState:
    N = s.params.N
    phase = roots(N).phase
    out: dict = {}
    for b, a in s.terms.items():
        x, D = b.x, b.D
        z = db_get(D, x)
        if history_contains(b.H, x):
            _acc(out, b, a * phase(b.p, z))
            continue
        for v, coef in _rq_local_columns(N, b.p)[z]:
            _acc(out, BasisState(x, b.p, b.w, b.H, db_set(D, x, v)), a * coef)
    return SparseState._raw(s.params, out)


def _rc_fast(s: SparseState) -> SparseState:
    params = s.params
    N, c_max = params.N, params.c_max
    r = roots(N).omega_powers
    inv_sqrt = 1 / math.sqrt(N)
    out: dict = {}
    for b, a in s.terms.items():
        if len(b.H) >= c_max:
            raise CapacityError(f"history is full ({c_max} slots) for term {b}")
        _require_consistent(b)
        x, p, w, H, D = b
        z = db_get(D, x)
        if history_contains(H, x):
            _acc(out, BasisState(x, p, w, H + ((x, z),), D), a if z == BOT else a * r[(p * z) % N])
        elif z == BOT:
            for y in range(N):
                _acc(out, BasisState(x, p, w, H + ((x, y),), db_set(D, x, y)), a * r[(p * y) % N] * inv_sqrt)
        else:
            _acc(out, BasisState(x, p, w, H + ((x, z),), D), a * r[(p * z) % N])
            _acc(out, BasisState(x, p, w, H + ((x, BOT),), db_set(D, x, BOT)), a * inv_sqrt)
            for y in range(N):
                _acc(out, BasisState(x, p, w, H + ((x, y),), db_set(D, x, y)), -a * r[(p * y) % N] / N)
    return SparseState._raw(params, out)


def _rc_composed(s: SparseState) -> SparseState:
    params = s.params
    N, c_max = params.N, params.c_max
    phase = roots(N).phase
    cols = _s_columns(N)
    out: dict = {}
    for b, a in s.terms.items():
        if len(b.H) >= c_max:
            raise CapacityError(f"history is full ({c_max} slots) for term {b}")
        x, p, w, H, D = b
        z = db_get(D, x)
        if history_contains(H, x):
            _acc(out, BasisState(x, p, w, H + ((x, z),), D), a * phase(p, z))
            continue
        # S on D_x, then O^C reads the cell into the history; S^dag is then inactive
        for v, coef in cols[z]:
            _acc(out, BasisState(x, p, w, H + ((x, v),), db_set(D, x, v)), a * coef * phase(p, v))
    return SparseState._raw(params, out)


def apply_compressed_quantum(s: SparseState, mode: str = "fastpath") -> SparseState:
    """``R^Q = S^dag O^Q S``.

    ``fastpath`` uses the three-case resampling rule and rejects inconsistent
    terms; ``composed`` multiplies the one-cell matrices; ``staged`` applies
    the three whole-state operators in sequence (slow, leaves rounding residue).
    """
    if mode == "fastpath":
        return _rq_fast(s)
    if mode == "composed":
        return _rq_composed(s)
    if mode == "staged":
        return apply_S(apply_standard_quantum(apply_S(s)))
    raise ValueError(f"unknown mode {mode!r}")


def apply_compressed_classical(s: SparseState, mode: str = "fastpath") -> SparseState:
    """``R^C = S^dag O^C S``; modes as in :func:`apply_compressed_quantum`."""
    if mode == "fastpath":
        return _rc_fast(s)
    if mode == "composed":
        return _rc_composed(s)
    if mode == "staged":
        return apply_S(apply_standard_classical(apply_S(s)))
    raise ValueError(f"unknown mode {mode!r}")


def apply_query(s: SparseState, kind: QueryKind, mode: str = "fastpath") -> SparseState:
    if kind is QueryKind.StandardQuantum:
        return apply_standard_quantum(s)
    if kind is QueryKind.StandardClassical:
        return apply_standard_classical(s)
    if kind is QueryKind.CompressedQuantum:
        return apply_compressed_quantum(s, mode)
    return apply_compressed_classical(s, mode)


def standard_initial_state(params, explicit: bool = False) -> SparseState:
    """``|0,0,0> |*..*> N^{-M/2} sum_D |D>``.

    By default this is ``S_all`` of the compressed initial state; ``explicit``
    lists all ``N^M`` databases instead (used as a cross-check).
    """
    from itertools import product

    phi0 = SparseState(params, {BasisState(0, 0, 0, (), ()): 1})
    if not explicit:
        return apply_S_all(phi0)
    amp = params.N ** (-params.M / 2)
    return SparseState(params, {
        BasisState(0, 0, 0, (), tuple(enumerate(vals))): amp
        for vals in product(range(params.N), repeat=params.M)
    })
