"""Basis-state predicates, projectors and progress measures.

Every predicate is false on a state that is not history-database consistent,
including negations and other combinations: ``~P`` is "consistent and not P".
On consistent states the combinations follow ordinary boolean logic, so
``project(s, ~P) == s - project(s, P)`` for ``s`` in ``A_{c,q}``.

Search predicates (zero preimage) and collision predicates live in separate
names: ``PreQ``/``PreC`` and ``CollQ``/``CollH``/``CollC``/``CollQQ``/``CollX``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

from hco.oracles import apply_compressed_classical, apply_compressed_quantum
from hco.statecore import (
    BOT,
    BasisState,
    OracleParams,
    SparseState,
    db_get,
    db_set,
    enumerate_consistent,
    history_contains,
    history_function,
    is_consistent,
    is_hd_consistent,
)

GAMMA_GUARD = 1e-12


# -- raw classifiers (assume consistency) -----------------------------------


@lru_cache(maxsize=1 << 18)
def collision_counts(H: tuple, D: tuple) -> tuple[int, int, int, frozenset]:
    """``(#quantum, #hybrid, #classical, free endpoints of hybrid pairs)``.

    Collisions are unordered pairs ``x1 != x2`` with ``D(x1) == D(x2)``.
    """
    in_h = {hx for hx, _ in H}
    by_val: dict[int, list[int]] = {}
    for k, v in D:
        by_val.setdefault(v, []).append(k)
    nq = nh = nc = 0
    free = set()
    for ks in by_val.values():
        if len(ks) < 2:
            continue
        inside = [k for k in ks if k in in_h]
        outside = [k for k in ks if k not in in_h]
        a, b = len(inside), len(outside)
        nc += a * (a - 1) // 2
        nq += b * (b - 1) // 2
        if a and b:
            nh += a * b
            free.update(outside)
    return nq, nh, nc, frozenset(free)


def _coll_q(b):
    return collision_counts(b.H, b.D)[0] >= 1


def _coll_qq(b):
    return collision_counts(b.H, b.D)[0] >= 2


def _coll_h(b):
    return collision_counts(b.H, b.D)[1] >= 1


def _coll_c(b):
    return collision_counts(b.H, b.D)[2] >= 1


def _coll_x(b):
    if history_contains(b.H, b.x):
        return False
    free = collision_counts(b.H, b.D)[3]
    return free <= {b.x}


def _pre_q(b):
    in_h = {hx for hx, _ in b.H}
    return any(v == 0 and k not in in_h for k, v in b.D)


def _pre_c(b):
    return any(hy == 0 for _, hy in b.H)


# -- predicate trees -------------------------------------------------------------


class Predicate:
    """A basis-state predicate; combine with ``~``, ``&`` and ``|``.

    ``hd_only`` records whether the value depends only on ``(H, D)``.
    ``op``/``args`` keep the combination tree (``op`` is None for primitives)
    so that callers can evaluate it structurally.
    """

    def __init__(self, name: str, raw: Callable[[BasisState], bool], hd_only: bool = True,
                 op: str | None = None, args: tuple = ()):
        self.name = name
        self.raw = raw
        self.hd_only = hd_only
        self.op = op
        self.args = args

    def __repr__(self) -> str:
        return f"Predicate({self.name})"

    def __call__(self, b: BasisState, c: int | None = None, q: int | None = None) -> bool:
        return is_consistent(b, c, q) and self.raw(b)

    def __invert__(self) -> "Predicate":
        raw = self.raw
        name = self.name if _atomic(self.name) else f"({self.name})"
        return Predicate(f"~{name}", lambda b: not raw(b), self.hd_only, "not", (self,))

    def __and__(self, other: "Predicate") -> "Predicate":
        r1, r2 = self.raw, other.raw
        return Predicate(f"{_wrap(self.name, '+')}.{_wrap(other.name, '+')}",
                         lambda b: r1(b) and r2(b), self.hd_only and other.hd_only, "and", (self, other))

    def __or__(self, other: "Predicate") -> "Predicate":
        r1, r2 = self.raw, other.raw
        return Predicate(f"{self.name}+{other.name}",
                         lambda b: r1(b) or r2(b), self.hd_only and other.hd_only, "or", (self, other))


def _atomic(name: str) -> bool:
    return name.isalnum() or (name.startswith("~") and name[1:].isalnum())


def _wrap(name: str, op: str) -> str:
    return f"({name})" if op in name else name


PreQ = Predicate("PreQ", _pre_q)
PreC = Predicate("PreC", _pre_c)
CollQ = Predicate("CollQ", _coll_q)
CollH = Predicate("CollH", _coll_h)
CollC = Predicate("CollC", _coll_c)
CollQQ = Predicate("CollQQ", _coll_qq)
CollX = Predicate("CollX", _coll_x, hd_only=False)

PRIMITIVES = {p.name: p for p in (PreQ, PreC, CollQ, CollH, CollC, CollQQ, CollX)}


def eval_predicate(P: Predicate, b: BasisState, c: int | None = None, q: int | None = None) -> bool:
    return P(b, c, q)


def project(s: SparseState, P: Predicate, c: int | None = None, q: int | None = None) -> SparseState:
    return SparseState._raw(s.params, {b: a for b, a in s.terms.items() if P(b, c, q)})


# -- progress measures -------------------------------------------------------


def query(s: SparseState, kind: str, mode: str = "fastpath") -> SparseState:
    if kind == "Q":
        return apply_compressed_quantum(s, mode)
    if kind == "C":
        return apply_compressed_classical(s, mode)
    raise ValueError(f"kind must be 'Q' or 'C', got {kind!r}")


def delta(P: Predicate, s: SparseState, kind: str, mode: str = "fastpath") -> float:
    """Norm (``Q``) or squared-norm (``C``) change of ``Pi_P`` over one query."""
    after = project(query(s, kind, mode), P)
    before = project(s, P)
    if kind == "Q":
        return after.norm() - before.norm()
    return after.norm2() - before.norm2()


def gamma(P: Predicate, s: SparseState, kind: str, mode: str = "fastpath") -> float:
    """Relative amplitude moved from ``I - Pi_P`` into ``Pi_P`` by one query."""
    rest = s - project(s, P)
    den = rest.norm2()
    if den < GAMMA_GUARD**2:
        return 0.0
    num = project(query(rest, kind, mode), P).norm2()
    if kind == "Q":
        return math.sqrt(num / den)
    return num / den


def cross_term(P_out: Predicate, P_in: Predicate, s: SparseState, kind: str, mode: str = "fastpath") -> float:
    """``|| Pi_out R Pi_in s ||^2``."""
    return project(query(project(s, P_in), kind, mode), P_out).norm2()


SEARCH_WEIGHTS = ((PreC, 1.0), (PreQ & ~PreC, 2.0))
COLLISION_WEIGHTS = ((CollC, 1.0), (CollH & ~CollC, 2.0), (CollQ & ~CollH & ~CollC, 4.0))


def potential_search(s: SparseState) -> float:
    return sum(wt * project(s, P).norm2() for P, wt in SEARCH_WEIGHTS)


def potential_collision(s: SparseState) -> float:
    return sum(wt * project(s, P).norm2() for P, wt in COLLISION_WEIGHTS)


# -- history-database predicate classification -----------------------------------


@dataclass
class HDReport:
    predicate: str
    params: dict
    states_checked: int
    history_invariant: bool
    database_monotone: bool
    counterexamples: list = field(default_factory=list)

    @property
    def is_hd_predicate(self) -> bool:
        return self.history_invariant and self.database_monotone


def check_hd_predicate(P: Predicate, params: OracleParams, c: int, q: int, max_examples: int = 3) -> HDReport:
    """Exhaustively test history invariance and database monotonicity over ``A_{c,q}``.

    Monotonicity only fills cells that are bottom in ``D`` and free in ``H``
    (filling a cell pinned to bottom by the history leaves the consistent set).
    """
    groups: dict = {}
    report = HDReport(P.name, {"M": params.M, "N": params.N, "c": c, "q": q}, 0, True, True)
    for b in enumerate_consistent(params, c, q):
        report.states_checked += 1
        val = P(b)
        fview = frozenset(history_function(b.H).items())
        groups.setdefault((b.x, b.p, b.w, fview, b.D), set()).add((b.H, val))
        if not val:
            continue
        for xf in range(params.M):
            if db_get(b.D, xf) != BOT or history_contains(b.H, xf):
                continue
            for y in range(params.N):
                b2 = b._replace(D=db_set(b.D, xf, y))
                if not P(b2):
                    report.database_monotone = False
                    if len(report.counterexamples) < max_examples:
                        report.counterexamples.append(
                            {"kind": "database-monotone", "state": b, "fill": (xf, y)})
    for key, members in groups.items():
        if len({v for _, v in members}) > 1:
            report.history_invariant = False
            if len(report.counterexamples) < 2 * max_examples:
                report.counterexamples.append(
                    {"kind": "history-invariant", "histories": sorted(members, key=repr)})
    return report


def empirical_gamma(P: Predicate, params: OracleParams, c: int, q: int, kind: str) -> float:
    """Worst-case probability that a fresh value at ``x`` makes ``P`` true.

    Taken over false-states of ``A_{c,q}`` with ``D(x) = bottom``; ``kind='C'``
    also writes the value into the history.
    """
    worst = 0.0
    N = params.N
    for b in enumerate_consistent(params, c, q):
        if db_get(b.D, b.x) != BOT or P(b):
            continue
        hits = 0
        for y in range(N):
            D2 = db_set(b.D, b.x, y)
            H2 = b.H + ((b.x, y),) if kind == "C" else b.H
            hits += P(b._replace(H=H2, D=D2))
        worst = max(worst, hits / N)
    return worst


def satisfies_append_condition(P: Predicate, params: OracleParams, c: int, q: int) -> bool:
    """False-states stay false when ``(x, D(x))`` is appended to the history."""
    for b in enumerate_consistent(params, c, q):
        if P(b):
            continue
        b2 = b._replace(H=b.H + ((b.x, db_get(b.D, b.x)),))
        if P(b2):
            return False
    return True
