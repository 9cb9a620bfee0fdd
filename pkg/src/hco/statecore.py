"""Registers, basis labels and sparse superpositions for the joint register AHD.

A basis state is ``|x, p, w, H, D>``:

* ``x`` query index in ``[M]``, ``p`` phase value in ``[N]``, ``w`` workspace in ``[w_dim]``;
* ``H`` the history, stored as the tuple of its filled slots ``((x1, y1), ...)``;
  the remaining ``c_max - len(H)`` slots are implicitly the empty symbol ``*``;
* ``D`` the database, stored as a sorted tuple of ``(index, value)`` pairs;
  indices that are absent hold the compressed symbol ``_`` (bottom).

Bottom inside a history pair is the integer sentinel :data:`BOT`. Keys are
plain tuples so that they hash fast and compare by value.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from hco.errors import CapacityError, ParamError

BOT = -1
STAR = None

Database = tuple  # tuple[tuple[int, int], ...], strictly increasing indices
History = tuple  # tuple[tuple[int, int], ...], filled prefix only


@dataclass(frozen=True)
class OracleParams:
    M: int
    N: int
    c_max: int = 0
    w_dim: int = 1

    def __post_init__(self):
        if self.M < 1:
            raise ParamError(f"M must be positive, got {self.M}")
        if self.N < 2:
            raise ParamError(f"N must be at least 2, got {self.N}")
        if self.c_max < 0:
            raise ParamError(f"c_max must be non-negative, got {self.c_max}")
        if self.w_dim < 1:
            raise ParamError(f"w_dim must be positive, got {self.w_dim}")

    def replace(self, **kw) -> "OracleParams":
        fields = dict(M=self.M, N=self.N, c_max=self.c_max, w_dim=self.w_dim)
        fields.update(kw)
        return OracleParams(**fields)

    @property
    def a_dim(self) -> int:
        return self.M * self.N * self.w_dim


class BasisState(NamedTuple):
    x: int
    p: int
    w: int
    H: History
    D: Database


def initial_basis(params: OracleParams | None = None) -> BasisState:
    """``|0, 0, 0, *...*, _..._>``."""
    return BasisState(0, 0, 0, (), ())


# -- database / history edits ----------------------------------------------


def db_get(D: Database, x: int) -> int:
    for k, v in D:
        if k == x:
            return v
        if k > x:
            break
    return BOT


def db_set(D: Database, x: int, y: int, params: OracleParams | None = None) -> Database:
    """Return ``D_{x<-y}``; ``y == BOT`` removes the entry."""
    if params is not None:
        if not 0 <= x < params.M:
            raise ParamError(f"index {x} outside [0, {params.M})")
        if y != BOT and not 0 <= y < params.N:
            raise ParamError(f"value {y} outside [0, {params.N})")
    out = [kv for kv in D if kv[0] != x]
    if y != BOT:
        out.append((x, y))
        out.sort()
    return tuple(out)


def history_append(H: History, x: int, y: int, c_max: int) -> History:
    """Return ``H_{x<-y}``: ``(x, y)`` written into the leftmost free slot."""
    if len(H) >= c_max:
        raise CapacityError(f"history is full ({c_max} slots)")
    return H + ((x, y),)


def history_function(H: History) -> dict[int, int] | None:
    """Function view of ``H``; None when two slots disagree on the same index."""
    f: dict[int, int] = {}
    for x, y in H:
        if f.get(x, y) != y:
            return None
        f[x] = y
    return f


def history_contains(H: History, x: int) -> bool:
    for hx, _ in H:
        if hx == x:
            return True
    return False


def is_hd_consistent(H: History, D: Database) -> bool:
    """Uniqueness and equality of H against D, with no size limits."""
    f = history_function(H)
    if f is None:
        return False
    if not f:
        return True
    dmap = dict(D)
    for x, y in f.items():
        if dmap.get(x, BOT) != y:
            return False
    return True


def is_consistent(b: BasisState, c: int | None = None, q: int | None = None) -> bool:
    """History-database consistency of ``b`` inside ``A_{c,q}``.

    ``None`` for ``c`` or ``q`` drops the corresponding size condition, which
    gives consistency "for some c, q".
    """
    if c is not None and len(b.H) > c:
        return False
    if q is not None:
        in_h = {hx for hx, _ in b.H}
        if sum(k not in in_h for k, _ in b.D) > q:
            return False
    return is_hd_consistent(b.H, b.D)


# -- text form ---------------------------------------------------------------

_SYM_BOT = "_"


def _fmt_val(y: int) -> str:
    return _SYM_BOT if y == BOT else str(y)


def _parse_val(s: str) -> int:
    return BOT if s == _SYM_BOT else int(s)


def serialize(b: BasisState, c_max: int) -> str:
    """``x|p|w|H:(x1,y1),...,*k|D:{x->y,...}``."""
    slots = [f"({hx},{_fmt_val(hy)})" for hx, hy in b.H]
    free = c_max - len(b.H)
    if free:
        slots.append(f"*{free}")
    db = ",".join(f"{k}->{v}" for k, v in b.D)
    return f"{b.x}|{b.p}|{b.w}|H:{','.join(slots)}|D:{{{db}}}"


_PAIR = re.compile(r"\((\d+),(_|\d+)\)")


def deserialize(text: str) -> tuple[BasisState, int]:
    """Inverse of :func:`serialize`; returns the state and its slot count."""
    try:
        x, p, w, hpart, dpart = text.split("|")
        hbody = hpart[len("H:"):]
        H = tuple((int(a), _parse_val(b)) for a, b in _PAIR.findall(hbody))
        star = re.search(r"\*(\d+)$", hbody)
        c_max = len(H) + (int(star.group(1)) if star else 0)
        dbody = dpart[len("D:{"):-1]
        D = tuple(sorted(
            (int(k), int(v)) for k, v in (e.split("->") for e in dbody.split(",") if e)
        ))
        return BasisState(int(x), int(p), int(w), H, D), c_max
    except (ValueError, AttributeError) as exc:
        raise ParamError(f"cannot parse basis state {text!r}") from exc


# -- sparse superpositions ---------------------------------------------------


class SparseState:
    """Finite superposition ``sum_k a_k |k>`` over canonical basis keys."""

    __slots__ = ("terms", "params")

    def __init__(self, params: OracleParams, terms: dict | None = None):
        self.params = params
        self.terms: dict[BasisState, complex] = {}
        if terms:
            for k, a in terms.items():
                if a != 0:
                    self.terms[k] = complex(a)

    @classmethod
    def basis(cls, params: OracleParams, b: BasisState, amp: complex = 1.0) -> "SparseState":
        return cls(params, {b: amp})

    @classmethod
    def _raw(cls, params: OracleParams, terms: dict) -> "SparseState":
        # caller guarantees complex values; exact zeros are dropped here
        s = cls.__new__(cls)
        s.params = params
        s.terms = {k: a for k, a in terms.items() if a != 0}
        return s

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms.items())

    def __repr__(self) -> str:
        return f"SparseState({len(self.terms)} terms, norm2={self.norm2():.6g})"

    def _check(self, other: "SparseState") -> None:
        if self.params != other.params:
            raise ParamError(f"mismatched params {self.params} vs {other.params}")

    def amplitude(self, b: BasisState) -> complex:
        return self.terms.get(b, 0j)

    def copy(self) -> "SparseState":
        return SparseState._raw(self.params, dict(self.terms))

    def norm2(self) -> float:
        return math.fsum(a.real * a.real + a.imag * a.imag for a in self.terms.values())

    def norm(self) -> float:
        return math.sqrt(self.norm2())

    def inner(self, other: "SparseState") -> complex:
        """``<self|other>``."""
        self._check(other)
        a, b = self.terms, other.terms
        if len(a) <= len(b):
            return sum((v.conjugate() * b[k] for k, v in a.items() if k in b), 0j)
        return sum((a[k].conjugate() * v for k, v in b.items() if k in a), 0j)

    def scaled(self, alpha: complex) -> "SparseState":
        return SparseState._raw(self.params, {k: alpha * a for k, a in self.terms.items()})

    def combine(self, alpha: complex, other: "SparseState", beta: complex) -> "SparseState":
        """``alpha*self + beta*other``."""
        self._check(other)
        out = {k: alpha * a for k, a in self.terms.items()}
        for k, b in other.terms.items():
            out[k] = out.get(k, 0j) + beta * b
        return SparseState._raw(self.params, out)

    def __add__(self, other):
        return self.combine(1, other, 1)

    def __sub__(self, other):
        return self.combine(1, other, -1)

    def normalized(self) -> "SparseState":
        n = self.norm()
        if n == 0:
            raise ParamError("cannot normalize the zero state")
        return self.scaled(1 / n)

    def prune(self, eps: float = 1e-12) -> "SparseState":
        """Drop terms with ``|a| <= eps``. Never used by the verification code."""
        return SparseState._raw(self.params, {k: a for k, a in self.terms.items() if abs(a) > eps})

    def distance(self, other: "SparseState") -> float:
        return (self - other).norm()

    def max_abs_diff(self, other: "SparseState") -> float:
        self._check(other)
        keys = self.terms.keys() | other.terms.keys()
        return max((abs(self.terms.get(k, 0j) - other.terms.get(k, 0j)) for k in keys), default=0.0)


def state_from_terms(params: OracleParams, terms) -> SparseState:
    out: dict = {}
    for k, a in terms:
        out[k] = out.get(k, 0j) + complex(a)
    return SparseState._raw(params, out)


# -- enumeration of A_{c,q} --------------------------------------------------


def _databases(indices: Sequence[int], N: int, q: int) -> Iterator[tuple]:
    for k in range(min(q, len(indices)) + 1):
        for idx in itertools.combinations(indices, k):
            for vals in itertools.product(range(N), repeat=k):
                yield tuple(zip(idx, vals))


def enumerate_hd(params: OracleParams, c: int, q: int) -> Iterator[tuple[History, Database]]:
    """Every consistent ``(H, D)`` with ``len(H) <= c`` and at most ``q``
    non-bottom entries of ``D`` outside the history."""
    M, N = params.M, params.N
    for length in range(c + 1):
        for xs in itertools.product(range(M), repeat=length):
            seen = sorted(set(xs))
            rest = [x for x in range(M) if x not in seen]
            for hv in itertools.product((BOT, *range(N)), repeat=len(seen)):
                hmap = dict(zip(seen, hv))
                H = tuple((x, hmap[x]) for x in xs)
                fixed = [(x, y) for x, y in hmap.items() if y != BOT]
                for extra in _databases(rest, N, q):
                    yield H, tuple(sorted(fixed + list(extra)))


def enumerate_consistent(params: OracleParams, c: int, q: int) -> Iterator[BasisState]:
    """Each basis state of ``A_{c,q}`` exactly once, in a fixed order."""
    if c > params.c_max:
        raise ParamError(f"c={c} exceeds c_max={params.c_max}")
    if c < 0 or q < 0:
        raise ParamError("c and q must be non-negative")
    a_labels = list(itertools.product(range(params.M), range(params.N), range(params.w_dim)))
    for H, D in enumerate_hd(params, c, q):
        for x, p, w in a_labels:
            yield BasisState(x, p, w, H, D)


def count_consistent(params: OracleParams, c: int, q: int) -> int:
    """Closed-form size of the enumeration basis of ``A_{c,q}``.

    A history of length ``j`` touching ``s`` distinct indices has
    ``C(M, s) * surj(j, s)`` index sequences and ``(N+1)^s`` value choices;
    the remaining ``M - s`` indices hold at most ``q`` values.
    """
    M, N = params.M, params.N

    def surj(j: int, s: int) -> int:
        return sum((-1) ** i * math.comb(s, i) * (s - i) ** j for i in range(s + 1))

    total = 0
    for j in range(c + 1):
        for s in range(min(j, M) + 1):
            outside = sum(math.comb(M - s, k) * N**k for k in range(min(q, M - s) + 1))
            total += math.comb(M, s) * surj(j, s) * (N + 1) ** s * outside
    return total * params.a_dim


def random_amplitudes(n: int, seed: int) -> np.ndarray:
    """Standard-normal real then imaginary parts, normalised to unit length."""
    rng = np.random.default_rng(seed)
    re_ = rng.standard_normal(n)
    im_ = rng.standard_normal(n)
    v = re_ + 1j * im_
    return v / np.linalg.norm(v)


def random_state_in_A(params: OracleParams, c: int, q: int, seed: int) -> SparseState:
    basis = list(enumerate_consistent(params, c, q))
    amps = random_amplitudes(len(basis), seed)
    return SparseState._raw(params, {b: complex(a) for b, a in zip(basis, amps)})
