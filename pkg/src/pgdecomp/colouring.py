"""Colouring number of a linear matroid by matroid partitioning.

Elements are inserted one at a time into k independent classes.  When an
element fits nowhere directly, a breadth-first search over the exchange
digraph looks for a shortest augmenting path: an arc y -> x means y may
replace x in x's class.  Every class keeps an incremental echelon basis that
also records how each basis row combines the class members, so the
fundamental circuit of y in a class (the exchange arcs out of y) falls out of
a single reduction.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .matroid import SubMatroid, is_independent, restrict
from .projgeom import geometry

__all__ = ["Colouring", "colouring_number", "verify_colouring", "full_geometry_colouring"]


@dataclass(frozen=True)
class Colouring:
    classes: tuple[tuple[int, ...], ...]

    @property
    def k(self) -> int:
        return len(self.classes)

    def as_lists(self) -> list[list[int]]:
        return [list(c) for c in self.classes]


class _BinarySpan:
    """Echelon basis over GF(2); vectors are bit-packed ints."""

    __slots__ = ("members", "rows")

    def __init__(self):
        self.members: list[int] = []
        self.rows: list[tuple[int, int, int]] = []  # (pivot bit, vector, member combination)

    def _reduce(self, v: int) -> tuple[int, int]:
        combo = 0
        for pivot, rv, rc in self.rows:
            if v & pivot:
                v ^= rv
                combo ^= rc
        return v, combo

    def rebuild(self, members: list[int], vecs) -> bool:
        self.members = members
        self.rows = []
        for pos, e in enumerate(members):
            v, combo = self._reduce(vecs[e])
            if not v:
                return False
            self.rows.append((1 << (v.bit_length() - 1), v, combo ^ (1 << pos)))
        return True

    def circuit(self, v: int) -> list[int] | None:
        """Members that v can replace, or None if members + v is independent."""
        v, combo = self._reduce(v)
        if v:
            return None
        out = []
        members = self.members
        while combo:
            low = combo & -combo
            out.append(members[low.bit_length() - 1])
            combo ^= low
        return out


class _FieldSpan:
    """Echelon basis over GF(q); rows carry member coefficients."""

    __slots__ = ("f", "members", "rows")

    def __init__(self, field):
        self.f = field
        self.members: list[int] = []
        self.rows: list[tuple[int, list[int], list[int]]] = []

    def _reduce(self, v, width: int):
        f = self.f
        v = list(v)
        combo = [0] * width
        for col, row, rc in self.rows:
            c = v[col]
            if c:
                nc = f.neg(c)
                for j in range(col, len(v)):
                    if row[j]:
                        v[j] = f.add(v[j], f.mul(nc, row[j]))
                for j, x in enumerate(rc):
                    if x:
                        combo[j] = f.add(combo[j], f.mul(nc, x))
        return v, combo

    def rebuild(self, members: list[int], vecs) -> bool:
        f = self.f
        self.members = members
        self.rows = []
        width = len(members)
        for pos, e in enumerate(members):
            v, combo = self._reduce(vecs[e], width)
            lead = next((j for j, x in enumerate(v) if x), None)
            if lead is None:
                return False
            combo[pos] = f.add(combo[pos], 1)
            s = f.inv(v[lead])
            self.rows.append((lead, [f.mul(s, x) for x in v], [f.mul(s, x) for x in combo]))
        return True

    def circuit(self, v) -> list[int] | None:
        v, combo = self._reduce(v, len(self.members))
        if any(v):
            return None
        return [e for e, c in zip(self.members, combo) if c]


def colouring_number(M: SubMatroid) -> tuple[int, Colouring]:
    """Minimum k such that M partitions into k independent sets, with a witness."""
    E = M.ground
    if not E:
        return 0, Colouring(())
    ctx = M.ctx
    vecs = dict(zip(E, ctx.vectors(E)))
    full = M.rank

    def new_span():
        return _BinarySpan() if ctx.q == 2 else _FieldSpan(ctx.field)

    # Edmonds lower bound at X = E
    k = -(-len(E) // full)
    spans = [new_span() for _ in range(k)]
    where: dict[int, int] = {}

    def augment(s: int) -> bool:
        parent: dict[int, tuple[int, int] | None] = {s: None}

        def sink_class(y: int) -> int | None:
            cy = where.get(y)
            for j, sp in enumerate(spans):
                if j != cy and len(sp.members) < full and sp.circuit(vecs[y]) is None:
                    return j
            return None

        def apply(x: int, j: int) -> None:
            moves: dict[int, list[int]] = {}
            # x enters class j; walking back, each parent enters the class
            # of its child while the child leaves it
            moves.setdefault(j, list(spans[j].members)).append(x)
            child = x
            while parent[child] is not None:
                y, cls = parent[child]
                members = moves.setdefault(cls, list(spans[cls].members))
                members[members.index(child)] = y
                child = y
            for cls, members in moves.items():
                if not spans[cls].rebuild(members, vecs):
                    raise RuntimeError("augmentation produced a dependent class")
                for e in members:
                    where[e] = cls

        j = sink_class(s)
        if j is not None:
            apply(s, j)
            return True
        queue = deque([s])
        while queue:
            y = queue.popleft()
            cy = where.get(y)
            vy = vecs[y]
            for cls, sp in enumerate(spans):
                if cls == cy:
                    continue
                circ = sp.circuit(vy)
                if circ is None:
                    continue
                for x in circ:
                    if x in parent:
                        continue
                    parent[x] = (y, cls)
                    j = sink_class(x)
                    if j is not None:
                        apply(x, j)
                        return True
                    queue.append(x)
        return False

    for s in E:
        while not augment(s):
            spans.append(new_span())
    classes = tuple(sorted(tuple(sorted(sp.members)) for sp in spans if sp.members))
    return len(classes), Colouring(classes)


def verify_colouring(M: SubMatroid, col: Colouring) -> bool:
    seen: set[int] = set()
    for cls in col.classes:
        for e in cls:
            if e in seen:
                return False
            seen.add(e)
    if seen != set(M.ground):
        return False
    return all(is_independent(M, cls) for cls in col.classes)


def full_geometry_colouring(n: int, q: int) -> tuple[int, Colouring]:
    ctx = geometry(n, q)
    return colouring_number(restrict(ctx, range(ctx.size)))
