"""Points, flats and q-binomial coefficients of PG(n-1, q).

A point is stored by its index in the canonical point table: coordinate
vectors whose first nonzero entry is 1, sorted lexicographically.  Each
vector also has an integer *code*, its coordinates read as a base-q number
with the first coordinate most significant; for q = 2 the code is the bit
vector itself and ``index == code - 1``.

Flats are subspaces given by their basis in reduced row-echelon form, which
makes equality and hashing structural.
"""

from __future__ import annotations

import functools
import itertools
import os
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np

from .gf import FieldSpec, field_of_order

__all__ = [
    "GeometryCtx",
    "Point",
    "Flat",
    "GeometryError",
    "geometry",
    "qbinom",
    "num_points",
    "enumerate_points",
    "rank_of",
    "rank_vectors",
    "closure",
    "enumerate_flats",
    "count_flats",
    "flat_points",
    "flat_point_table",
    "local_rank_table",
    "trace_patterns",
]

DEFAULT_MAX_POINTS = 1 << 22


class GeometryError(ValueError):
    pass


def qbinom(n: int, d: int, q: int) -> int:
    """Gaussian binomial coefficient, exact.

    Uses qbinom(n, d) = qbinom(n-1, d-1) + q**d * qbinom(n-1, d), so no
    division is ever performed.
    """
    if d < 0 or d > n:
        raise ValueError(f"need 0 <= d <= n, got n={n}, d={d}")
    if q < 2:
        raise ValueError(f"need q >= 2, got {q}")
    d = min(d, n - d)
    # row[j] holds qbinom(m, j) for the current m
    row = [1] + [0] * d
    for m in range(1, n + 1):
        for j in range(min(m, d), 0, -1):
            row[j] = row[j - 1] + q ** j * row[j]
    return row[d]


def num_points(n: int, q: int) -> int:
    return (q ** n - 1) // (q - 1)


class Point(NamedTuple):
    coords: tuple[int, ...]
    index: int


@dataclass(frozen=True)
class Flat:
    """A subspace, as the rows of its RREF basis matrix."""

    basis: tuple[tuple[int, ...], ...]

    @property
    def rank(self) -> int:
        return len(self.basis)

    @property
    def pivots(self) -> tuple[int, ...]:
        return tuple(next(j for j, x in enumerate(row) if x) for row in self.basis)


class GeometryCtx:
    """PG(n-1, q) with its canonical point table.  Immutable."""

    def __init__(self, n: int, field: FieldSpec, max_points: int | None = None):
        if n < 1:
            raise GeometryError(f"n must be >= 1, got {n}")
        self.n = n
        self.field = field
        self.q = q = field.q
        cap = max_points or int(os.environ.get("PGDECOMP_MAX_POINTS", DEFAULT_MAX_POINTS))
        total = num_points(n, q)
        if total > cap:
            raise GeometryError(f"PG({n - 1},{q}) has {total} points, above cap {cap}")
        self.size = total
        coords = []
        for lead in range(n - 1, -1, -1):
            for tail in itertools.product(range(q), repeat=n - 1 - lead):
                coords.append((0,) * lead + (1,) + tail)
        self.coords: tuple[tuple[int, ...], ...] = tuple(coords)
        self.codes: tuple[int, ...] = tuple(self.code_of(c) for c in coords)

    def __repr__(self) -> str:
        return f"GeometryCtx(n={self.n}, q={self.q})"

    def __reduce__(self):
        return (geometry, (self.n, self.q))

    def code_of(self, coords: Sequence[int]) -> int:
        v = 0
        for x in coords:
            v = v * self.q + x
        return v

    def index_of(self, coords: Sequence[int]) -> int:
        """Index of the canonical point spanned by a nonzero vector."""
        f = self.field
        lead = next((i for i, x in enumerate(coords) if x), None)
        if lead is None:
            raise GeometryError("the zero vector is not a projective point")
        if coords[lead] != 1:
            s = f.inv(coords[lead])
            coords = [f.mul(s, x) for x in coords]
        q, n = self.q, self.n
        top = q ** (n - 1 - lead)
        return (top - 1) // (q - 1) + self.code_of(coords) - top

    def point(self, index: int) -> Point:
        return Point(self.coords[index], index)

    def vectors(self, indices: Iterable[int]) -> list:
        """Vectors in the form ``rank_vectors`` expects for this field."""
        if self.q == 2:
            codes = self.codes
            return [codes[i] for i in indices]
        c = self.coords
        return [c[i] for i in indices]


@functools.lru_cache(maxsize=32)
def geometry(n: int, q: int) -> GeometryCtx:
    return GeometryCtx(n, field_of_order(q))


def enumerate_points(ctx: GeometryCtx) -> list[Point]:
    return [Point(c, i) for i, c in enumerate(ctx.coords)]


# -- elimination --

def _as_indices(pts) -> list[int]:
    return [p.index if isinstance(p, Point) else int(p) for p in pts]


def _rank_gf2(codes: Iterable[int], limit: int) -> int:
    basis: dict[int, int] = {}
    for v in codes:
        while v:
            top = v.bit_length()
            b = basis.get(top)
            if b is None:
                basis[top] = v
                if len(basis) == limit:
                    return limit
                break
            v ^= b
    return len(basis)


def _reduce_general(f: FieldSpec, rows: list[tuple[int, list[int]]], v: Sequence[int]) -> list[int]:
    v = list(v)
    for col, row in rows:
        c = v[col]
        if c:
            nc = f.neg(c)
            for j in range(col, len(v)):
                if row[j]:
                    v[j] = f.add(v[j], f.mul(nc, row[j]))
    return v


def _echelon_general(f: FieldSpec, vecs: Iterable[Sequence[int]], limit: int) -> list[tuple[int, list[int]]]:
    """Rows (pivot column, row with pivot 1), each reduced by its predecessors."""
    rows: list[tuple[int, list[int]]] = []
    for v in vecs:
        v = _reduce_general(f, rows, v)
        lead = next((j for j, x in enumerate(v) if x), None)
        if lead is None:
            continue
        s = f.inv(v[lead])
        rows.append((lead, [f.mul(s, x) for x in v]))
        if len(rows) == limit:
            break
    return rows


def rank_vectors(field: FieldSpec, vectors: Iterable, n: int) -> int:
    """Rank of vectors in GF(q)^n (bit-packed ints when q == 2)."""
    if field.q == 2:
        return _rank_gf2(vectors, n)
    return len(_echelon_general(field, vectors, n))


def rank_of(ctx: GeometryCtx, pts) -> int:
    """Dimension of the span of a set of points (indices or Points)."""
    return rank_vectors(ctx.field, ctx.vectors(_as_indices(pts)), ctx.n)


def _rref(f: FieldSpec, n: int, vecs: Iterable[Sequence[int]]) -> tuple[tuple[int, ...], ...]:
    rows = _echelon_general(f, vecs, n)
    rows.sort()
    for i, (col, row) in enumerate(rows):
        for k, (col2, row2) in enumerate(rows):
            if k != i and row2[col]:
                c = f.neg(row2[col])
                rows[k] = (col2, [f.add(a, f.mul(c, b)) for a, b in zip(row2, row)])
    return tuple(tuple(r) for _, r in rows)


def closure(ctx: GeometryCtx, pts) -> Flat:
    idx = _as_indices(pts)
    if not idx:
        raise GeometryError("closure of the empty set is not a flat of positive rank")
    return Flat(_rref(ctx.field, ctx.n, (ctx.coords[i] for i in idx)))


# -- flats --

def _free_cells(n: int, pivots: Sequence[int]) -> list[tuple[int, int]]:
    ps = set(pivots)
    return [(r, c) for r, pc in enumerate(pivots) for c in range(pc + 1, n) if c not in ps]


def _profiles(n: int, d: int):
    for pivots in itertools.combinations(range(n), d):
        yield pivots, _free_cells(n, pivots)


def count_flats(n: int, d: int, q: int) -> int:
    """Number of RREF matrices over all pivot profiles (equals qbinom)."""
    return sum(q ** len(cells) for _, cells in _profiles(n, d))


def enumerate_flats(ctx: GeometryCtx, d: int) -> Iterator[Flat]:
    """Every rank-d flat once: pivot profiles in lexicographic order, then
    fillings of the free cells in lexicographic order.  Rank 0 gives the
    single empty flat."""
    n, q = ctx.n, ctx.q
    if not 0 <= d <= n:
        raise GeometryError(f"need 0 <= d <= n, got d={d}, n={n}")
    for pivots, cells in _profiles(n, d):
        template = [[0] * n for _ in range(d)]
        for r, c in enumerate(pivots):
            template[r][c] = 1
        for fill in itertools.product(range(q), repeat=len(cells)):
            for (r, c), x in zip(cells, fill):
                template[r][c] = x
            yield Flat(tuple(tuple(row) for row in template))


def flat_points(ctx: GeometryCtx, F: Flat) -> list[int]:
    """Sorted indices of the points of a flat."""
    f = ctx.field
    n = ctx.n
    out = []
    for c in itertools.product(range(ctx.q), repeat=F.rank):
        lead = next((i for i, x in enumerate(c) if x), None)
        if lead is None or c[lead] != 1:
            continue
        v = [0] * n
        for coef, row in zip(c, F.basis):
            if coef:
                for j in range(n):
                    if row[j]:
                        v[j] = f.add(v[j], f.mul(coef, row[j]))
        out.append(ctx.index_of(v))
    return sorted(out)


def _local_coords(q: int, d: int) -> np.ndarray:
    """Canonical coefficient vectors of GF(q)^d, in point-table order."""
    return np.array(geometry(d, q).coords, dtype=np.int64).reshape(-1, d)


def _index_dtype(size: int):
    return np.uint16 if size <= np.iinfo(np.uint16).max else np.int32


_CHUNK = 1 << 16


def _table_gf2(ctx: GeometryCtx, d: int) -> np.ndarray:
    n = ctx.n
    local = _local_coords(2, d).astype(bool)
    parts = []
    for pivots, cells in _profiles(n, d):
        f = len(cells)
        base = np.array([1 << (n - 1 - c) for c in pivots], dtype=np.int64)
        weights = np.array([1 << (n - 1 - c) for _, c in cells], dtype=np.int64)
        rows_of = np.array([r for r, _ in cells], dtype=np.int64)
        total = 1 << f
        for start in range(0, total, _CHUNK):
            fills = np.arange(start, min(total, start + _CHUNK), dtype=np.int64)
            # first free cell is the most significant digit
            bits = (fills[:, None] >> np.arange(f - 1, -1, -1)) & 1
            rows = np.tile(base, (len(fills), 1))
            for r in range(d):
                sel = rows_of == r
                rows[:, r] |= (bits[:, sel] * weights[sel]).sum(axis=1)
            codes = np.zeros((len(fills), len(local)), dtype=np.int64)
            for r in range(d):
                codes ^= np.where(local[:, r][None, :], rows[:, r][:, None], 0)
            parts.append((codes - 1).astype(_index_dtype(ctx.size)))
    return np.concatenate(parts) if parts else np.empty((0, len(local)), dtype=np.int32)


def _table_general(ctx: GeometryCtx, d: int) -> np.ndarray:
    n, q = ctx.n, ctx.q
    add, mul = ctx.field.numpy_tables()
    add = add.astype(np.int64)
    mul = mul.astype(np.int64)
    local = _local_coords(q, d)
    m = len(local)
    powers = q ** np.arange(n - 1, -1, -1, dtype=np.int64)
    parts = []
    for pivots, cells in _profiles(n, d):
        f = len(cells)
        total = q ** f
        for start in range(0, total, _CHUNK):
            fills = np.arange(start, min(total, start + _CHUNK), dtype=np.int64)
            digits = (fills[:, None] // q ** np.arange(f - 1, -1, -1, dtype=np.int64)) % q
            B = np.zeros((len(fills), d, n), dtype=np.int64)
            for r, c in enumerate(pivots):
                B[:, r, c] = 1
            for k, (r, c) in enumerate(cells):
                B[:, r, c] = digits[:, k]
            V = np.zeros((len(fills), m, n), dtype=np.int64)
            for r in range(d):
                V = add[V, mul[local[:, r][None, :, None], B[:, r, :][:, None, :]]]
            # RREF basis + canonical coefficients => V is already canonical
            lead = np.argmax(V != 0, axis=2)
            top = q ** (n - 1 - lead)
            idx = (top - 1) // (q - 1) + (V * powers).sum(axis=2) - top
            parts.append(idx.astype(_index_dtype(ctx.size)))
    return np.concatenate(parts) if parts else np.empty((0, m), dtype=np.int32)


@functools.lru_cache(maxsize=4)
def _flat_table_cached(n: int, q: int, d: int) -> np.ndarray:
    ctx = geometry(n, q)
    table = _table_gf2(ctx, d) if q == 2 else _table_general(ctx, d)
    table.setflags(write=False)
    return table


def flat_point_table(ctx: GeometryCtx, d: int) -> np.ndarray:
    """Point indices of every rank-d flat, one row per flat.

    Rows follow ``enumerate_flats`` order.  Column j holds the point with
    local coefficient vector ``geometry(d, q).coords[j]`` with respect to the
    flat's RREF basis, so a 0/1 pattern over the columns can be looked up in
    ``local_rank_table``.
    """
    if not 0 < d <= ctx.n:
        raise GeometryError(f"need 0 < d <= n, got d={d}, n={ctx.n}")
    return _flat_table_cached(ctx.n, ctx.q, d)


@functools.lru_cache(maxsize=16)
def local_rank_table(q: int, d: int) -> np.ndarray:
    """rank[mask] for every subset (bitmask over local point order) of PG(d-1, q)."""
    loc = geometry(d, q)
    m = loc.size
    if m > 20:
        raise GeometryError(f"local rank table over {m} points is too large")
    # line[i][j]: bitmask of the points on the line through i and j
    line = [[0] * m for _ in range(m)]
    for i, j in itertools.combinations(range(m), 2):
        mask = 0
        for k in flat_points(loc, closure(loc, [i, j])):
            mask |= 1 << k
        line[i][j] = line[j][i] = mask
    rank = np.zeros(1 << m, dtype=np.uint8)
    span = [0] * (1 << m)
    for mask in range(1, 1 << m):
        v = mask.bit_length() - 1
        rest = mask ^ (1 << v)
        sp = span[rest]
        if sp >> v & 1:
            span[mask] = sp
            rank[mask] = rank[rest]
        else:
            new = sp | (1 << v)
            lv = line[v]
            s = sp
            while s:
                low = s & -s
                new |= lv[low.bit_length() - 1]
                s ^= low
            span[mask] = new
            rank[mask] = rank[rest] + 1
    rank.setflags(write=False)
    return rank


def trace_patterns(mask: np.ndarray, table: np.ndarray) -> np.ndarray:
    """Bitmask (over local point order) of the kept points of every flat."""
    m = table.shape[1]
    dtype = np.uint8 if m <= 8 else np.uint16 if m <= 16 else np.uint32 if m <= 32 else None
    if dtype is None:
        raise GeometryError("trace patterns need at most 32 points per flat")
    out = np.zeros(len(table), dtype=dtype)
    for j in range(m):
        out |= mask[table[:, j]].astype(dtype) << dtype(j)
    return out
