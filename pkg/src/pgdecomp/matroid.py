"""Restrictions PG(n-1, q)|E as linear matroids."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .projgeom import (
    GeometryCtx,
    Point,
    flat_point_table,
    geometry,
    local_rank_table,
    qbinom,
    rank_vectors,
    trace_patterns,
)

__all__ = [
    "SubMatroid",
    "MatroidError",
    "GuardError",
    "restrict",
    "rank",
    "is_independent",
    "edmonds_bruteforce",
    "edmonds_exhaustive",
    "dump_matroid",
    "load_matroid",
    "guard_limit",
]


class MatroidError(ValueError):
    pass


class GuardError(RuntimeError):
    """An instance is above a size guard."""


_GUARD_DEFAULTS = {
    "MAX_FLATS": 1 << 22,
    "MAX_SUBSET_GROUND": 18,
    "MAX_TRANSVERSALS": 10 ** 6,
    "MAX_SEARCH_GROUND": 24,
    "MAX_CENSUS_FLATS": 1 << 24,
    "MAX_COLOUR_POINTS": 5000,
}


def guard_limit(name: str) -> int:
    """Size guard, overridable through ``PGDECOMP_<name>`` in the environment."""
    return int(os.environ.get(f"PGDECOMP_{name}", _GUARD_DEFAULTS[name]))


@dataclass(frozen=True)
class SubMatroid:
    ctx: GeometryCtx
    ground: tuple[int, ...]
    mask: np.ndarray = field(repr=False, compare=False)

    @property
    def ground_set(self) -> frozenset[int]:
        return frozenset(self.ground)

    def __len__(self) -> int:
        return len(self.ground)

    def __hash__(self) -> int:
        return hash((self.ctx.n, self.ctx.q, self.ground))

    def __eq__(self, other) -> bool:
        return (isinstance(other, SubMatroid) and self.ctx.n == other.ctx.n
                and self.ctx.q == other.ctx.q and self.ground == other.ground)

    @property
    def rank(self) -> int:
        return rank_vectors(self.ctx.field, self.ctx.vectors(self.ground), self.ctx.n)


def restrict(ctx: GeometryCtx, S: Iterable[int]) -> SubMatroid:
    idx = sorted({p.index if isinstance(p, Point) else int(p) for p in S})
    if idx and (idx[0] < 0 or idx[-1] >= ctx.size):
        raise MatroidError(f"point index out of range for {ctx}")
    mask = np.zeros(ctx.size, dtype=bool)
    mask[idx] = True
    mask.setflags(write=False)
    return SubMatroid(ctx, tuple(idx), mask)


def _check_subset(M: SubMatroid, X) -> list[int]:
    xs = [p.index if isinstance(p, Point) else int(p) for p in X]
    for x in xs:
        if not (0 <= x < M.ctx.size and M.mask[x]):
            raise MatroidError(f"element {x} is not in the ground set")
    return xs


def rank(M: SubMatroid, X) -> int:
    xs = _check_subset(M, X)
    return rank_vectors(M.ctx.field, M.ctx.vectors(xs), M.ctx.n)


def is_independent(M: SubMatroid, X) -> bool:
    xs = _check_subset(M, X)
    return len(set(xs)) == len(xs) and rank(M, xs) == len(xs)


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def edmonds_bruteforce(M: SubMatroid) -> int:
    """max ceil(|X| / r(X)) over traces X = E ∩ F of every ambient flat F.

    The maximum over all subsets is attained at a closed set of M, and each
    closed set is the trace of its ambient span, so the flat traces suffice.
    """
    if not M.ground:
        raise MatroidError("Edmonds maximum of an empty matroid is undefined")
    ctx = M.ctx
    n, q = ctx.n, ctx.q
    total = sum(qbinom(n, d, q) for d in range(1, n + 1))
    if total > guard_limit("MAX_FLATS"):
        raise GuardError(f"{total} flats exceeds the brute-force guard")
    best = 0
    for d in range(1, n + 1):
        table = flat_point_table(ctx, d)
        kept = M.mask[table]
        counts = kept.sum(axis=1)
        if table.shape[1] <= 16:
            ranks = local_rank_table(q, d)[trace_patterns(M.mask, table)].astype(np.int64)
            nz = counts > 0
            if nz.any():
                best = max(best, int((-(-counts[nz] // ranks[nz])).max()))
        else:
            for row, row_kept, cnt in zip(table, kept, counts):
                # ceil(cnt / r) <= cnt, so only these flats can raise the maximum
                if cnt > best:
                    r = rank_vectors(ctx.field, ctx.vectors(row[row_kept].tolist()), n)
                    best = max(best, _ceil_div(int(cnt), r))
    return best


def edmonds_exhaustive(M: SubMatroid) -> int:
    """max ceil(|X| / r(X)) over every nonempty subset X of the ground set.

    Ranks come from a dynamic program over subsets that tracks each subset's
    span as a set of vectors; no elimination is involved.
    """
    E = M.ground
    N = len(E)
    if N == 0:
        raise MatroidError("Edmonds maximum of an empty matroid is undefined")
    if N > guard_limit("MAX_SUBSET_GROUND"):
        raise GuardError(f"{N} elements exceeds the all-subsets guard")
    ctx = M.ctx
    f, q, n = ctx.field, ctx.q, ctx.n
    if q ** n > 1 << 12:
        raise GuardError("vector space too large for the all-subsets oracle")
    size = q ** n

    def digits(code):
        out = []
        for _ in range(n):
            code, r = divmod(code, q)
            out.append(r)
        return out

    def undigits(ds):
        v = 0
        for x in reversed(ds):
            v = v * q + x
        return v

    vec_digits = [digits(c) for c in range(size)]
    add = [[undigits([f.add(a, b) for a, b in zip(vec_digits[u], vec_digits[w])])
            for w in range(size)] for u in range(size)]
    codes = [ctx.codes[e] for e in E]
    # all scalar multiples of each element's vector
    multiples = [[undigits([f.mul(c, x) for x in vec_digits[v]]) for c in range(q)] for v in codes]

    span = [1] * (1 << N)  # bit 0 = zero vector
    rk = [0] * (1 << N)
    best = 0
    for mask in range(1, 1 << N):
        top = mask.bit_length() - 1
        rest = mask ^ (1 << top)
        sp = span[rest]
        if sp >> codes[top] & 1:
            span[mask] = sp
            rk[mask] = rk[rest]
        else:
            new = 0
            s = sp
            while s:
                low = s & -s
                a = low.bit_length() - 1
                row = add[a]
                for m in multiples[top]:
                    new |= 1 << row[m]
                s ^= low
            span[mask] = new
            rk[mask] = rk[rest] + 1
        r = rk[mask]
        if r:
            best = max(best, _ceil_div(mask.bit_count(), r))
    return best


def dump_matroid(M: SubMatroid) -> str:
    """Text form: ``n q`` header line, then one point index per line."""
    lines = [f"{M.ctx.n} {M.ctx.q}"] + [str(i) for i in M.ground]
    return "\n".join(lines) + "\n"


def load_matroid(text: str) -> SubMatroid:
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise MatroidError("empty matroid file")
    try:
        n, q = (int(t) for t in lines[0].split())
        idx = [int(t) for t in lines[1:]]
    except ValueError as exc:
        raise MatroidError(f"malformed matroid file: {exc}") from None
    if len(set(idx)) != len(idx):
        raise MatroidError("duplicate point index in matroid file")
    return restrict(geometry(n, q), idx)
