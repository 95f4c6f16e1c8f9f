"""(b, c)-decompositions: verification, search, and the numeric side of the
non-decomposability argument (threshold n0 and the flat-counting chain).

A transversal Y of the classes is b-colourable iff every X ⊆ Y satisfies
|X| <= b * r(X) (Edmonds).  Subsets of transversals are exactly the partial
transversals, so condition (ii) fails iff some partial transversal X has
|X| > b * r(X).  That is what ``find_violating_partial_transversal`` hunts
for, by branch and bound.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Sequence

import mpmath

from .colouring import colouring_number
from .matroid import GuardError, SubMatroid, guard_limit, rank, restrict
from .projgeom import qbinom

__all__ = [
    "Decomposition",
    "Verdict",
    "BudgetExhausted",
    "DecompError",
    "find_violating_partial_transversal",
    "verify_decomposition",
    "naive_transversal_oracle",
    "search_decomposition",
    "threshold_n0",
    "loglog_d",
    "counting_bound_report",
    "to_json_dict",
    "from_json_dict",
]

DEFAULT_BUDGET = 10 ** 7


class BudgetExhausted(RuntimeError):
    """The search hit its node budget before reaching a conclusion."""


class DecompError(ValueError):
    pass


@dataclass(frozen=True)
class Decomposition:
    classes: tuple[tuple[int, ...], ...]
    b: int
    c: float
    k: int

    @property
    def ell(self) -> int:
        return len(self.classes)


@dataclass(frozen=True)
class Verdict:
    outcome: str  # "valid" | "size_violation" | "transversal_violation"
    k: int
    class_index: int | None = None
    witness: tuple[int, ...] | None = None

    @property
    def valid(self) -> bool:
        return self.outcome == "valid"


def _exact(x) -> Fraction:
    if isinstance(x, float):
        return Fraction(str(x))
    return Fraction(x)


class _Budget:
    __slots__ = ("left",)

    def __init__(self, nodes: int):
        self.left = nodes

    def tick(self) -> None:
        self.left -= 1
        if self.left < 0:
            raise BudgetExhausted("node budget exhausted")


def _partition_check(M: SubMatroid, classes) -> list[list[int]]:
    out = [list(c) for c in classes]
    flat = [e for c in out for e in c]
    if len(flat) != len(set(flat)):
        raise DecompError("classes are not disjoint")
    if set(flat) != set(M.ground):
        raise DecompError("classes do not cover the ground set exactly")
    return out


class _Echelon:
    """Persistent echelon rows for rank tracking along a DFS path."""

    def __init__(self, M: SubMatroid):
        self.f = M.ctx.field
        self.binary = M.ctx.q == 2
        self.vec = dict(zip(M.ground, M.ctx.vectors(M.ground)))

    def extend(self, rows: tuple, e: int) -> tuple[tuple, bool]:
        v = self.vec[e]
        if self.binary:
            for r in rows:
                if v & (1 << (r.bit_length() - 1)):
                    v ^= r
            return (rows + (v,), True) if v else (rows, False)
        f = self.f
        v = list(v)
        for col, row in rows:
            c = v[col]
            if c:
                nc = f.neg(c)
                v = [f.add(x, f.mul(nc, y)) for x, y in zip(v, row)]
        lead = next((j for j, x in enumerate(v) if x), None)
        if lead is None:
            return rows, False
        s = f.inv(v[lead])
        return rows + ((lead, [f.mul(s, x) for x in v]),), True


def _violation_search(M: SubMatroid, classes: Sequence[Sequence[int]], b: int,
                      budget: _Budget, forced: tuple[int, int] | None = None):
    ech = _Echelon(M)
    order = list(range(len(classes)))
    rows: tuple = ()
    X: list[int] = []
    if forced is not None:
        ci, e = forced
        order.remove(ci)
        rows, _ = ech.extend(rows, e)
        X.append(e)
    ell = len(order)

    def dfs(pos: int, rows: tuple, size: int):
        budget.tick()
        r = len(rows)
        if size > b * r:
            return list(X)
        if pos == ell or size + (ell - pos) <= b * r:
            return None
        options = []
        for e in classes[order[pos]]:
            new_rows, grew = ech.extend(rows, e)
            options.append((grew, e, new_rows))
        # dependent additions first: they push |X| up without raising r(X)
        options.sort(key=lambda t: (t[0], t[1]))
        for grew, e, new_rows in options:
            X.append(e)
            found = dfs(pos + 1, new_rows, size + 1)
            X.pop()
            if found is not None:
                return found
        return dfs(pos + 1, rows, size)

    return dfs(0, rows, len(X))


def find_violating_partial_transversal(M: SubMatroid, classes, b: int,
                                       budget: int = DEFAULT_BUDGET) -> tuple[int, ...] | None:
    """A partial transversal X with |X| > b * r(X), or None if none exists.

    Raises BudgetExhausted when the search stops early; None is always a
    proof of nonexistence.
    """
    if b < 1:
        raise DecompError("b must be >= 1")
    classes = [list(c) for c in classes]
    flat = [e for c in classes for e in c]
    if len(flat) != len(set(flat)):
        raise DecompError("classes are not disjoint")
    found = _violation_search(M, classes, b, _Budget(budget))
    return None if found is None else tuple(sorted(found))


def verify_decomposition(M: SubMatroid, classes, b: int, c, budget: int = DEFAULT_BUDGET,
                         k: int | None = None) -> Verdict:
    classes = _partition_check(M, classes)
    if k is None:
        k = colouring_number(M)[0]
    cap = _exact(c) * k
    for i, cls in enumerate(classes):
        if len(cls) > cap:
            return Verdict("size_violation", k, class_index=i)
    witness = find_violating_partial_transversal(M, classes, b, budget)
    if witness is not None:
        return Verdict("transversal_violation", k, witness=witness)
    return Verdict("valid", k)


def naive_transversal_oracle(M: SubMatroid, classes, b: int) -> bool:
    """True iff every full transversal Y has col(M|Y) <= b (literal check)."""
    classes = [list(c) for c in classes]
    count = math.prod(len(c) for c in classes)
    if count > guard_limit("MAX_TRANSVERSALS"):
        raise GuardError(f"{count} transversals exceeds the naive-oracle guard")
    for Y in itertools.product(*classes):
        if colouring_number(restrict(M.ctx, Y))[0] > b:
            return False
    return True


def search_decomposition(M: SubMatroid, b: int, c, budget: int = DEFAULT_BUDGET) -> Decomposition | None:
    """Backtracking search for a (b, c)-decomposition.

    Returns None only after exhausting the search space; raises
    BudgetExhausted if the budget runs out first.
    """
    E = M.ground
    if len(E) > guard_limit("MAX_SEARCH_GROUND"):
        raise GuardError(f"{len(E)} elements exceeds the search guard")
    k = colouring_number(M)[0]
    if not E:
        return Decomposition((), b, c, 0)
    cap = math.floor(_exact(c) * k)
    if cap < 1:
        return None
    counter = _Budget(budget)
    classes: list[list[int]] = []

    def place(i: int) -> bool:
        counter.tick()
        if i == len(E):
            return True
        e = E[i]
        # existing classes, then one fresh class (fresh classes are interchangeable)
        for ci in range(len(classes) + 1):
            if ci == len(classes):
                classes.append([])
            elif len(classes[ci]) >= cap:
                continue
            classes[ci].append(e)
            # only partial transversals through e can be new violations
            if _violation_search(M, classes, b, counter, forced=(ci, e)) is None:
                if place(i + 1):
                    return True
            classes[ci].pop()
            if not classes[ci]:
                classes.pop()
        return False

    if not place(0):
        return None
    return Decomposition(tuple(tuple(cl) for cl in classes), b, c, k)


def to_json_dict(M: SubMatroid, classes, b: int, c) -> dict:
    """The decomposition interchange record."""
    return {"n": M.ctx.n, "q": M.ctx.q, "ground": list(M.ground),
            "classes": [list(cl) for cl in classes], "b": b, "c": c}


def from_json_dict(doc: dict) -> tuple[SubMatroid, list[list[int]], int | None, float | None]:
    from .projgeom import geometry

    try:
        ctx = geometry(int(doc["n"]), int(doc["q"]))
        classes = [[int(e) for e in cl] for cl in doc["classes"]]
        ground = doc.get("ground")
        ground = [int(e) for e in ground] if ground is not None else [e for cl in classes for e in cl]
    except (KeyError, TypeError) as exc:
        raise DecompError(f"malformed decomposition record: {exc!r}") from None
    return restrict(ctx, ground), classes, doc.get("b"), doc.get("c")


# -- main-proof parameters --

def _base_value(log_base, q: int):
    if log_base in (None, "e"):
        return mpmath.e
    if log_base == "q":
        return mpmath.mpf(q)
    return mpmath.mpf(int(log_base))


def loglog_d(n: int, q: int = 2, log_base="e") -> int:
    """ceil(log log n), with exact integer treatment of the range boundaries."""
    if n < 2:
        raise ValueError("log log n needs n >= 2")
    B = _base_value(log_base, q)
    with mpmath.workdps(50):
        d = int(mpmath.ceil(mpmath.log(mpmath.log(n, B), B)))
    # ceil(log log n) is the smallest d with n <= B ** (B ** d)
    while _tower_floor(d, q, log_base) < n:
        d += 1
    while _tower_floor(d - 1, q, log_base) >= n:
        d -= 1
    return d


def _tower_floor(d: int, q: int, log_base) -> int:
    """floor(B ** (B ** d))."""
    if log_base not in (None, "e"):
        B = q if log_base == "q" else int(log_base)
        if B < 2 or (log_base != "q" and float(log_base) != B):
            raise ValueError(f"unsupported log base {log_base!r}")
        # B ** (B ** d) lies in (1, 2) for d < 0
        return B ** (B ** d) if d >= 0 else 1
    with mpmath.workdps(30):
        digits = float(mpmath.e ** d * mpmath.log10(mpmath.e))
    if digits > 5e7:
        raise OverflowError("tower value too large")
    with mpmath.workdps(int(max(digits, 0)) + 40):
        return int(mpmath.floor(mpmath.e ** (mpmath.e ** d)))


def _conditions(n: int, d: int, q: int, p: Fraction, b: int, c: Fraction, delta: Fraction) -> dict:
    K = c * c * (1 + delta) ** 2 * p * p / (q - 1) ** 2
    return {
        "d_ge_3": d >= 3,
        "n_q_pow_minus_d2_gt_K": Fraction(n, q ** (d * d)) > K,
        "half_p_flat_over_d_gt_b": Fraction(1, 2) * p * Fraction(q ** d - 1, (q - 1) * d) > b,
    }


def threshold_n0(q: int, p, b: int, c, delta=0.1, log_base="e") -> int:
    """Smallest n0 such that every n >= n0 satisfies, with d = ceil(log log n),

        d >= 3,   n q^(-d^2) > c^2 (1+delta)^2 p^2 / (q-1)^2,
        p (q^d - 1) / (2 (q-1) d) > b.

    d is constant on the ranges B^(B^(d-1)) < n <= B^(B^d); within a range
    the second condition is monotone in n and the others are constant, so the
    scan runs over ranges rather than over n.
    """
    p, c, delta = _exact(p), _exact(c), _exact(delta)
    if not (0 < p <= 1 and b >= 1 and c >= 1 and delta > 0):
        raise ValueError("need 0 < p <= 1, b >= 1, c >= 1, delta > 0")
    K = c * c * (1 + delta) ** 2 * p * p / (q - 1) ** 2
    lnB = float(mpmath.log(_base_value(log_base, q)))
    lnq, lnK = math.log(q), math.log(float(K))

    def range_lo(d):
        return _tower_floor(d - 1, q, log_base) + 1

    def need_b(d):  # smallest n with n q^(-d^2) > K
        return math.floor(K * q ** (d * d)) + 1

    def c_ok(d):
        return Fraction(1, 2) * p * Fraction(q ** d - 1, (q - 1) * d) > b

    ranges = {}
    d = 3
    while True:
        lo = range_lo(d)
        start = max(lo, need_b(d)) if c_ok(d) else None
        ranges[d] = (lo, start)
        # from here on the margin ln(lo_d) - ln(need_b(d)) only grows
        gap = math.exp((d - 1) * lnB) * lnB - d * d * lnq - lnK
        step = math.exp((d - 1) * lnB) * (math.exp(lnB) - 1) * lnB - (2 * d + 1) * lnq
        if start == lo and gap > 1 and step > 1:
            break
        d += 1
        if d > 40:
            raise OverflowError("threshold scan did not settle")
    top = d
    n0 = ranges[top][0]
    for d in range(top - 1, 2, -1):
        lo, start = ranges[d]
        hi = ranges[d + 1][0] - 1
        if start is None or start > hi:
            break
        n0 = start
        if start != lo:
            break
    return n0


# Above this many bits in q^(nd) the chain is evaluated in high-precision
# floating point instead of exact rationals.
EXACT_CHAIN_BITS = 1 << 22
_CHAIN_DPS = 80


def _log10(x) -> float:
    if isinstance(x, mpmath.mpf):
        return float(mpmath.log10(x)) if x > 0 else float("-inf")
    x = Fraction(x)
    if x <= 0:
        return float("-inf")
    return math.log10(x.numerator) - math.log10(x.denominator)


@dataclass
class ChainStep:
    name: str
    lhs_log10: float
    rhs_log10: float
    relation: str
    holds: bool
    gap_log10: float  # log10(rhs / lhs), at full working precision


@dataclass
class BoundChainReport:
    n: int
    q: int
    p: float
    b: int
    c: float
    delta: float
    d: int
    k_log10: float
    conditions: dict
    qbinom_lower_holds: bool
    exact: bool = True
    regimes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _less(lhs, rhs, strict: bool) -> bool:
    if isinstance(lhs, Fraction) and isinstance(rhs, Fraction):
        return lhs < rhs if strict else lhs <= rhs
    # floating comparison: values equal to working precision count as equal
    scale = max(abs(lhs), abs(rhs))
    if scale and abs(lhs - rhs) <= scale * mpmath.mpf(10) ** (-(_CHAIN_DPS - 10)):
        return not strict
    return lhs < rhs


def _step(name: str, lhs, rhs, strict: bool) -> ChainStep:
    gap = _log10(rhs / lhs) if lhs else float("inf")
    return ChainStep(name, _log10(lhs), _log10(rhs), "<" if strict else "<=",
                     _less(lhs, rhs, strict), gap)


def _chain_terms(n: int, q: int, d: int, P: Fraction, C: Fraction, D: Fraction, exact: bool) -> dict:
    if exact:
        Q = Fraction(q)
        choose = Fraction(math.comb(q ** n, d - 2)) if d >= 2 else Fraction(0)
        qb = Fraction(qbinom(n, d, q)) if 0 <= d <= n else Fraction(0)
    else:
        P, C, D = (mpmath.mpf(x.numerator) / x.denominator for x in (P, C, D))
        Q = mpmath.mpf(q)
        N = Q ** n
        choose = (mpmath.fprod(N - i for i in range(d - 2)) / math.factorial(d - 2)
                  if d >= 2 else mpmath.mpf(0))
        qb = mpmath.fprod((Q ** (n - i) - 1) / (Q ** (i + 1) - 1) for i in range(d))
    k = (1 + D) * P * Q ** n / ((q - 1) * n)
    ck = C * k
    return {
        "k": k,
        "pairs": ck * (ck - 1) / 2,
        "choose": choose,
        "t1": n * ck * ck / 2 * Q ** (n * (d - 2)),
        "t2": C * C * (1 + D) ** 2 * P * P / (2 * (q - 1) ** 2 * n) * Q ** (n * d),
        "t3": Q ** (n * d - d * d) / 2,
        "t4": qb / 2,
    }


def counting_bound_report(n: int, q: int, p, b: int, c, delta=0.1, log_base="e") -> BoundChainReport:
    """Evaluate every link of the flat-counting chain.

    ell*C(ck,2)*C(q^n,d-2) < n(ck)^2/2 q^(n(d-2)) <= c^2(1+delta)^2 p^2/(2(q-1)^2 n) q^(nd)
        <= q^(nd-d^2)/2 <= qbinom(n,d,q)/2

    under two bounds on the number of classes ell: ell <= n (what the chain's
    first link uses) and ell <= b*n (what b-colourability of a transversal of
    a rank-n matroid gives).  For the second regime a rescaled chain, with the
    middle terms multiplied by b, is reported as well.

    Arithmetic is exact (rationals) while q^(nd) has at most
    EXACT_CHAIN_BITS bits, and 80-digit floating point beyond that; the
    report's ``exact`` flag says which.
    """
    P, C, D = _exact(p), _exact(c), _exact(delta)
    d = loglog_d(n, q, log_base)
    exact = n * d * math.log2(q) <= EXACT_CHAIN_BITS
    with mpmath.workdps(_CHAIN_DPS):
        t = _chain_terms(n, q, d, P, C, D, exact)
        t0_base = t["pairs"] * t["choose"]
        t1, t2, t3, t4 = t["t1"], t["t2"], t["t3"], t["t4"]
        report = BoundChainReport(
            n=n, q=q, p=float(P), b=b, c=float(C), delta=float(D), d=d, k_log10=_log10(t["k"]),
            conditions=_conditions(n, d, q, P, b, C, D),
            qbinom_lower_holds=bool(0 <= d <= n and _less(2 * t3, 2 * t4, strict=False)),
            exact=exact,
        )
        tail = [
            _step("T1 <= T2", t1, t2, strict=False),
            _step("T2 <= T3", t2, t3, strict=False),
            _step("T3 <= T4", t3, t4, strict=False),
        ]
        for label, ell in (("ell<=n", n), ("ell<=bn", b * n)):
            t0 = ell * t0_base
            steps = [_step("T0 < T1", t0, t1, strict=True)] + tail
            entry = {"ell_bound": ell, "steps": [asdict(s) for s in steps],
                     "chain_holds": all(s.holds for s in steps)}
            if label == "ell<=bn":
                scaled = [
                    _step("T0 < b*T1", t0, b * t1, strict=True),
                    _step("b*T1 <= b*T2", b * t1, b * t2, strict=False),
                    _step("b*T2 <= T3", b * t2, t3, strict=False),
                    _step("T3 <= T4", t3, t4, strict=False),
                ]
                entry["rescaled_steps"] = [asdict(s) for s in scaled]
                entry["rescaled_chain_holds"] = all(s.holds for s in scaled)
            report.regimes[label] = entry
    return report
