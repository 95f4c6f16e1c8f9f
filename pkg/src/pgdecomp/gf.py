"""Arithmetic in GF(q), q = p**e.

Elements are the integers ``0 .. q-1``; the base-``p`` digits of an element
are the coefficients (constant term first) of a polynomial over GF(p),
reduced modulo a fixed monic irreducible polynomial of degree ``e``.

Prime fields use plain modular arithmetic.  Extension fields multiply through
log/antilog tables that are built once, when the field is constructed.
"""

from __future__ import annotations

import functools
import itertools
import os
from typing import Sequence

import numpy as np

__all__ = [
    "FieldSpec",
    "FieldError",
    "field_new",
    "field_of_order",
    "arith",
    "is_prime",
    "is_irreducible",
    "max_field_order",
]

DEFAULT_MAX_ORDER = 1 << 16

# Full q*q addition tables are only materialised below this order.
_ADD_TABLE_MAX = 256


class FieldError(ValueError):
    """Invalid field parameters or an undefined field operation."""


def max_field_order() -> int:
    return int(os.environ.get("PGDECOMP_MAX_FIELD_ORDER", DEFAULT_MAX_ORDER))


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


def _prime_power(q: int) -> tuple[int, int]:
    """Return (p, e) with q = p**e, or raise FieldError."""
    if q < 2:
        raise FieldError(f"{q} is not a prime power")
    p = next(f for f in itertools.count(2) if q % f == 0)
    e, r = 0, q
    while r % p == 0:
        r //= p
        e += 1
    if r != 1:
        raise FieldError(f"{q} is not a prime power")
    return p, e


# -- polynomials over GF(p), coefficient lists with the constant term first --

def _trim(a: list[int]) -> list[int]:
    while a and a[-1] == 0:
        a.pop()
    return a


def _poly_mod(a: Sequence[int], m: Sequence[int], p: int) -> list[int]:
    a = _trim(list(a))
    dm = len(m) - 1
    inv_lead = pow(m[-1], p - 2, p)
    while len(a) - 1 >= dm:
        coef = a[-1] * inv_lead % p
        shift = len(a) - 1 - dm
        for i, mc in enumerate(m):
            a[shift + i] = (a[shift + i] - coef * mc) % p
        _trim(a)
    return a


def _monic_polys(degree: int, p: int):
    """All monic polynomials of the given degree, in increasing base-p order
    of their non-leading coefficients."""
    for tail in range(p ** degree):
        coeffs = []
        for _ in range(degree):
            tail, r = divmod(tail, p)
            coeffs.append(r)
        yield coeffs + [1]


def is_irreducible(poly: Sequence[int], p: int) -> bool:
    """Trial division by every monic polynomial of degree 1 .. deg/2."""
    poly = list(poly)
    deg = len(poly) - 1
    if deg < 1:
        return False
    if deg == 1:
        return True
    for dd in range(1, deg // 2 + 1):
        for g in _monic_polys(dd, p):
            if not _poly_mod(poly, g, p):
                return False
    return True


def _smallest_irreducible(p: int, e: int) -> list[int]:
    for cand in _monic_polys(e, p):
        if is_irreducible(cand, p):
            return cand
    raise AssertionError("no irreducible polynomial found")  # pragma: no cover


def _prime_factors(n: int) -> list[int]:
    out, f = [], 2
    while f * f <= n:
        if n % f == 0:
            out.append(f)
            while n % f == 0:
                n //= f
        f += 1
    if n > 1:
        out.append(n)
    return out


class FieldSpec:
    """The finite field GF(p**e).

    Immutable after construction.  ``modulus`` lists the coefficients of the
    reduction polynomial, constant term first (``[1, 0, 1]`` is x^2 + 1).
    """

    __slots__ = ("p", "e", "q", "modulus", "_exp", "_log", "_add", "_neg", "_np_tables")

    def __init__(self, p: int, e: int, modulus: Sequence[int]):
        self.p = p
        self.e = e
        self.q = p ** e
        self.modulus = tuple(modulus)
        self._add = None
        self._neg = None
        self._np_tables = None
        if e == 1:
            self._exp = self._log = None
        else:
            self._build_log_tables()
            if p != 2 and self.q <= _ADD_TABLE_MAX:
                q = self.q
                self._add = [[self._digit_add(a, b) for b in range(q)] for a in range(q)]
                self._neg = [self._digit_neg(a) for a in range(q)]

    def __repr__(self) -> str:
        return f"FieldSpec(p={self.p}, e={self.e}, modulus={list(self.modulus)})"

    def __eq__(self, other) -> bool:
        return isinstance(other, FieldSpec) and (self.p, self.e, self.modulus) == (
            other.p, other.e, other.modulus)

    def __hash__(self) -> int:
        return hash((self.p, self.e, self.modulus))

    def __reduce__(self):
        return (field_new, (self.p, self.e))

    # -- construction helpers --

    def _to_poly(self, a: int) -> list[int]:
        out = []
        for _ in range(self.e):
            a, r = divmod(a, self.p)
            out.append(r)
        return out

    def _from_poly(self, c: Sequence[int]) -> int:
        v = 0
        for coef in reversed(c):
            v = v * self.p + coef
        return v

    def _poly_mul(self, a: int, b: int) -> int:
        pa, pb = self._to_poly(a), self._to_poly(b)
        prod = [0] * (2 * self.e - 1)
        for i, x in enumerate(pa):
            if x:
                for j, y in enumerate(pb):
                    prod[i + j] = (prod[i + j] + x * y) % self.p
        r = _poly_mod(prod, self.modulus, self.p)
        return self._from_poly(r + [0] * (self.e - len(r)))

    def _build_log_tables(self) -> None:
        q = self.q
        order = q - 1
        factors = _prime_factors(order)

        def power(g: int, k: int) -> int:
            result, base = 1, g
            while k:
                if k & 1:
                    result = self._poly_mul(result, base)
                base = self._poly_mul(base, base)
                k >>= 1
            return result

        gen = next(g for g in range(2, q) if all(power(g, order // f) != 1 for f in factors))
        exp = [0] * (2 * order)
        log = [0] * q
        x = 1
        for i in range(order):
            exp[i] = x
            log[x] = i
            x = self._poly_mul(x, gen)
        exp[order:] = exp[:order]
        self._exp = exp
        self._log = log

    def _digit_add(self, a: int, b: int) -> int:
        p = self.p
        v, scale = 0, 1
        while a or b:
            v += ((a % p + b % p) % p) * scale
            a //= p
            b //= p
            scale *= p
        return v

    def _digit_neg(self, a: int) -> int:
        p = self.p
        v, scale = 0, 1
        while a:
            v += ((-(a % p)) % p) * scale
            a //= p
            scale *= p
        return v

    # -- field operations --

    def add(self, a: int, b: int) -> int:
        if self.e == 1:
            return (a + b) % self.p
        if self.p == 2:
            return a ^ b
        if self._add is not None:
            return self._add[a][b]
        return self._digit_add(a, b)

    def neg(self, a: int) -> int:
        if self.e == 1:
            return -a % self.p
        if self.p == 2:
            return a
        if self._neg is not None:
            return self._neg[a]
        return self._digit_neg(a)

    def sub(self, a: int, b: int) -> int:
        return self.add(a, self.neg(b))

    def mul(self, a: int, b: int) -> int:
        if self.e == 1:
            return a * b % self.p
        if a == 0 or b == 0:
            return 0
        return self._exp[self._log[a] + self._log[b]]

    def inv(self, a: int) -> int:
        if a == 0:
            raise FieldError("0 has no multiplicative inverse")
        if self.e == 1:
            return pow(a, self.p - 2, self.p)
        return self._exp[(self.q - 1 - self._log[a]) % (self.q - 1)]

    def div(self, a: int, b: int) -> int:
        return self.mul(a, self.inv(b))

    def pow(self, a: int, k: int) -> int:
        if k == 0:
            return 1
        if a == 0:
            return 0
        if self.e == 1:
            return pow(a, k, self.p)
        return self._exp[(self._log[a] * k) % (self.q - 1)]

    def elements(self) -> range:
        return range(self.q)

    def numpy_tables(self) -> tuple[np.ndarray, np.ndarray]:
        """(add, mul) as q*q uint arrays, for vectorised work on small fields."""
        if self._np_tables is None:
            if self.q > _ADD_TABLE_MAX:
                raise FieldError(f"numpy tables only for q <= {_ADD_TABLE_MAX}")
            q = self.q
            dtype = np.uint8 if q <= 256 else np.uint16
            add = np.array([[self.add(a, b) for b in range(q)] for a in range(q)], dtype=dtype)
            mul = np.array([[self.mul(a, b) for b in range(q)] for a in range(q)], dtype=dtype)
            add.setflags(write=False)
            mul.setflags(write=False)
            self._np_tables = (add, mul)
        return self._np_tables


@functools.lru_cache(maxsize=None)
def _field_cached(p: int, e: int) -> FieldSpec:
    return FieldSpec(p, e, _smallest_irreducible(p, e))


def field_new(p: int, e: int = 1, max_order: int | None = None) -> FieldSpec:
    """GF(p**e) with the smallest monic irreducible modulus of degree e.

    "Smallest" orders candidates by their non-leading coefficients read as a
    base-p number, so GF(9) gets x^2 + 1 and GF(2) gets x.
    """
    if not is_prime(p):
        raise FieldError(f"{p} is not prime")
    if e < 1:
        raise FieldError(f"extension degree must be >= 1, got {e}")
    cap = max_field_order() if max_order is None else max_order
    if p ** e > cap:
        raise FieldError(f"field order {p}**{e} exceeds cap {cap}")
    return _field_cached(p, e)


def field_of_order(q: int, max_order: int | None = None) -> FieldSpec:
    p, e = _prime_power(q)
    return field_new(p, e, max_order)


def arith(spec: FieldSpec, op: str, a: int, b: int | None = None) -> int:
    """Apply ``op`` in {add, mul, inv, neg} to field elements."""
    for x in (a, b):
        if x is not None and not 0 <= x < spec.q:
            raise FieldError(f"{x} is not an element of GF({spec.q})")
    if op in ("add", "mul"):
        if b is None:
            raise FieldError(f"{op} needs two operands")
        return spec.add(a, b) if op == "add" else spec.mul(a, b)
    if op == "inv":
        return spec.inv(a)
    if op == "neg":
        return spec.neg(a)
    raise FieldError(f"unknown field operation {op!r}")
