from __future__ import annotations

import itertools

import pytest
from hypothesis import given, settings, strategies as st

from pgdecomp.gf import FieldError, arith, field_new, field_of_order, is_irreducible, is_prime

ORDERS = [2, 3, 4, 5, 7, 8, 9, 11, 13, 16, 25, 27, 32, 49, 64]


def test_prime_field_gf2():
    f = field_new(2, 1)
    assert f.q == 2
    assert f.modulus == (0, 1)  # x
    assert arith(f, "add", 1, 1) == 0


def test_gf9_modulus_is_x2_plus_1():
    assert field_new(3, 2).modulus == (1, 0, 1)


def test_gf4_generator_square():
    f = field_new(2, 2)
    assert f.modulus == (1, 1, 1)
    g = 2  # the element x
    assert arith(f, "mul", g, g) == g + 1


def test_gf3_mul():
    assert arith(field_new(3), "mul", 2, 2) == 1


def test_non_prime_rejected():
    with pytest.raises(FieldError):
        field_new(4, 1)
    with pytest.raises(FieldError):
        field_of_order(6)


def test_order_cap():
    with pytest.raises(FieldError):
        field_new(2, 20, max_order=1 << 16)


def test_arith_rejects_bad_input():
    f = field_new(5)
    with pytest.raises(FieldError):
        arith(f, "mul", 5, 1)
    with pytest.raises(FieldError):
        arith(f, "pow", 1, 1)
    with pytest.raises(FieldError):
        arith(f, "inv", 0)


def _brute_irreducible(poly, p):
    # no roots and no factorisation into lower-degree monics, checked by
    # multiplying all pairs of monic polynomials of complementary degree
    deg = len(poly) - 1

    def mul(a, b):
        out = [0] * (len(a) + len(b) - 1)
        for i, x in enumerate(a):
            for j, y in enumerate(b):
                out[i + j] = (out[i + j] + x * y) % p
        return out

    for k in range(1, deg // 2 + 1):
        for a_tail in itertools.product(range(p), repeat=k):
            for b_tail in itertools.product(range(p), repeat=deg - k):
                if mul(list(a_tail) + [1], list(b_tail) + [1]) == list(poly):
                    return False
    return True


@pytest.mark.parametrize("p,e", [(2, 2), (2, 3), (2, 4), (3, 2), (3, 3), (5, 2), (7, 2)])
def test_modulus_is_smallest_irreducible(p, e):
    f = field_new(p, e)
    assert _brute_irreducible(f.modulus, p)
    # every smaller candidate (base-p order of the non-leading coefficients) is reducible
    target = sum(c * p ** i for i, c in enumerate(f.modulus[:-1]))
    for code in range(target):
        tail = [(code // p ** i) % p for i in range(e)]
        assert not _brute_irreducible(tail + [1], p)
        assert not is_irreducible(tail + [1], p)


@pytest.mark.parametrize("q", ORDERS)
def test_field_axioms_exhaustive(q):
    f = field_of_order(q)
    els = list(f.elements())
    for a in els:
        assert f.add(a, 0) == a and f.mul(a, 1) == a
        assert f.add(a, f.neg(a)) == 0
        if a:
            assert f.mul(a, f.inv(a)) == 1
    for a, b in itertools.product(els, repeat=2):
        assert f.add(a, b) == f.add(b, a)
        assert f.mul(a, b) == f.mul(b, a)
        assert f.sub(f.add(a, b), b) == a
    step = max(1, q // 8)
    for a, b, c in itertools.product(els[::step], els, els[::step]):
        assert f.mul(a, f.add(b, c)) == f.add(f.mul(a, b), f.mul(a, c))
        assert f.add(a, f.add(b, c)) == f.add(f.add(a, b), c)
        assert f.mul(a, f.mul(b, c)) == f.mul(f.mul(a, b), c)


@pytest.mark.parametrize("q", ORDERS)
def test_frobenius_and_multiplicative_order(q):
    f = field_of_order(q)
    p = f.p
    for a in f.elements():
        assert f.pow(a, q) == a
        for b in (1, q - 1, q // 2):
            assert f.pow(f.add(a, b), p) == f.add(f.pow(a, p), f.pow(b, p))
    # the multiplicative group is cyclic: some element has order q - 1
    orders = set()
    for a in range(1, q):
        k, x = 1, a
        while x != 1:
            x = f.mul(x, a)
            k += 1
        orders.add(k)
    assert max(orders) == q - 1


def test_numpy_tables_match():
    f = field_of_order(9)
    add, mul = f.numpy_tables()
    for a, b in itertools.product(range(9), repeat=2):
        assert add[a, b] == f.add(a, b) and mul[a, b] == f.mul(a, b)


def test_is_prime_small():
    assert [n for n in range(30) if is_prime(n)] == [2, 3, 5, 7, 11, 13, 17, 19, 23, 29]


@settings(max_examples=200, deadline=None)
@given(st.sampled_from([4, 8, 9, 16, 25, 27]), st.data())
def test_division_inverts_multiplication(q, data):
    f = field_of_order(q)
    a = data.draw(st.integers(0, q - 1))
    b = data.draw(st.integers(1, q - 1))
    assert f.mul(f.div(a, b), b) == a
