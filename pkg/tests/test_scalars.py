"""Coefficient field: exactness, bar involution, classical limit, parsing."""

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from debraid.scalars import CoeffField, Scalar, ScalarError, parse_scalar


@pytest.fixture(scope="module")
def F():
    # n = 3 with one normalization parameter, bar(g1) = -q**2 * g1
    return CoeffField(3, params=("g1",), bar_images={"g1": "-q**2*g1"})


def scalars(F, max_leaves=6):
    leaf = st.sampled_from(
        [F.q, F.q_inv, F.q_pow(Fraction(1, 2)), F.param("g1"), F.one,
         F.rational(2), F.rational(Fraction(-3, 4)), F.k, F.h]
    )
    return st.recursive(
        leaf,
        lambda kids: st.tuples(kids, kids).map(lambda ab: ab[0] + ab[1])
        | st.tuples(kids, kids).map(lambda ab: ab[0] * ab[1])
        | st.tuples(kids, kids).map(lambda ab: ab[0] - ab[1])
        | kids.map(lambda a: a / F.q)
        | kids.map(lambda a: -a),
        max_leaves=max_leaves,
    )


def test_root_order_and_q_pow(F):
    assert F.q_pow(Fraction(1, 6)) ** 6 == F.q
    assert F.q_pow(Fraction(-1, 2)) * F.q_pow(Fraction(1, 2)) == F.one
    with pytest.raises(ScalarError):
        F.q_pow(Fraction(1, 7))
    with pytest.raises(ScalarError):
        F.q_pow(Fraction(1, 4))


def test_k_h_relation(F):
    # k = q - 1/q factors through h = q^(1/2) - q^(-1/2)
    c = F.q_pow(Fraction(1, 2)) + F.q_pow(Fraction(-1, 2))
    assert F.k == F.h * c
    assert F.k / F.h == c
    assert F.h ** 2 == F.q - 2 + F.q_inv


def test_equality_is_structural(F):
    a = (F.q ** 2 - F.one) / (F.q - F.one)
    assert a == F.q + F.one
    assert (a - F.q - F.one).is_zero


def test_bar_on_generators(F):
    assert F.q.bar() == F.q_inv
    assert F.k.bar() == -F.k
    assert F.h.bar() == -F.h
    g1 = F.param("g1")
    assert g1.bar() == -(F.q ** 2) * g1
    assert g1.bar().bar() == g1


def test_bar_involution_declaration_checked():
    with pytest.raises(ScalarError):
        CoeffField(3, params=("a",), bar_images={"a": "2*a"})
    with pytest.raises(ScalarError):
        CoeffField(3, params=("a",), bar_images={"b": "q"})


@given(st.data())
@settings(max_examples=60, deadline=None)
def test_bar_is_ring_involution(F, data):
    x = data.draw(scalars(F))
    y = data.draw(scalars(F))
    assert (x + y).bar() == x.bar() + y.bar()
    assert (x * y).bar() == x.bar() * y.bar()
    assert x.bar().bar() == x


@given(st.data())
@settings(max_examples=60, deadline=None)
def test_field_axioms(F, data):
    x = data.draw(scalars(F))
    y = data.draw(scalars(F))
    z = data.draw(scalars(F))
    assert (x + y) * z == x * z + y * z
    assert x * y == y * x
    assert (x - x).is_zero
    if not y.is_zero:
        assert (x / y) * y == x


def test_classical_limit_values(F):
    # k and h vanish to first order at q = 1
    assert F.k.eval_classical() == (-1, F.zero)
    assert F.h.eval_classical() == (-1, F.zero)
    # k/h -> 2 (the classical limit of q^(1/2) + q^(-1/2))
    order, val = (F.k / F.h).eval_classical()
    assert order == 0 and val == F.rational(2)
    # simple pole: 1/h
    assert (F.one / F.h).eval_classical() == (1, None)
    # double pole with parameter kept
    order, val = (F.param("g1") / F.k ** 2).eval_classical()
    assert order == 2 and val is None
    order, val = (F.rational(Fraction(3, 2))).eval_classical()
    assert order == 0 and val == F.rational(Fraction(3, 2))
    assert F.zero.eval_classical() == (0, F.zero)


def test_classical_limit_with_parameters(F):
    g1 = F.param("g1")
    order, val = ((F.q + 1) * g1).eval_classical()
    assert order == 0 and val == 2 * g1


def test_parse_basics(F):
    assert parse_scalar("q - 1/q", F) == F.k
    assert parse_scalar("q**(1/2) - q**(-1/2)", F) == F.h
    assert parse_scalar("q**(1/2) + q**(-1/2)", F) == F.k / F.h
    assert parse_scalar("-(q - 1)**2 / q", F) == -(F.q - 1) ** 2 / F.q
    assert parse_scalar("3/4", F) == F.rational(Fraction(3, 4))
    assert parse_scalar("- - 2", F) == F.rational(2)
    assert parse_scalar("q**-2", F) == F.q_inv ** 2
    assert parse_scalar("g1**2*q", F) == F.param("g1") ** 2 * F.q


def test_parse_errors(F):
    for bad in ("q**(1/7)", "g1**(1/2)", "w + 1", "q +", "(q", "q$", "s**2"):
        with pytest.raises(ScalarError):
            parse_scalar(bad, F)


def test_division_by_zero(F):
    with pytest.raises(ZeroDivisionError):
        F.one / F.zero
    with pytest.raises(ZeroDivisionError):
        F.zero ** -1
    with pytest.raises(ZeroDivisionError):
        1 / (F.q - F.q)


def test_cross_field_mixing_rejected(F):
    G = CoeffField(2)
    with pytest.raises(ScalarError):
        F.q + G.q


@given(st.data())
@settings(max_examples=60, deadline=None)
def test_render_parse_roundtrip(F, data):
    x = data.draw(scalars(F))
    assert parse_scalar(x.as_q_string(), F) == x


def test_render_examples(F):
    assert F.k.as_q_string() == "(q**2 - 1)/q"
    assert F.one.as_q_string() == "1"
    assert (-F.q).as_q_string() == "-q"
    assert F.q_pow(Fraction(-1, 2)).as_q_string() == "1/q**(1/2)"
