"""Rewrite engine: normalization, confluence, completion, word counts."""

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from debraid.rewriting import (
    KIND_X,
    KIND_XINV,
    Algebra,
    BudgetExceeded,
    GenInfo,
    NCPoly,
    RewriteError,
    RewriteSystem,
    commutator,
    deglex_key,
)
from debraid.scalars import CoeffField


@pytest.fixture(scope="module")
def F():
    return CoeffField(3)


@pytest.fixture(scope="module")
def plane():
    # quantum plane: two letters, x2 x1 -> (1/q) x1 x2
    F = CoeffField(2)
    alg = Algebra(F, [GenInfo("x1", 1, KIND_X, 1), GenInfo("x2", 1, KIND_X, 2)])
    rs = RewriteSystem(alg)
    rs.add_rule(alg.word(["x2", "x1"]), F.q_inv * alg.gen("x1") * alg.gen("x2"))
    return rs


def so3_coordinate_rules(F, sphere=False):
    """Hand-derived single-copy relations for the three-letter deformed
    space: neighbors q-commute, the outer pair exchanges with a middle
    correction.  With sphere=True the squared middle letter is reducible
    (quadratic invariant set to 1)."""
    alg = Algebra(
        F,
        [
            GenInfo("xm", 1, KIND_X, -1),
            GenInfo("x0", 1, KIND_X, 0),
            GenInfo("xp", 1, KIND_X, 1),
        ],
    )
    rs = RewriteSystem(alg)
    xm, x0, xp = alg.gen("xm"), alg.gen("x0"), alg.gen("xp")
    alpha = F.q_pow(Fraction(-1, 2)) * (F.q - 1)
    c = F.q_pow(Fraction(1, 2)) + F.q_pow(Fraction(-1, 2))
    rs.add_rule(alg.word(["x0", "xm"]), F.q_inv * xm * x0)
    rs.add_rule(alg.word(["xp", "x0"]), F.q_inv * x0 * xp)
    if not sphere:
        rs.add_rule(alg.word(["xp", "xm"]), xm * xp + alpha * x0 * x0)
    else:
        rs.add_rule(alg.word(["x0", "x0"]), F.q_inv * alg.one() - (F.q_inv * c) * xm * xp)
        # xp*xm with the square already eliminated
        rs.add_rule(
            alg.word(["xp", "xm"]),
            F.q_inv ** 2 * xm * xp + alpha * F.q_inv * alg.one(),
        )
    return rs


def test_poly_basics(F):
    alg = Algebra(F, [GenInfo("a", 1, KIND_X, 0), GenInfo("b", 1, KIND_X, 1)])
    a, b = alg.gen("a"), alg.gen("b")
    p = (a + b) * (a - b)
    assert p == a * a - a * b + b * a - b * b
    assert (p - p).is_zero
    assert (a * b).leading_word() == alg.word(["a", "b"])
    assert (a + b).degree() == 1
    assert alg.zero().degree() == -1
    q = 2 * a - a
    assert q == a
    # display is deg-lex descending
    assert str(a * b - b * a) == "-b*a + a*b"


def test_poly_str_constant_and_coeff(F):
    alg = Algebra(F, [GenInfo("a", 1, KIND_X, 0)])
    a = alg.gen("a")
    assert str(alg.one() + a) == "a + 1"
    assert str(-(F.q) * a) == "-q*a"
    assert str(alg.zero()) == "0"


@given(st.data())
@settings(max_examples=40, deadline=None)
def test_poly_ring_axioms(F, data):
    alg = Algebra(F, [GenInfo(n, 1, KIND_X, i) for i, n in enumerate("abc")])
    words = st.lists(st.sampled_from("abc"), max_size=3).map(lambda ls: alg.word(ls))
    coeffs = st.sampled_from([F.one, F.q, -F.q_inv, F.k])
    polys = st.lists(st.tuples(words, coeffs), max_size=3).map(
        lambda ts: sum((NCPoly(alg, {w: c}) for w, c in ts), alg.zero())
    )
    p, q, r = data.draw(polys), data.draw(polys), data.draw(polys)
    assert (p * q) * r == p * (q * r)
    assert p * (q + r) == p * q + p * r
    assert (p + q) * r == p * r + q * r


def test_plane_normal_form(plane):
    alg = plane.alg
    F = alg.field
    w = alg.word(["x2", "x2", "x1"])
    nf = plane.normal_form(NCPoly(alg, {w: F.one}))
    assert nf == F.q_inv ** 2 * alg.gen("x1") * alg.gen("x2") * alg.gen("x2")
    # memo path gives the same answer
    assert plane.normal_form(NCPoly(alg, {w: F.q})) == F.q * nf


def test_plane_counts_and_confluence(plane):
    assert plane.confluence_failures(3) == []
    assert plane.count_normal_words(5) == [1, 2, 3, 4, 5, 6]


@given(st.data())
@settings(max_examples=30, deadline=None)
def test_plane_nf_is_idempotent_multiplicative(plane, data):
    alg = plane.alg
    F = alg.field
    words = st.lists(st.sampled_from(["x1", "x2"]), max_size=4).map(alg.word)
    polys = st.lists(st.tuples(words, st.sampled_from([F.one, F.q, -F.k])), max_size=3).map(
        lambda ts: sum((NCPoly(alg, {w: c}) for w, c in ts), alg.zero())
    )
    p, q = data.draw(polys), data.draw(polys)
    assert plane.normal_form(plane.normal_form(p)) == plane.normal_form(p)
    assert plane.normal_form(p * q) == plane.normal_form(
        plane.normal_form(p) * plane.normal_form(q)
    )


def test_so3_system_confluent(F):
    rs = so3_coordinate_rules(F)
    assert rs.confluence_failures(3) == []
    assert rs.count_normal_words(4) == [1, 3, 6, 10, 15]


def test_so3_quadratic_invariant_is_central(F):
    rs = so3_coordinate_rules(F)
    alg = rs.alg
    xm, x0, xp = alg.gen("xm"), alg.gen("x0"), alg.gen("xp")
    qh = F.q_pow(Fraction(1, 2))
    r2 = (1 / qh) * xm * xp + x0 * x0 + qh * xp * xm
    c = qh + 1 / qh
    assert rs.normal_form(r2) == c * xm * xp + F.q * x0 * x0
    for g in (xm, x0, xp):
        assert rs.normal_form(commutator(r2, g)).is_zero


def test_plain_system_confluent_for_any_middle_coefficient(F):
    # the 3-rule coordinate system is a PBW family: its single overlap
    # resolves for every value of the middle correction, so coefficient
    # corruption cannot be detected here (the sphere pins it down)
    rs = RewriteSystem(so3_coordinate_rules(F).alg)
    alg = rs.alg
    xm, x0, xp = alg.gen("xm"), alg.gen("x0"), alg.gen("xp")
    rs.add_rule(alg.word(["x0", "xm"]), F.q_inv * xm * x0)
    rs.add_rule(alg.word(["xp", "x0"]), F.q_inv * x0 * xp)
    rs.add_rule(alg.word(["xp", "xm"]), xm * xp + F.rational(7) * x0 * x0)
    assert rs.confluence_failures(3) == []


def test_sphere_negative_control(F):
    # corrupting the constant term of the exchange rule must break
    # degree-3 confluence of the sphere system
    rs = so3_coordinate_rules(F, sphere=True)
    alg = rs.alg
    bad = RewriteSystem(alg)
    xm, x0, xp = alg.gen("xm"), alg.gen("x0"), alg.gen("xp")
    alpha = F.q_pow(Fraction(-1, 2)) * (F.q - 1)
    c = F.q_pow(Fraction(1, 2)) + F.q_pow(Fraction(-1, 2))
    bad.add_rule(alg.word(["x0", "xm"]), F.q_inv * xm * x0)
    bad.add_rule(alg.word(["xp", "x0"]), F.q_inv * x0 * xp)
    bad.add_rule(alg.word(["x0", "x0"]), F.q_inv * alg.one() - (F.q_inv * c) * xm * xp)
    bad.add_rule(
        alg.word(["xp", "xm"]),
        F.q_inv ** 2 * xm * xp + 2 * alpha * F.q_inv * alg.one(),
    )
    assert bad.confluence_failures(3) != []


def test_sphere_system_confluent(F):
    rs = so3_coordinate_rules(F, sphere=True)
    assert rs.confluence_failures(3) == []
    assert rs.count_normal_words(4) == [1, 3, 5, 7, 9]


def mini_extended_sphere(F):
    """Sphere letters plus the inverse of the middle letter, ordered right
    after it. The quadratic rules alone are not confluent; completion is
    exercised on this system."""
    alg = Algebra(
        F,
        [
            GenInfo("xm", 1, KIND_X, -1),
            GenInfo("x0", 1, KIND_X, 0),
            GenInfo("x0i", 1, KIND_XINV, 0),
            GenInfo("xp", 1, KIND_X, 1),
        ],
    )
    rs = RewriteSystem(alg)
    xm, x0, x0i, xp = (alg.gen(n) for n in ("xm", "x0", "x0i", "xp"))
    alpha = F.q_pow(Fraction(-1, 2)) * (F.q - 1)
    c = F.q_pow(Fraction(1, 2)) + F.q_pow(Fraction(-1, 2))
    rs.add_rule(alg.word(["x0", "xm"]), F.q_inv * xm * x0)
    rs.add_rule(alg.word(["xp", "x0"]), F.q_inv * x0 * xp)
    rs.add_rule(alg.word(["x0", "x0"]), F.q_inv * alg.one() - (F.q_inv * c) * xm * xp)
    rs.add_rule(
        alg.word(["xp", "xm"]), F.q_inv ** 2 * xm * xp + alpha * F.q_inv * alg.one()
    )
    rs.add_rule(alg.word(["x0", "x0i"]), alg.one())
    rs.add_rule(alg.word(["x0i", "x0"]), alg.one())
    rs.add_rule(alg.word(["x0i", "xm"]), F.q * xm * x0i)
    rs.add_rule(alg.word(["xp", "x0i"]), F.q * x0i * xp)
    return rs


def test_completion_on_extended_sphere(F):
    rs = mini_extended_sphere(F)
    assert rs.confluence_failures(3) != []
    added = rs.complete(4)
    assert rs.confluence_failures(4) == []
    alg = rs.alg
    assert alg.word(["xm", "x0i", "xp"]) in added
    assert alg.word(["xm", "x0i", "x0i", "xp"]) in added
    # frozen lattice oracle: exponent of the middle letter runs over
    # integers <= 1, words with the inverse letter flanked by both
    # neighbors are reducible
    assert rs.count_normal_words(4) == [1, 4, 8, 12, 16]


def test_completion_added_rules_are_identities(F):
    # the added rule must be the one forced by multiplying the square rule
    # by the inverse letter
    rs = mini_extended_sphere(F)
    rs.complete(4)
    alg = rs.alg
    c = F.q_pow(Fraction(1, 2)) + F.q_pow(Fraction(-1, 2))
    lhs = alg.word(["xm", "x0i", "xp"])
    expect = (F.q_inv / c) * alg.gen("x0i") - (1 / c) * alg.gen("x0")
    assert rs.rules[lhs] == expect


def test_increasing_rules_flagged_and_buget(F):
    alg = Algebra(F, [GenInfo("a", 1, KIND_X, 0), GenInfo("b", 1, KIND_X, 1)])
    rs = RewriteSystem(alg, step_budget=2)
    a, b = alg.gen("a"), alg.gen("b")
    rs.add_rule(alg.word(["b", "a"]), a * a * b)
    assert rs.increasing
    with pytest.raises(RewriteError):
        rs.confluence_failures(3)
    with pytest.raises(RewriteError):
        rs.complete(3)
    # two steps allowed, third raises
    w = NCPoly(alg, {alg.word(["b", "b", "b", "a"]): F.one})
    with pytest.raises(BudgetExceeded):
        rs.normal_form(w)
    big = RewriteSystem(alg, step_budget=100)
    big.add_rule(alg.word(["b", "a"]), a * a * b)
    nf = big.normal_form(w)
    # each letter pass doubles the block: 2**3 copies survive
    assert list(nf.terms) == [alg.word(list("aaaaaaaabbb"))]


def test_add_relation_orients(F):
    alg = Algebra(F, [GenInfo("u", 1, KIND_X, 0), GenInfo("v", 1, KIND_X, 1)])
    rs = RewriteSystem(alg)
    u, v = alg.gen("u"), alg.gen("v")
    rel = F.q * u * v - v * u
    lhs = rs.add_relation(rel)
    assert lhs == alg.word(["v", "u"])
    assert rs.rules[lhs] == F.q * u * v
    # the same relation now reduces to zero
    assert rs.add_relation(rel) is None
    with pytest.raises(RewriteError):
        rs.add_rule(lhs, u * v)


def test_word_order_is_generator_order(F):
    alg = Algebra(F, [GenInfo(n, 1, KIND_X, i) for i, n in enumerate("pqr")])
    assert deglex_key(alg.word(["p", "r"])) < deglex_key(alg.word(["q", "p"]))
    assert deglex_key(alg.word(["r"])) < deglex_key(alg.word(["p", "p"]))


def test_count_with_restricted_alphabet(F):
    rs = so3_coordinate_rules(F)
    alg = rs.alg
    ids = [alg.gen_id("xm"), alg.gen_id("x0")]
    # only the q-commutation rule survives on this alphabet
    assert rs.count_normal_words(3, gen_ids=ids) == [1, 2, 3, 4]
