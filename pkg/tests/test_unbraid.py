"""Unbraiding maps: normalization constants, the built-in realization
table (golden entries, exchange law, two-sided inversion), decoupled
generators against the display formulas, decoupling certificates for two
and three tensor factors, both braiding signs, the star checks with
their negative controls, and the table text format."""

from dataclasses import replace
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from debraid.braidmat import build_braid, rho_exponents, spectral_projectors
from debraid.rewriting import commutator
from debraid.scalars import CoeffField
from debraid.spaces import SpaceSpec, build_heisenberg, build_quantum_space
from debraid.unbraid import (
    PhiTable,
    UnbraidError,
    build_phi_euclidean,
    chi_apply,
    dy_generators,
    phi_table_from_text,
    phi_table_to_text,
    resolve_star_sign,
    star_involution,
    unbraid_iterate,
    verify_decomposition,
    verify_inversion,
    verify_phi_exchange,
    verify_star_chi,
    verify_unbraiding,
    y_generators,
)

BAR_GAMMA = {"gamma1": "-q**2*gamma1"}


@pytest.fixture(scope="module")
def field3():
    return CoeffField(3, params=("gamma1",), bar_images=BAR_GAMMA)


@pytest.fixture(scope="module")
def braid3(field3):
    return build_braid("so", 3, field=field3)


@pytest.fixture(scope="module")
def ext1(braid3):
    return build_quantum_space(
        SpaceSpec(family="so", n=3, extended=True), braid=braid3
    )


@pytest.fixture(scope="module")
def phi1(ext1):
    return build_phi_euclidean(ext1, "-")


@pytest.fixture(scope="module")
def ext2(braid3):
    return build_quantum_space(
        SpaceSpec(family="so", n=3, copies=2, extended=True), braid=braid3
    )


@pytest.fixture(scope="module")
def phi2(ext2):
    return build_phi_euclidean(ext2, "-")


@pytest.fixture(scope="module")
def ys2(phi2):
    return {(2, i): y for i, y in y_generators(phi2, 2).items()}


def test_gamma_level0_forced(phi1, ext1):
    F = ext1.field
    assert (phi1.gamma_values[0] - (-F.one / (F.q - F.one))).is_zero
    prod = phi1.gamma_values[1] * phi1.gamma_values[-1]
    assert (prod - (-F.q_inv / (F.h * F.h))).is_zero


def test_gamma_barred_constants(ext1):
    # the sign + family flips both forced values
    phi = build_phi_euclidean(ext1, "+")
    F = ext1.field
    assert (phi.gamma_values[0] - F.q / (F.q - F.one)).is_zero
    prod = phi.gamma_values[1] * phi.gamma_values[-1]
    assert (prod - (-F.q / (F.h * F.h))).is_zero


def test_gamma_free_param_handling(ext1):
    F = ext1.field
    phi = build_phi_euclidean(ext1, "-", free_params={"gamma1": "q"})
    assert (phi.gamma_values[1] - F.q).is_zero
    expect_neg = (-F.q_inv / (F.h * F.h)) / F.q
    assert (phi.gamma_values[-1] - expect_neg).is_zero

    # an explicit partner is accepted only when it matches the forced product
    both = {"gamma1": "q", "gamma-1": expect_neg}
    phi = build_phi_euclidean(ext1, "-", free_params=both)
    assert (phi.gamma_values[-1] - expect_neg).is_zero
    with pytest.raises(UnbraidError, match="unsatisfiable"):
        build_phi_euclidean(
            ext1, "-", free_params={"gamma1": "q", "gamma-1": "q"}
        )
    with pytest.raises(UnbraidError, match="gamma1 = 0"):
        build_phi_euclidean(ext1, "-", free_params={"gamma1": "0"})
    with pytest.raises(UnbraidError, match="unknown free constants"):
        build_phi_euclidean(ext1, "-", free_params={"gamma7": "q"})


def test_gamma_missing_parameter():
    pres = build_quantum_space(SpaceSpec(family="so", n=3, extended=True))
    assert "gamma1" not in pres.field.param_names
    with pytest.raises(UnbraidError, match="neither a field parameter nor supplied"):
        build_phi_euclidean(pres, "-")


def _golden_images(pres):
    """The six nonzero table entries for the odd 3-space, sign -."""
    F = pres.field
    g1 = F.param("gamma1")
    q, h = F.q, F.h
    r1, r0i, r1i = pres.radius(1), pres.radius_inv(0), pres.radius_inv(1)
    x0, xp = pres.x(1, 0), pres.x(1, 1)
    half = Fraction(1, 2)
    return {
        (-1, -1): (-q * h * g1) * (r1 * r0i),
        (0, -1): (F.q_pow(-half) * (q + F.one)) * (xp * r0i),
        (0, 0): pres.algebra.one(),
        (1, -1): ((q + F.one) / (q * (q - F.one) * g1)) * (xp * xp * r1i * r0i),
        (1, 0): ((q + F.one) / (F.q_pow(half) * (q - F.one) * g1)) * (xp * r1i),
        (1, 1): (-F.one / (F.q_pow(half) * (q - F.one) * g1)) * (x0 * r1i),
    }


def test_phi_golden_entries(phi1, ext1):
    gold = _golden_images(ext1)
    for key, want in gold.items():
        got = phi1.images[key]
        assert ext1.nf(got - want).is_zero, key
        # same normal form means identical term dictionaries
        assert got.terms == ext1.nf(want).terms, key
    for key, img in phi1.images.items():
        if key not in gold:
            assert img.is_zero, key


def test_phi_triangularity_recorded(phi1, ext1):
    assert phi1.triangularity == "lower"
    assert build_phi_euclidean(ext1, "+").triangularity == "upper"


def test_phi_inversion_identity(phi1):
    assert verify_inversion(phi1).passed


def test_antipode_diagonal_entry(phi1, ext1):
    # (r rinv0)^{-1} = x0 rinv1, scaled by the diagonal constant
    F = ext1.field
    scale = -F.one / (F.q * F.h * F.param("gamma1"))
    want = scale * (ext1.x(1, 0) * ext1.radius_inv(1))
    got = phi1.antipode_images[(-1, -1)]
    assert ext1.nf(got - want).is_zero


def test_phi_exchange_all_triples(phi1):
    report = verify_phi_exchange(phi1)
    assert report.passed
    assert not report.skipped


def test_phi_exchange_classical_is_a_pole(phi1):
    report = verify_phi_exchange(phi1, mode="classical")
    assert report.passed
    assert len(report.skipped) == 1
    assert "skipped: pole" in report.skipped[0]


def test_phi_exchange_corrupted_table_fails(phi1, ext1):
    # dropping the metric contraction permutes and rescales the columns;
    # rho_j + rho_{-j} = 0 makes this exactly the uncontracted commutator
    rho = rho_exponents(3)
    F = ext1.field
    bad_images = {
        (i, j): ext1.nf(F.q_pow(rho[j]) * phi1.images[(i, -j)])
        for i in ext1.braid.indices
        for j in ext1.braid.indices
    }
    bad = PhiTable(
        sign="-",
        presentation=ext1,
        images=bad_images,
        antipode_images=phi1.antipode_images,
        gamma_values=phi1.gamma_values,
        triangularity="n/a",
    )
    report = verify_phi_exchange(bad)
    assert not report.passed
    assert len(report.relation_failures) == 20


def _golden_ys(pres):
    """Display formulas for the decoupled copy-2 coordinates, N = 3."""
    F = pres.field
    g1 = F.param("gamma1")
    q, h = F.q, F.h
    half = Fraction(1, 2)
    r1, r0i, r1i = pres.radius(1), pres.radius_inv(0), pres.radius_inv(1)
    x0, xp = pres.x(1, 0), pres.x(1, 1)
    xm2, x02, xp2 = pres.x(2, -1), pres.x(2, 0), pres.x(2, 1)
    gold_m = (-q * h * g1) * (r1 * r0i * xm2)
    gold_0 = (F.q_pow(half) * (q + F.one)) * (r0i * xp * xm2) + x02
    gold_p = (
        (F.q_pow(half) * (q + F.one) / (h * g1)) * (r1i * r0i * xp * xp * xm2)
        + ((F.q_inv + F.one) / (h * g1)) * (r1i * xp * x02)
        - (F.one / (q * h * g1)) * (r1i * x0 * xp2)
    )
    return {-1: gold_m, 0: gold_0, 1: gold_p}


def test_golden_y_formulas(ys2, ext2):
    gold = _golden_ys(ext2)
    for i, want in gold.items():
        got = ys2[(2, i)]
        assert ext2.nf(got - want).is_zero, i
        assert got.terms == ext2.nf(want).terms, i


def test_chi_is_multiplicative(phi2, ext2):
    a = ext2.x(2, 1)
    b = ext2.x(2, -1) * ext2.x(2, 0)
    lhs = chi_apply(phi2, a * b)
    rhs = ext2.nf(chi_apply(phi2, a) * chi_apply(phi2, b))
    assert ext2.nf(lhs - rhs).is_zero


def test_chi_refuses_copy_one(phi2, ext2):
    with pytest.raises(UnbraidError, match="copy 1 is fixed"):
        chi_apply(phi2, ext2.x(1, 1))
    with pytest.raises(UnbraidError, match="copy 1 is fixed"):
        chi_apply(phi2, ext2.radius(1) * ext2.x(2, 0))


def test_chi_sign_must_match_braiding(ext2):
    # a sign + table builds fine here (its exchange law is copy-local)
    # but refuses to act on a sign - product
    phi_plus = build_phi_euclidean(ext2, "+")
    assert verify_phi_exchange(phi_plus).passed
    with pytest.raises(UnbraidError, match="braiding sign"):
        chi_apply(phi_plus, ext2.x(2, 1))


def test_decoupling_two_copies(ext2, ys2):
    report = verify_unbraiding(ext2, ys2)
    assert report.passed
    assert report.commutation_failures == []
    assert report.relation_failures == []
    assert report.residual_braiding_failures == []


def test_decoupled_commutators_explicit(ext2, ys2):
    # nine coordinate commutators, plus the radial letters
    gens = [ext2.x(1, i) for i in ext2.braid.indices]
    gens += [ext2.radius(1), ext2.radius_inv(1), ext2.radius_inv(0)]
    for y in ys2.values():
        for g in gens:
            assert ext2.nf(commutator(y, g)).is_zero


def test_decoupled_ys_satisfy_the_quadric(ext2, ys2):
    proj = spectral_projectors(ext2.braid)["antisym"]
    idx = ext2.braid.indices
    n2 = len(idx)
    for a in range(n2 * n2):
        acc = ext2.algebra.zero()
        for b in range(n2 * n2):
            c = proj.entry(a, b)
            if c.is_zero:
                continue
            h, k = idx[b // n2], idx[b % n2]
            acc = acc + c * (ys2[(2, h)] * ys2[(2, k)])
        assert ext2.nf(acc).is_zero


def test_decomposition_certificate(phi2, ys2):
    report = verify_decomposition(phi2, ys2)
    assert report.passed


def test_span_identity(phi2, ys2, ext2):
    # the inverse family recovers the plain coordinates from the y's
    for k in ext2.braid.indices:
        acc = ext2.algebra.zero()
        for i in ext2.braid.indices:
            acc = acc + phi2.antipode_images[(k, i)] * ys2[(2, i)]
        assert ext2.nf(acc - ext2.x(2, k)).is_zero


def test_unbraid_iterate_single_copy(braid3):
    pres = build_quantum_space(
        SpaceSpec(family="so", n=3, extended=True), braid=braid3
    )
    steps, report = unbraid_iterate(pres)
    assert steps == []
    assert report.passed
    assert report.summary() == "pass"


def test_unbraid_iterate_two_copies(ext2):
    steps, report = unbraid_iterate(ext2)
    assert report.passed
    assert len(steps) == 1
    step_pres, ys = steps[0]
    assert step_pres is ext2
    assert set(ys) == {(2, i) for i in ext2.braid.indices}


def test_unbraid_iterate_three_copies(braid3):
    pres = build_quantum_space(
        SpaceSpec(family="so", n=3, copies=3, extended=True), braid=braid3
    )
    steps, report = unbraid_iterate(pres)
    assert report.passed
    assert len(steps) == 2
    assert steps[0][0].spec.copies == 3
    assert steps[1][0].spec.copies == 2
    assert set(steps[0][1]) == {(c, i) for c in (2, 3) for i in pres.braid.indices}
    assert set(steps[1][1]) == {(2, i) for i in pres.braid.indices}


def test_sign_plus_pipeline(braid3):
    pres = build_quantum_space(
        SpaceSpec(family="so", n=3, copies=2, extended=True, braiding_sign="+"),
        braid=braid3,
    )
    phi = build_phi_euclidean(pres, "+")
    assert phi.triangularity == "upper"
    assert verify_phi_exchange(phi).passed
    ys = {(2, i): y for i, y in y_generators(phi, 2).items()}
    assert verify_unbraiding(pres, ys).passed


def test_star_chi_self_adjoint(phi2, ys2):
    assert verify_star_chi(phi2, ys2).passed


@pytest.mark.parametrize(
    "bar_image",
    ["-q**(-2)*gamma1", "gamma1"],
    ids=["flipped-exponent", "identity"],
)
def test_star_chi_negative_controls(bar_image):
    # only bar(gamma1) = -q^2 gamma1 is consistent with the forced product
    # gamma1 gamma_{-1} = -q^{-1} h^{-2}, whose bar picks up q^2
    F = CoeffField(3, params=("gamma1",), bar_images={"gamma1": bar_image})
    braid = build_braid("so", 3, field=F)
    pres = build_quantum_space(
        SpaceSpec(family="so", n=3, copies=2, extended=True), braid=braid
    )
    phi = build_phi_euclidean(pres, "-")
    report = verify_star_chi(phi)
    assert not report.passed
    assert len(report.relation_failures) == 2


def test_star_radius_self_adjoint(ext1):
    r1 = ext1.radius(1)
    assert ext1.nf(star_involution(ext1, r1) - r1).is_zero


def test_star_rejects_unfixed_square(ext1):
    F = ext1.field
    bad_sq = dict(ext1.squares)
    bad_sq[1] = bad_sq[1].map_coeffs(lambda c: c * F.q)
    bad = replace(ext1, squares=bad_sq)
    with pytest.raises(UnbraidError, match="not fixed by the involution"):
        star_involution(bad, bad.radius(1))


@st.composite
def _ext1_polys(draw, pres):
    gens = [pres.x(1, i) for i in pres.braid.indices]
    gens.append(pres.radius(1))
    gens.append(pres.radius_inv(0))
    terms = draw(
        st.lists(
            st.tuples(
                st.integers(min_value=-3, max_value=3).filter(bool),
                st.lists(st.sampled_from(gens), min_size=0, max_size=3),
            ),
            min_size=1,
            max_size=3,
        )
    )
    acc = pres.algebra.zero()
    for c, word in terms:
        part = pres.algebra.scalar(pres.field.rational(c))
        for g in word:
            part = part * g
        acc = acc + part
    return acc


@given(data=st.data())
@settings(max_examples=25, deadline=None)
def test_star_involutive_and_antimultiplicative(ext1, data):
    p = data.draw(_ext1_polys(ext1))
    w = data.draw(_ext1_polys(ext1))
    assert (star_involution(ext1, star_involution(ext1, p)) - p).is_zero
    lhs = star_involution(ext1, p * w)
    rhs = star_involution(ext1, w) * star_involution(ext1, p)
    assert (lhs - rhs).is_zero


@pytest.mark.parametrize("eps,dsign", [(1, 1), (-1, -1)])
def test_derivative_star_sign_resolution(eps, dsign):
    pres = build_heisenberg(SpaceSpec(family="so", n=3, epsilon=eps))
    assert resolve_star_sign(pres) == dsign
    # the resolved map is diagonal with exponent dsign*n + 2 rho_i
    F = pres.field
    rho = rho_exponents(3)
    for i in pres.braid.indices:
        d = pres.d(1, i)
        want = -F.q_pow(dsign * 3 + 2 * rho[i]) * d
        assert (star_involution(pres, d, dsign=dsign) - want).is_zero
    p = pres.d(1, 1) * pres.x(1, -1) + pres.x(1, 0)
    pp = star_involution(pres, star_involution(pres, p, dsign=dsign), dsign=dsign)
    assert pres.nf(pp - p).is_zero


def test_derivative_star_needs_a_metric():
    pres = build_heisenberg(SpaceSpec(family="sl", n=2))
    with pytest.raises(UnbraidError, match="only the so family"):
        star_involution(pres, pres.d(1, 1))


def test_table_guards():
    plain4 = build_quantum_space(SpaceSpec(family="so", n=4))
    with pytest.raises(UnbraidError, match="n = 4 is even"):
        build_phi_euclidean(plain4, "-")
    sl2 = build_quantum_space(SpaceSpec(family="sl", n=2))
    with pytest.raises(UnbraidError, match="so family only"):
        build_phi_euclidean(sl2, "-")
    plain3 = build_quantum_space(SpaceSpec(family="so", n=3))
    with pytest.raises(UnbraidError, match="radial extension"):
        build_phi_euclidean(plain3, "-")
    ext = build_quantum_space(SpaceSpec(family="so", n=3, extended=True))
    with pytest.raises(UnbraidError, match="sign must be"):
        build_phi_euclidean(ext, "weird", free_params={"gamma1": "q"})


def test_so5_table():
    F = CoeffField(5, params=("gamma1", "gamma2"))
    braid = build_braid("so", 5, field=F)
    pres = build_quantum_space(
        SpaceSpec(family="so", n=5, extended=True), braid=braid
    )
    for sign, tri in (("-", "lower"), ("+", "upper")):
        phi = build_phi_euclidean(pres, sign)
        assert phi.triangularity == tri
        nonzero = sum(1 for p in phi.images.values() if not p.is_zero)
        assert nonzero == 15
        assert verify_inversion(phi).passed
        assert verify_phi_exchange(phi).passed


def test_table_round_trip(phi1, ext1):
    text = phi_table_to_text(phi1)
    assert "sign -\n" in text
    assert "param gamma1" in text
    assert "gamma 0 = (-1)/(q - 1)" in text
    back = phi_table_from_text(text, ext1)
    assert back.sign == "-"
    assert back.triangularity == "lower"
    for key, img in phi1.images.items():
        assert ext1.nf(back.images[key] - img).is_zero, key
    for key, img in phi1.antipode_images.items():
        assert ext1.nf(back.antipode_images[key] - img).is_zero, key
    for a, g in phi1.gamma_values.items():
        assert (back.gamma_values[a] - g).is_zero, a


def test_table_text_is_stable(phi1, ext1):
    text = phi_table_to_text(phi1)
    assert phi_table_to_text(phi_table_from_text(text, ext1)) == text


def test_table_import_with_derivative_tokens():
    # a user table on a derivative algebra: scalar diagonal, one strictly
    # lower entry mixing a derivative letter with a power
    pres = build_heisenberg(SpaceSpec(family="so", n=3))
    text = "\n".join(
        [
            "sign -",
            "family so",
            "n 3",
            "# comment lines and blanks are ignored",
            "",
            "image -1 -1 = 1",
            "image 0 0 = ((q + 1)/q**(1/2))*1",
            "image 1 1 = q**(-3/2)",
            "image 1 -1 = d[1,1]**2*x[1,-1] + (q - 1)*d[1,0]",
        ]
    )
    phi = phi_table_from_text(text, pres)
    assert phi.triangularity == "lower"
    F = pres.field
    want = (
        pres.d(1, 1) * pres.d(1, 1) * pres.x(1, -1)
        + (F.q - F.one) * pres.d(1, 0)
    )
    assert pres.nf(phi.images[(1, -1)] - want).is_zero
    assert (
        phi.images[(0, 0)].terms[()] - (F.q + F.one) * F.q_pow(Fraction(-1, 2))
    ).is_zero
    assert verify_inversion(phi).passed


def test_table_import_errors(ext1):
    head = "sign -\nfamily so\nn 3\n"
    with pytest.raises(UnbraidError, match="not declared"):
        phi_table_from_text(head + "param nope\n", ext1)
    with pytest.raises(UnbraidError, match="unknown keyword"):
        phi_table_from_text(head + "frob 1\n", ext1)
    with pytest.raises(UnbraidError, match="bare keyword"):
        phi_table_from_text(head + "image\n", ext1)
    with pytest.raises(UnbraidError, match="unknown generator"):
        phi_table_from_text(head + "image 0 0 = x[3,1]\n", ext1)
    with pytest.raises(UnbraidError, match="missing or bad sign"):
        phi_table_from_text("family so\nn 3\nimage 0 0 = 1\n", ext1)
    with pytest.raises(UnbraidError, match="presentation is"):
        phi_table_from_text("sign -\nfamily sl\nn 3\nimage 0 0 = 1\n", ext1)
    # a hole in the diagonal leaves nothing to invert
    with pytest.raises(UnbraidError, match="zero diagonal"):
        phi_table_from_text(head + "image 0 0 = 1\nimage 1 1 = 1\n", ext1)
