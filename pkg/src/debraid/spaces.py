"""Builders for the deformed coordinate and Heisenberg algebras and their
braided products.

Each builder assembles a rewrite presentation over one generator alphabet:
per copy, coordinates in ascending index order, then (first copy only, when
the extension is requested) radii r[a] by level, their inverses rinv[a],
the inverse zeroth coordinate rinv[0], and finally derivatives.  Larger
copy numbers sort later, so every cross rule rewrites a word with the
higher copy on the left into combinations with the lower copy on the left.

The radius commutation exponents are never hard-coded.  Each one is forced
by the presentation through the square r[a]^2 = sum g_hk x^h x^k: the
square must q-commute with the target by an even power, and the positive
root is taken (the classical limit of a radius commutes).

Multi-copy extended builds carry rules that move an inverse zeroth
coordinate of the first copy leftward past other copies.  Those rules grow
word length and are excluded from confluence certificates; they terminate
because each application strictly reduces the number of such inversions
remaining to the right of a higher-copy letter, and a step budget guards
normalization regardless.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction

from .braidmat import BraidMatrixData, build_braid, spectral_projectors
from .linalg import ExactMatrix, LinAlgError
from .rewriting import (
    KIND_D,
    KIND_RAD,
    KIND_RINV,
    KIND_X,
    KIND_XINV,
    Algebra,
    GenInfo,
    NCPoly,
    RewriteSystem,
    Word,
    derive_rewrite_rules,
)
from .scalars import CoeffField, Scalar


class SpaceError(ValueError):
    pass


@dataclass(frozen=True)
class SpaceSpec:
    """Configuration of one algebra build.

    copies is the number of braided factors; braiding_sign picks which of
    the two braided products is presented; epsilon is the exponent in the
    mixed derivative rule and only matters for Heisenberg builds; extended
    adjoins radii and inverse radii on the first copy; sphere additionally
    sets the top radius to one.
    """

    family: str
    n: int
    copies: int = 1
    braiding_sign: str = "-"
    epsilon: int = 1
    extended: bool = False
    sphere: bool = False

    def __post_init__(self):
        if self.family not in ("sl", "so"):
            raise SpaceError(f"unknown family {self.family!r}")
        if self.n < 2:
            raise SpaceError("n must be at least 2")
        if self.copies < 1:
            raise SpaceError("copies must be at least 1")
        if self.braiding_sign not in ("+", "-"):
            raise SpaceError("braiding_sign must be '+' or '-'")
        if self.epsilon not in (1, -1):
            raise SpaceError("epsilon must be +1 or -1")
        if self.sphere and not self.extended:
            raise SpaceError("sphere builds require extended=True")
        if self.extended:
            if self.family != "so":
                raise SpaceError("the radial extension exists for the so family only")
            if self.n % 2 == 0:
                raise SpaceError(
                    "the radial extension is not supported for even n"
                )

    @property
    def levels(self) -> tuple[int, ...]:
        """Radius levels carried as generators (top level drops out on the
        sphere, where it equals one)."""
        if not self.extended:
            return ()
        top = self.n // 2
        return tuple(a for a in range(1, top + 1) if not (self.sphere and a == top))


@dataclass
class SpacePresentation:
    """A built algebra: its alphabet, rewrite system, and bookkeeping."""

    spec: SpaceSpec
    braid: BraidMatrixData
    algebra: Algebra
    system: RewriteSystem
    squares: dict[int, NCPoly]
    qcomm_exponents: dict[tuple[int, int], Fraction]
    cross_exponents: dict[tuple[int, int, int], Fraction]
    completion_added: tuple[Word, ...] = ()
    tail_rules: tuple[Word, ...] = ()

    @property
    def field(self) -> CoeffField:
        return self.braid.field

    def x(self, copy: int, i: int) -> NCPoly:
        return self.algebra.gen(f"x[{copy},{i}]")

    def d(self, copy: int, i: int) -> NCPoly:
        return self.algebra.gen(f"d[{copy},{i}]")

    def radius(self, level: int) -> NCPoly:
        if level == 0:
            return self.x(1, 0)
        return self.algebra.gen(f"r[{level}]")

    def radius_inv(self, level: int) -> NCPoly:
        return self.algebra.gen(f"rinv[{level}]")

    def x_ids(self, copy: int) -> list[int]:
        return self.algebra.gens_of_copy(copy, KIND_X)

    def coordinate_ids(self) -> list[int]:
        return [
            i for i, g in enumerate(self.algebra.gens) if g.kind == KIND_X
        ]

    def nf(self, p: NCPoly) -> NCPoly:
        return self.system.normal_form(p)

    def hilbert_counts(self, max_degree: int, gen_ids=None) -> list[int]:
        return self.system.count_normal_words(max_degree, gen_ids)


# -- relation assembly ----------------------------------------------------


def _x_gen_name(copy: int, i: int) -> str:
    return f"x[{copy},{i}]"


def _make_algebra(
    spec: SpaceSpec, braid: BraidMatrixData, with_derivatives: bool
) -> Algebra:
    gens: list[GenInfo] = []
    for copy in range(1, spec.copies + 1):
        for i in braid.indices:
            gens.append(GenInfo(_x_gen_name(copy, i), copy, KIND_X, i))
        if copy == 1 and spec.extended:
            for a in spec.levels:
                gens.append(GenInfo(f"r[{a}]", 1, KIND_RAD, a))
            for a in spec.levels:
                gens.append(GenInfo(f"rinv[{a}]", 1, KIND_RINV, a))
            gens.append(GenInfo("rinv[0]", 1, KIND_XINV, 0))
        if with_derivatives:
            for i in braid.indices:
                gens.append(GenInfo(f"d[{copy},{i}]", copy, KIND_D, i))
    return Algebra(braid.field, gens)


def _antisym_x_relations(
    braid: BraidMatrixData, alg: Algebra, pa: ExactMatrix, copy: int
) -> list[NCPoly]:
    """One vanishing combination per row of the antisymmetrizer acting on
    coordinate pairs of the given copy."""
    rels = []
    for (i, j), row in pa.rows.items():
        terms: dict[Word, Scalar] = {}
        for (h, k), c in row.items():
            w = (alg.gen_id(_x_gen_name(copy, h)), alg.gen_id(_x_gen_name(copy, k)))
            terms[w] = c
        if terms:
            rels.append(NCPoly(alg, terms))
    return rels


def _antisym_d_relations(
    braid: BraidMatrixData, alg: Algebra, pa: ExactMatrix, copy: int
) -> list[NCPoly]:
    """Derivative relations: the antisymmetrizer contracts against the pair
    of derivatives in transposed order, one relation per column."""
    cols: dict[tuple[int, int], dict[Word, Scalar]] = {}
    for (i, j), (h, k), c in pa.entries():
        w = (alg.gen_id(f"d[{copy},{j}]"), alg.gen_id(f"d[{copy},{i}]"))
        cols.setdefault((h, k), {})[w] = cols.get((h, k), {}).get(w, braid.field.zero) + c
    rels = []
    for terms in cols.values():
        p = NCPoly(alg, terms)
        if not p.is_zero:
            rels.append(p)
    return rels


def _mixed_relations(
    spec: SpaceSpec, braid: BraidMatrixData, alg: Algebra, copy: int
) -> list[NCPoly]:
    """The derivative-past-coordinate rule of one copy, as vanishing
    combinations d_i x^j - delta - W x^h d_k with W the scaled braid matrix
    (or its inverse for epsilon = -1)."""
    field = braid.field
    gamma = field.q_pow(Fraction(1, spec.n)) if spec.family == "sl" else field.one
    if spec.epsilon == 1:
        W = braid.rhat.scale(field.q * gamma)
    else:
        W = braid.rhat_inv.scale((field.q * gamma) ** -1)
    combos: dict[tuple[int, int], dict[Word, Scalar]] = {}
    for i in braid.indices:
        for j in braid.indices:
            lhs = (alg.gen_id(f"d[{copy},{i}]"), alg.gen_id(_x_gen_name(copy, j)))
            terms: dict[Word, Scalar] = {lhs: field.one}
            if i == j:
                terms[()] = -field.one
            combos[(i, j)] = terms
    for (j, k), (i, h), c in W.entries():
        w = (alg.gen_id(_x_gen_name(copy, h)), alg.gen_id(f"d[{copy},{k}]"))
        terms = combos[(i, j)]
        terms[w] = terms.get(w, braid.field.zero) - c
    return [NCPoly(alg, t) for t in combos.values()]


def _cross_xx_relations(
    spec: SpaceSpec, braid: BraidMatrixData, alg: Algebra, lo: int, hi: int
) -> list[NCPoly]:
    """Coordinate cross relations between copies lo < hi: the word with the
    higher copy on the left minus its braided reordering."""
    S = braid.rhat_inv if spec.braiding_sign == "-" else braid.rhat
    rels = []
    for (a, b), row in S.rows.items():
        lhs = (alg.gen_id(_x_gen_name(hi, a)), alg.gen_id(_x_gen_name(lo, b)))
        terms: dict[Word, Scalar] = {lhs: braid.field.one}
        for (k, l), c in row.items():
            w = (alg.gen_id(_x_gen_name(lo, k)), alg.gen_id(_x_gen_name(hi, l)))
            terms[w] = terms.get(w, braid.field.zero) - c
        rels.append(NCPoly(alg, terms))
    return rels


def _cross_dd_relations(
    spec: SpaceSpec, braid: BraidMatrixData, alg: Algebra, lo: int, hi: int
) -> list[NCPoly]:
    S = braid.rhat_inv if spec.braiding_sign == "-" else braid.rhat
    combos: dict[tuple[int, int], dict[Word, Scalar]] = {}
    for h in braid.indices:
        for k in braid.indices:
            lhs = (alg.gen_id(f"d[{hi},{h}]"), alg.gen_id(f"d[{lo},{k}]"))
            combos[(k, h)] = {lhs: braid.field.one}
    for (j, i), (k, h), c in S.entries():
        w = (alg.gen_id(f"d[{lo},{i}]"), alg.gen_id(f"d[{hi},{j}]"))
        terms = combos[(k, h)]
        terms[w] = terms.get(w, braid.field.zero) - c
    return [NCPoly(alg, t) for t in combos.values()]


def _cross_dx_relations(
    spec: SpaceSpec, braid: BraidMatrixData, alg: Algebra, lo: int, hi: int
) -> list[NCPoly]:
    """Derivative of the higher copy past a coordinate of the lower one;
    this family reads directly off the braid matrix."""
    S = braid.rhat if spec.braiding_sign == "-" else braid.rhat_inv
    combos: dict[tuple[int, int], dict[Word, Scalar]] = {}
    for i in braid.indices:
        for j in braid.indices:
            lhs = (alg.gen_id(f"d[{hi},{i}]"), alg.gen_id(_x_gen_name(lo, j)))
            combos[(i, j)] = {lhs: braid.field.one}
    for (j, h), (i, k), c in S.entries():
        w = (alg.gen_id(_x_gen_name(lo, k)), alg.gen_id(f"d[{hi},{h}]"))
        terms = combos[(i, j)]
        terms[w] = terms.get(w, braid.field.zero) - c
    return [NCPoly(alg, t) for t in combos.values()]


def _cross_xd_relations(
    spec: SpaceSpec, braid: BraidMatrixData, alg: Algebra, lo: int, hi: int
) -> list[NCPoly]:
    """Coordinate of the higher copy past a derivative of the lower one.
    The defining relation states the reverse ordering, so the coefficient
    matrix here is the exact inverse of that arrangement."""
    S = braid.rhat_inv if spec.braiding_sign == "-" else braid.rhat
    pairs = braid.pair_labels
    entries = {}
    for (j, h), (i, k), c in S.entries():
        entries[((i, j), (k, h))] = c
    arrangement = ExactMatrix.from_entries(braid.field, pairs, pairs, entries)
    try:
        inv = arrangement.inverse()
    except LinAlgError as exc:
        raise SpaceError(f"cross arrangement is singular: {exc}") from exc
    combos: dict[tuple[int, int], dict[Word, Scalar]] = {}
    for k in braid.indices:
        for h in braid.indices:
            lhs = (alg.gen_id(_x_gen_name(hi, k)), alg.gen_id(f"d[{lo},{h}]"))
            combos[(k, h)] = {lhs: braid.field.one}
    for (k, h), (i, j), c in inv.entries():
        w = (alg.gen_id(f"d[{lo},{i}]"), alg.gen_id(_x_gen_name(hi, j)))
        terms = combos[(k, h)]
        terms[w] = terms.get(w, braid.field.zero) - c
    return [NCPoly(alg, t) for t in combos.values()]


# -- radial extension ------------------------------------------------------


def radius_square(
    braid: BraidMatrixData, alg: Algebra, level: int, copy: int = 1
) -> NCPoly:
    """The level-a radius square: the metric contraction of coordinate
    pairs restricted to indices of magnitude at most a."""
    if braid.rho is None:
        raise SpaceError("radius squares exist for the so family only")
    terms: dict[Word, Scalar] = {}
    for i in braid.indices:
        if abs(i) > level:
            continue
        g = braid.field.q_pow(-braid.rho[i])
        w = (
            alg.gen_id(_x_gen_name(copy, i)),
            alg.gen_id(_x_gen_name(copy, -i)),
        )
        terms[w] = g
    return NCPoly(alg, terms)


def derive_qcomm_exponent(
    system: RewriteSystem,
    square: NCPoly,
    target: NCPoly,
    radius: int | None = None,
) -> Fraction:
    """Exponent e such that u * target = q**(2e) * target * u holds for the
    element u whose square is given.  The square must shift past the target
    by a single q-power; anything else means the requested extension does
    not close onto q-commutation rules.

    When a radius generator id is supplied, the corresponding oriented
    rule (with the positive root q**e) is installed on the system.
    """
    u = system.normal_form(square * target)
    v = system.normal_form(target * square)
    if u.is_zero or v.is_zero:
        raise SpaceError("extension inconsistent: square annihilates the target")
    w0 = v.leading_word()
    cu = u.terms.get(w0)
    if cu is None:
        raise SpaceError("extension inconsistent: supports differ")
    ratio = cu / v.terms[w0]
    if not (u - v.map_coeffs(lambda c: c * ratio)).is_zero:
        raise SpaceError("extension inconsistent: not a single-term rescaling")
    r = ratio.q_exponent()
    if r is None:
        raise SpaceError("extension inconsistent: ratio is not a q-power")
    e = r / 2
    if e.denominator not in (1, 2):
        raise SpaceError("extension inconsistent: exponent is not half-integral")
    if radius is not None:
        (tgt_id,) = target.leading_word()
        _install_qcomm(system, radius, tgt_id, e)
    return e


def _install_qcomm(system: RewriteSystem, a: int, b: int, e: Fraction):
    """Rule stating that letter a passes letter b at cost q**e, oriented so
    the larger letter moves right."""
    field = system.alg.field
    if a == b:
        if e != 0:
            raise SpaceError("extension inconsistent: letter fails to commute with itself")
        return
    if e.denominator not in (1, 2):
        raise SpaceError(
            "extension inconsistent: exchange exponent is not half-integral"
        )
    if a < b:
        a, b, e = b, a, -e
    lhs = (a, b)
    if lhs in system.rules:
        existing = system.rules[lhs]
        want = NCPoly(system.alg, {(b, a): field.q_pow(e)})
        if existing.terms != want.terms:
            raise SpaceError(
                f"extension inconsistent: conflicting rule for {system.alg.format_word(lhs)}"
            )
        return
    system.add_rule(lhs, NCPoly(system.alg, {(b, a): field.q_pow(e)}))


def _extension_rules(
    spec: SpaceSpec,
    braid: BraidMatrixData,
    alg: Algebra,
    system: RewriteSystem,
    squares: dict[int, NCPoly],
) -> dict[tuple[int, int], Fraction]:
    """Adjoin the radius letters of the first copy: pair inverses, square
    reductions, and machine-derived q-commutation with every coordinate and
    with each other."""
    field = braid.field
    exponents: dict[tuple[int, int], Fraction] = {}
    x0 = alg.gen_id(_x_gen_name(1, 0))
    x0inv = alg.gen_id("rinv[0]")
    levels = spec.levels

    # exponents of every level square (level 0 included) against the
    # first-copy coordinates
    for a in (0, *levels):
        for i in braid.indices:
            tgt = alg.gen(_x_gen_name(1, i))
            exponents[(a, i)] = derive_qcomm_exponent(system, squares[a], tgt)

    one = NCPoly(alg, {(): field.one})
    for a in levels:
        r = alg.gen_id(f"r[{a}]")
        rinv = alg.gen_id(f"rinv[{a}]")
        for i in braid.indices:
            xi = alg.gen_id(_x_gen_name(1, i))
            _install_qcomm(system, r, xi, exponents[(a, i)])
            _install_qcomm(system, rinv, xi, -exponents[(a, i)])
        system.add_rule((r, rinv), one)
        system.add_rule((rinv, r), one)
        system.add_rule((r, r), system.normal_form(squares[a]))

    # radius-radius exchange: forced by constancy of the paired exponents
    def level_level(b: int, a: int) -> Fraction:
        vals = {
            exponents[(b, i)] + exponents[(b, -i)]
            for i in braid.indices
            if abs(i) <= a
        }
        if len(vals) != 1:
            raise SpaceError(
                "extension inconsistent: radius levels do not q-commute"
            )
        (two_e,) = vals
        return two_e / 2

    for bi, b in enumerate(levels):
        for a in (0, *levels[:bi]):
            e = level_level(b, a)
            rb = alg.gen_id(f"r[{b}]")
            rbinv = alg.gen_id(f"rinv[{b}]")
            ra = x0 if a == 0 else alg.gen_id(f"r[{a}]")
            _install_qcomm(system, rb, ra, e)
            _install_qcomm(system, rbinv, ra, -e)
            if a != 0:
                rainv = alg.gen_id(f"rinv[{a}]")
                _install_qcomm(system, rb, rainv, -e)
                _install_qcomm(system, rbinv, rainv, e)

    # the inverse zeroth coordinate
    system.add_rule((x0, x0inv), one)
    system.add_rule((x0inv, x0), one)
    for i in braid.indices:
        if i == 0:
            continue
        xi = alg.gen_id(_x_gen_name(1, i))
        _install_qcomm(system, x0inv, xi, -exponents[(0, i)])
    for a in levels:
        e = exponents[(a, 0)]
        _install_qcomm(system, x0inv, alg.gen_id(f"r[{a}]"), e)
        _install_qcomm(system, x0inv, alg.gen_id(f"rinv[{a}]"), -e)
    return exponents


def _sphere_relation(
    spec: SpaceSpec, braid: BraidMatrixData, alg: Algebra, system: RewriteSystem
) -> None:
    """Impose that the full metric square equals one.  The square must be
    central first (against every copy), or the quotient is inconsistent."""
    top = braid.n // 2
    s = radius_square(braid, alg, top)
    for copy in range(1, spec.copies + 1):
        for i in braid.indices:
            e = derive_qcomm_exponent(system, s, alg.gen(_x_gen_name(copy, i)))
            if e != 0:
                raise SpaceError(
                    "sphere builds need a central metric square; it shifts"
                    f" past x[{copy},{i}] by q**{2 * e}"
                )
    system.add_relation(s - NCPoly(alg, {(): braid.field.one}))


def _cross_extension_rules(
    spec: SpaceSpec,
    braid: BraidMatrixData,
    alg: Algebra,
    system: RewriteSystem,
    squares: dict[int, NCPoly],
) -> dict[tuple[int, int, int], Fraction]:
    """Rules moving first-copy radius letters left past higher-copy
    coordinates, derived from the squares exactly like the in-copy ones."""
    field = braid.field
    out: dict[tuple[int, int, int], Fraction] = {}
    for beta in range(2, spec.copies + 1):
        for a in spec.levels:
            r = alg.gen_id(f"r[{a}]")
            rinv = alg.gen_id(f"rinv[{a}]")
            for j in braid.indices:
                tgt = alg.gen(_x_gen_name(beta, j))
                try:
                    e = derive_qcomm_exponent(system, squares[a], tgt)
                except SpaceError as exc:
                    raise SpaceError(
                        f"radius level {a} does not q-commute across copies"
                        f" (n={spec.n}); multi-copy extended builds need every"
                        f" radius level to shift by a plain q-power: {exc}"
                    ) from exc
                out[(beta, a, j)] = e
                xj = alg.gen_id(_x_gen_name(beta, j))
                _install_qcomm(system, xj, r, -e)
                _install_qcomm(system, xj, rinv, e)
    return out


def _inversion_tail_rules(
    spec: SpaceSpec,
    braid: BraidMatrixData,
    alg: Algebra,
    system: RewriteSystem,
) -> tuple[Word, ...]:
    """Move the first-copy inverse zeroth coordinate left past higher-copy
    coordinates.

    The cross rule contracts x^{beta,j} x^{1,0} into A[j][m] x^{beta,m}
    with A a coordinate-valued matrix; right-multiplying by the inverse
    coordinate turns the right inverse of A into the replacement for
    x^{beta,j} rinv[0].  A is triangular with scalar multiples of x^{1,0}
    on the diagonal, so the inverse exists by back-substitution.  The
    resulting rules lengthen words and are left out of every confluence
    certificate.
    """
    S = braid.rhat_inv if spec.braiding_sign == "-" else braid.rhat
    idx = braid.indices
    x0inv = alg.gen_id("rinv[0]")

    A: dict[tuple[int, int], NCPoly] = {}
    for j in idx:
        row = S.rows.get((j, 0), {})
        for m in idx:
            terms: dict[Word, Scalar] = {}
            for (k, mm), c in row.items():
                if mm == m:
                    terms[(alg.gen_id(_x_gen_name(1, k)),)] = c
            A[(j, m)] = NCPoly(alg, terms)

    lower = all(A[(j, m)].is_zero for j in idx for m in idx if _pos(idx, m) > _pos(idx, j))
    upper = all(A[(j, m)].is_zero for j in idx for m in idx if _pos(idx, m) < _pos(idx, j))
    if not (lower or upper):
        raise SpaceError("inversion arrangement is not triangular")
    order = list(idx) if lower else list(reversed(idx))

    def diag_inverse(p: NCPoly) -> NCPoly:
        if len(p.terms) != 1:
            raise SpaceError("inversion arrangement has a non-monomial diagonal")
        ((w, c),) = p.terms.items()
        if w != (alg.gen_id(_x_gen_name(1, 0)),):
            raise SpaceError("inversion arrangement diagonal is not the zeroth coordinate")
        return NCPoly(alg, {(x0inv,): c ** -1})

    T: dict[tuple[int, int], NCPoly] = {}
    for pj, j in enumerate(order):
        inv_jj = diag_inverse(A[(j, j)])
        for pm, m in enumerate(order):
            if pm > pj:
                T[(j, m)] = alg.zero()
            elif pm == pj:
                T[(j, m)] = inv_jj
            else:
                acc = alg.zero()
                for l in order[pm:pj]:
                    acc = acc + A[(j, l)] * T[(l, m)]
                T[(j, m)] = system.normal_form(-(inv_jj * acc))

    installed: list[Word] = []
    for beta in range(2, spec.copies + 1):
        for j in idx:
            lhs = (alg.gen_id(_x_gen_name(beta, j)), x0inv)
            rhs = alg.zero()
            for m in idx:
                if not T[(j, m)].is_zero:
                    rhs = rhs + T[(j, m)] * alg.gen(_x_gen_name(beta, m))
            rhs = system.normal_form(rhs)
            if lhs in system.rules:
                # completion already derived this one (it happens for the
                # diagonal entries, which stay quadratic); check agreement
                if not (system.normal_form(system.rules[lhs]) - rhs).is_zero:
                    raise SpaceError(
                        "inversion tail disagrees with a completed rule for "
                        + alg.format_word(lhs)
                    )
                continue
            system.add_rule(lhs, rhs)
            installed.append(lhs)
    return tuple(installed)


def _pos(indices, i) -> int:
    return indices.index(i)


# -- builders --------------------------------------------------------------

EXTENDED_COMPLETION_DEGREE = 4
# with several copies, degree-4 completion starts resolving superpositions
# of cross rules against the coordinate-inverse pair rules; those are the
# inversion tails' territory and re-orienting them there makes the tail
# rules cyclic, so multi-copy builds stop at the certification degree
MULTI_COPY_COMPLETION_DEGREE = 3
# the first-copy letters carry the inverse generators, and the decoupling
# maps multiply two localized words of length up to four from that sector;
# completing it this deep makes those products normalize canonically
FIRST_COPY_COMPLETION_DEGREE = 8


def _completion_degree(spec: SpaceSpec) -> int:
    return EXTENDED_COMPLETION_DEGREE if spec.copies == 1 else MULTI_COPY_COMPLETION_DEGREE


def _certify(
    system: RewriteSystem, what: str, degree: int = 3, alphabet=None
) -> None:
    core = system.decreasing_core()
    bad = core.confluence_failures(degree, alphabet)
    if bad:
        lines = ", ".join(
            f"{system.alg.format_word(w)} -> {d}" for w, d in bad[:4]
        )
        raise SpaceError(
            f"{what} failed degree-{degree} confluence ({len(bad)} unresolved"
            f" superpositions): {lines}"
        )


def _deep_first_copy(alg: Algebra, system: RewriteSystem) -> tuple[Word, ...]:
    """Complete and certify the first-copy sector to the deep degree.

    Cross rules never produce first-copy-only words, so words that mix
    copies normalize through quadratic exchanges into a first-copy prefix
    followed by higher-copy letters; canonical prefixes are what the
    decoupling checks rely on."""
    first = [i for i, g in enumerate(alg.gens) if g.copy == 1]
    added = tuple(
        system.complete(
            FIRST_COPY_COMPLETION_DEGREE, max_new_rules=2000, alphabet=first
        )
    )
    system.inter_reduce()
    _certify(
        system,
        "first-copy sector",
        FIRST_COPY_COMPLETION_DEGREE,
        alphabet=first,
    )
    return added


def build_quantum_space(
    spec: SpaceSpec, braid: BraidMatrixData | None = None
) -> SpacePresentation:
    """The braided product of coordinate algebras described by spec."""
    if braid is None:
        braid = build_braid(spec.family, spec.n)
    elif (braid.family, braid.n) != (spec.family, spec.n):
        raise SpaceError("braid data does not match the spec")
    alg = _make_algebra(spec, braid, with_derivatives=False)
    pa = spectral_projectors(braid)["antisym"]

    relations: list[NCPoly] = []
    for copy in range(1, spec.copies + 1):
        relations.extend(_antisym_x_relations(braid, alg, pa, copy))
    for lo in range(1, spec.copies + 1):
        for hi in range(lo + 1, spec.copies + 1):
            relations.extend(_cross_xx_relations(spec, braid, alg, lo, hi))
    system = derive_rewrite_rules(alg, relations)

    squares: dict[int, NCPoly] = {}
    exponents: dict[tuple[int, int], Fraction] = {}
    cross_exponents: dict[tuple[int, int, int], Fraction] = {}
    added: tuple[Word, ...] = ()
    tails: tuple[Word, ...] = ()
    if spec.extended:
        top = spec.n // 2
        for a in range(0, top + 1):
            squares[a] = radius_square(braid, alg, a)
        exponents = _extension_rules(spec, braid, alg, system, squares)
        cross_exponents = _cross_extension_rules(spec, braid, alg, system, squares)
        if spec.sphere:
            _sphere_relation(spec, braid, alg, system)
        deg = _completion_degree(spec)
        added = tuple(system.complete(deg))
        system.inter_reduce()
        _certify(system, "extended build", deg)
        added = added + _deep_first_copy(alg, system)
        if spec.copies > 1:
            tails = _inversion_tail_rules(spec, braid, alg, system)
    else:
        _certify(system, "coordinate build")

    return SpacePresentation(
        spec=spec,
        braid=braid,
        algebra=alg,
        system=system,
        squares=squares,
        qcomm_exponents=exponents,
        cross_exponents=cross_exponents,
        completion_added=added,
        tail_rules=tails,
    )


def build_heisenberg(
    spec: SpaceSpec, braid: BraidMatrixData | None = None
) -> SpacePresentation:
    """The braided product of deformed Heisenberg algebras: coordinates and
    derivatives with the mixed rule picked by epsilon."""
    if spec.extended or spec.sphere:
        raise SpaceError("the Heisenberg builder does not support the radial extension")
    if braid is None:
        braid = build_braid(spec.family, spec.n)
    elif (braid.family, braid.n) != (spec.family, spec.n):
        raise SpaceError("braid data does not match the spec")
    alg = _make_algebra(spec, braid, with_derivatives=True)
    pa = spectral_projectors(braid)["antisym"]

    relations: list[NCPoly] = []
    for copy in range(1, spec.copies + 1):
        relations.extend(_antisym_x_relations(braid, alg, pa, copy))
        relations.extend(_antisym_d_relations(braid, alg, pa, copy))
        relations.extend(_mixed_relations(spec, braid, alg, copy))
    for lo in range(1, spec.copies + 1):
        for hi in range(lo + 1, spec.copies + 1):
            relations.extend(_cross_xx_relations(spec, braid, alg, lo, hi))
            relations.extend(_cross_dd_relations(spec, braid, alg, lo, hi))
            relations.extend(_cross_dx_relations(spec, braid, alg, lo, hi))
            relations.extend(_cross_xd_relations(spec, braid, alg, lo, hi))
    system = derive_rewrite_rules(alg, relations)
    _certify(system, "Heisenberg build")

    return SpacePresentation(
        spec=spec,
        braid=braid,
        algebra=alg,
        system=system,
        squares={},
        qcomm_exponents={},
        cross_exponents={},
    )


def sphere_quotient(pres: SpacePresentation) -> SpacePresentation:
    """Set the top radius of an extended build to one.

    Every rule of the source presentation is carried over with the top
    radius letters erased; erased rules that collapse to identities are
    dropped, and the radius square rule re-orients into the sphere
    relation.  The result is re-reduced and re-certified.
    """
    spec = pres.spec
    if not spec.extended or spec.sphere:
        raise SpaceError("sphere quotient applies to extended non-sphere builds")
    top = spec.n // 2
    for i in pres.braid.indices:
        if pres.qcomm_exponents.get((top, i)) != 0:
            raise SpaceError("sphere quotient needs a central top radius")
    for (beta, a, j), e in pres.cross_exponents.items():
        if a == top and e != 0:
            raise SpaceError("sphere quotient needs a central top radius")

    new_spec = replace(spec, sphere=True)
    braid = pres.braid
    alg = _make_algebra(new_spec, braid, with_derivatives=False)
    dropped = {
        pres.algebra.gen_id(f"r[{top}]"),
        pres.algebra.gen_id(f"rinv[{top}]"),
    }

    def carry(w: Word) -> Word | None:
        out = []
        for g in w:
            if g in dropped:
                continue
            out.append(alg.gen_id(pres.algebra.gens[g].name))
        return tuple(out)

    system = RewriteSystem(alg, pres.system.step_budget)
    # inversion tails are not carried: mixing them with quotient-side
    # completion flips rule orientations and the combined set cycles.
    # They are re-derived fresh on the quotient below.
    skip = set(pres.system.increasing) | set(pres.tail_rules)
    for lhs, rhs in sorted(pres.system.rules.items(), key=lambda kv: (len(kv[0]), kv[0])):
        if lhs in skip:
            continue
        new_lhs = carry(lhs)
        new_rhs = NCPoly(alg, {carry(w): c for w, c in rhs.terms.items()})
        rel = NCPoly(alg, {new_lhs: braid.field.one}) - new_rhs
        if rel.is_zero:
            continue
        # two carried rules can collapse onto one left side, so each is
        # re-oriented from its normal form rather than installed as is
        system.add_relation(rel)
    deg = _completion_degree(new_spec)
    added = tuple(system.complete(deg))
    system.inter_reduce()
    _certify(system, "sphere quotient", deg)
    added = added + _deep_first_copy(alg, system)
    tails: tuple[Word, ...] = ()
    if spec.copies > 1:
        tails = _inversion_tail_rules(new_spec, braid, alg, system)

    exponents = {k: v for k, v in pres.qcomm_exponents.items() if k[0] != top}
    cross = {k: v for k, v in pres.cross_exponents.items() if k[1] != top}
    squares = {
        a: NCPoly(alg, {carry(w): c for w, c in p.terms.items()})
        for a, p in pres.squares.items()
        if a != top
    }
    return SpacePresentation(
        spec=new_spec,
        braid=braid,
        algebra=alg,
        system=system,
        squares=squares,
        qcomm_exponents=exponents,
        cross_exponents=cross,
        completion_added=added,
        tail_rules=tails,
    )
