"""Exact serialization of scalars, polynomials, rules and verification
reports.

Three renderings share one source of truth:
  - text: the canonical q-string / generator-token form, identical to the
    table exchange format, so every printed formula can be parsed back;
  - JSON: exact integer root-exponents with rational coefficients as
    strings, validating against the shipped schema;
  - LaTeX: the display form, with half-integer q-powers as square roots
    and the deformation bracket h split off where it divides exactly.

Everything here is deterministic: identical input objects produce
byte-identical output.
"""

import json
import re
from fractions import Fraction
from importlib import resources

from .rewriting import NCPoly
from .scalars import Scalar
from .spaces import SpacePresentation
from .unbraid import UnbraidReport, _poly_text

SCHEMA_NAME = "report.schema.json"


# -- JSON forms --------------------------------------------------------------


def scalar_to_json(x: Scalar) -> dict:
    """Exact fraction-of-polynomials form.

    Each side is a list of [coefficient, [exponents...]] pairs; the first
    exponent is the power of the root s (s**root_order = q**n), the rest
    follow the declared parameters in order.  Coefficients are exact
    rationals rendered as strings.
    """

    def side(poly):
        return [
            [str(Fraction(c.numerator, c.denominator)), [int(e) for e in monom]]
            for monom, c in poly.terms()
        ]

    return {
        "q_string": x.as_q_string(),
        "root_order": x.field.root_order,
        "params": list(x.field.param_names),
        "numer": side(x.fe.numer),
        "denom": side(x.fe.denom),
    }


def poly_to_json(pres: SpacePresentation, p: NCPoly) -> dict:
    terms = [
        {
            "word": [pres.algebra.gens[g].name for g in w],
            "coeff": scalar_to_json(c),
        }
        for w, c in p.sorted_terms()
    ]
    return {"text": _poly_text(pres, p), "terms": terms}


def _label_json(label):
    if isinstance(label, (tuple, list)):
        return [_label_json(x) for x in label]
    return label


def report_to_json(pres: SpacePresentation, report: UnbraidReport) -> dict:
    def failures(items):
        return [
            {"label": _label_json(label), "residual": poly_to_json(pres, res)}
            for label, res in items
        ]

    return {
        "passed": report.passed,
        "summary": report.summary(),
        "commutation_failures": failures(report.commutation_failures),
        "relation_failures": failures(report.relation_failures),
        "residual_braiding_failures": failures(report.residual_braiding_failures),
        "skipped": list(report.skipped),
    }


def check_json(name: str, passed: bool, residuals=None, notes=None) -> dict:
    return {
        "name": name,
        "passed": bool(passed),
        "residuals": residuals or [],
        "notes": notes or [],
    }


def document(command: str, config: dict, passed: bool, **sections) -> dict:
    doc = {
        "tool": "debraid",
        "version": "0.1.0",
        "command": command,
        "config": config,
        "passed": bool(passed),
    }
    doc.update(sections)
    return doc


def render_json(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def schema_text() -> str:
    return (
        resources.files("debraid.schemas").joinpath(SCHEMA_NAME).read_text()
    )


def validate_document(doc: dict) -> None:
    """Validate against the shipped schema; raises on mismatch."""
    import jsonschema

    jsonschema.validate(doc, json.loads(schema_text()))


# -- LaTeX -------------------------------------------------------------------


def _q_pow_latex(e: Fraction) -> str:
    if e == 1:
        return "q"
    if e == Fraction(1, 2):
        return "\\sqrt{q}"
    if e.denominator == 1:
        return f"q^{{{e.numerator}}}"
    return f"q^{{{e.numerator}/{e.denominator}}}"


_PARAM_SUB = re.compile(r"^([A-Za-z]+?)(\d+)$")
_GREEK = ("alpha", "beta", "gamma", "delta", "epsilon", "lambda", "mu", "omega")


def _param_latex(name: str) -> str:
    m = _PARAM_SUB.match(name)
    stem, sub = (m.group(1), m.group(2)) if m else (name, None)
    head = f"\\{stem}" if stem in _GREEK else f"\\mathrm{{{stem}}}"
    return f"{head}_{sub}" if sub else head


def _rational_latex(c: Fraction) -> str:
    if c.denominator == 1:
        return str(c)
    sign = "-" if c < 0 else ""
    return f"{sign}\\tfrac{{{abs(c.numerator)}}}{{{c.denominator}}}"


class _LatexSide:
    """One side (numerator or denominator) of a scalar, pre-factored for
    display: sign, rational content, q-power, h-power, parameter monomial
    and a content-free residual polynomial."""

    def __init__(self, field, poly):
        self.field = field
        h = field.h
        rest = Scalar(field, field._F.new(poly, field._F.ring.one))
        self.h_power = 0
        # split off deformation brackets while the term count drops and
        # the quotient stays a Laurent polynomial (monomial denominator)
        while not rest.is_zero:
            cand = rest / h
            if len(cand.fe.denom.terms()) != 1:
                break
            if len(cand.fe.numer.terms()) >= len(rest.fe.numer.terms()):
                break
            rest = cand
            self.h_power += 1
        terms = []
        shift = rest.fe.denom.terms()[0][0] if not rest.is_zero else ()
        for monom, c in rest.fe.numer.terms():
            laurent = tuple(
                e - (shift[k] if k < len(shift) else 0)
                for k, e in enumerate(monom)
            )
            c = Fraction(c.numerator, c.denominator)
            if not rest.is_zero:
                dc = rest.fe.denom.terms()[0][1]
                c = c / Fraction(dc.numerator, dc.denominator)
            terms.append((laurent, c))
        self.sign = 1
        self.content = Fraction(1)
        self.s_shift = 0
        self.param_shift = ()
        if terms:
            if terms[0][1] < 0:
                self.sign = -1
            from math import gcd

            num = 0
            den = 1
            for _, c in terms:
                num = gcd(num, abs(c.numerator))
                den = den * c.denominator // gcd(den, c.denominator)
            self.content = Fraction(num, den)
            nparams = len(self.field.param_names)
            mins = [
                min(m[k] if k < len(m) else 0 for m, _ in terms)
                for k in range(1 + nparams)
            ]
            # only positive root-powers are pulled out front; a negative
            # minimum stays inside so q^{-1}+1 prints as written
            self.s_shift = max(mins[0], 0) if len(terms) > 1 else mins[0]
            self.param_shift = tuple(mins[1:])
            self.terms = [
                (
                    (m[0] - self.s_shift,)
                    + tuple(
                        (m[k] if k < len(m) else 0) - self.param_shift[k - 1]
                        for k in range(1, 1 + nparams)
                    ),
                    c / self.content * self.sign,
                )
                for m, c in terms
            ]
        else:
            self.terms = []

    def _monomial(self, content, s_shift, h_power, param_shift) -> list[str]:
        out = []
        if content != 1:
            out.append(_rational_latex(content))
        if s_shift:
            out.append(_q_pow_latex(Fraction(s_shift, self.field.root_order)))
        if h_power == 1:
            out.append("h")
        elif h_power:
            out.append(f"h^{{{h_power}}}")
        for name, e in zip(self.field.param_names, param_shift):
            if e == 1:
                out.append(_param_latex(name))
            elif e:
                out.append(f"{_param_latex(name)}^{{{e}}}")
        return out

    def _term_atoms(self, monom, c) -> list[str]:
        atoms = []
        if monom[0]:
            atoms.append(_q_pow_latex(Fraction(monom[0], self.field.root_order)))
        for name, e in zip(self.field.param_names, monom[1:]):
            if e == 1:
                atoms.append(_param_latex(name))
            elif e:
                atoms.append(f"{_param_latex(name)}^{{{e}}}")
        if c != 1 or not atoms:
            atoms.insert(0, _rational_latex(c))
        return atoms

    def render(self, content, s_shift, h_power, param_shift, in_product) -> str:
        """Render with the assigned monomial out front.  The caller only
        ever shrinks this side's own extraction by the part common to the
        other side, so the stored residual terms print unchanged."""
        if not self.terms:
            return "0"
        mono = self._monomial(content, s_shift, h_power, param_shift)
        adjusted = self.terms
        if len(adjusted) == 1:
            atoms = self._term_atoms(*adjusted[0])
            if atoms == ["1"]:
                atoms = [] if mono else atoms
            body = " ".join(mono + atoms)
            return body if body else "1"
        pieces = []
        for monom, c in adjusted:
            atoms = self._term_atoms(monom, c)
            if atoms[0] == "1" and len(atoms) > 1:
                atoms = atoms[1:]
            elif atoms[0] == "-1" and len(atoms) > 1:
                atoms = ["-" + atoms[1]] + atoms[2:]
            pieces.append(" ".join(atoms))
        residual = pieces[0]
        for piece in pieces[1:]:
            residual += f" - {piece[1:]}" if piece.startswith("-") else f" + {piece}"
        if mono or in_product:
            residual = f"({residual})"
        return " ".join(mono + [residual]) if mono else residual


def scalar_latex(x: Scalar, in_product: bool = False) -> str:
    """Deterministic display form of one scalar.

    Each side is factored into sign, rational content, q-power, h-power,
    parameter monomial and a residual sum; monomial factors common to
    numerator and denominator cancel across the fraction bar."""
    if x.is_zero:
        return "0"
    num = _LatexSide(x.field, x.fe.numer)
    den = _LatexSide(x.field, x.fe.denom)
    sign = "-" if num.sign * den.sign < 0 else ""
    content = num.content / den.content
    nc, dc = Fraction(content.numerator), Fraction(content.denominator)
    s_net = num.s_shift - den.s_shift
    ns, ds = (s_net, 0) if s_net >= 0 else (0, -s_net)
    h_net = num.h_power - den.h_power
    nh, dh = (h_net, 0) if h_net >= 0 else (0, -h_net)
    np_, dp = [], []
    for en, ed in zip(
        num.param_shift or (0,) * len(x.field.param_names),
        den.param_shift or (0,) * len(x.field.param_names),
    ):
        e = en - ed
        np_.append(max(e, 0))
        dp.append(max(-e, 0))
    dbody = den.render(dc, ds, dh, tuple(dp), in_product=False)
    if dbody == "1":
        return sign + num.render(nc, ns, nh, tuple(np_), in_product=in_product)
    nbody = num.render(nc, ns, nh, tuple(np_), in_product=False)
    return f"{sign}\\frac{{{nbody}}}{{{dbody}}}"


_IDX_SYMBOL = {-1: "-", 0: "0", 1: "+"}


def _letter_latex(pres: SpacePresentation, gid: int) -> tuple[str, bool]:
    """(rendered letter, belongs in a denominator)."""
    g = pres.algebra.gens[gid]
    n = pres.spec.n
    levels = n // 2

    def idx(i):
        return _IDX_SYMBOL[i] if n == 3 else str(i)

    if g.name.startswith("x["):
        copy, i = g.copy, g.index
        s = f"x^{{{idx(i)}}}" if copy == 1 else f"x^{{{copy},{idx(i)}}}"
        return s, False
    if g.name.startswith("d["):
        copy, i = g.copy, g.index
        s = (
            f"\\partial_{{{idx(i)}}}"
            if copy == 1
            else f"\\partial_{{{copy},{idx(i)}}}"
        )
        return s, False
    if g.name.startswith("rinv["):
        a = g.index
        if a == 0:
            return "x^{0}", True
        return ("r" if levels == 1 else f"r_{{{a}}}"), True
    if g.name.startswith("r["):
        a = g.index
        return ("r" if levels == 1 else f"r_{{{a}}}"), False
    return g.name, False


def _run_latex(letters: list[str]) -> str:
    out = []
    i = 0
    while i < len(letters):
        j = i
        while j < len(letters) and letters[j] == letters[i]:
            j += 1
        if j - i == 1:
            out.append(letters[i])
        else:
            base = letters[i]
            if len(base) > 1 and not (base.startswith("(") and base.endswith(")")):
                base = f"({base})"
            out.append(f"{base}^{{{j - i}}}")
        i = j
    return " ".join(out)


def term_latex(pres: SpacePresentation, word, coeff: Scalar) -> str:
    cs = scalar_latex(coeff)
    pieces = []
    plain: list[str] = []
    i = 0
    word = list(word)
    while i < len(word):
        s, inv = _letter_latex(pres, word[i])
        if not inv:
            plain.append(s)
            i += 1
            continue
        denom = [s]
        i += 1
        while i < len(word):
            s2, inv2 = _letter_latex(pres, word[i])
            if not inv2:
                break
            denom.append(s2)
            i += 1
        numer = _run_latex(plain) if plain else "1"
        plain = []
        pieces.append(f"\\frac{{{numer}}}{{{_run_latex(denom)}}}")
    if plain:
        pieces.append(_run_latex(plain))
    body = " ".join(pieces)
    if not body:
        return cs
    if cs == "1":
        return body
    if cs == "-1":
        return f"-{body}"
    return f"{cs} {body}"


def poly_latex(pres: SpacePresentation, p: NCPoly) -> str:
    terms = p.sorted_terms()
    if not terms:
        return "0"
    out = term_latex(pres, *terms[0])
    for w, c in terms[1:]:
        piece = term_latex(pres, w, c)
        out += f" - {piece[1:]}" if piece.startswith("-") else f" + {piece}"
    return out


def y_label(copy: int, i: int, n: int, latex: bool) -> str:
    sym = _IDX_SYMBOL[i] if n == 3 else str(i)
    return f"y^{{{copy},{sym}}}" if latex else f"y[{copy},{i}]"


def formula_lines(
    pres: SpacePresentation, ys: dict, fmt: str = "text"
) -> list[str]:
    """One line per decoupled generator, copies ascending, indices in
    braid order; `fmt` is "text" or "latex"."""
    lines = []
    for (c, i) in sorted(ys, key=lambda ci: (ci[0], pres.braid.indices.index(ci[1]))):
        y = ys[(c, i)]
        if fmt == "latex":
            lines.append(f"{y_label(c, i, pres.spec.n, True)} = {poly_latex(pres, y)}")
        else:
            lines.append(f"{y_label(c, i, pres.spec.n, False)} = {_poly_text(pres, y)}")
    return lines


# -- rule listings -----------------------------------------------------------

_KIND_CLASS = {0: "coordinate", 1: "radial", 2: "radial", 3: "radial", 4: "derivative"}


def classify_rule(pres: SpacePresentation, lhs) -> str:
    gens = pres.algebra.gens
    kinds = {_KIND_CLASS[gens[g].kind] for g in lhs}
    copies = {gens[g].copy for g in lhs}
    if len(copies) > 1:
        return "cross"
    if kinds == {"coordinate"}:
        return "coordinate"
    if kinds == {"derivative"}:
        return "derivative"
    if kinds == {"radial"}:
        return "radial"
    if "derivative" in kinds and "coordinate" in kinds:
        return "mixed"
    return "radial-mixed"


_CLASS_ORDER = (
    "coordinate",
    "derivative",
    "mixed",
    "radial",
    "radial-mixed",
    "cross",
)


def rules_to_json(pres: SpacePresentation) -> list[dict]:
    items = []
    for lhs in sorted(pres.system.rules, key=lambda w: (len(w), w)):
        rhs = pres.system.rules[lhs]
        items.append(
            {
                "class": classify_rule(pres, lhs),
                "lhs": [pres.algebra.gens[g].name for g in lhs],
                "rhs": poly_to_json(pres, rhs),
            }
        )
    items.sort(key=lambda r: (_CLASS_ORDER.index(r["class"]),))
    return items


def rules_text(pres: SpacePresentation) -> str:
    by_class: dict[str, list[str]] = {}
    for lhs in sorted(pres.system.rules, key=lambda w: (len(w), w)):
        rhs = pres.system.rules[lhs]
        cls = classify_rule(pres, lhs)
        line = "{} -> {}".format(
            "*".join(pres.algebra.gens[g].name for g in lhs),
            _poly_text(pres, rhs),
        )
        by_class.setdefault(cls, []).append(line)
    chunks = []
    for cls in _CLASS_ORDER:
        if cls not in by_class:
            continue
        lines = by_class[cls]
        chunks.append(f"# {cls} rules ({len(lines)})")
        chunks.extend(lines)
    if not chunks:
        return "# no rules\n"
    return "\n".join(chunks) + "\n"


def rules_latex(pres: SpacePresentation) -> str:
    lines = []
    for lhs in sorted(pres.system.rules, key=lambda w: (len(w), w)):
        rhs = pres.system.rules[lhs]
        lhs_tex = _run_latex([_letter_latex(pres, g)[0] for g in lhs])
        lines.append(f"{lhs_tex} &= {poly_latex(pres, rhs)} \\\\")
    return "\n".join(lines) + "\n" if lines else "% no rules\n"
