"""Exact coefficient arithmetic over Q(q^(1/2N), parameters).

Every coefficient in this package lives in one rational function field
F = Q(s, p1, p2, ...) where s stands for q^(1/(2N)).  The fractional
powers of q that the deformed algebras need, q^(1/N) for the sl family
and q^(1/2) for the so family, are then integer powers of s, so all
arithmetic is exact and zero-testing is decidable.

The field carries a bar involution (s -> 1/s, rationals fixed, declared
images on parameters) and a classical-limit evaluator that reports the
pole order at q = 1.
"""

from __future__ import annotations

import re
from fractions import Fraction
from typing import Mapping, Sequence, Union

from sympy import QQ
from sympy.polys.fields import FracField

RationalLike = Union[int, Fraction]

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


class ScalarError(ValueError):
    pass


class CoeffField:
    """The field Q(q^(1/2N), *params) with a bar involution.

    n           the N of sl(N)/so(N); the internal root generator s
                satisfies s**(2n) == q.
    params      extra transcendental parameters (normalization constants).
    bar_images  optional map param name -> scalar expression (in the
                grammar of parse_scalar) giving the bar image of that
                parameter.  Undeclared parameters are bar-fixed.  The
                resulting map must be an involution; this is checked.
    """

    def __init__(
        self,
        n: int,
        params: Sequence[str] = (),
        bar_images: Mapping[str, Union[str, "Scalar"]] | None = None,
    ):
        if n < 2:
            raise ScalarError(f"need n >= 2, got {n}")
        for p in params:
            if not _IDENT_RE.fullmatch(p) or p in ("q", "s"):
                raise ScalarError(f"bad parameter name {p!r}")
        if len(set(params)) != len(params):
            raise ScalarError("duplicate parameter names")
        self.n = n
        self.root_order = 2 * n
        self.param_names = tuple(params)
        self._F = FracField(" ".join(("s",) + self.param_names), QQ)
        self._gens = self._F.gens
        self._s = self._gens[0]
        self.zero = Scalar(self, self._F.zero)
        self.one = Scalar(self, self._F.one)
        self.q = self.q_pow(1)
        self.q_inv = self.q_pow(-1)
        # k = q - 1/q; h = sqrt(q) - 1/sqrt(q) (always defined, 2n is even)
        self.k = self.q - self.q_inv
        self.h = self.q_pow(Fraction(1, 2)) - self.q_pow(Fraction(-1, 2))

        self._bar_gen_images = [self._F.new(self._F.ring.one, self._s.numer)]
        declared = dict(bar_images or {})
        unknown = set(declared) - set(self.param_names)
        if unknown:
            raise ScalarError(f"bar image for undeclared parameter(s) {sorted(unknown)}")
        for name, gen in zip(self.param_names, self._gens[1:]):
            img = declared.get(name)
            if img is None:
                self._bar_gen_images.append(gen)
            elif isinstance(img, Scalar):
                self._check_mine(img)
                self._bar_gen_images.append(img.fe)
            else:
                self._bar_gen_images.append(parse_scalar(img, self).fe)
        for name, gen in zip(("s",) + self.param_names, self._gens):
            twice = self._bar_fe(self._bar_fe(gen))
            if twice != gen:
                raise ScalarError(f"declared bar images are not an involution (fails on {name})")

    # -- constructors ------------------------------------------------

    def rational(self, r: RationalLike) -> "Scalar":
        r = Fraction(r)
        return Scalar(self, self._F.ground_new(QQ(r.numerator, r.denominator)))

    def q_pow(self, r: RationalLike) -> "Scalar":
        """q**r as a Scalar; r must be a multiple of 1/(2n)."""
        e = Fraction(r) * self.root_order
        if e.denominator != 1:
            raise ScalarError(
                f"q**({Fraction(r)}) is not in the field (root order {self.root_order})"
            )
        return Scalar(self, self._s ** int(e))

    def param(self, name: str) -> "Scalar":
        try:
            i = self.param_names.index(name)
        except ValueError:
            raise ScalarError(f"unknown parameter {name!r}") from None
        return Scalar(self, self._gens[1 + i])

    def parse(self, text: str) -> "Scalar":
        return parse_scalar(text, self)

    # -- internals ---------------------------------------------------

    def _check_mine(self, x: "Scalar"):
        if x.field is not self:
            raise ScalarError("scalar belongs to a different field")

    def _coerce(self, x) -> "Scalar | None":
        if isinstance(x, Scalar):
            if x.field is not self:
                raise ScalarError("scalar belongs to a different field")
            return x
        if isinstance(x, (int, Fraction)):
            return self.rational(x)
        return None

    def _ev_poly(self, p, images):
        # evaluate a PolyElement at the given generator images (FracElements)
        out = self._F.zero
        for monom, coeff in p.terms():
            t = self._F.ground_new(coeff)
            for img, e in zip(images, monom):
                if e:
                    t = t * img**e
            out = out + t
        return out

    def _bar_fe(self, fe):
        num = self._ev_poly(fe.numer, self._bar_gen_images)
        den = self._ev_poly(fe.denom, self._bar_gen_images)
        return num / den

    def _s1_eval(self, p):
        # PolyElement evaluated at s = 1, parameters kept; returns FracElement
        imgs = [self._F.one] + list(self._gens[1:])
        return self._ev_poly(p, imgs)

    def _s1_mult(self, fe):
        # fe is a lifted polynomial (denom 1); returns (m, reduced) with
        # fe = (s-1)**m * reduced and reduced nonzero at s = 1
        sm1 = self._s - self._F.one
        m = 0
        while self._s1_eval(fe.numer) == self._F.zero:
            fe = fe / sm1
            m += 1
        return m, fe

    def __repr__(self):
        ps = ", ".join(self.param_names)
        return f"CoeffField(n={self.n}{', ' + ps if ps else ''})"


class Scalar:
    """Element of a CoeffField.  Immutable, hashable, exact."""

    __slots__ = ("field", "fe")

    def __init__(self, field: CoeffField, fe):
        self.field = field
        self.fe = fe

    # -- arithmetic --------------------------------------------------

    def __add__(self, other):
        o = self.field._coerce(other)
        if o is None:
            return NotImplemented
        return Scalar(self.field, self.fe + o.fe)

    __radd__ = __add__

    def __sub__(self, other):
        o = self.field._coerce(other)
        if o is None:
            return NotImplemented
        return Scalar(self.field, self.fe - o.fe)

    def __rsub__(self, other):
        o = self.field._coerce(other)
        if o is None:
            return NotImplemented
        return Scalar(self.field, o.fe - self.fe)

    def __mul__(self, other):
        o = self.field._coerce(other)
        if o is None:
            return NotImplemented
        return Scalar(self.field, self.fe * o.fe)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self.field._coerce(other)
        if o is None:
            return NotImplemented
        if o.fe == self.field._F.zero:
            raise ZeroDivisionError("scalar division by zero")
        return Scalar(self.field, self.fe / o.fe)

    def __rtruediv__(self, other):
        o = self.field._coerce(other)
        if o is None:
            return NotImplemented
        if self.fe == self.field._F.zero:
            raise ZeroDivisionError("scalar division by zero")
        return Scalar(self.field, o.fe / self.fe)

    def __pow__(self, e: int):
        if not isinstance(e, int):
            return NotImplemented
        if e < 0 and self.fe == self.field._F.zero:
            raise ZeroDivisionError("scalar division by zero")
        return Scalar(self.field, self.fe**e)

    def __neg__(self):
        return Scalar(self.field, -self.fe)

    def __eq__(self, other):
        if isinstance(other, Scalar):
            return self.field is other.field and self.fe == other.fe
        if isinstance(other, (int, Fraction)):
            return self.fe == self.field.rational(other).fe
        return NotImplemented

    def __hash__(self):
        return hash(self.fe)

    def __bool__(self):
        return self.fe != self.field._F.zero

    @property
    def is_zero(self) -> bool:
        return self.fe == self.field._F.zero

    @property
    def is_one(self) -> bool:
        return self.fe == self.field._F.one

    # -- structure ---------------------------------------------------

    def bar(self) -> "Scalar":
        """The bar involution: s -> 1/s, declared images on parameters."""
        return Scalar(self.field, self.field._bar_fe(self.fe))

    def q_exponent(self) -> Fraction | None:
        """If this scalar is exactly q**r for a rational r, return r;
        otherwise None.  Parameters do not count as q-powers."""
        num, den = self.fe.numer, self.fe.denom
        deg = []
        for p in (num, den):
            terms = list(p.terms())
            if len(terms) != 1:
                return None
            monom, coeff = terms[0]
            if coeff != 1:
                return None
            if any(e for e in monom[1:]):
                return None
            deg.append(monom[0])
        return Fraction(deg[0] - deg[1], 2 * self.field.n)

    def eval_classical(self) -> tuple[int, "Scalar | None"]:
        """Behaviour at q = 1 (i.e. s = 1).

        Returns (pole_order, value): pole_order > 0 means a pole of that
        order and value is None; pole_order <= 0 means the limit exists
        and value is the (parameter-dependent) limit, zero to order
        -pole_order if negative.
        """
        F = self.field._F
        if self.fe == F.zero:
            return (0, self.field.zero)
        mn, rn = self.field._s1_mult(F.new(self.fe.numer, F.ring.one))
        md, rd = self.field._s1_mult(F.new(self.fe.denom, F.ring.one))
        order = md - mn
        if order > 0:
            return (order, None)
        if order < 0:
            return (order, self.field.zero)
        val = self.field._s1_eval(rn.numer) / self.field._s1_eval(rd.numer)
        return (0, Scalar(self.field, val))

    # -- rendering ---------------------------------------------------

    def __str__(self):
        return str(self.fe)

    def __repr__(self):
        return f"Scalar({self.as_q_string()})"

    def _q_monom_str(self, monom, coeff) -> str:
        parts = []
        se = monom[0]
        if se:
            e = Fraction(se, self.field.root_order)
            if e == 1:
                parts.append("q")
            elif e.denominator == 1 and e > 0:
                parts.append(f"q**{e.numerator}")
            else:
                parts.append(f"q**({e})")
        for name, pe in zip(self.field.param_names, monom[1:]):
            if pe == 1:
                parts.append(name)
            elif pe:
                parts.append(f"{name}**{pe}")
        c = Fraction(coeff.numerator, coeff.denominator)
        if not parts:
            return str(c)
        body = "*".join(parts)
        if c == 1:
            return body
        if c == -1:
            return f"-{body}"
        cs = str(c) if c.denominator == 1 else f"({c})"
        return f"{cs}*{body}"

    def _q_poly_str(self, p) -> str:
        terms = p.terms()
        if not terms:
            return "0"
        out = self._q_monom_str(*terms[0])
        for monom, coeff in terms[1:]:
            piece = self._q_monom_str(monom, coeff)
            if piece.startswith("-"):
                out += " - " + piece[1:]
            else:
                out += " + " + piece
        return out

    def as_q_string(self) -> str:
        """Deterministic rendering with q-powers (exponents as fractions)."""
        num = self._q_poly_str(self.fe.numer)
        den_poly = self.fe.denom
        if den_poly == self.field._F.ring.one:
            return num
        den = self._q_poly_str(den_poly)
        if " " in num or num.startswith("-"):
            num = f"({num})"
        if " " in den or "*" in den.replace("**", "^^") or den.startswith("-"):
            den = f"({den})"
        return f"{num}/{den}"


# -- parsing ----------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+)|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<pow>\*\*)"
    r"|(?P<op>[+\-*/()]))"
)


def _tokenize(text: str):
    pos = 0
    toks = []
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m or m.end() == pos:
            raise ScalarError(f"bad character in scalar at {text[pos:pos+10]!r}")
        pos = m.end()
        if m.lastgroup == "num":
            toks.append(("num", int(m.group("num"))))
        elif m.lastgroup == "name":
            toks.append(("name", m.group("name")))
        elif m.lastgroup == "pow":
            toks.append(("pow", "**"))
        else:
            toks.append(("op", m.group("op")))
    toks.append(("end", None))
    return toks


class _ScalarParser:
    """Recursive descent for  +,-,*,/,**,(),q,params,rationals.

    Exponents are integers or parenthesized rationals: q**2, q**-1,
    q**(1/2), q**(-3/2).  Fractional exponents are allowed on q only.
    """

    def __init__(self, text: str, field: CoeffField):
        self.toks = _tokenize(text)
        self.i = 0
        self.field = field

    def peek(self):
        return self.toks[self.i]

    def take(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect_op(self, op):
        kind, val = self.take()
        if kind != "op" or val != op:
            raise ScalarError(f"expected {op!r}")

    def parse(self) -> Scalar:
        v = self.expr()
        if self.peek()[0] != "end":
            raise ScalarError("trailing input in scalar expression")
        return v

    def expr(self) -> Scalar:
        kind, val = self.peek()
        neg = False
        while kind == "op" and val in "+-":
            self.take()
            if val == "-":
                neg = not neg
            kind, val = self.peek()
        v = self.term()
        if neg:
            v = -v
        while self.peek() == ("op", "+") or self.peek() == ("op", "-"):
            _, op = self.take()
            w = self.term()
            v = v + w if op == "+" else v - w
        return v

    def term(self) -> Scalar:
        v = self.factor()
        while self.peek() == ("op", "*") or self.peek() == ("op", "/"):
            _, op = self.take()
            w = self.factor()
            v = v * w if op == "*" else v / w
        return v

    def factor(self) -> Scalar:
        kind, val = self.peek()
        if kind == "op" and val in "+-":
            self.take()
            v = self.factor()
            return -v if val == "-" else v
        return self.power()

    def power(self) -> Scalar:
        kind, val = self.peek()
        is_q = kind == "name" and val == "q"
        base = self.atom()
        if self.peek() != ("pow", "**"):
            return base
        self.take()
        e = self.exponent()
        if e.denominator == 1:
            return base ** e.numerator
        if not is_q:
            raise ScalarError("fractional exponent allowed on q only")
        return self.field.q_pow(e)

    def exponent(self) -> Fraction:
        # bare exponents are integers; rationals need parens: q**(1/2)
        kind, val = self.peek()
        if kind == "op" and val == "(":
            self.take()
            e = self._signed_rational(allow_slash=True)
            self.expect_op(")")
            return e
        return self._signed_rational(allow_slash=False)

    def _signed_rational(self, allow_slash: bool) -> Fraction:
        sign = 1
        kind, val = self.peek()
        while kind == "op" and val in "+-":
            self.take()
            if val == "-":
                sign = -sign
            kind, val = self.peek()
        kind, val = self.take()
        if kind != "num":
            raise ScalarError("expected a number in exponent")
        num = val
        if allow_slash and self.peek() == ("op", "/"):
            self.take()
            kind, val = self.take()
            if kind != "num":
                raise ScalarError("expected a denominator in exponent")
            return Fraction(sign * num, val)
        return Fraction(sign * num)

    def atom(self) -> Scalar:
        kind, val = self.take()
        if kind == "num":
            v: Scalar = self.field.rational(val)
            if self.peek() == ("op", "/"):
                # lookahead: plain rational like 3/4 handled by term-level '/'
                pass
            return v
        if kind == "name":
            if val == "q":
                return self.field.q
            if val == "s":
                raise ScalarError("the internal root symbol is not part of the grammar; use q**(p/r)")
            return self.field.param(val)
        if kind == "op" and val == "(":
            v = self.expr()
            self.expect_op(")")
            return v
        raise ScalarError(f"unexpected token {val!r} in scalar expression")


def parse_scalar(text: str, field: CoeffField) -> Scalar:
    """Parse a scalar expression over q and the field's parameters."""
    return _ScalarParser(text, field).parse()
