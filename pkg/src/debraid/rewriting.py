"""Words, noncommutative polynomials, and rewrite systems over a CoeffField.

Generators are interned to integer ids; a word is a tuple of ids and a
polynomial is a dict word -> Scalar.  The generator *creation order defines
the letter order*: deg-lex on (length, id-tuple) is the term order used to
orient rules and pick leading words, so presentation builders must list
generators in the order that makes their relations reductions (e.g. an
inverse letter directly after the letter it inverts, copy number as the
major key).

Rules rewrite a fixed left-hand word to a polynomial.  Rules whose output
contains a word at least as large as the input (in deg-lex) are flagged as
increasing; they are sound for normalization under a step budget but are
rejected by the confluence/completion routines, which assume deg-lex
termination.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

from .scalars import CoeffField, Scalar

Word = tuple[int, ...]

KIND_X, KIND_RAD, KIND_RINV, KIND_XINV, KIND_D = range(5)

DEFAULT_STEP_BUDGET = 10**6
STEP_BUDGET_ENV = "DEBRAID_STEP_BUDGET"


class RewriteError(ValueError):
    pass


class BudgetExceeded(RuntimeError):
    """Raised when a single normalization exceeds the step budget."""


@dataclass(frozen=True)
class GenInfo:
    """Metadata for one generator.

    kind is one of KIND_X (coordinate), KIND_RAD (radius), KIND_RINV
    (inverse radius), KIND_XINV (inverse of a coordinate), KIND_D
    (derivation).  index is the coordinate index or radius level.
    """

    name: str
    copy: int
    kind: int
    index: int


def deglex_key(w: Word) -> tuple:
    return (len(w), w)


class Algebra:
    """A free algebra on an ordered generator list over a CoeffField."""

    def __init__(self, field: CoeffField, gens: Sequence[GenInfo]):
        names = [g.name for g in gens]
        if len(set(names)) != len(names):
            raise RewriteError("duplicate generator names")
        self.field = field
        self.gens = tuple(gens)
        self.id_of = {g.name: i for i, g in enumerate(gens)}

    def gen_id(self, name: str) -> int:
        try:
            return self.id_of[name]
        except KeyError:
            raise RewriteError(f"unknown generator {name!r}") from None

    def word(self, names: Iterable[str]) -> Word:
        return tuple(self.gen_id(n) for n in names)

    def poly(self, terms: Mapping[Word, Scalar] | None = None) -> "NCPoly":
        return NCPoly(self, dict(terms or {}))

    def zero(self) -> "NCPoly":
        return NCPoly(self, {})

    def one(self) -> "NCPoly":
        return NCPoly(self, {(): self.field.one})

    def gen(self, name: str) -> "NCPoly":
        return NCPoly(self, {(self.gen_id(name),): self.field.one})

    def scalar(self, s: Scalar) -> "NCPoly":
        if s.is_zero:
            return self.zero()
        return NCPoly(self, {(): s})

    def format_word(self, w: Word) -> str:
        if not w:
            return "1"
        return "*".join(self.gens[i].name for i in w)

    def gens_of_copy(self, copy: int, kind: int | None = None) -> list[int]:
        return [
            i
            for i, g in enumerate(self.gens)
            if g.copy == copy and (kind is None or g.kind == kind)
        ]

    def __repr__(self):
        return f"Algebra({len(self.gens)} generators over {self.field!r})"


class NCPoly:
    """Noncommutative polynomial: dict word -> nonzero Scalar."""

    __slots__ = ("alg", "terms")

    def __init__(self, alg: Algebra, terms: dict[Word, Scalar]):
        self.alg = alg
        self.terms = {w: c for w, c in terms.items() if not c.is_zero}

    def _check(self, other: "NCPoly"):
        if self.alg is not other.alg:
            raise RewriteError("mixing algebras")

    def __add__(self, other):
        if isinstance(other, NCPoly):
            self._check(other)
            out = dict(self.terms)
            for w, c in other.terms.items():
                nc = out.get(w)
                nc = c if nc is None else nc + c
                if nc.is_zero:
                    out.pop(w, None)
                else:
                    out[w] = nc
            return NCPoly(self.alg, out)
        s = self.alg.field._coerce(other)
        if s is None:
            return NotImplemented
        return self + self.alg.scalar(s)

    __radd__ = __add__

    def __neg__(self):
        return NCPoly(self.alg, {w: -c for w, c in self.terms.items()})

    def __sub__(self, other):
        if isinstance(other, NCPoly):
            return self + (-other)
        s = self.alg.field._coerce(other)
        if s is None:
            return NotImplemented
        return self + self.alg.scalar(-s)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, NCPoly):
            self._check(other)
            out: dict[Word, Scalar] = {}
            for w1, c1 in self.terms.items():
                for w2, c2 in other.terms.items():
                    w = w1 + w2
                    c = c1 * c2
                    nc = out.get(w)
                    nc = c if nc is None else nc + c
                    if nc.is_zero:
                        out.pop(w, None)
                    else:
                        out[w] = nc
            return NCPoly(self.alg, out)
        s = self.alg.field._coerce(other)
        if s is None:
            return NotImplemented
        if s.is_zero:
            return self.alg.zero()
        return NCPoly(self.alg, {w: c * s for w, c in self.terms.items()})

    def __rmul__(self, other):
        # scalars commute with everything; words never reach here
        s = self.alg.field._coerce(other)
        if s is None:
            return NotImplemented
        return self.__mul__(s)

    def __pow__(self, e: int):
        if not isinstance(e, int) or e < 0:
            return NotImplemented
        out = self.alg.one()
        for _ in range(e):
            out = out * self
        return out

    def __eq__(self, other):
        if isinstance(other, NCPoly):
            return self.alg is other.alg and self.terms == other.terms
        if isinstance(other, int) and other == 0:
            return not self.terms
        return NotImplemented

    def __hash__(self):
        return hash(frozenset(self.terms))

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def coeff(self, w: Word) -> Scalar:
        return self.terms.get(w, self.alg.field.zero)

    def leading_word(self) -> Word:
        if not self.terms:
            raise RewriteError("zero polynomial has no leading word")
        return max(self.terms, key=deglex_key)

    def degree(self) -> int:
        if not self.terms:
            return -1
        return max(len(w) for w in self.terms)

    def sorted_terms(self) -> list[tuple[Word, Scalar]]:
        return sorted(self.terms.items(), key=lambda t: deglex_key(t[0]), reverse=True)

    def map_coeffs(self, fn) -> "NCPoly":
        return NCPoly(self.alg, {w: fn(c) for w, c in self.terms.items()})

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for w, c in self.sorted_terms():
            cs = c.as_q_string()
            ws = self.alg.format_word(w)
            if ws == "1":
                parts.append(cs)
            elif cs == "1":
                parts.append(ws)
            elif cs == "-1":
                parts.append(f"-{ws}")
            else:
                if " " in cs or (cs.startswith("-") and parts):
                    cs = f"({cs})"
                parts.append(f"{cs}*{ws}")
        out = parts[0]
        for p in parts[1:]:
            out += " - " + p[1:] if p.startswith("-") else " + " + p
        return out

    def __repr__(self):
        return f"NCPoly({self})"


def commutator(a: NCPoly, b: NCPoly) -> NCPoly:
    return a * b - b * a


def q_commutator(a: NCPoly, b: NCPoly, t: Scalar) -> NCPoly:
    return a * b - t * (b * a)


class RewriteSystem:
    """A set of word rules over an Algebra, with normalization and
    confluence machinery.

    Normalization is leftmost reduction with a step budget (one step = one
    rule application).  Every stored rule is assumed to be an identity of
    the presented algebra, so normal_form(p) == 0 proves p == 0 regardless
    of confluence.
    """

    def __init__(self, alg: Algebra, step_budget: int | None = None):
        self.alg = alg
        if step_budget is None:
            step_budget = int(os.environ.get(STEP_BUDGET_ENV, DEFAULT_STEP_BUDGET))
        self.step_budget = step_budget
        self.rules: dict[Word, NCPoly] = {}
        self.increasing: set[Word] = set()
        self._lhs_lens: tuple[int, ...] = ()
        self._memo: dict[Word, dict[Word, Scalar]] = {}

    # -- rule management ----------------------------------------------

    def add_rule(self, lhs: Word, rhs: NCPoly):
        if not lhs:
            raise RewriteError("empty left-hand side")
        if lhs in self.rules:
            raise RewriteError(f"duplicate rule for {self.alg.format_word(lhs)}")
        key = deglex_key(lhs)
        increasing = False
        for w in rhs.terms:
            k = deglex_key(w)
            if k == key:
                raise RewriteError(
                    f"rule {self.alg.format_word(lhs)} reproduces its own left side"
                )
            if k > key:
                increasing = True
        self.rules[lhs] = rhs
        if increasing:
            self.increasing.add(lhs)
        self._lhs_lens = tuple(sorted({len(l) for l in self.rules}))
        self._memo.clear()

    def add_relation(self, rel: NCPoly) -> Word | None:
        """Orient a vanishing combination into a rule (leading word to the
        rest), after first normalizing it by the current rules.  Returns
        the new left-hand side, or None if the relation already reduces to
        zero."""
        rel = self.normal_form(rel)
        if rel.is_zero:
            return None
        lhs = rel.leading_word()
        c = rel.terms[lhs]
        rhs = NCPoly(self.alg, {w: -(v / c) for w, v in rel.terms.items() if w != lhs})
        self.add_rule(lhs, rhs)
        return lhs

    def copy(self) -> "RewriteSystem":
        rs = RewriteSystem(self.alg, self.step_budget)
        rs.rules = dict(self.rules)
        rs.increasing = set(self.increasing)
        rs._lhs_lens = self._lhs_lens
        return rs

    def decreasing_core(self) -> "RewriteSystem":
        """Copy holding only the deg-lex-decreasing rules; this is the part
        of the system that confluence checking and completion can certify."""
        rs = RewriteSystem(self.alg, self.step_budget)
        rs.rules = {
            l: r for l, r in self.rules.items() if l not in self.increasing
        }
        rs._lhs_lens = tuple(sorted({len(l) for l in rs.rules}))
        return rs

    def inter_reduce(self):
        """Bring every right-hand side to normal form under the full rule
        set.  Right-hand sides never contain their own left side as a
        factor, so this is a finite cleanup."""
        for _ in range(len(self.rules) + 1):
            changed = False
            for lhs in list(self.rules):
                rhs = self.rules[lhs]
                red = self.normal_form(rhs)
                if red.terms != rhs.terms:
                    self.rules[lhs] = red
                    self._memo.clear()
                    changed = True
            if not changed:
                return
        raise RewriteError("inter-reduction did not stabilize")

    # -- normalization ------------------------------------------------

    def _find_redex(self, w: Word) -> tuple[int, Word] | None:
        rules = self.rules
        lens = self._lhs_lens
        n = len(w)
        for i in range(n):
            for L in lens:
                if i + L > n:
                    break
                cand = w[i : i + L]
                if cand in rules:
                    return i, cand
        return None

    def reduce_word(self, w: Word) -> dict[Word, Scalar]:
        """Normal form of a single word as a dict word -> coefficient."""
        memo = self._memo
        hit = memo.get(w)
        if hit is not None:
            return hit
        field = self.alg.field
        out: dict[Word, Scalar] = {}
        agenda: list[tuple[Word, Scalar]] = [(w, field.one)]
        steps = 0
        while agenda:
            u, c = agenda.pop()
            if u is not w:
                hit = memo.get(u)
                if hit is not None:
                    for t, d in hit.items():
                        nc = out.get(t)
                        nc = c * d if nc is None else nc + c * d
                        if nc.is_zero:
                            out.pop(t, None)
                        else:
                            out[t] = nc
                    continue
            red = self._find_redex(u)
            if red is None:
                nc = out.get(u)
                nc = c if nc is None else nc + c
                if nc.is_zero:
                    out.pop(u, None)
                else:
                    out[u] = nc
                continue
            steps += 1
            if steps > self.step_budget:
                raise BudgetExceeded(
                    f"normalization exceeded {self.step_budget} steps"
                    f" (set {STEP_BUDGET_ENV} to raise the budget)"
                )
            i, lhs = red
            rhs = self.rules[lhs]
            pre, post = u[:i], u[i + len(lhs) :]
            for t, d in rhs.terms.items():
                agenda.append((pre + t + post, c * d))
        memo[w] = out
        return out

    def normal_form(self, p: NCPoly | Word) -> NCPoly:
        if isinstance(p, tuple):
            p = NCPoly(self.alg, {p: self.alg.field.one})
        out: dict[Word, Scalar] = {}
        for w, c in p.terms.items():
            for t, d in self.reduce_word(w).items():
                nc = out.get(t)
                nc = c * d if nc is None else nc + c * d
                if nc.is_zero:
                    out.pop(t, None)
                else:
                    out[t] = nc
        return NCPoly(self.alg, out)

    def is_normal(self, w: Word) -> bool:
        return self._find_redex(w) is None

    # -- confluence ---------------------------------------------------

    def _require_decreasing(self, what: str):
        if self.increasing:
            names = ", ".join(self.alg.format_word(l) for l in sorted(self.increasing))
            raise RewriteError(
                f"{what} assumes deg-lex termination, but the system has"
                f" degree-increasing rules ({names})"
            )

    def critical_pairs(
        self,
        max_degree: int | None = None,
        alphabet: Sequence[int] | None = None,
    ) -> Iterator[tuple[Word, NCPoly, NCPoly]]:
        """Yield (superposition word, route A one-step result, route B
        one-step result) for every overlap or containment of two rules.
        With an alphabet, only superpositions of rules whose left sides
        stay inside that letter set are considered."""
        lhss = sorted(self.rules, key=deglex_key)
        if alphabet is not None:
            aset = set(alphabet)
            lhss = [l for l in lhss if set(l) <= aset]
        for l1 in lhss:
            r1 = self.rules[l1]
            for l2 in lhss:
                r2 = self.rules[l2]
                # suffix of l1 overlaps prefix of l2
                for k in range(1, min(len(l1), len(l2))):
                    if l1[len(l1) - k :] == l2[:k]:
                        w = l1 + l2[k:]
                        if max_degree is not None and len(w) > max_degree:
                            continue
                        a = r1 * NCPoly(self.alg, {l2[k:]: self.alg.field.one})
                        b = NCPoly(self.alg, {l1[: len(l1) - k]: self.alg.field.one}) * r2
                        yield w, a, b
                # l2 strictly inside l1
                if len(l2) < len(l1):
                    for i in range(len(l1) - len(l2) + 1):
                        if l1[i : i + len(l2)] == l2:
                            if max_degree is not None and len(l1) > max_degree:
                                continue
                            pre = NCPoly(self.alg, {l1[:i]: self.alg.field.one})
                            post = NCPoly(self.alg, {l1[i + len(l2) :]: self.alg.field.one})
                            yield l1, r1, pre * r2 * post

    def confluence_failures(
        self, max_degree: int, alphabet: Sequence[int] | None = None
    ) -> list[tuple[Word, NCPoly]]:
        """Superpositions up to max_degree whose two reduction routes do
        not meet; empty list certifies local confluence to that degree
        (restricted to the given letter set when one is supplied)."""
        self._require_decreasing("confluence checking")
        bad = []
        for w, a, b in self.critical_pairs(max_degree, alphabet):
            d = self.normal_form(a) - self.normal_form(b)
            if not d.is_zero:
                bad.append((w, d))
        return bad

    def complete(
        self,
        max_degree: int,
        max_new_rules: int = 200,
        alphabet: Sequence[int] | None = None,
    ) -> list[Word]:
        """Bounded Knuth-Bendix completion: resolve all critical pairs of
        superposition degree <= max_degree by adding oriented rules.  Added
        rules are differences of two reductions of the same word, hence
        identities; returns their left-hand sides."""
        self._require_decreasing("completion")
        added: list[Word] = []
        while True:
            failures = self.confluence_failures(max_degree, alphabet)
            if not failures:
                return added
            round_added = 0
            for _, d in failures:
                lhs = self.add_relation(d)
                if lhs is not None:
                    added.append(lhs)
                    round_added += 1
                    if len(added) > max_new_rules:
                        raise RewriteError("completion exceeded max_new_rules")
            if round_added == 0:
                raise RewriteError("completion stalled with unresolved pairs")

    # -- normal word counting ------------------------------------------

    def count_normal_words(self, max_degree: int, gen_ids: Sequence[int] | None = None) -> list[int]:
        """Number of rule-irreducible words of each length 0..max_degree.

        A word is normal iff it avoids every rule left-hand side as a
        factor, so this is a forbidden-factor count over the given
        alphabet (default: all generators)."""
        alphabet = tuple(gen_ids if gen_ids is not None else range(len(self.alg.gens)))
        forbidden = [l for l in self.rules if all(g in set(alphabet) for g in l)]
        prefixes = {(): 0}
        for f in forbidden:
            for i in range(1, len(f)):
                prefixes.setdefault(f[:i], len(prefixes))
        states = sorted(prefixes, key=lambda p: (len(p), p))
        state_ix = {p: i for i, p in enumerate(states)}
        fset = set(forbidden)

        def step(state: Word, a: int):
            t = state + (a,)
            # dead if some forbidden word is a suffix of t
            for f in fset:
                if len(f) <= len(t) and t[len(t) - len(f) :] == f:
                    return None
            while t and t not in state_ix:
                t = t[1:]
            return state_ix[t]

        trans = [[step(p, a) for a in alphabet] for p in states]
        counts = [1]
        vec = [0] * len(states)
        vec[state_ix[()]] = 1
        for _ in range(max_degree):
            nxt = [0] * len(states)
            for si, amount in enumerate(vec):
                if not amount:
                    continue
                for ti in trans[si]:
                    if ti is not None:
                        nxt[ti] += amount
            vec = nxt
            counts.append(sum(vec))
        return counts

    def __repr__(self):
        return (
            f"RewriteSystem({len(self.rules)} rules,"
            f" {len(self.increasing)} increasing)"
        )


def derive_rewrite_rules(
    alg: Algebra,
    relations: Iterable[NCPoly],
    step_budget: int | None = None,
) -> RewriteSystem:
    """Orient a list of vanishing combinations into an inter-reduced
    rewrite system.  Dependent relations are absorbed silently; a relation
    set that forces a single generator to reduce (to zero or to anything
    else) is rejected as degenerate."""
    rs = RewriteSystem(alg, step_budget)
    for rel in relations:
        lhs = rs.add_relation(rel)
        if lhs is not None and len(lhs) < 2:
            raise RewriteError(
                f"degenerate relation set: generator {alg.format_word(lhs)}"
                " is forced to a smaller expression"
            )
    rs.inter_reduce()
    return rs
