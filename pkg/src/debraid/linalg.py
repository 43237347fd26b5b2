"""Exact sparse linear algebra over a coefficient field.

Matrices are label-indexed: rows and columns are identified by arbitrary
hashable labels (index tuples, words) rather than integer positions, which
keeps braid-matrix and rewrite-system code free of flattening bookkeeping.
Only nonzero entries are stored.
"""

from __future__ import annotations

from typing import Callable, Hashable, Iterable, Mapping

from .scalars import CoeffField, Scalar

Label = Hashable


class LinAlgError(ValueError):
    pass


class ExactMatrix:
    __slots__ = ("field", "row_labels", "col_labels", "rows")

    def __init__(
        self,
        field: CoeffField,
        row_labels: Iterable[Label],
        col_labels: Iterable[Label],
        rows: Mapping[Label, Mapping[Label, Scalar]] | None = None,
    ):
        self.field = field
        self.row_labels = tuple(row_labels)
        self.col_labels = tuple(col_labels)
        rset, cset = set(self.row_labels), set(self.col_labels)
        if len(rset) != len(self.row_labels) or len(cset) != len(self.col_labels):
            raise LinAlgError("duplicate labels")
        data: dict[Label, dict[Label, Scalar]] = {}
        for r, row in (rows or {}).items():
            if r not in rset:
                raise LinAlgError(f"unknown row label {r!r}")
            clean = {}
            for c, v in row.items():
                if c not in cset:
                    raise LinAlgError(f"unknown column label {c!r}")
                if not v.is_zero:
                    clean[c] = v
            if clean:
                data[r] = clean
        self.rows = data

    # -- constructors --------------------------------------------------

    @classmethod
    def identity(cls, field: CoeffField, labels: Iterable[Label]) -> "ExactMatrix":
        labels = tuple(labels)
        return cls(field, labels, labels, {l: {l: field.one} for l in labels})

    @classmethod
    def from_entries(
        cls,
        field: CoeffField,
        row_labels: Iterable[Label],
        col_labels: Iterable[Label],
        entries: Mapping[tuple[Label, Label], Scalar],
    ) -> "ExactMatrix":
        rows: dict[Label, dict[Label, Scalar]] = {}
        for (r, c), v in entries.items():
            rows.setdefault(r, {})[c] = v
        return cls(field, row_labels, col_labels, rows)

    # -- basic access ----------------------------------------------------

    def entry(self, r: Label, c: Label) -> Scalar:
        return self.rows.get(r, {}).get(c, self.field.zero)

    @property
    def is_zero(self) -> bool:
        return not self.rows

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.row_labels), len(self.col_labels))

    def entries(self):
        for r, row in self.rows.items():
            for c, v in row.items():
                yield r, c, v

    # -- arithmetic ------------------------------------------------------

    def _like(self, rows) -> "ExactMatrix":
        m = ExactMatrix.__new__(ExactMatrix)
        m.field = self.field
        m.row_labels = self.row_labels
        m.col_labels = self.col_labels
        m.rows = rows
        return m

    def _check_same_shape(self, other: "ExactMatrix"):
        if self.field is not other.field:
            raise LinAlgError("mixing fields")
        if self.row_labels != other.row_labels or self.col_labels != other.col_labels:
            raise LinAlgError("shape/label mismatch")

    def __add__(self, other: "ExactMatrix") -> "ExactMatrix":
        self._check_same_shape(other)
        rows: dict[Label, dict[Label, Scalar]] = {}
        for r in set(self.rows) | set(other.rows):
            a, b = self.rows.get(r, {}), other.rows.get(r, {})
            row = {}
            for c in set(a) | set(b):
                v = a.get(c, self.field.zero) + b.get(c, self.field.zero)
                if not v.is_zero:
                    row[c] = v
            if row:
                rows[r] = row
        return self._like(rows)

    def __neg__(self) -> "ExactMatrix":
        return self._like({r: {c: -v for c, v in row.items()} for r, row in self.rows.items()})

    def __sub__(self, other: "ExactMatrix") -> "ExactMatrix":
        return self + (-other)

    def scale(self, s: Scalar) -> "ExactMatrix":
        if s.is_zero:
            return self._like({})
        return self._like(
            {r: {c: s * v for c, v in row.items()} for r, row in self.rows.items()}
        )

    def __mul__(self, other):
        if isinstance(other, ExactMatrix):
            if self.field is not other.field:
                raise LinAlgError("mixing fields")
            if self.col_labels != other.row_labels:
                raise LinAlgError("inner labels do not match")
            rows: dict[Label, dict[Label, Scalar]] = {}
            for r, arow in self.rows.items():
                acc: dict[Label, Scalar] = {}
                for m, s in arow.items():
                    brow = other.rows.get(m)
                    if not brow:
                        continue
                    for c, t in brow.items():
                        st = s * t
                        if c in acc:
                            acc[c] = acc[c] + st
                        else:
                            acc[c] = st
                acc = {c: v for c, v in acc.items() if not v.is_zero}
                if acc:
                    rows[r] = acc
            m = ExactMatrix.__new__(ExactMatrix)
            m.field = self.field
            m.row_labels = self.row_labels
            m.col_labels = other.col_labels
            m.rows = rows
            return m
        if isinstance(other, Scalar):
            return self.scale(other)
        if isinstance(other, int):
            return self.scale(self.field.rational(other))
        return NotImplemented

    def __rmul__(self, other):
        if isinstance(other, (Scalar, int)):
            return self.__mul__(other)
        return NotImplemented

    def __eq__(self, other):
        if not isinstance(other, ExactMatrix):
            return NotImplemented
        return (
            self.field is other.field
            and self.row_labels == other.row_labels
            and self.col_labels == other.col_labels
            and self.rows == other.rows
        )

    def __hash__(self):
        return hash((self.row_labels, self.col_labels, len(self.rows)))

    # -- structure ---------------------------------------------------------

    def transpose(self) -> "ExactMatrix":
        rows: dict[Label, dict[Label, Scalar]] = {}
        for r, row in self.rows.items():
            for c, v in row.items():
                rows.setdefault(c, {})[r] = v
        m = ExactMatrix.__new__(ExactMatrix)
        m.field = self.field
        m.row_labels = self.col_labels
        m.col_labels = self.row_labels
        m.rows = rows
        return m

    def trace(self) -> Scalar:
        if set(self.row_labels) != set(self.col_labels):
            raise LinAlgError("trace needs matching row/column label sets")
        t = self.field.zero
        for r, row in self.rows.items():
            if r in row:
                t = t + row[r]
        return t

    def map_entries(self, fn: Callable[[Scalar], Scalar]) -> "ExactMatrix":
        rows: dict[Label, dict[Label, Scalar]] = {}
        for r, row in self.rows.items():
            out = {}
            for c, v in row.items():
                w = fn(v)
                if not w.is_zero:
                    out[c] = w
            if out:
                rows[r] = out
        return self._like(rows)

    def apply(self, vec: Mapping[Label, Scalar]) -> dict[Label, Scalar]:
        """Row picture: result[r] = sum_c M[r][c] vec[c]."""
        out: dict[Label, Scalar] = {}
        for r, row in self.rows.items():
            acc = self.field.zero
            for c, v in row.items():
                w = vec.get(c)
                if w is not None:
                    acc = acc + v * w
            if not acc.is_zero:
                out[r] = acc
        return out

    # -- elimination --------------------------------------------------------

    def rank(self) -> int:
        rows = [dict(r) for r in self.rows.values()]
        rank = 0
        for c in self.col_labels:
            pivot = None
            for r in rows:
                if c in r:
                    pivot = r
                    break
            if pivot is None:
                continue
            rows.remove(pivot)
            rank += 1
            pv = pivot[c]
            for r in rows:
                if c not in r:
                    continue
                f = r[c] / pv
                for k, v in pivot.items():
                    nv = r.get(k, self.field.zero) - f * v
                    if nv.is_zero:
                        r.pop(k, None)
                    else:
                        r[k] = nv
            rows = [r for r in rows if r]
        return rank

    def inverse(self) -> "ExactMatrix":
        n = len(self.row_labels)
        if n != len(self.col_labels):
            raise LinAlgError("inverse of a non-square matrix")
        work = [dict(self.rows.get(r, {})) for r in self.row_labels]
        aug = [{r: self.field.one} for r in self.row_labels]
        used = [False] * n
        piv_of_col: dict[Label, int] = {}
        for c in self.col_labels:
            pi = None
            for i in range(n):
                if not used[i] and c in work[i]:
                    pi = i
                    break
            if pi is None:
                raise LinAlgError("matrix is singular")
            used[pi] = True
            piv_of_col[c] = pi
            pv = work[pi][c]
            if not pv.is_one:
                work[pi] = {k: v / pv for k, v in work[pi].items()}
                aug[pi] = {k: v / pv for k, v in aug[pi].items()}
            for j in range(n):
                if j == pi:
                    continue
                f = work[j].get(c)
                if f is None:
                    continue
                for k, v in work[pi].items():
                    nv = work[j].get(k, self.field.zero) - f * v
                    if nv.is_zero:
                        work[j].pop(k, None)
                    else:
                        work[j][k] = nv
                for k, v in aug[pi].items():
                    nv = aug[j].get(k, self.field.zero) - f * v
                    if nv.is_zero:
                        aug[j].pop(k, None)
                    else:
                        aug[j][k] = nv
        rows = {}
        for c in self.col_labels:
            row = {k: v for k, v in aug[piv_of_col[c]].items() if not v.is_zero}
            if row:
                rows[c] = row
        m = ExactMatrix.__new__(ExactMatrix)
        m.field = self.field
        m.row_labels = self.col_labels
        m.col_labels = self.row_labels
        m.rows = rows
        return m

    def __repr__(self):
        nz = sum(len(r) for r in self.rows.values())
        return f"ExactMatrix({len(self.row_labels)}x{len(self.col_labels)}, {nz} nonzero)"
