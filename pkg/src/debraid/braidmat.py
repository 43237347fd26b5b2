"""Braid matrices of the standard q-deformations and their spectral data.

The matrix acts on the tensor square of the fundamental module.  Rows and
columns are labeled by index pairs; the entry stored at row (i,j), column
(h,k) is the coefficient of the output pair (h,k) when the braiding is
applied to the input pair (i,j).  With E^a_b the elementary matrix carrying
basis vector a to basis vector b, a term c * E^a_b (x) E^c_d of the
universal expression contributes c to row (b,d), column (a,c).

Index alphabets: 1..N for the sl family; for the so family the symmetric
range -n..n around zero (zero included exactly when N is odd, n = floor(N/2)).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

from .linalg import ExactMatrix
from .scalars import CoeffField, Scalar

FAMILIES = ("sl", "so")


def index_alphabet(family: str, n: int) -> tuple[int, ...]:
    if family == "sl":
        return tuple(range(1, n + 1))
    if family == "so":
        m = n // 2
        if n % 2:
            return tuple(range(-m, m + 1))
        return tuple(i for i in range(-m, m + 1) if i != 0)
    raise ValueError(f"unknown family {family!r}")


def rho_exponents(n: int) -> dict[int, Fraction]:
    """Metric exponents for the so family: g_ij = q^(-rho_i) delta_(i,-j).

    Descending from n - 1/2 (N odd) or n - 1 (N even) as the index runs
    up from -n; antisymmetric under i -> -i.
    """
    out: dict[int, Fraction] = {}
    for i in index_alphabet("so", n):
        if i > 0:
            out[i] = (Fraction(1, 2) if n % 2 else Fraction(1)) - i
        elif i < 0:
            out[i] = -(Fraction(1, 2) if n % 2 else Fraction(1)) - i
        else:
            out[i] = Fraction(0)
    return out


@dataclass(frozen=True)
class BraidMatrixData:
    """A braid matrix together with its exact spectral bookkeeping.

    descale is the scalar u such that u * rhat has the reference spectrum
    (q, -1/q) for sl and (q, -1/q, q^(1-N)) for so; the sl matrix carries
    a global q^(-1/N) factor, so there u = q^(1/N).
    """

    family: str
    n: int
    field: CoeffField
    indices: tuple[int, ...]
    rhat: ExactMatrix
    rhat_inv: ExactMatrix
    descale: Scalar
    eigenvalues: tuple[Scalar, ...]
    rho: dict[int, Fraction] | None = None

    @property
    def pair_labels(self) -> tuple[tuple[int, int], ...]:
        return tuple(itertools.product(self.indices, repeat=2))

    def metric(self) -> dict[tuple[int, int], Scalar]:
        if self.family != "so":
            raise ValueError("the metric pairing exists for the so family only")
        assert self.rho is not None
        return {
            (i, -i): self.field.q_pow(-self.rho[i]) for i in self.indices
        }

    def metric_square_trace(self) -> Scalar:
        # sum over both indices of g^{sm} g_{sm}, same index order in both
        g = self.metric()
        t = self.field.zero
        for v in g.values():
            t = t + v * v
        return t


def _pairs(indices):
    return tuple(itertools.product(indices, repeat=2))


def _sl_entries(field: CoeffField, indices) -> dict:
    q, k = field.q, field.k
    pref = field.q_pow(Fraction(-1, field.n))
    ent: dict[tuple, Scalar] = {}

    def add(a, b, c, d, coeff):
        key = ((b, d), (a, c))
        ent[key] = ent.get(key, field.zero) + coeff

    for i in indices:
        add(i, i, i, i, q)
    for i in indices:
        for j in indices:
            if i != j:
                add(j, i, i, j, field.one)
            if i < j:
                add(i, i, j, j, k)
    return {key: pref * v for key, v in ent.items() if not v.is_zero}


def _so_entries(field: CoeffField, indices, rho) -> dict:
    q, k = field.q, field.k
    ent: dict[tuple, Scalar] = {}

    def add(a, b, c, d, coeff):
        key = ((b, d), (a, c))
        ent[key] = ent.get(key, field.zero) + coeff

    for i in indices:
        if i != 0:
            add(i, i, i, i, q)
            add(-i, i, i, -i, field.q_inv)
    for i in indices:
        for j in indices:
            if (i != j and i != -j) or (i == 0 and j == 0):
                add(j, i, i, j, field.one)
    for i in indices:
        for j in indices:
            if i < j:
                add(i, i, j, j, k)
                add(-j, i, j, -i, -k * field.q_pow(-rho[i] + rho[j]))
    return {key: v for key, v in ent.items() if not v.is_zero}


def build_braid(
    family: str,
    n: int,
    field: CoeffField | None = None,
    verify: bool = False,
) -> BraidMatrixData:
    """Construct the braid matrix and its inverse for sl(n) or so(n).

    With verify=True the construction aborts unless the braid relation,
    the minimal polynomial, and the projector decomposition all hold;
    the entry layout is over-determined by those identities.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    if field is None:
        field = CoeffField(n)
    elif field.n != n:
        raise ValueError(f"field was built for n={field.n}, asked for n={n}")
    indices = index_alphabet(family, n)
    pairs = _pairs(indices)
    if family == "sl":
        entries = _sl_entries(field, indices)
        rho = None
        descale = field.q_pow(Fraction(1, n))
        eigs = (field.q, -field.q_inv)
    else:
        if n < 3:
            raise ValueError("the so family needs n >= 3")
        rho = rho_exponents(n)
        entries = _so_entries(field, indices, rho)
        descale = field.one
        eigs = (field.q, -field.q_inv, field.q_pow(1 - n))
    rhat = ExactMatrix.from_entries(field, pairs, pairs, entries)
    rhat_inv = rhat.inverse()
    data = BraidMatrixData(
        family=family,
        n=n,
        field=field,
        indices=indices,
        rhat=rhat,
        rhat_inv=rhat_inv,
        descale=descale,
        eigenvalues=eigs,
        rho=rho,
    )
    if verify:
        self_check(data)
    return data


def self_check(data: BraidMatrixData) -> None:
    """Abort unless the spectral identities over-determining the entry
    layout hold: braid relation, minimal polynomial, projector algebra,
    and for the so family the metric route to the trace projector."""
    if not satisfies_braid_relation(data):
        raise ArithmeticError("braid relation violated")
    if not minimal_polynomial_residual(data).is_zero:
        raise ArithmeticError("minimal polynomial violated")
    projs = spectral_projectors(data)
    one = ExactMatrix.identity(data.field, data.pair_labels)
    total = None
    for p in projs.values():
        if not (p * p - p).is_zero:
            raise ArithmeticError("projector not idempotent")
        total = p if total is None else total + p
    assert total is not None
    if not (total - one).is_zero:
        raise ArithmeticError("projectors do not sum to the identity")
    if data.family == "so":
        if not (projs["trace"] - trace_projector_from_metric(data)).is_zero:
            raise ArithmeticError("metric trace projector mismatch")


# -- relations on the tensor cube ---------------------------------------


def _lift(mat: ExactMatrix, indices, side: str) -> ExactMatrix:
    """Extend a pair-indexed matrix by the identity on a third tensor slot."""
    triples = tuple(itertools.product(indices, repeat=3))
    rows: dict = {}
    for (i, j), row in mat.rows.items():
        for m in indices:
            if side == "left":
                rkey = (i, j, m)
                out = {(a, b, m): v for (a, b), v in row.items()}
            else:
                rkey = (m, i, j)
                out = {(m, a, b): v for (a, b), v in row.items()}
            rows[rkey] = out
    return ExactMatrix(mat.field, triples, triples, rows)


def braid_relation_residual(data: BraidMatrixData) -> ExactMatrix:
    """(R x 1)(1 x R)(R x 1) - (1 x R)(R x 1)(1 x R) on the tensor cube."""
    left = _lift(data.rhat, data.indices, "left")
    right = _lift(data.rhat, data.indices, "right")
    return left * right * left - right * left * right


def satisfies_braid_relation(data: BraidMatrixData) -> bool:
    return braid_relation_residual(data).is_zero


def minimal_polynomial_residual(data: BraidMatrixData) -> ExactMatrix:
    """Product of (u*R - lambda) over the reference eigenvalues; zero iff
    the matrix is semisimple with exactly that spectrum."""
    a = data.rhat.scale(data.descale)
    one = ExactMatrix.identity(data.field, a.row_labels)
    acc = one
    for lam in data.eigenvalues:
        acc = acc * (a - one.scale(lam))
    return acc


def spectral_projectors(data: BraidMatrixData) -> dict[str, ExactMatrix]:
    """Lagrange projectors of u*R onto its eigenspaces.

    Keys: "sym" (eigenvalue q), "antisym" (-1/q), and for so "trace"
    (q^(1-n)).
    """
    a = data.rhat.scale(data.descale)
    one = ExactMatrix.identity(data.field, a.row_labels)
    names = ("sym", "antisym", "trace")[: len(data.eigenvalues)]
    out = {}
    for name, lam in zip(names, data.eigenvalues):
        p = one
        for mu in data.eigenvalues:
            if mu == lam:
                continue
            p = p * (a - one.scale(mu)).scale((lam - mu) ** -1)
        out[name] = p
    return out


def trace_projector_from_metric(data: BraidMatrixData) -> ExactMatrix:
    """Rank-one trace projector g^ij g_kl / (g^sm g_sm), so family only."""
    g = data.metric()
    norm = data.metric_square_trace()
    pairs = data.pair_labels
    entries = {}
    for (i, j), gu in g.items():
        for (kk, l), gl in g.items():
            entries[((i, j), (kk, l))] = gu * gl / norm
    return ExactMatrix.from_entries(data.field, pairs, pairs, entries)


def flip_matrix(field: CoeffField, indices) -> ExactMatrix:
    pairs = _pairs(indices)
    return ExactMatrix.from_entries(
        field, pairs, pairs, {((i, j), (j, i)): field.one for (i, j) in pairs}
    )


def classical_limit_matrix(mat: ExactMatrix) -> ExactMatrix:
    """Entrywise limit at q = 1; raises if any entry has a pole."""

    def limit(v: Scalar) -> Scalar:
        order, val = v.eval_classical()
        if order > 0:
            raise ValueError(f"entry has a pole of order {order} at q = 1")
        assert val is not None
        return val

    return mat.map_entries(limit)


def conjugate_matrix(mat: ExactMatrix) -> ExactMatrix:
    """Entrywise bar involution combined with the flip relabeling
    (i,j) -> (j,i) on rows and columns."""

    def swap(lbl):
        return (lbl[1], lbl[0])

    rows: dict = {}
    for r, row in mat.rows.items():
        rows[swap(r)] = {swap(c): v.bar() for c, v in row.items()}
    return ExactMatrix(mat.field, mat.row_labels, mat.col_labels, rows)


# -- fundamental-representation slices -----------------------------------


def l_slices(
    data: BraidMatrixData, sign: str
) -> dict[tuple[int, int], ExactMatrix]:
    """Matrices representing the two triangular families of matrix
    generators on the fundamental module.

    slices[(a, b)] is the image of the generator with upper label a and
    lower label b; its entry at row k, column l is read off the braid
    matrix at row (a, k), column (l, b) for sign "+", and off the inverse
    braid matrix at the same position for sign "-".  One triangular half
    of the family vanishes identically for each sign.
    """
    if sign not in ("+", "-"):
        raise ValueError(f"sign must be '+' or '-', got {sign!r}")
    source = data.rhat if sign == "+" else data.rhat_inv
    idx = data.indices
    out: dict[tuple[int, int], ExactMatrix] = {}
    for a in idx:
        for b in idx:
            entries = {}
            for k in idx:
                for l in idx:
                    v = source.entry((a, k), (l, b))
                    if not v.is_zero:
                        entries[(k, l)] = v
            out[(a, b)] = ExactMatrix.from_entries(data.field, idx, idx, entries)
    return out


def slice_arrangement(
    slices: dict[tuple[int, int], ExactMatrix],
    field: CoeffField,
    indices,
) -> ExactMatrix:
    """Pack a slice family into one matrix over composite labels, rows
    (a, k), columns (b, l).  Inverting it and unpacking yields the slice
    family of the antipoded generators: contracting the two families over
    the generator label gives the identity."""
    pairs = _pairs(indices)
    entries = {}
    for (a, b), mat in slices.items():
        for k, l, v in mat.entries():
            entries[((a, k), (b, l))] = v
    return ExactMatrix.from_entries(field, pairs, pairs, entries)


def unpack_arrangement(
    arr: ExactMatrix, field: CoeffField, indices
) -> dict[tuple[int, int], ExactMatrix]:
    out: dict[tuple[int, int], ExactMatrix] = {}
    for a in indices:
        for b in indices:
            entries = {}
            for k in indices:
                for l in indices:
                    v = arr.entry((a, k), (b, l))
                    if not v.is_zero:
                        entries[(k, l)] = v
            out[(a, b)] = ExactMatrix.from_entries(field, indices, indices, entries)
    return out
