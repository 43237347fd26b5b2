"""Command-line front end.

Three subcommands: `verify` runs the exact matrix- and rewriting-level
check suites, `unbraid` builds the realization table and prints the
decoupled generators with their verification report, `relations` lists
the rewrite rules of a requested algebra.  Output is deterministic:
identical configuration gives byte-identical output.

Exit codes: 0 all checks passed; 1 a verification check failed;
2 usage error (bad flags, or a configuration the builders refuse);
3 the requested evaluation hits a pole (classical limit of the
realization table).

The rewriting step budget honors the DEBRAID_STEP_BUDGET environment
variable.
"""

import argparse
import sys
from math import comb

from .braidmat import (
    braid_relation_residual,
    build_braid,
    classical_limit_matrix,
    flip_matrix,
    minimal_polynomial_residual,
    spectral_projectors,
    trace_projector_from_metric,
)
from .linalg import ExactMatrix
from .reporting import (
    check_json,
    document,
    formula_lines,
    poly_to_json,
    render_json,
    report_to_json,
    rules_latex,
    rules_text,
    rules_to_json,
    scalar_to_json,
)
from .rewriting import KIND_D, KIND_X, RewriteSystem
from .scalars import CoeffField
from .spaces import (
    SpaceSpec,
    _completion_degree,
    build_heisenberg,
    build_quantum_space,
)
from .unbraid import (
    build_phi_euclidean,
    phi_table_from_text,
    unbraid_iterate,
    verify_phi_exchange,
    verify_star_chi,
)

BAR_DECLARATIONS = {"gamma1": "-q**2*gamma1"}

SUITES = ("ybe", "minpoly", "projectors", "confluence", "hilbert", "classical")


class UsageError(ValueError):
    pass


# -- shared plumbing ----------------------------------------------------------


def _matrix_residuals(mat: ExactMatrix) -> list[dict]:
    out = []
    for r, c, v in mat.entries():
        if not v.is_zero:
            out.append({"row": list(r), "column": list(c), "value": str(v)})
    return out


def _build_space(cfg):
    spec = SpaceSpec(
        family=cfg.family,
        n=cfg.n,
        copies=cfg.m,
        braiding_sign=cfg.sign,
        epsilon=cfg.epsilon,
        extended=cfg.extended or cfg.sphere,
        sphere=cfg.sphere,
    )
    if cfg.heisenberg:
        return build_heisenberg(spec)
    return build_quantum_space(spec)


def _config_json(cfg, command: str) -> dict:
    out = {
        "family": cfg.family,
        "n": cfg.n,
        "copies": cfg.m,
        "sign": cfg.sign,
        "epsilon": cfg.epsilon,
        "extended": bool(cfg.extended or cfg.sphere),
        "sphere": bool(cfg.sphere),
        "heisenberg": bool(cfg.heisenberg),
        "format": cfg.format,
        "max_degree": cfg.max_degree,
    }
    if command == "verify":
        out["suite"] = cfg.suite
        out["metric"] = bool(cfg.metric)
    if command == "unbraid":
        out["star"] = bool(cfg.star)
        out["classical"] = bool(cfg.classical)
        out["params"] = dict(cfg.params)
    if command == "relations":
        out["free"] = bool(cfg.free)
    return out


def _parse_params(items) -> dict:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise UsageError(f"--param needs NAME=VALUE, got {item!r}")
        name, value = item.split("=", 1)
        out[name.strip()] = value.strip()
    return out


def _emit_checks(cfg, checks: list[dict]) -> int:
    passed = all(c["passed"] for c in checks)
    if cfg.format == "json":
        doc = document("verify", _config_json(cfg, "verify"), passed,
                       checks=checks)
        sys.stdout.write(render_json(doc))
    else:
        for c in checks:
            line = f"check {c['name']}: " + ("pass" if c["passed"] else "FAIL")
            if not c["passed"] and c["residuals"]:
                line += f" ({len(c['residuals'])} residuals)"
            sys.stdout.write(line + "\n")
            for note in c["notes"]:
                sys.stdout.write(f"  {note}\n")
        sys.stdout.write("verify: " + ("pass" if passed else "FAIL") + "\n")
    return 0 if passed else 1


# -- verify -------------------------------------------------------------------


def _check_ybe(data) -> dict:
    res = braid_relation_residual(data)
    return check_json("yang-baxter", res.is_zero, _matrix_residuals(res))


def _check_minpoly(data) -> dict:
    res = minimal_polynomial_residual(data)
    return check_json("minimal-polynomial", res.is_zero, _matrix_residuals(res))


def _check_projectors(data, with_metric: bool) -> list[dict]:
    projs = spectral_projectors(data)
    one = ExactMatrix.identity(data.field, data.pair_labels)
    names = sorted(projs)
    checks = []
    bad = []
    for name in names:
        r = projs[name] * projs[name] - projs[name]
        bad.extend(_matrix_residuals(r))
    checks.append(check_json("projector-idempotence", not bad, bad))
    bad = []
    for a in names:
        for b in names:
            if a < b:
                bad.extend(_matrix_residuals(projs[a] * projs[b]))
    checks.append(check_json("projector-orthogonality", not bad, bad))
    total = None
    for name in names:
        total = projs[name] if total is None else total + projs[name]
    r = total - one
    checks.append(
        check_json("projector-completeness", r.is_zero, _matrix_residuals(r))
    )
    recon = None
    ordered = ("sym", "antisym", "trace")[: len(data.eigenvalues)]
    for name, lam in zip(ordered, data.eigenvalues):
        part = projs[name].scale(lam)
        recon = part if recon is None else recon + part
    r = recon - data.rhat.scale(data.descale)
    checks.append(
        check_json("eigenvalue-reconstruction", r.is_zero, _matrix_residuals(r))
    )
    if with_metric:
        r = projs["trace"] - trace_projector_from_metric(data)
        checks.append(
            check_json("metric-trace-projector", r.is_zero, _matrix_residuals(r))
        )
    return checks


def _check_confluence(pres, requested: int) -> dict:
    degree = requested
    notes = []
    if pres.spec.extended:
        certified = _completion_degree(pres.spec)
        if requested > certified:
            degree = certified
            notes.append(
                f"degree capped at {certified}: the extended completion"
                " certifies overlaps to that degree"
            )
    core = pres.system.decreasing_core()
    bad = core.confluence_failures(degree)
    for w, d in bad:
        notes.append(f"{pres.algebra.format_word(w)} leaves residual {d}")
    return check_json(f"confluence-degree-{degree}", not bad, notes=notes)


def _free_count(letters: int, d: int) -> int:
    """Ordered monomials of degree d in a commuting alphabet."""
    if letters == 0:
        return 1 if d == 0 else 0
    return comb(letters + d - 1, d)


def _expected_counts(pres, dmax: int) -> tuple[list[int], list[str]]:
    """Commutative-monomial oracle for the word counts.

    Plain coordinate and Heisenberg algebras count like a polynomial
    ring on their alphabet.  Extended builds are held to the braided
    factorization instead: first-copy counts convolved with a free
    commutative count on the remaining letters."""
    gens = pres.algebra.gens
    if not pres.spec.extended:
        return [_free_count(len(gens), d) for d in range(dmax + 1)], []
    first = [i for i, g in enumerate(gens) if g.copy == 1]
    rest = len(gens) - len(first)
    notes = []
    if rest == 0:
        notes.append(
            "single extended copy: the factorization oracle degenerates"
            " to the counted values themselves"
        )
    base = pres.hilbert_counts(dmax, gen_ids=first)
    out = []
    for d in range(dmax + 1):
        out.append(
            sum(base[k] * _free_count(rest, d - k) for k in range(d + 1))
        )
    return out, notes


def _check_hilbert(pres, dmax: int) -> dict:
    got = pres.hilbert_counts(dmax)
    want, notes = _expected_counts(pres, dmax)
    notes += [f"degree {d}: counted {g}, oracle {w}"
              for d, (g, w) in enumerate(zip(got, want))]
    return check_json(f"hilbert-degree-{dmax}", got == want, notes=notes)


def _classical_poly(pres, p):
    """Coefficient-wise limit at q = 1; None when a coefficient has a pole."""
    acc = pres.algebra.zero()
    for w, c in p.sorted_terms():
        order, val = c.eval_classical()
        if order > 0 or val is None:
            return None
        acc = acc + pres.algebra.poly({w: val})
    return acc


def _check_classical(cfg) -> list[dict]:
    checks = []
    field = CoeffField(cfg.n)
    data = build_braid(cfg.family, cfg.n, field=field)
    flip = flip_matrix(field, data.indices)
    r = classical_limit_matrix(data.rhat) - flip
    checks.append(
        check_json("classical-rhat-is-flip", r.is_zero, _matrix_residuals(r))
    )

    pres = _build_space(cfg)
    alg = pres.algebra
    one = pres.field.one
    bad = []
    pairing_notes = []
    for lhs in sorted(pres.system.rules, key=lambda w: (len(w), w)):
        if len(lhs) != 2:
            continue  # completion consequences of the quadratic rules
        ka, kb = (alg.gens[g].kind for g in lhs)
        if ka not in (KIND_X, KIND_D) or kb not in (KIND_X, KIND_D):
            continue  # radial letters have no classical counterpart
        rhs = pres.system.rules[lhs]
        cl = _classical_poly(pres, alg.poly({lhs: one}) - rhs)
        if cl is None:
            bad.append({"label": [alg.gens[g].name for g in lhs],
                        "residual": "pole at q = 1"})
            continue
        a, b = lhs
        const = -cl.coeff(())
        sigma = -cl.coeff((b, a))
        mixed = ka != kb and alg.gens[a].copy == alg.gens[b].copy
        want = cl - (
            alg.poly({lhs: one})
            - sigma * alg.poly({(b, a): one})
            - alg.scalar(const)
        )
        unit = (sigma * sigma - one).is_zero
        ok = want.is_zero and unit
        if not mixed:
            ok = ok and (sigma - one).is_zero
        if not ok:
            bad.append({"label": [alg.gens[g].name for g in lhs],
                        "residual": str(cl)})
        elif mixed:
            sgn = "+" if (sigma - one).is_zero else "-"
            pairing_notes.append(
                "{}*{} -> {} {} {}*{}".format(
                    alg.gens[a].name, alg.gens[b].name,
                    const.as_q_string(), sgn,
                    alg.gens[b].name, alg.gens[a].name,
                )
            )
    checks.append(
        check_json(
            "classical-relations-commute",
            not bad,
            bad,
            notes=["every quadratic rule limits to a (graded) commutator,"
                   " plus the pairing constant for derivative rules"],
        )
    )
    if pairing_notes:
        checks.append(
            check_json("classical-heisenberg-pairing", True,
                       notes=pairing_notes)
        )

    gfield = CoeffField(cfg.n, params=("gamma1",))
    gamma0 = -gfield.one / (gfield.q - gfield.one)
    order, _ = gamma0.eval_classical()
    checks.append(
        check_json(
            "classical-gamma0-pole",
            order == 1,
            notes=[
                "the level-0 normalization constant has a simple pole at"
                f" q = 1 (order {order}); the realization table itself has"
                " no classical limit (expected)"
            ],
        )
    )
    return checks


def cmd_verify(cfg) -> int:
    if cfg.format == "latex":
        raise UsageError("check reports have no latex form")
    if cfg.metric and cfg.family != "so":
        raise UsageError(
            "--metric: the metric pairing exists for the so family only"
        )
    suites = SUITES if cfg.suite == "all" else (cfg.suite,)
    checks = []
    if {"ybe", "minpoly", "projectors"} & set(suites):
        data = build_braid(cfg.family, cfg.n)
        if "ybe" in suites:
            checks.append(_check_ybe(data))
        if "minpoly" in suites:
            checks.append(_check_minpoly(data))
        if "projectors" in suites:
            checks.extend(_check_projectors(data, cfg.metric))
    if {"confluence", "hilbert"} & set(suites):
        pres = _build_space(cfg)
        if "confluence" in suites:
            checks.append(_check_confluence(pres, cfg.max_degree))
        if "hilbert" in suites:
            checks.append(_check_hilbert(pres, cfg.max_degree))
    if "classical" in suites:
        checks.extend(_check_classical(cfg))
    return _emit_checks(cfg, checks)


# -- unbraid ------------------------------------------------------------------


def cmd_unbraid(cfg) -> int:
    if cfg.family != "so":
        raise UsageError("unbraiding tables exist for the so family only")
    if cfg.n % 2 == 0:
        raise UsageError(
            f"n = {cfg.n} is even: unbraiding needs the inverse of a"
            " diagonal symmetry generator, which the coordinate algebra"
            " does not contain; only odd n is supported"
        )
    if cfg.m < 2 and not cfg.classical:
        raise UsageError("unbraiding needs at least two copies (--m 2)")
    if cfg.heisenberg:
        raise UsageError("unbraiding runs on the coordinate presentation")
    if cfg.star and cfg.sign != "-":
        raise UsageError(
            "the shipped conjugation declarations cover the sign - tables"
        )
    if cfg.star and cfg.n != 3:
        raise UsageError("the shipped conjugation declarations cover n = 3")

    levels = cfg.n // 2
    names = tuple(f"gamma{a}" for a in range(1, levels + 1))
    bar = BAR_DECLARATIONS if cfg.star else None
    field = CoeffField(cfg.n, params=names, bar_images=bar)
    braid = build_braid(cfg.family, cfg.n, field=field)
    spec = SpaceSpec(
        family=cfg.family,
        n=cfg.n,
        copies=max(cfg.m, 2),
        braiding_sign=cfg.sign,
        extended=True,
        sphere=cfg.sphere,
    )
    pres = build_quantum_space(spec, braid=braid)

    phi = None
    if cfg.phi:
        with open(cfg.phi, "r", encoding="utf-8") as fh:
            phi = phi_table_from_text(fh.read(), pres)
        if phi.sign != cfg.sign:
            raise UsageError(
                f"imported table has sign {phi.sign!r}, requested {cfg.sign!r}"
            )
    elif cfg.params or cfg.star or cfg.classical:
        phi = build_phi_euclidean(pres, cfg.sign,
                                  free_params=cfg.params or None)

    if cfg.classical:
        report = verify_phi_exchange(phi, mode="classical")
        for line in report.skipped:
            sys.stdout.write(line + "\n")
        return 3

    phis = None
    if phi is not None and (cfg.phi or cfg.params):
        # a hand-supplied first table only drives a single peeling step
        if cfg.m > 2:
            raise UsageError(
                "an imported table or explicit constants fix the first"
                " step only; use --m 2"
            )
        phis = [phi]
    steps, report = unbraid_iterate(pres, phis)
    if cfg.star:
        report.merge(verify_star_chi(phi), prefix="star")

    step_docs = []
    for step_pres, ys in steps:
        order = step_pres.braid.indices
        formulas = []
        for (c, i), text, latex in zip(
            sorted(ys, key=lambda ci: (ci[0], order.index(ci[1]))),
            formula_lines(step_pres, ys, "text"),
            formula_lines(step_pres, ys, "latex"),
        ):
            formulas.append(
                {
                    "copy": c,
                    "index": i,
                    "text": text,
                    "latex": latex,
                    "poly": poly_to_json(step_pres, ys[(c, i)]),
                }
            )
        step_docs.append({"copies": step_pres.spec.copies, "formulas": formulas})

    families_line = f"{cfg.m} mutually commuting families, {report.summary()}"
    if cfg.format == "json":
        doc = document(
            "unbraid",
            _config_json(cfg, "unbraid"),
            report.passed,
            formulas=step_docs[0]["formulas"],
            steps=step_docs,
            report=report_to_json(pres, report),
        )
        sys.stdout.write(render_json(doc))
    elif cfg.format == "latex":
        for k, sd in enumerate(step_docs):
            if len(step_docs) > 1:
                sys.stdout.write(f"% step {k + 1}\n")
            for f in sd["formulas"]:
                sys.stdout.write(f["latex"] + "\n")
        sys.stdout.write(f"% {families_line}\n")
    else:
        for k, sd in enumerate(step_docs):
            if len(step_docs) > 1:
                sys.stdout.write(f"# step {k + 1}\n")
            for f in sd["formulas"]:
                sys.stdout.write(f["text"] + "\n")
        sys.stdout.write(families_line + "\n")
    return 0 if report.passed else 1


# -- relations ----------------------------------------------------------------


class _FreeView:
    """Presentation-shaped wrapper around the free algebra (no rules)."""

    def __init__(self, pres):
        self.algebra = pres.algebra
        self.spec = pres.spec
        self.braid = pres.braid
        self.system = RewriteSystem(pres.algebra)


def cmd_relations(cfg) -> int:
    pres = _build_space(cfg)
    if cfg.free:
        pres = _FreeView(pres)
    if cfg.format == "json":
        doc = document(
            "relations",
            _config_json(cfg, "relations"),
            True,
            rules=rules_to_json(pres),
        )
        sys.stdout.write(render_json(doc))
    elif cfg.format == "latex":
        sys.stdout.write(rules_latex(pres))
    else:
        sys.stdout.write(rules_text(pres))
    return 0


# -- argument parsing ---------------------------------------------------------


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--family", choices=("sl", "so"), default="so")
    p.add_argument("--n", type=int, default=3, help="index range size N")
    p.add_argument("--m", type=int, default=1,
                   help="number of braided tensor factors")
    p.add_argument("--sign", choices=("minus", "plus"), default="minus",
                   help="braiding sign of the tensor product")
    p.add_argument("--epsilon", type=int, choices=(1, -1), default=1,
                   help="sign in the mixed derivative rule")
    p.add_argument("--extended", action="store_true",
                   help="adjoin radii and inverse radii on the first copy")
    p.add_argument("--sphere", action="store_true",
                   help="set the top radius to one (implies --extended)")
    p.add_argument("--heisenberg", action="store_true",
                   help="include derivative generators")
    p.add_argument("--max-degree", type=int, default=3, dest="max_degree",
                   help="word degree bound for confluence and counting")
    p.add_argument("--format", choices=("text", "json", "latex"),
                   default="text")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="debraid",
        description="Exact construction and verification of braid matrices,"
        " q-deformed coordinate algebras, and unbraiding maps.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    pv = sub.add_parser("verify", help="run exact verification suites")
    _add_common(pv)
    pv.add_argument("--suite", choices=SUITES + ("all",), default="all")
    pv.add_argument("--metric", action="store_true",
                    help="also derive the trace projector from the metric")

    pu = sub.add_parser("unbraid", help="emit decoupled generators")
    _add_common(pu)
    pu.set_defaults(m=2)
    pu.add_argument("--param", action="append", dest="param_items",
                    metavar="NAME=VALUE",
                    help="assign a normalization constant (repeatable)")
    pu.add_argument("--star", action="store_true",
                    help="also check self-adjointness of the decoupled"
                    " generators")
    pu.add_argument("--classical", action="store_true",
                    help="evaluate the table at q = 1 (reports the pole)")
    pu.add_argument("--phi", metavar="FILE",
                    help="import a realization table instead of building"
                    " the reference one")

    pr = sub.add_parser("relations", help="list rewrite rules")
    _add_common(pr)
    pr.add_argument("--free", action="store_true",
                    help="list the free algebra on the same alphabet")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    cfg = ap.parse_args(argv)
    cfg.sign = {"minus": "-", "plus": "+"}[cfg.sign]
    if cfg.max_degree < 2:
        sys.stderr.write("debraid: --max-degree must be at least 2\n")
        return 2
    try:
        if cfg.command == "unbraid":
            cfg.params = _parse_params(cfg.param_items)
            return cmd_unbraid(cfg)
        if cfg.command == "verify":
            return cmd_verify(cfg)
        return cmd_relations(cfg)
    except (ValueError, OSError) as exc:
        # builder refusals (bad family/size combinations, malformed table
        # files) are usage errors at this boundary
        sys.stderr.write(f"debraid: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
