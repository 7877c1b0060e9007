"""Command-line entry point.

Exit codes: 0 success, 2 malformed input, 3 failed check or precondition.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from .errors import AsymError, MalformedSource, NotDivergenceFree, ResonantComponent
from .expansion import (
    AsymExpansion,
    Grade,
    SpaceSignature,
    VectorExpansion,
    check_membership,
    laplacian,
)
from .io import DocumentError, ExpansionDocument, read_document

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_CHECK = 3


class CheckFailed(Exception):
    pass


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _emit_table(header, rows, out):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    text = buf.getvalue()
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit_summary(summary):
    sys.stdout.write(json.dumps(summary, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(type(o))


def _emit_document(doc, out):
    text = doc.dumps()
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load(path):
    try:
        if path == "-":
            return ExpansionDocument.loads(sys.stdin.read())
        return read_document(path)
    except OSError as exc:
        raise DocumentError(str(exc)) from exc


def _scalar(doc):
    if doc.is_vector:
        raise DocumentError("expected a scalar expansion document")
    return doc.value


def _check_dim(args, doc):
    if args.dim is not None and args.dim != doc.d:
        raise DocumentError(f"--dim {args.dim} does not match document d={doc.d}")


def _membership_dict(rep):
    return {
        "signature": rep.signature.label(),
        "member": rep.member,
        "violations": [[list(g), why] for g, why in rep.violations],
    }


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_laplacian(args):
    doc = _load(args.input)
    _check_dim(args, doc)
    u = _scalar(doc)
    lap = laplacian(u)
    sig = None
    summary = {"command": "laplacian", "d": doc.d, "grades": len(lap)}
    if doc.signature is not None and doc.signature.variant == "plain":
        s = doc.signature
        sig = SpaceSignature.plain(doc.d, s.n + 2, s.N + 2, s.ell - 2)
        summary["membership"] = _membership_dict(check_membership(lap, sig))
    _emit_document(ExpansionDocument(doc.d, lap, sig), args.out)
    return summary, True


def cmd_invert(args):
    from .laplace import invert_laplacian_asym

    doc = _load(args.input)
    _check_dim(args, doc)
    src = _scalar(doc)
    sig = doc.signature
    if args.order is not None:
        sig = SpaceSignature.plain(doc.d, 3, args.order + 3, -3)
    res = invert_laplacian_asym(src, sig, resolve_compact=args.resolve_compact,
                                with_residual=args.resolve_compact)
    N = res.far_field.order - 1
    hat = SpaceSignature.hat(doc.d, N)
    back = laplacian(res.far_field)
    decay = []
    from .oracle import sphere_points

    for r in (100.0, 200.0, 400.0):
        x = sphere_points(doc.d, r, 16)
        decay.append([r, float(np.max(np.abs(back.evaluate(x) - src.evaluate(x))))])
    summary = {
        "command": "invert",
        "d": doc.d,
        "membership": _membership_dict(res.membership),
        "monopole_log": res.monopole_log,
        "log_terms": [[list(e.source_grade), list(e.emitted)] for e in res.log_events],
        "residual_decay": decay,
    }
    _emit_document(ExpansionDocument(doc.d, res.expansion, hat), args.out)
    return summary, res.membership.member


def cmd_membership(args):
    doc = _load(args.input)
    _check_dim(args, doc)
    u = _scalar(doc)
    if args.variant in ("hat", "tilde"):
        if args.order is None:
            raise DocumentError("--order is required for hat/tilde")
        sig = SpaceSignature.hat(doc.d, args.order) if args.variant == "hat" else SpaceSignature.tilde(doc.d, args.order)
    elif doc.signature is not None and args.order is None:
        sig = doc.signature
    else:
        if args.order is None:
            raise DocumentError("--order is required without a document signature")
        try:
            sig = SpaceSignature(args.n, args.order, args.ell, args.variant, doc.d)
        except ValueError as exc:
            raise DocumentError(str(exc)) from exc
    rep = check_membership(u, sig)
    summary = {"command": "membership", **_membership_dict(rep)}
    return summary, rep.member


def cmd_euler_rhs(args):
    from .euler import build_hamiltonian_field, euler_rhs

    doc = _load(args.input)
    _check_dim(args, doc)
    u0 = doc.value if doc.is_vector else build_hamiltonian_field(doc.value)
    res = euler_rhs(u0, args.order, resolve_compact=False)
    _emit_document(ExpansionDocument(doc.d, res.rhs, SpaceSignature.tilde(doc.d, res.N)), args.out)
    summary = {
        "command": "euler-rhs",
        "N": res.N,
        "a0_delta": res.report.a0_delta,
        "max_resonant_projection": res.report.max_resonant,
        "tilde_member": all(m.member for m in res.memberships),
        "verdict": res.report.verdict,
    }
    return summary, res.report.passed and summary["tilde_member"]


def cmd_example1(args):
    from .euler import example1, euler_rhs

    ex = example1(args.alpha)
    res = euler_rhs(ex.u0, args.order, ex.full, n_r=args.n_r)
    rows = []
    from .sphere import basis_labels

    def add_rows(name, u):
        for g, f in u.items():
            for (l, m), c in zip(basis_labels(f.d, f.L), f.coeffs):
                if c != 0.0:
                    # coefficient of cos(l phi) / sin(l phi) (or of 1) as a plain function
                    norm = math.sqrt(2 * math.pi) if l == 0 else math.sqrt(math.pi)
                    rows.append([name, g.k, g.j, l, m, float(c / norm)])

    add_rows("Q", res.q)
    add_rows("rhs_x", res.rhs[0])
    add_rows("rhs_y", res.rhs[1])
    add_rows("pressure", res.pressure)
    _emit_table(["quantity", "k", "j", "l", "m", "coefficient"], rows, args.out)
    q40 = res.q[Grade(4, 0)].coefficient(2, 2) / math.sqrt(math.pi)
    log31 = max(c[Grade(3, 1)].norm() for c in res.rhs)
    ok = abs(q40 - 64.0 * args.alpha) <= 1e-10 * max(1.0, abs(args.alpha)) and (log31 > 0) == (args.alpha != 0)
    summary = {
        "command": "example1",
        "alpha": args.alpha,
        "q_grade_4_0_cos2phi": q40,
        "rhs_grade_3_1_norm": log31,
        "conservation": res.report.verdict,
        "verdict": "PASS" if ok and res.report.passed else "FAIL",
    }
    return summary, summary["verdict"] == "PASS"


def cmd_example2(args):
    from .euler import example2, example2_quadrupole_exact, euler_rhs
    from .oracle import CompactField, moment, monomial

    ex = example2()
    g = CompactField.from_callable(ex.full.q, 2, ex.support_radius, n_r=args.n_r, breaks=ex.breaks)
    polys = [
        ("1", lambda x: np.ones(x.shape[0])),
        ("x", monomial(1, 0)),
        ("y", monomial(0, 1)),
        ("x^2-y^2", lambda x: x[:, 0] ** 2 - x[:, 1] ** 2),
    ]
    rows, vals = [], {}
    for name, p in polys:
        m = moment(g, p)
        vals[name] = m
        rows.append([f"int Q*{name}", m.value, m.error])
    exact = example2_quadrupole_exact()
    rows.append(["-8pi int a'^2 rho^2", exact, 0.0])
    res = euler_rhs(ex.u0, args.order, ex.full, support_radius=ex.support_radius,
                    breaks=ex.breaks + (ex.support_radius,), n_r=args.n_r)
    p20 = res.pressure[Grade(2, 0)].norm()
    r30 = max(c[Grade(3, 0)].norm() for c in res.rhs)
    rows.append(["pressure grade (2,0) norm", p20, ""])
    rows.append(["rhs grade (3,0) norm", r30, ""])
    _emit_table(["quantity", "value", "error"], rows, args.out)
    scale = max(1.0, vals["1"].scale)
    checks = {
        "mass_vanishes": abs(vals["1"].value) <= 1e-8 * scale,
        "dipole_vanishes": all(abs(vals[k].value) <= 1e-8 * scale for k in ("x", "y")),
        "quadrupole_matches": abs(vals["x^2-y^2"].value - exact) <= 1e-6 * abs(exact),
        "quadrupole_negative": vals["x^2-y^2"].value < 0,
        "pressure_a2_nonzero": p20 > 1e-8,
        "rhs_a3_nonzero": r30 > 1e-8,
    }
    summary = {"command": "example2", **checks, "verdict": "PASS" if all(checks.values()) else "FAIL"}
    return summary, summary["verdict"] == "PASS"


def cmd_conserve(args):
    from .euler import build_hamiltonian_field, euler_rhs, random_hamiltonian

    rng = np.random.default_rng(args.seed)
    N = 4 if args.order is None else args.order
    rows = []
    ok = True
    for i in range(args.count):
        H = random_hamiltonian(rng, N=N, L=args.band_limit)
        res = euler_rhs(build_hamiltonian_field(H), N, resolve_compact=False)
        rep = res.report
        ok &= rep.passed
        rows.append([i, rep.a0_delta, rep.max_resonant, rep.verdict])
    _emit_table(["index", "a0_delta", "max_resonant_projection", "verdict"], rows, args.out)
    summary = {"command": "conserve", "seed": args.seed, "count": args.count, "N": N,
               "verdict": "PASS" if ok else "FAIL"}
    return summary, ok


def _flow_field(name):
    from .euler import build_hamiltonian_field, example1
    from .expansion import jacobian
    from .sphere import SphereFn

    if name == "rotation":
        H = AsymExpansion.monomial(SphereFn.constant(2, 1.0), 0, 1)
        u = build_hamiltonian_field(H)
        J = jacobian(u)

        def jac(x):
            return np.stack([np.stack([J[i][j].evaluate(x) for j in range(2)], axis=1) for i in range(2)], axis=1)

        return u, jac, 2.5
    if name == "example1":
        ex = example1(1.0)
        return ex.full.velocity, ex.full.velocity_jacobian, 1.5
    raise DocumentError(f"unknown field {name!r}")


def cmd_flow(args):
    from .oracle import integrate_flow, sphere_points

    u, jac, r0 = _flow_field(args.field)
    x0 = sphere_points(2, args.radius or r0, args.points)
    res = integrate_flow(u, x0, args.T, args.h, jac=jac, mode=args.jacobian_mode)
    half = integrate_flow(u, x0, args.T, args.h / 2, jac=jac, mode=args.jacobian_mode)
    stride = max(1, len(res.times) // 20)
    rows = [[float(t), float(np.max(np.abs(dd - 1.0)))] for t, dd in zip(res.times[::stride], res.det_history[::stride])]
    _emit_table(["t", "max_abs_det_minus_1"], rows, args.out)
    ratio = res.max_det_error / half.max_det_error if half.max_det_error > 0 else math.inf
    ok = res.max_det_error <= 1e-5
    summary = {"command": "flow", "field": args.field, "h": res.h, "max_det_error": res.max_det_error,
               "max_det_error_half_step": half.max_det_error, "halving_ratio": ratio,
               "verdict": "PASS" if ok else "FAIL"}
    return summary, ok


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--dim", type=int, choices=(2, 3))
    common.add_argument("--order", type=int, help="truncation order N")
    common.add_argument("--band-limit", type=int, default=4)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--strict", action="store_true", help="exit 3 when a check fails")
    common.add_argument("--out", help="output path (default: stdout)")

    p = argparse.ArgumentParser(prog="asymeuler", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("laplacian", parents=[common], help="apply the Laplacian to a document")
    s.add_argument("input")
    s.set_defaults(func=cmd_laplacian)

    s = sub.add_parser("invert", parents=[common], help="invert the Laplacian on a source document")
    s.add_argument("input")
    s.add_argument("--resolve-compact", action="store_true")
    s.set_defaults(func=cmd_invert)

    s = sub.add_parser("membership", parents=[common], help="check space membership")
    s.add_argument("input")
    s.add_argument("--variant", choices=("plain", "hat", "tilde", "star"), default="plain")
    s.add_argument("--n", type=int, default=0)
    s.add_argument("--ell", type=int, default=0)
    s.set_defaults(func=cmd_membership)

    s = sub.add_parser("euler-rhs", parents=[common], help="Euler right-hand side of a velocity or d=2 Hamiltonian")
    s.add_argument("input")
    s.set_defaults(func=cmd_euler_rhs)

    s = sub.add_parser("example1", parents=[common], help="first worked example")
    s.add_argument("--alpha", type=float, default=1.0)
    s.add_argument("--n-r", type=int, default=128)
    s.set_defaults(func=cmd_example1)

    s = sub.add_parser("example2", parents=[common], help="second worked example (compact support)")
    s.add_argument("--n-r", type=int, default=128)
    s.set_defaults(func=cmd_example2)

    s = sub.add_parser("conserve", parents=[common], help="conservation structure over a random corpus")
    s.add_argument("--count", type=int, default=10)
    s.set_defaults(func=cmd_conserve)

    s = sub.add_parser("flow", parents=[common], help="flow map and volume preservation")
    s.add_argument("--field", choices=("rotation", "example1"), default="rotation")
    s.add_argument("--T", type=float, default=1.0)
    s.add_argument("--h", type=float, default=1e-2)
    s.add_argument("--points", type=int, default=8)
    s.add_argument("--radius", type=float)
    s.add_argument("--jacobian-mode", choices=("fd", "variational"))
    s.set_defaults(func=cmd_flow)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code not in (0, None) else EXIT_OK
    try:
        summary, ok = args.func(args)
    except DocumentError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT
    except (MalformedSource, NotDivergenceFree, ResonantComponent) as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return EXIT_CHECK
    except AsymError as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return EXIT_CHECK
    _emit_summary(summary)
    if args.strict and not ok:
        return EXIT_CHECK
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
