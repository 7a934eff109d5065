"""Command-line driver: verification suites and reproducible experiment runs.

Exit codes: 0 pass, 1 verification failure, 2 usage error, 3 numeric error
(singularity / degeneracy / blow-up).  JSON reports always carry
tool_version, seed, config, and residuals; CSV outputs always start with a
header row.  All randomness flows from the --seed flag through one PCG64
generator per run.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys

import numpy as np

from . import (
    __version__,
    core,
    counting,
    eigsens,
    fdcheck,
    forward,
    kron,
    linsys_adjoint,
    odesens,
    reverse,
    rules,
)
from . import scalarfn as sf
from . import second_order
from .errors import MatDerivError


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def _report(seed, config, residuals, **extra):
    out = {
        "tool_version": __version__,
        "seed": int(seed),
        "config": _jsonable(config),
        "residuals": _jsonable(residuals),
    }
    out.update(_jsonable(extra))
    return out


def _write(text: str, out_path) -> None:
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


# ---------------------------------------------------------------------------
# check: every module's fast invariant suite

def _squares_matrix(seed):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((4, 4))


def _suite_kron(seed):
    worst = kron.kron_identity_suite(seed=seed, trials=50)
    return max(worst.values()), 1e-10, worst


def _suite_ad_cross_mode(seed):
    programs = [
        lambda xs: xs[0] * xs[1] + sf.sin(xs[0]),
        lambda xs: sf.exp(0.3 * xs[0]) + xs[1] * xs[1] * xs[2]
        - xs[2] / (xs[1] * xs[1] + 1.0),
        lambda xs: forward.babylonian(xs[0] * xs[0] + 1.0, 12) * xs[1],
    ]
    rng = np.random.default_rng(seed)
    worst = 0.0
    for prog in programs:
        x = rng.uniform(0.3, 1.5, size=3)
        g_rev = reverse.gradient(prog, x)
        jac = forward.jacobian_forward(lambda xs: [prog(xs)], x)
        worst = max(worst, float(np.max(np.abs(g_rev - jac[0]))))
    return worst, 1e-10, {}


def _suite_matrix_rules(seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((4, 4)) + 4.0 * np.eye(4)
    da = rng.standard_normal((4, 4))
    h = 1e-6
    inv = lambda m: core.lu_solve(m, np.eye(4))
    fd_inv = (inv(a + h * da) - inv(a - h * da)) / (2.0 * h)
    r1 = fdcheck.relative_error(fd_inv, rules.d_inverse(a, da))
    g = rules.grad_det(a)
    fd_det = (core.det(a + h * da) - core.det(a - h * da)) / (2.0 * h)
    r2 = abs(fd_det - float(np.sum(g * da))) / abs(fd_det)
    return max(r1, r2), 1e-5, {"d_inverse": r1, "grad_det": r2}


def _suite_tridiag(seed):
    prob = linsys_adjoint.random_instance(64, seed=seed)
    with counting.tally() as counted:
        grad = linsys_adjoint.grad_g(prob)
    rng = np.random.default_rng(seed + 1)
    dp = rng.uniform(-1.0, 1.0, size=prob.n - 1) * 1e-6 * (1.0 + np.abs(prob.p))
    directional = float(grad @ dp)
    actual = linsys_adjoint.fd_directional(prob, dp)
    rel = abs(directional - actual) / abs(directional)
    ok_solves = 0.0 if counted.solves == 2 else 1.0
    return max(rel, ok_solves), 1e-3, {"fd_rel_err": rel, "solves": counted.solves}


def _suite_ode(seed):
    prob = odesens.reference_instance()
    gf = odesens.grad_G_forward(prob, 400)
    ga = odesens.grad_G_adjoint(prob, 400)
    rel = fdcheck.relative_error(ga, gf)
    return rel, 1e-3, {"forward_vs_adjoint": rel}


def _suite_eig(seed):
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((5, 5))
    s = 0.5 * (raw + raw.T) + np.diag(np.arange(5, dtype=float))
    ds_raw = rng.standard_normal((5, 5))
    ds = 0.5 * (ds_raw + ds_raw.T)
    dec = eigsens.decompose(s)
    dl = eigsens.dlambda(dec, ds)
    r1 = abs(float(np.sum(dl)) - float(np.trace(ds)))
    pert = eigsens.perturbation(dec, ds)
    r2 = float(np.max(np.abs(pert.qt_dq + pert.qt_dq.T)))
    pair = max(
        abs(dl[i] - float(np.sum(eigsens.grad_lambda(dec, i) * ds)))
        for i in range(5)
    )
    worst = max(r1, r2, pair)
    return worst, 1e-12, {"sum_rule": r1, "antisymmetry": r2, "gradient_pairing": pair}


def _suite_second_order(seed):
    f = lambda xs: sf.sin(xs[0]) + xs[0] * xs[0] * sf.powi(xs[1], 3)
    x = np.array([0.7, 1.3])
    h, defect = second_order.hessian(f, x, return_defect=True)
    x1, x2 = x
    exact = np.array(
        [
            [-math.sin(x1) + 2.0 * x2**3, 6.0 * x1 * x2**2],
            [6.0 * x1 * x2**2, 6.0 * x1**2 * x2],
        ]
    )
    r = fdcheck.relative_error(h, exact)
    return max(r, defect), 1e-10, {"closed_form": r, "symmetry_defect": defect}


def _suite_fd_sweep(seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((4, 4))
    d = fdcheck.gaussian_direction(rng, (4, 4))
    scales = [10.0 ** (-k) for k in range(0, 17)]
    rows = fdcheck.error_sweep(
        lambda m: m @ m, lambda dm: a @ dm + dm @ a, a, d, scales
    )
    argmin = fdcheck.best_scale(rows)
    ok = 1e-10 <= argmin <= 1e-6
    return (0.0 if ok else 1.0), 0.5, {"argmin_scale": argmin}


_SUITES = [
    ("kron_identities", _suite_kron),
    ("ad_cross_mode", _suite_ad_cross_mode),
    ("matrix_rules_fd", _suite_matrix_rules),
    ("tridiag_adjoint", _suite_tridiag),
    ("ode_gradients", _suite_ode),
    ("eig_perturbation", _suite_eig),
    ("second_order", _suite_second_order),
    ("fd_sweep_shape", _suite_fd_sweep),
]


def run_check(seed: int = 0):
    """Run every module's invariant suite; returns (exit_code, report)."""
    suites = {}
    all_ok = True
    for name, fn in _SUITES:
        worst, tol, detail = fn(seed)
        ok = worst <= tol
        all_ok = all_ok and ok
        suites[name] = {
            "passed": bool(ok),
            "worst_residual": float(worst),
            "tolerance": tol,
            "detail": detail,
        }
    residuals = {name: s["worst_residual"] for name, s in suites.items()}
    report = _report(seed, {"subcommand": "check"}, residuals, suites=suites,
                     passed=all_ok)
    return (0 if all_ok else 1), report


# ---------------------------------------------------------------------------
# fdsweep

def run_fdsweep(seed: int = 0):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((4, 4))
    d = fdcheck.gaussian_direction(rng, (4, 4))
    scales = [10.0 ** (-k) for k in range(0, 17)]
    rows = fdcheck.error_sweep(
        lambda m: m @ m, lambda dm: a @ dm + dm @ a, a, d, scales
    )
    return rows


# ---------------------------------------------------------------------------
# tridiag

def run_tridiag(n: int = 100, seed: int = 0):
    prob = linsys_adjoint.random_instance(n, seed=seed)
    g = linsys_adjoint.g_eval(prob)
    with counting.tally() as counted:
        grad = linsys_adjoint.grad_g(prob)
    rng = np.random.default_rng(seed + 1)
    dp = rng.uniform(-1.0, 1.0, size=n - 1) * 1e-6 * (1.0 + np.abs(prob.p))
    directional = float(grad @ dp)
    fd = linsys_adjoint.fd_directional(prob, dp)
    rel = abs(directional - fd) / abs(directional)
    ok = rel <= 1e-3 and counted.solves == 2
    report = _report(
        seed,
        {"subcommand": "tridiag", "n": n},
        {"fd_rel_err": rel},
        g=g,
        grad=grad,
        fd_directional=fd,
        directional=directional,
        rel_err=rel,
        solve_count=counted.solves,
        passed=ok,
    )
    return (0 if ok else 1), report


# ---------------------------------------------------------------------------
# odegrad

def run_odegrad(steps: int = 2000, seed: int = 0, want_csv: bool = False):
    prob = odesens.reference_instance()
    traj = odesens.integrate_rk4(prob, steps)
    loss = odesens.loss_G(prob, traj)
    gf = odesens.grad_G_forward(prob, steps)
    with counting.tally() as counted:
        ga = odesens.grad_G_adjoint(prob, steps)
    gd = odesens.grad_G_fd(prob, steps)
    pair = {
        "forward_vs_adjoint": fdcheck.relative_error(ga, gf),
        "forward_vs_fd": fdcheck.relative_error(gd, gf),
        "adjoint_vs_fd": fdcheck.relative_error(gd, ga),
    }
    ok = all(v <= 1e-3 for v in pair.values()) and counted.integrations == 2
    report = _report(
        seed,
        {"subcommand": "odegrad", "steps": steps},
        pair,
        p=prob.p,
        n_steps=steps,
        G=loss,
        grad_forward=gf,
        grad_adjoint=ga,
        grad_fd=gd,
        pairwise_rel_err=pair,
        adjoint_integrations=counted.integrations,
        passed=ok,
    )
    csv_text = None
    if want_csv:
        v = odesens.adjoint_solve(prob, traj)
        buf = io.StringIO()
        buf.write("t,u,v\n")
        for i, t in enumerate(traj.times):
            buf.write(f"{float(t)!r},{float(traj.states[i, 0])!r},"
                      f"{float(v[i, 0])!r}\n")
        csv_text = buf.getvalue()
    return (0 if ok else 1), report, csv_text


# ---------------------------------------------------------------------------
# jacdet

def _jacdet_case(f, f_prime, s):
    jac = kron.jacobian_matrix_function(f, s)
    fd_det = core.det(jac)
    lam = core.jacobi_eigen(s).lam
    formula = kron.theoretical_jacdet(f, f_prime, lam)
    rel = abs(fd_det - formula) / abs(formula)
    return fd_det, formula, rel


def run_jacdet(seed: int = 0):
    s = np.array([[float((i - j) ** 2) for j in range(3)] for i in range(3)])
    cases = {
        "square": (lambda t: t * t, lambda t: 2.0 * t),
        "exp": (math.exp, math.exp),
        "sin": (math.sin, math.cos),
    }
    out = {}
    residuals = {}
    ok = True
    for name, (f, fp) in cases.items():
        fd_det, formula, rel = _jacdet_case(f, fp, s)
        out[name] = {"fd_det": fd_det, "formula": formula, "rel_diff": rel}
        residuals[name] = rel
        ok = ok and rel <= 1e-2 and (fd_det * formula > 0)
    report = _report(seed, {"subcommand": "jacdet"}, residuals, cases=out,
                     passed=ok)
    return (0 if ok else 1), report


# ---------------------------------------------------------------------------
# eig

def run_eig(n: int = 5, seed: int = 0):
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((n, n))
    s = 0.5 * (raw + raw.T) + np.diag(np.arange(n, dtype=float))
    ds_raw = rng.standard_normal((n, n))
    ds = 0.5 * (ds_raw + ds_raw.T)
    dec = eigsens.decompose(s)
    dl = eigsens.dlambda(dec, ds)
    h = 1e-6
    lam_plus = core.jacobi_eigen(s + h * ds).lam
    lam_minus = core.jacobi_eigen(s - h * ds).lam
    fd = (lam_plus - lam_minus) / (2.0 * h)
    rows = []
    worst = 0.0
    for i in range(n):
        rel = abs(dl[i] - fd[i]) / max(abs(fd[i]), 1e-300)
        worst = max(worst, rel)
        rows.append((i, float(dl[i]), float(fd[i]), float(rel)))
    ok = worst <= 1e-4
    return (0 if ok else 1), rows, worst


def eig_csv(rows) -> str:
    buf = io.StringIO()
    buf.write("index,dlambda,fd,rel_err\n")
    for i, dl, fd, rel in rows:
        buf.write(f"{i},{dl!r},{fd!r},{rel!r}\n")
    return buf.getvalue()


# ---------------------------------------------------------------------------
# hessian-demo

def run_hessian_demo(seed: int = 0):
    f = lambda xs: sf.sin(xs[0]) + xs[0] * xs[0] * sf.powi(xs[1], 3)
    x = np.array([0.7, 1.3])
    h, defect = second_order.hessian(f, x, return_defect=True)
    x1, x2 = x
    exact = np.array(
        [
            [-math.sin(x1) + 2.0 * x2**3, 6.0 * x1 * x2**2],
            [6.0 * x1 * x2**2, 6.0 * x1**2 * x2],
        ]
    )
    rel = fdcheck.relative_error(h, exact)
    bowl = lambda xs: xs[0] * xs[0] + 2.0 * xs[1] * xs[1]
    step = second_order.newton_min_step(bowl, np.array([1.0, -1.0]))
    ok = rel <= 1e-10 and defect <= 1e-10 and step.classification == "minimum"
    report = _report(
        seed,
        {"subcommand": "hessian-demo"},
        {"closed_form_rel_err": rel, "symmetry_defect": defect},
        point=x,
        hessian=h,
        exact=exact,
        newton_step=step.step,
        newton_classification=step.classification,
        passed=ok,
    )
    return (0 if ok else 1), report


# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="matderiv",
        description="Matrix-calculus derivative engine: verification suites "
        "and reproducible derivative experiments.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="cmd", required=True)

    def common(p, steps_default=None, n_default=None):
        p.add_argument("--seed", type=int, default=0, help="RNG seed (PCG64)")
        p.add_argument("--out", default=None, help="output path (default stdout)")
        p.add_argument(
            "--format", choices=("json", "csv"), default=None,
            help="output format (default: json for reports, csv for tables)",
        )
        if n_default is not None:
            p.add_argument("--n", type=int, default=n_default, help="problem size")
        if steps_default is not None:
            p.add_argument("--steps", type=int, default=steps_default,
                           help="integration steps (even)")

    common(sub.add_parser("check", help="run every module's invariant suite"))
    common(sub.add_parser("fdsweep", help="error-vs-scale sweep for f(A)=A^2"))
    common(sub.add_parser("tridiag", help="tridiagonal adjoint gradient report"),
           n_default=100)
    common(sub.add_parser("odegrad", help="ODE gradient three-way comparison"),
           steps_default=2000)
    common(sub.add_parser("jacdet", help="matrix-function Jacobian determinants"))
    common(sub.add_parser("eig", help="eigenvalue perturbation vs FD table"),
           n_default=5)
    common(sub.add_parser("hessian-demo", help="Hessian assembly demonstration"))
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.cmd == "check":
            code, report = run_check(seed=args.seed)
            _write(json.dumps(report, indent=2), args.out)
            return code
        if args.cmd == "fdsweep":
            rows = run_fdsweep(seed=args.seed)
            if args.format == "json":
                payload = _report(
                    args.seed, {"subcommand": "fdsweep"},
                    {"min_rel_err": min(r.relative_error for r in rows)},
                    rows=[[r.scale, r.perturbation_norm, r.relative_error]
                          for r in rows],
                )
                _write(json.dumps(payload, indent=2), args.out)
            else:
                buf = io.StringIO()
                fdcheck.sweep_to_csv(rows, buf)
                _write(buf.getvalue(), args.out)
            return 0
        if args.cmd == "tridiag":
            if args.n < 2:
                parser.error("--n must be at least 2")
            code, report = run_tridiag(n=args.n, seed=args.seed)
            _write(json.dumps(report, indent=2), args.out)
            return code
        if args.cmd == "odegrad":
            if args.steps < 2 or args.steps % 2 != 0:
                parser.error("--steps must be even and >= 2")
            code, report, csv_text = run_odegrad(
                steps=args.steps, seed=args.seed, want_csv=args.format == "csv"
            )
            if args.format == "csv":
                _write(csv_text, args.out)
            else:
                _write(json.dumps(report, indent=2), args.out)
            return code
        if args.cmd == "jacdet":
            code, report = run_jacdet(seed=args.seed)
            _write(json.dumps(report, indent=2), args.out)
            return code
        if args.cmd == "eig":
            if args.n < 2:
                parser.error("--n must be at least 2")
            code, rows, worst = run_eig(n=args.n, seed=args.seed)
            if args.format == "json":
                payload = _report(
                    args.seed, {"subcommand": "eig", "n": args.n},
                    {"worst_rel_err": worst},
                    rows=[[i, dl, fd, rel] for i, dl, fd, rel in rows],
                    passed=code == 0,
                )
                _write(json.dumps(payload, indent=2), args.out)
            else:
                _write(eig_csv(rows), args.out)
            return code
        if args.cmd == "hessian-demo":
            code, report = run_hessian_demo(seed=args.seed)
            _write(json.dumps(report, indent=2), args.out)
            return code
    except MatDerivError as exc:
        sys.stderr.write(f"matderiv: numeric failure: {exc}\n")
        return 3
    raise AssertionError("unreachable")  # pragma: no cover


if __name__ == "__main__":
    raise SystemExit(main())
