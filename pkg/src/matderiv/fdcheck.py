"""Finite-difference verification harness.

Forward and central differences, relative-error scoring, step-size
suggestion, log-log error sweeps (exportable as CSV for plotting), and a
"triple check" that pits an analytic derivative, an AD derivative and a
finite difference against each other along random directions.  A failed
comparison is a *result*, not an exception: the report says so and callers
decide what to do.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import forward, reverse
from .core import frob
from .errors import ContractError, DomainError

EPS = 2.0**-52


def forward_diff(f, x, dx):
    """f(x + dx) - f(x); works for scalar, vector or matrix arguments."""
    return f(x + dx) - f(x)


def central_diff(f, x, dx):
    """[f(x + dx) - f(x - dx)] / 2."""
    return (f(x + dx) - f(x - dx)) / 2.0


def relative_error(approx, exact) -> float:
    """||approx - exact||_F / ||exact||_F; undefined for exact == 0."""
    approx = np.asarray(approx, dtype=float)
    exact = np.asarray(exact, dtype=float)
    if approx.shape != exact.shape:
        raise ContractError(
            f"relative_error: shapes differ ({approx.shape} vs {exact.shape})"
        )
    denom = frob(exact)
    if denom == 0.0:
        raise DomainError("relative_error against an exactly-zero reference")
    return frob(approx - exact) / denom


def suggest_step(x) -> float:
    """sqrt(machine eps) * (1 + ||x||); the forward-difference sweet spot."""
    return math.sqrt(EPS) * (1.0 + frob(np.asarray(x, dtype=float)))


def gaussian_direction(rng, shape):
    """Unit-Frobenius-norm Gaussian direction."""
    g = rng.standard_normal(shape)
    norm = frob(g)
    while norm == 0.0:  # pragma: no cover - measure-zero
        g = rng.standard_normal(shape)
        norm = frob(g)
    return g / norm


@dataclass
class SweepRow:
    scale: float
    perturbation_norm: float
    relative_error: float


def error_sweep(f, df_action, x, direction, scales) -> list[SweepRow]:
    """Forward-difference error of f against the linear prediction
    ``df_action(dx)`` for dx = s * direction, one row per scale s."""
    x = np.asarray(x, dtype=float)
    direction = np.asarray(direction, dtype=float)
    rows = []
    for s in scales:
        dx = s * direction
        approx = forward_diff(f, x, dx)
        rows.append(SweepRow(float(s), frob(dx), relative_error(approx, df_action(dx))))
    return rows


def sweep_to_csv(rows, stream) -> None:
    """Write sweep rows as CSV (header + one line per row)."""
    stream.write("scale,perturbation_norm,relative_error\n")
    for r in rows:
        stream.write(f"{r.scale!r},{r.perturbation_norm!r},{r.relative_error!r}\n")


def best_scale(rows) -> float:
    """Scale of the minimum-error row (the bottom of the V-curve)."""
    if not rows:
        raise ContractError("best_scale of an empty sweep")
    return min(rows, key=lambda r: r.relative_error).scale


@dataclass
class TripleCheckRow:
    direction_index: int
    ad_vs_analytic: float
    fd_vs_analytic: float
    ok: bool


@dataclass
class TripleCheckReport:
    rows: list[TripleCheckRow] = field(default_factory=list)
    ad_tol: float = 1e-10
    fd_tol: float = 1e-4

    @property
    def passed(self) -> bool:
        return all(r.ok for r in self.rows)

    def summary(self) -> str:
        lines = []
        for r in self.rows:
            verdict = "ok" if r.ok else "MISMATCH"
            lines.append(
                f"direction {r.direction_index}: ad={r.ad_vs_analytic:.3e} "
                f"fd={r.fd_vs_analytic:.3e} [{verdict}]"
            )
        lines.append("PASS" if self.passed else "FAIL")
        return "\n".join(lines)


def _eval_outputs(program, xs) -> np.ndarray:
    out = program(list(xs))
    if isinstance(out, (list, tuple)):
        return np.array([forward.primal(v) for v in out], dtype=float)
    return np.array([forward.primal(out)], dtype=float)


def _jacobian_reverse(program, x: np.ndarray) -> np.ndarray:
    m = len(_eval_outputs(program, x))
    rows = []
    for i in range(m):
        w = np.zeros(m)
        w[i] = 1.0
        rows.append(reverse.vjp(program, x, w))
    return np.vstack(rows)


def triple_check(
    program,
    analytic_action,
    ad_mode: str,
    x,
    n_directions: int = 5,
    seed: int = 0,
    ad_tol: float = 1e-10,
    fd_tol: float = 1e-4,
) -> TripleCheckReport:
    """Compare, along random unit directions d:

    * ``analytic_action(d)`` - the hand-derived directional derivative,
    * an AD directional derivative of ``program`` (forward mode seeds d;
      reverse mode assembles the Jacobian row by row and applies it),
    * a forward finite difference at the suggested step.

    ``program`` maps a list of scalar-likes to a scalar-like or list of
    them, so one source text serves all three evaluations.
    """
    x = np.asarray(x, dtype=float)
    if ad_mode not in ("forward", "reverse"):
        raise ContractError(f"unknown ad_mode {ad_mode!r}")
    rng = np.random.default_rng(seed)
    h = suggest_step(x)
    report = TripleCheckReport(ad_tol=ad_tol, fd_tol=fd_tol)
    jac = _jacobian_reverse(program, x) if ad_mode == "reverse" else None
    for i in range(n_directions):
        d = gaussian_direction(rng, x.shape)
        exact = np.atleast_1d(np.asarray(analytic_action(d), dtype=float))
        if ad_mode == "forward":
            ad = np.atleast_1d(forward.directional_derivative(program, x, d))
        else:
            ad = jac @ d
        fd = (_eval_outputs(program, x + h * d) - _eval_outputs(program, x)) / h
        ad_err = relative_error(ad, exact)
        fd_err = relative_error(fd, exact)
        report.rows.append(
            TripleCheckRow(i, ad_err, fd_err, ad_err <= ad_tol and fd_err <= fd_tol)
        )
    return report
