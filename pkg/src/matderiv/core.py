"""Dense and tridiagonal real linear algebra.

The numeric substrate for everything else: partial-pivot LU, the banded
Thomas solve, a cyclic Jacobi eigensolver for symmetric matrices, LU-based
determinants, and a Newton root finder driven by forward-mode Jacobians.
Factorizations and the eigensolver are written out here; numpy arrays are
used purely as storage and for elementwise/block arithmetic.

Conventions fixed by this module:
  - vectors are 1-D float64 arrays, matrices 2-D float64 arrays;
  - eigenvalues are returned ascending, with each eigenvector column signed
    so its largest-magnitude entry is positive;
  - every pivot test uses the single tolerance ``PIVOT_RTOL * ||A||_F``.

All returned objects are treated as immutable; operations are pure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import counting
from .errors import ( # noqa: F401  (re-exported for convenience)
    ContractError,
    ConvergenceError,
    ShapeError,
    SingularMatrixError,
)

PIVOT_RTOL = 1e-12      # pivot threshold relative to the Frobenius norm
JACOBI_MAX_SWEEPS = 100
JACOBI_OFF_RTOL = 1e-12  # stop when off-diagonal norm falls below this * ||S||_F


def as_vector(x) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise ShapeError(f"expected a 1-D vector, got ndim={v.ndim}")
    if not np.isfinite(v).all():
        raise ContractError("vector contains non-finite entries")
    return v


def as_matrix(x) -> np.ndarray:
    m = np.asarray(x, dtype=float)
    if m.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got ndim={m.ndim}")
    if not np.isfinite(m).all():
        raise ContractError("matrix contains non-finite entries")
    return m


def as_square(x) -> np.ndarray:
    m = as_matrix(x)
    if m.shape[0] != m.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {m.shape}")
    return m


def frob(x) -> float:
    """Frobenius norm: sqrt of the sum of squared entries (any shape)."""
    a = np.asarray(x, dtype=float)
    return float(np.sqrt(np.sum(a * a)))


def matmul(a, b) -> np.ndarray:
    """Matrix product, counted at the nominal 2*m*p*q scalar operations."""
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dimensions differ ({a.shape} @ {b.shape})")
    counting.add_flops(2 * a.shape[0] * a.shape[1] * b.shape[1])
    return a @ b


def matvec(a, x) -> np.ndarray:
    a = as_matrix(a)
    x = as_vector(x)
    if a.shape[1] != x.shape[0]:
        raise ShapeError(f"matvec: inner dimensions differ ({a.shape} @ {x.shape})")
    counting.add_flops(2 * a.shape[0] * a.shape[1])
    return a @ x


def dot(x, y) -> float:
    x = as_vector(x)
    y = as_vector(y)
    if x.shape != y.shape:
        raise ShapeError("dot: length mismatch")
    counting.add_flops(2 * len(x))
    return float(x @ y)


@dataclass
class TridiagSym:
    """Symmetric tridiagonal matrix stored as its diagonal ``diag`` (length n)
    and off-diagonal ``offdiag`` (length n-1).  Entry (i, i+1) == entry
    (i+1, i) == offdiag[i]; everything off the band is exactly zero.
    """

    diag: np.ndarray
    offdiag: np.ndarray

    def __post_init__(self):
        self.diag = as_vector(self.diag)
        self.offdiag = as_vector(self.offdiag)
        if len(self.diag) < 1:
            raise ShapeError("TridiagSym needs at least one diagonal entry")
        if len(self.offdiag) != len(self.diag) - 1:
            raise ShapeError(
                f"offdiag length {len(self.offdiag)} != diag length {len(self.diag)} - 1"
            )

    @property
    def n(self) -> int:
        return len(self.diag)

    def densify(self) -> np.ndarray:
        a = np.diag(self.diag)
        for i, p in enumerate(self.offdiag):
            a[i, i + 1] = p
            a[i + 1, i] = p
        return a

    def norm(self) -> float:
        return float(
            np.sqrt(np.sum(self.diag**2) + 2.0 * np.sum(self.offdiag**2))
        )


@dataclass
class EigenDecomp:
    """Orthogonal eigenvector matrix ``q`` (columns are eigenvectors) and
    eigenvalues ``lam`` sorted ascending, with S = q @ diag(lam) @ q.T."""

    q: np.ndarray
    lam: np.ndarray


def lu_factor(a) -> tuple[np.ndarray, np.ndarray, float]:
    """Partial-pivot LU.  Returns (packed LU, row permutation, pivot sign).

    The permutation array ``perm`` maps factored row k to original row
    perm[k].  Raises ``SingularMatrixError`` (with the failing elimination
    step) when the best available pivot is at or below PIVOT_RTOL*||A||_F.
    """
    a = as_square(a)
    n = a.shape[0]
    tol = PIVOT_RTOL * frob(a)
    lu = a.copy()
    perm = np.arange(n)
    sign = 1.0
    flops = 0
    for k in range(n):
        p = k + int(np.argmax(np.abs(lu[k:, k])))
        if abs(lu[p, k]) <= tol:
            raise SingularMatrixError(
                f"matrix singular to tolerance at elimination step {k}",
                pivot_index=k,
            )
        if p != k:
            lu[[k, p]] = lu[[p, k]]
            perm[[k, p]] = perm[[p, k]]
            sign = -sign
        r = n - k - 1
        lu[k + 1:, k] /= lu[k, k]
        lu[k + 1:, k + 1:] -= np.outer(lu[k + 1:, k], lu[k, k + 1:])
        flops += r + 2 * r * r
    counting.add_flops(flops)
    return lu, perm, sign


def lu_solve_factored(lu: np.ndarray, perm: np.ndarray, b) -> np.ndarray:
    """Substitution phase against an existing factorization.  ``b`` may be a
    vector or a matrix of stacked right-hand-side columns."""
    b = np.asarray(b, dtype=float)
    vector_rhs = b.ndim == 1
    if vector_rhs:
        b = b[:, None]
    n = lu.shape[0]
    if b.shape[0] != n:
        raise ShapeError(f"rhs has {b.shape[0]} rows, matrix is {n}x{n}")
    x = b[perm].copy()
    for k in range(n):          # forward: L has unit diagonal
        x[k + 1:] -= np.outer(lu[k + 1:, k], x[k])
    for k in range(n - 1, -1, -1):  # backward
        x[k] /= lu[k, k]
        x[:k] -= np.outer(lu[:k, k], x[k])
    counting.add_flops(2 * n * n * b.shape[1])
    return x[:, 0] if vector_rhs else x


def lu_solve(a, b) -> np.ndarray:
    """Solve a x = b by partial-pivot LU; one solve event on the counter.

    ``b`` may be a vector or a matrix of right-hand-side columns.
    """
    lu, perm, _ = lu_factor(a)
    x = lu_solve_factored(lu, perm, b)
    counting.add_solve(1)
    return x


def det(a) -> float:
    """Determinant as the signed product of LU pivots.

    Unlike ``lu_solve`` this does not raise on singular input: a zero pivot
    column simply yields 0.0.
    """
    a = as_square(a)
    n = a.shape[0]
    lu = a.copy()
    sign = 1.0
    for k in range(n):
        p = k + int(np.argmax(np.abs(lu[k:, k])))
        if lu[p, k] == 0.0:
            return 0.0
        if p != k:
            lu[[k, p]] = lu[[p, k]]
            sign = -sign
        lu[k + 1:, k] /= lu[k, k]
        lu[k + 1:, k + 1:] -= np.outer(lu[k + 1:, k], lu[k, k + 1:])
    return float(sign * np.prod(np.diag(lu)))


def thomas_solve(t: TridiagSym, b) -> np.ndarray:
    """Theta(n) tridiagonal solve (no pivoting).

    Caller contract: the band must be nonsingular along the plain
    elimination order -- diagonally dominant systems always are.  A zero (to
    tolerance) eliminated diagonal entry raises ``SingularMatrixError``.
    """
    b = as_vector(b)
    n = t.n
    if len(b) != n:
        raise ShapeError(f"rhs length {len(b)} != system size {n}")
    tol = PIVOT_RTOL * t.norm()
    d = t.diag.copy()
    e = t.offdiag
    rhs = b.copy()
    for i in range(1, n):
        if abs(d[i - 1]) <= tol:
            raise SingularMatrixError(
                f"tridiagonal elimination hit a zero diagonal at row {i - 1}",
                pivot_index=i - 1,
            )
        w = e[i - 1] / d[i - 1]
        d[i] -= w * e[i - 1]
        rhs[i] -= w * rhs[i - 1]
    if abs(d[n - 1]) <= tol:
        raise SingularMatrixError(
            f"tridiagonal elimination hit a zero diagonal at row {n - 1}",
            pivot_index=n - 1,
        )
    x = np.empty(n)
    x[n - 1] = rhs[n - 1] / d[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = (rhs[i] - e[i] * x[i + 1]) / d[i]
    counting.add_flops(8 * n - 7)
    counting.add_solve(1)
    return x


def jacobi_eigen(s) -> EigenDecomp:
    """Cyclic Jacobi eigensolver for symmetric matrices.

    Sweeps 2x2 rotations until the off-diagonal Frobenius norm falls below
    JACOBI_OFF_RTOL * ||S||_F.  Asymmetric input (beyond 1e-12 relative) is a
    contract violation; failure to converge within JACOBI_MAX_SWEEPS raises
    ``ConvergenceError``.
    """
    s = as_square(s)
    n = s.shape[0]
    norm = frob(s)
    if norm == 0.0:
        return EigenDecomp(q=np.eye(n), lam=np.zeros(n))
    if frob(s - s.T) > 1e-12 * norm:
        raise ContractError("jacobi_eigen requires a symmetric matrix")
    a = 0.5 * (s + s.T)
    q = np.eye(n)
    off_tol = JACOBI_OFF_RTOL * norm
    for _ in range(JACOBI_MAX_SWEEPS):
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2) * 2.0)
        if off <= off_tol:
            break
        for p in range(n - 1):
            for r in range(p + 1, n):
                apr = a[p, r]
                if apr == 0.0:
                    continue
                theta = (a[r, r] - a[p, p]) / (2.0 * apr)
                if abs(theta) > 1e12:
                    t = 1.0 / (2.0 * theta)
                else:
                    t = np.sign(theta) if theta != 0 else 1.0
                    t /= abs(theta) + np.sqrt(theta * theta + 1.0)
                c = 1.0 / np.sqrt(t * t + 1.0)
                sn = t * c
                for m in (a,):  # two-sided rotation of a
                    colp = m[:, p].copy()
                    colr = m[:, r].copy()
                    m[:, p] = c * colp - sn * colr
                    m[:, r] = sn * colp + c * colr
                    rowp = m[p, :].copy()
                    rowr = m[r, :].copy()
                    m[p, :] = c * rowp - sn * rowr
                    m[r, :] = sn * rowp + c * rowr
                a[p, r] = 0.0
                a[r, p] = 0.0
                colp = q[:, p].copy()
                colr = q[:, r].copy()
                q[:, p] = c * colp - sn * colr
                q[:, r] = sn * colp + c * colr
    else:
        raise ConvergenceError(
            f"jacobi_eigen: off-diagonal norm not reduced in {JACOBI_MAX_SWEEPS} sweeps"
        )
    lam = np.diag(a).copy()
    order = np.argsort(lam, kind="stable")
    lam = lam[order]
    q = q[:, order]
    for j in range(n):  # deterministic column signs
        i = int(np.argmax(np.abs(q[:, j])))
        if q[i, j] < 0:
            q[:, j] = -q[:, j]
    if frob(q.T @ q - np.eye(n)) > 1e-10 * n:
        raise ContractError("jacobi_eigen: orthogonality invariant violated")
    if frob(q @ np.diag(lam) @ q.T - 0.5 * (s + s.T)) > 1e-8 * norm:
        raise ContractError("jacobi_eigen: reconstruction invariant violated")
    return EigenDecomp(q=q, lam=lam)


def newton_root(f, x0, tol: float = 1e-12, max_iter: int = 50,
                history: list | None = None) -> np.ndarray:
    """Newton's method for f(x) = 0, f: R^n -> R^n.

    ``f`` follows the program convention: it takes a sequence of scalar-like
    values and returns a sequence, so the same callable supplies both
    residuals (on floats) and Jacobians (on dual numbers).  Each update
    solves J step = f(x) by LU.  Pass a list as ``history`` to capture the
    iterates (the converged point included).

    Stops when ||f(x)||_inf <= tol; raises ``ConvergenceError`` carrying the
    last iterate if max_iter is exhausted, and ``SingularMatrixError`` if a
    Jacobian cannot be factored.
    """
    from .forward import jacobian_forward  # deferred: forward builds on nothing here

    x = as_vector(x0).copy()
    for _ in range(max_iter):
        if history is not None:
            history.append(x.copy())
        fx = np.asarray([float(v) for v in f(list(x))], dtype=float)
        if len(fx) != len(x):
            raise ShapeError("newton_root needs a square system (len f(x) == len x)")
        if np.max(np.abs(fx)) <= tol:
            return x
        jac = jacobian_forward(f, x)
        x = x - lu_solve(jac, fx)
    raise ConvergenceError(
        f"newton_root: ||f||_inf > {tol} after {max_iter} iterations", last=x
    )
