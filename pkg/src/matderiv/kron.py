"""Vectorized Jacobians of matrix -> matrix maps via Kronecker products.

``vec`` stacks columns (column-major).  The central algebraic fact is
(A (x) B) vec(C) = vec(B C A^T); everything else here is closed-form
Kronecker Jacobians for squaring, cubing, inversion and a generic
spectral-decomposition route for f(M) = X f(Lambda) X^{-1} together with its
finite-difference Jacobian and the product-formula prediction of that
Jacobian's determinant.
"""

from __future__ import annotations

import math

import numpy as np

from . import core, counting
from .core import as_square, as_vector, as_matrix, frob
from .errors import (
    ContractError,
    DegenerateEigenvaluesError,
    DomainError,
    ShapeError,
    SingularMatrixError,
)


def vec(a) -> np.ndarray:
    """Column-stacking: vec(A) lists the columns of A top to bottom."""
    a = as_matrix(a)
    return a.reshape(-1, order="F").copy()


def unvec(v, m: int, n: int) -> np.ndarray:
    v = as_vector(v)
    if len(v) != m * n:
        raise ShapeError(f"unvec: length {len(v)} != {m}*{n}")
    return v.reshape((m, n), order="F").copy()


def kron(a, b) -> np.ndarray:
    a = as_matrix(a)
    b = as_matrix(b)
    counting.add_flops(a.size * b.size)
    return np.kron(a, b)


def kron_vec_identity_check(a, b, c) -> float:
    """Relative residual of (A (x) B) vec(C) = vec(B C A^T)."""
    a = as_matrix(a)
    b = as_matrix(b)
    c = as_matrix(c)
    if c.shape != (b.shape[1], a.shape[1]):
        raise ShapeError(
            f"kron_vec_identity_check: C must be {b.shape[1]}x{a.shape[1]}, got {c.shape}"
        )
    lhs = np.kron(a, b) @ vec(c)
    rhs = vec(b @ c @ a.T)
    denom = frob(rhs)
    if denom == 0.0:
        return frob(lhs - rhs)
    return frob(lhs - rhs) / denom


def apply_bcat(a, b, c) -> np.ndarray:
    """B C A^T by two counted matrix products (the cheap route)."""
    return core.matmul(core.matmul(as_matrix(b), as_matrix(c)), as_matrix(a).T)


def apply_kron_vec(a, b, c) -> np.ndarray:
    """The same value via the materialized Kronecker matrix (the costly
    route kept only to demonstrate the cost separation)."""
    a = as_matrix(a)
    b = as_matrix(b)
    c = as_matrix(c)
    k = kron(a, b)
    return unvec(core.matvec(k, vec(c)), b.shape[0], a.shape[0])


def jac_square_vec(a) -> np.ndarray:
    """Jacobian of vec(A^2) in vec(A):  I (x) A + A^T (x) I."""
    a = as_square(a)
    n = a.shape[0]
    eye = np.eye(n)
    return np.kron(eye, a) + np.kron(a.T, eye)


def jac_cube_vec(a) -> np.ndarray:
    """Jacobian of vec(A^3) in vec(A):
    (A^2)^T (x) I + A^T (x) A + I (x) A^2."""
    a = as_square(a)
    n = a.shape[0]
    eye = np.eye(n)
    a2 = a @ a
    return np.kron(a2.T, eye) + np.kron(a.T, a) + np.kron(eye, a2)


def jac_inverse_vec(a) -> np.ndarray:
    """Jacobian of vec(A^-1) in vec(A):  -(A^-T (x) A^-1)."""
    a = as_square(a)
    inv = core.lu_solve(a, np.eye(a.shape[0]))
    return -np.kron(inv.T, inv)


# matrix functions ----------------------------------------------------------

_EIG_GAP_RTOL = 1e-8


def _require_symmetric(s: np.ndarray, what: str) -> None:
    norm = frob(s)
    if norm > 0 and frob(s - s.T) > 1e-12 * norm:
        raise ContractError(f"{what} needs a symmetric matrix")


def _require_gaps(lam: np.ndarray, scale: float, what: str) -> None:
    lam = np.sort(np.asarray(lam, dtype=float))
    if len(lam) > 1:
        gap = float(np.min(np.diff(lam)))
        if gap <= _EIG_GAP_RTOL * max(scale, 1.0):
            raise DegenerateEigenvaluesError(
                f"{what}: eigenvalue gap {gap:.3e} too small"
            )


def matrix_function(f, s) -> np.ndarray:
    """f(S) = Q f(Lambda) Q^T for symmetric S, f applied eigenvalue-wise."""
    s = as_square(s)
    _require_symmetric(s, "matrix_function")
    dec = core.jacobi_eigen(s)
    fvals = np.array([float(f(v)) for v in dec.lam])
    return (dec.q * fvals) @ dec.q.T


def _eig_near_symmetric(m: np.ndarray):
    """Eigendecomposition M = X diag(lams) X^{-1} for a real matrix whose
    asymmetric part is a small perturbation of a symmetric matrix with
    well-separated eigenvalues.

    Starts from the rotations of the symmetric part and sharpens each pair
    with shifted inverse iteration + a Rayleigh-quotient update; the shift is
    offset from the eigenvalue estimate so the shifted matrix stays
    comfortably invertible.
    """
    n = m.shape[0]
    dec = core.jacobi_eigen(0.5 * (m + m.T))
    eye = np.eye(n)
    cols = np.empty((n, n))
    lams = np.empty(n)
    for i in range(n):
        lam = float(dec.lam[i])
        v = dec.q[:, i].copy()
        for _ in range(2):
            delta = 1e-8 * (1.0 + abs(lam))
            try:
                w = core.lu_solve(m - (lam + delta) * eye, v)
            except SingularMatrixError:
                break
            v = w / frob(w)
            lam = float(v @ (m @ v))
        cols[:, i] = v
        lams[i] = lam
    return cols, lams


def matrix_function_general(f, m) -> np.ndarray:
    """f(M) = X f(Lambda) X^{-1} for a (possibly slightly non-symmetric)
    real matrix with distinct real eigenvalues."""
    m = as_square(m)
    x, lams = _eig_near_symmetric(m)
    _require_gaps(lams, frob(m), "matrix_function_general")
    fvals = np.array([float(f(v)) for v in lams])
    x_inv = core.lu_solve(x, np.eye(m.shape[0]))
    return (x * fvals) @ x_inv


def jacobian_matrix_function(f, s) -> np.ndarray:
    """Finite-difference Jacobian of vec(f(M)) in vec(M) at a symmetric
    point, one central difference per entry of M (entries perturbed
    independently, which leaves the matrix slightly non-symmetric; the
    evaluations go through the general spectral route)."""
    s = as_square(s)
    _require_symmetric(s, "jacobian_matrix_function")
    dec = core.jacobi_eigen(s)
    _require_gaps(dec.lam, frob(s), "jacobian_matrix_function")
    n = s.shape[0]
    h = math.sqrt(2.0**-52) * (1.0 + frob(s))
    jac = np.empty((n * n, n * n))
    col = 0
    for j in range(n):
        for i in range(n):
            bump = np.zeros_like(s)
            bump[i, j] = h
            fp = matrix_function_general(f, s + bump)
            fm = matrix_function_general(f, s - bump)
            jac[:, col] = (vec(fp) - vec(fm)) / (2.0 * h)
            col += 1
    return jac


def theoretical_jacdet(f, f_prime, lam) -> float:
    """Determinant of the Jacobian of M -> f(M) at a symmetric point with
    eigenvalues ``lam``:

        prod_i f'(lam_i) * prod_{i<j} [ (f(lam_i) - f(lam_j)) / (lam_i - lam_j) ]^2
    """
    lam = as_vector(lam)
    _require_gaps(lam, float(np.sqrt(np.sum(lam * lam))), "theoretical_jacdet")
    val = 1.0
    for v in lam:
        val *= float(f_prime(v))
    n = len(lam)
    for i in range(n):
        for j in range(i + 1, n):
            ratio = (float(f(lam[i])) - float(f(lam[j]))) / (lam[i] - lam[j])
            val *= ratio * ratio
    return val


# identity suite ------------------------------------------------------------

KRON_IDENTITIES = (
    "transpose",
    "mixed_product",
    "inverse",
    "orthogonality",
    "determinant",
    "trace",
    "eigenpairs",
)


def _rel(delta: float, ref: float) -> float:
    return delta / (1.0 + ref)


def kron_identity_suite(seed: int = 0, trials: int = 50) -> dict:
    """Randomized check of seven Kronecker-product identities; returns the
    worst relative residual seen per identity."""
    rng = np.random.default_rng(seed)
    worst = {name: 0.0 for name in KRON_IDENTITIES}

    def note(name, delta, ref):
        worst[name] = max(worst[name], _rel(delta, ref))

    for _ in range(trials):
        n = int(rng.integers(2, 5))
        m = int(rng.integers(2, 5))
        a = rng.uniform(-1.0, 1.0, size=(n, n))
        b = rng.uniform(-1.0, 1.0, size=(m, m))
        c = rng.uniform(-1.0, 1.0, size=(n, n))
        d = rng.uniform(-1.0, 1.0, size=(m, m))
        ab = np.kron(a, b)

        # (A (x) B)^T = A^T (x) B^T
        note("transpose", frob(ab.T - np.kron(a.T, b.T)), frob(ab))

        # (A (x) B)(C (x) D) = AC (x) BD
        lhs = ab @ np.kron(c, d)
        rhs = np.kron(a @ c, b @ d)
        note("mixed_product", frob(lhs - rhs), frob(rhs))

        # (A (x) B)^-1 = A^-1 (x) B^-1 (shift to guarantee invertibility)
        a1 = a + (n + 1.0) * np.eye(n)
        b1 = b + (m + 1.0) * np.eye(m)
        inv_a = core.lu_solve(a1, np.eye(n))
        inv_b = core.lu_solve(b1, np.eye(m))
        big = np.kron(a1, b1)
        inv_big = core.lu_solve(big, np.eye(n * m))
        note("inverse", frob(inv_big - np.kron(inv_a, inv_b)), frob(inv_big))

        # orthogonal (x) orthogonal is orthogonal
        qa = core.jacobi_eigen(a + a.T).q
        qb = core.jacobi_eigen(b + b.T).q
        qq = np.kron(qa, qb)
        note("orthogonality", frob(qq.T @ qq - np.eye(n * m)), math.sqrt(n * m))

        # det(A (x) B) = det(A)^m det(B)^n
        lhs_d = core.det(ab)
        rhs_d = core.det(a) ** m * core.det(b) ** n
        note("determinant", abs(lhs_d - rhs_d), abs(rhs_d))

        # tr(A (x) B) = tr(A) tr(B)
        note(
            "trace",
            abs(float(np.trace(ab)) - float(np.trace(a)) * float(np.trace(b))),
            abs(float(np.trace(a)) * float(np.trace(b))),
        )

        # eigenvalues of S_a (x) S_b are the pairwise products
        sa = 0.5 * (a + a.T)
        sb = 0.5 * (b + b.T)
        ea = core.jacobi_eigen(sa).lam
        eb = core.jacobi_eigen(sb).lam
        products = np.sort(np.outer(ea, eb).ravel())
        direct = np.sort(core.jacobi_eigen(np.kron(sa, sb)).lam)
        note(
            "eigenpairs",
            float(np.max(np.abs(products - direct))),
            float(np.max(np.abs(products))),
        )

    return worst
