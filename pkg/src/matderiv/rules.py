"""Catalog of analytic matrix derivative rules.

Each ``d_*`` operation is the derivative as a *linear operator*: it maps a
perturbation of the input to the first-order change of the output.  The
``grad_*`` operations return the gradient object whose Frobenius inner
product with the perturbation gives df (same shape as the input; the only
inner product used here is Frobenius).

Also houses the four plane-transform maps (rotation, hyperbolic rotation,
nonlinear shear, position-dependent rotation "warp") together with their
closed-form Jacobians, and the rank-1-update solve used to differentiate
x -> (A + y x^T)^{-1} b in quadratic time.
"""

from __future__ import annotations

import math

import numpy as np

from . import core, counting
from . import scalarfn as sf
from .core import as_matrix, as_square, as_vector, frob
from .errors import ContractError, DomainError, ShapeError, SingularMatrixError


def _check_same_shape(a, b, what: str):
    if a.shape != b.shape:
        raise ShapeError(f"{what}: shapes differ ({a.shape} vs {b.shape})")


def d_inverse(a, da) -> np.ndarray:
    """d(A^-1)[dA] = -A^-1 dA A^-1, via two LU solves (A^-1 never formed)."""
    a = as_square(a)
    da = as_square(da)
    _check_same_shape(a, da, "d_inverse")
    y = core.lu_solve(a, da)            # A^-1 dA
    z = core.lu_solve(a.T, y.T).T       # (A^-1 dA) A^-1
    return -z


def _cofactor_minors(a: np.ndarray) -> np.ndarray:
    """Cofactor matrix by Laplace minors; cost explodes, so n <= 4 only."""
    n = a.shape[0]
    if n == 1:
        return np.ones((1, 1))
    c = np.empty((n, n))
    for i in range(n):
        rows = [r for r in range(n) if r != i]
        for j in range(n):
            cols = [s for s in range(n) if s != j]
            minor = a[np.ix_(rows, cols)]
            c[i, j] = (-1) ** (i + j) * core.det(minor)
    return c


def grad_det(a) -> np.ndarray:
    """gradient of det: the cofactor matrix, det(A) * A^-T when A is
    invertible, with d(det A) = tr(G^T dA).

    Singular inputs fall back to Laplace minors for n <= 4 (the cofactor
    needs no inverse); larger singular inputs are rejected.
    """
    a = as_square(a)
    n = a.shape[0]
    try:
        inv = core.lu_solve(a, np.eye(n))
    except SingularMatrixError:
        if n <= 4:
            return _cofactor_minors(a)
        raise
    return core.det(a) * inv.T


def d_logdet(a, da) -> float:
    """d(log det A)[dA] = tr(A^-1 dA); requires det A > 0."""
    a = as_square(a)
    da = as_square(da)
    _check_same_shape(a, da, "d_logdet")
    if core.det(a) <= 0.0:
        raise DomainError("d_logdet needs det(A) > 0")
    return float(np.trace(core.lu_solve(a, da)))


def d_charpoly(a, x: float) -> float:
    """p'(x) for p(x) = det(xI - A): det(xI - A) * tr((xI - A)^-1).

    ``x`` must stay away from the spectrum; for symmetric ``a`` the distance
    is checked explicitly (gap > 1e-10), otherwise the elimination pivot
    tolerance of xI - A is the guard.
    """
    a = as_square(a)
    n = a.shape[0]
    norm = frob(a)
    if norm > 0 and frob(a - a.T) <= 1e-12 * norm:
        lam = core.jacobi_eigen(a).lam
        if np.min(np.abs(lam - x)) <= 1e-10:
            raise SingularMatrixError(
                f"x={x} is within 1e-10 of an eigenvalue"
            )
    b = x * np.eye(n) - a
    inv = core.lu_solve(b, np.eye(n))
    return float(core.det(b) * np.trace(inv))


def second_det(a, da, da2) -> float:
    """The symmetric bilinear second derivative of det:

    f''(A)[dA, dA'] = det A * [tr(A^-1 dA') tr(A^-1 dA) - tr(A^-1 dA' A^-1 dA)].
    """
    a = as_square(a)
    da = as_square(da)
    da2 = as_square(da2)
    _check_same_shape(a, da, "second_det")
    _check_same_shape(a, da2, "second_det")
    x1 = core.lu_solve(a, da)
    x2 = core.lu_solve(a, da2)
    return float(core.det(a) * (np.trace(x2) * np.trace(x1) - np.trace(x2 @ x1)))


def grad_quadform(a, x) -> np.ndarray:
    """gradient of x^T A x in x: (A + A^T) x."""
    a = as_square(a)
    x = as_vector(x)
    if a.shape[0] != len(x):
        raise ShapeError("grad_quadform: size mismatch")
    return (a + a.T) @ x


def grad_frobenius(a) -> np.ndarray:
    """gradient of ||A||_F: A / ||A||_F."""
    a = as_matrix(a)
    norm = frob(a)
    if norm == 0.0:
        raise DomainError("Frobenius norm is not differentiable at 0")
    return a / norm


def grad_bilinear_xay(x, y) -> np.ndarray:
    """gradient of A -> x^T A y: the outer product x y^T."""
    return np.outer(as_vector(x), as_vector(y))


def d_matpow(a, da, k: int) -> np.ndarray:
    """d(A^k)[dA] = sum_{j=0}^{k-1} A^j dA A^(k-1-j)."""
    a = as_square(a)
    da = as_square(da)
    _check_same_shape(a, da, "d_matpow")
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise ContractError(f"d_matpow needs an integer k >= 1, got {k!r}")
    n = a.shape[0]
    powers = [np.eye(n)]
    for _ in range(k - 1):
        powers.append(powers[-1] @ a)
    out = np.zeros_like(a)
    for j in range(k):
        out += powers[j] @ da @ powers[k - 1 - j]
    return out


def sherman_morrison_solve(a_inv, y, x, b) -> np.ndarray:
    """(A + y x^T)^{-1} b from a known A^{-1}, in Theta(n^2):

        A^{-1} b - A^{-1} y (x^T A^{-1} b) / (1 + x^T A^{-1} y)
    """
    a_inv = as_square(a_inv)
    y = as_vector(y)
    x = as_vector(x)
    b = as_vector(b)
    n = a_inv.shape[0]
    if not (len(y) == len(x) == len(b) == n):
        raise ShapeError("sherman_morrison_solve: size mismatch")
    u = core.matvec(a_inv, b)
    z = core.matvec(a_inv, y)
    denom = 1.0 + core.dot(x, z)
    if abs(denom) <= 1e-12:
        raise SingularMatrixError("rank-1 update is singular: 1 + x^T A^-1 y ~ 0")
    s = core.dot(x, u)
    counting.add_flops(2 * n + 2)
    return u - z * (s / denom)


def jacobian_rank1_resolvent(a_inv, y, x, b) -> np.ndarray:
    """Jacobian of f(x) = (A + y x^T)^{-1} b: the rank-1 matrix -c f(x)^T
    with c = (A + y x^T)^{-1} y, assembled from two rank-1-update solves and
    one outer product (quadratic total cost)."""
    c = sherman_morrison_solve(a_inv, y, x, y)
    fx = sherman_morrison_solve(a_inv, y, x, b)
    counting.add_flops(len(c) * len(fx))
    return -np.outer(c, fx)


def grad_diagm_quadratic(a, x) -> np.ndarray:
    """gradient of f(x) = x^T (A + diag(x))^2 x for symmetric A:

        2 (A + 2 diag(x)) (A + diag(x)) x
    """
    a = as_square(a)
    x = as_vector(x)
    if a.shape[0] != len(x):
        raise ShapeError("grad_diagm_quadratic: size mismatch")
    if frob(a) > 0 and frob(a - a.T) > 1e-12 * frob(a):
        raise ContractError("grad_diagm_quadratic needs a symmetric matrix")
    d = np.diag(x)
    return 2.0 * (a + 2.0 * d) @ ((a + d) @ x)


def d_projection(x, dx) -> np.ndarray:
    """Differential of the projector map f(x) = x x^T / (x^T x):

        (dx x^T + x dx^T)/(x^T x) - 2 x x^T (x^T dx)/(x^T x)^2
    """
    x = as_vector(x)
    dx = as_vector(dx)
    if x.shape != dx.shape:
        raise ShapeError("d_projection: size mismatch")
    xtx = float(x @ x)
    if xtx == 0.0:
        raise DomainError("projection map undefined at x = 0")
    sym = np.outer(dx, x) + np.outer(x, dx)
    return sym / xtx - 2.0 * np.outer(x, x) * float(x @ dx) / xtx**2


def jacobian_projection_b(x, b) -> np.ndarray:
    """Jacobian of g(x) = (x x^T / x^T x) b:

        [ (x^T b) I + x b^T - 2 x x^T b x^T/(x^T x) ] / (x^T x)
    """
    x = as_vector(x)
    b = as_vector(b)
    if x.shape != b.shape:
        raise ShapeError("jacobian_projection_b: size mismatch")
    xtx = float(x @ x)
    if xtx == 0.0:
        raise DomainError("projection map undefined at x = 0")
    xb = float(x @ b)
    n = len(x)
    return (xb * np.eye(n) + np.outer(x, b) - 2.0 * xb * np.outer(x, x) / xtx) / xtx


# plane transforms ----------------------------------------------------------

TRANSFORM_KINDS = ("rotate", "hyperbolic", "shear", "warp")


def transform_map(kind: str, theta: float, xs):
    """The transform itself, written over scalar-likes so the same text can
    be evaluated plainly, with duals, or on a tape.  ``xs`` is the 2-point
    (x, y)."""
    x, y = xs
    if kind == "rotate":
        c, s = math.cos(theta), math.sin(theta)
        return [c * x + s * y, -s * x + c * y]
    if kind == "hyperbolic":
        ch, sh = math.cosh(theta), math.sinh(theta)
        return [ch * x + sh * y, sh * x + ch * y]
    if kind == "shear":
        return [x, y + theta * x * x]
    if kind == "warp":
        phi = theta * sf.sqrt(x * x + y * y)
        c, s = sf.cos(phi), sf.sin(phi)
        return [c * x + s * y, -s * x + c * y]
    raise ContractError(f"unknown transform kind {kind!r}")


def analytic_transform_jacobians(kind: str, theta: float, point) -> np.ndarray:
    """Closed-form 2x2 Jacobian of ``transform_map`` at ``point``."""
    point = as_vector(point)
    if len(point) != 2:
        raise ShapeError("transforms act on points in the plane")
    x, y = point
    if kind == "rotate":
        c, s = math.cos(theta), math.sin(theta)
        return np.array([[c, s], [-s, c]])
    if kind == "hyperbolic":
        ch, sh = math.cosh(theta), math.sinh(theta)
        return np.array([[ch, sh], [sh, ch]])
    if kind == "shear":
        return np.array([[1.0, 0.0], [2.0 * theta * x, 1.0]])
    if kind == "warp":
        r2 = float(point @ point)
        if r2 == 0.0:
            raise DomainError("warp Jacobian undefined at the origin")
        r = math.sqrt(r2)
        phi = theta * r
        rot = np.array([[math.cos(phi), math.sin(phi)],
                        [-math.sin(phi), math.cos(phi)]])
        rot_prime = np.array([[-math.sin(phi), math.cos(phi)],
                              [-math.cos(phi), -math.sin(phi)]])
        return theta * r * rot_prime @ np.outer(point, point) / r2 + rot
    raise ContractError(f"unknown transform kind {kind!r}")
