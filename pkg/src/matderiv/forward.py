"""Forward-mode automatic differentiation via dual numbers.

A :class:`Dual` carries (val, deriv) through a program; arithmetic follows
the calculus rules with ``eps**2 = 0``, and the primal value never depends
on the tangent.  The supported primitive set is fixed: ``+ - * /``, ``sin``,
``cos``, ``exp``, ``log``, ``sqrt``, integer powers, and comparisons (which
read only the primal).  The elementary functions in this module accept plain
numbers as well, so one program text runs both with and without derivatives.

Program convention used by the drivers: a scalar program maps one
scalar-like to one scalar-like; a vector program maps a sequence of
scalar-likes to a sequence of scalar-likes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DomainError, ShapeError

_NUM = (int, float, np.integer, np.floating)


class Dual:
    """Dual number val + deriv*eps with eps**2 = 0.

    Promoting a constant r gives (r, 0).  Comparisons order by the primal
    value only, so branches behave exactly as they would on plain floats.
    """

    __slots__ = ("val", "deriv")

    def __init__(self, val, deriv=0.0):
        self.val = float(val)
        self.deriv = float(deriv)

    def __repr__(self):
        return f"Dual({self.val!r}, {self.deriv!r})"

    @staticmethod
    def lift(x) -> "Dual":
        if isinstance(x, Dual):
            return x
        if isinstance(x, _NUM):
            return Dual(float(x), 0.0)
        raise TypeError(f"cannot lift {type(x).__name__} to Dual")

    # arithmetic -----------------------------------------------------------
    def __add__(self, other):
        o = Dual.lift(other)
        return Dual(self.val + o.val, self.deriv + o.deriv)

    __radd__ = __add__

    def __sub__(self, other):
        o = Dual.lift(other)
        return Dual(self.val - o.val, self.deriv - o.deriv)

    def __rsub__(self, other):
        o = Dual.lift(other)
        return Dual(o.val - self.val, o.deriv - self.deriv)

    def __mul__(self, other):
        o = Dual.lift(other)
        return Dual(self.val * o.val, self.deriv * o.val + self.val * o.deriv)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = Dual.lift(other)
        if o.val == 0.0:
            raise DomainError("dual division by a zero primal")
        return Dual(
            self.val / o.val,
            (self.deriv * o.val - self.val * o.deriv) / (o.val * o.val),
        )

    def __rtruediv__(self, other):
        return Dual.lift(other).__truediv__(self)

    def __neg__(self):
        return Dual(-self.val, -self.deriv)

    def __pow__(self, k):
        return powi(self, k)

    # comparisons read the primal only ------------------------------------
    def _cmp_val(self, other) -> float:
        return other.val if isinstance(other, Dual) else float(other)

    def __lt__(self, other):
        return self.val < self._cmp_val(other)

    def __le__(self, other):
        return self.val <= self._cmp_val(other)

    def __gt__(self, other):
        return self.val > self._cmp_val(other)

    def __ge__(self, other):
        return self.val >= self._cmp_val(other)


def primal(x) -> float:
    """The value part of a scalar-like, unwrapped all the way down (a tape
    variable's value may itself be a dual)."""
    while hasattr(x, "val"):
        x = x.val
    return float(x)


# elementary functions, generic over float | Dual ---------------------------

def sin(x):
    if isinstance(x, Dual):
        return Dual(math.sin(x.val), math.cos(x.val) * x.deriv)
    return math.sin(x)


def cos(x):
    if isinstance(x, Dual):
        return Dual(math.cos(x.val), -math.sin(x.val) * x.deriv)
    return math.cos(x)


def exp(x):
    if isinstance(x, Dual):
        e = math.exp(x.val)
        return Dual(e, e * x.deriv)
    return math.exp(x)


def log(x):
    if primal(x) <= 0.0:
        raise DomainError(f"log domain: need a positive primal, got {primal(x)}")
    if isinstance(x, Dual):
        return Dual(math.log(x.val), x.deriv / x.val)
    return math.log(x)


def sqrt(x):
    p = primal(x)
    if p < 0.0:
        raise DomainError(f"sqrt domain: need a nonnegative primal, got {p}")
    if isinstance(x, Dual):
        if p == 0.0:
            raise DomainError("sqrt is not differentiable at 0")
        r = math.sqrt(x.val)
        return Dual(r, 0.5 / r * x.deriv)
    return math.sqrt(x)


def powi(x, k):
    """Integer power x**k with the analytic k*x**(k-1) tangent rule."""
    if not isinstance(k, (int, np.integer)):
        raise ContractError(f"powi exponent must be an integer, got {k!r}")
    k = int(k)
    if primal(x) == 0.0 and k < 0:
        raise DomainError("negative power of a zero primal")
    if isinstance(x, Dual):
        if k == 0:
            return Dual(1.0, 0.0)
        return Dual(x.val**k, k * x.val ** (k - 1) * x.deriv)
    return float(x) ** k


_ELEM = {"sin": sin, "cos": cos, "exp": exp, "log": log, "sqrt": sqrt}


def dual_elem(kind: str, x, k: int | None = None):
    """Apply a named elementary primitive: (f(val), f'(val)*deriv)."""
    if kind == "pow_int":
        return powi(x, k)
    try:
        return _ELEM[kind](x)
    except KeyError:
        raise ContractError(f"unknown elementary primitive {kind!r}") from None


@dataclass
class DualVector:
    """A vector of duals kept as parallel (vals, derivs) arrays."""

    vals: np.ndarray
    derivs: np.ndarray

    def __post_init__(self):
        self.vals = np.asarray(self.vals, dtype=float)
        self.derivs = np.asarray(self.derivs, dtype=float)
        if self.vals.shape != self.derivs.shape or self.vals.ndim != 1:
            raise ShapeError("DualVector needs equal-length 1-D vals and derivs")

    def seeds(self) -> list[Dual]:
        return [Dual(v, d) for v, d in zip(self.vals, self.derivs)]


def _outputs(out) -> list:
    if isinstance(out, (Dual, *_NUM)):
        return [out]
    return list(out)


def derivative(f, x: float) -> float:
    """f'(x) for a scalar program, exact to roundoff (tangent seeded 1)."""
    out = f(Dual(float(x), 1.0))
    return out.deriv if isinstance(out, Dual) else 0.0


def babylonian(x, n_steps: int = 10):
    """Square-root iteration t <- (t + x/t)/2 starting from t = (1+x)/2.

    Accepts a plain number or a Dual; with a dual input the tangent
    converges to 0.5/sqrt(x).  Needs a positive primal.
    """
    if n_steps < 1:
        raise ContractError("babylonian needs n_steps >= 1")
    if primal(x) <= 0.0:
        raise DomainError("babylonian needs a positive input")
    t = (1.0 + x) / 2.0
    for _ in range(n_steps - 1):
        t = (t + x / t) / 2.0
    return t


def directional_derivative(f, x, v) -> np.ndarray:
    """f'(x)[v] in one dual pass with tangent v."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if x.shape != v.shape:
        raise ShapeError("directional_derivative: x and v lengths differ")
    out = _outputs(f(DualVector(x, v).seeds()))
    return np.asarray(
        [o.deriv if isinstance(o, Dual) else 0.0 for o in out], dtype=float
    )


def jacobian_forward(f, x) -> np.ndarray:
    """m-by-n Jacobian built column-by-column from n unit-tangent passes."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    cols = []
    m = None
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        col = directional_derivative(f, x, e)
        if m is None:
            m = len(col)
        elif len(col) != m:
            raise ShapeError("program output length changed between passes")
        cols.append(col)
    return np.stack(cols, axis=1) if n else np.zeros((0, 0))
