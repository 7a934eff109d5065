"""Parameter gradients of ODE-constrained objectives.

Two independent routes for d/dp of G(p) = int_0^T g(u, p, t) dt subject to
du/dt = f(u, p, t), u(0) = u0(p):

* forward sensitivity — integrate the augmented system (u, S) with
  S = du/dp, dS/dt = (df/du) S + df/dp, then quadrature
  G' = int (S^T dg/du + dg/dp) dt;
* adjoint — integrate v backward from v(T) = 0 with
  dv/dt = (dg/du)^T - (df/du)^T v, then
  grad G = -(du0/dp)^T v(0) + int [(dg/dp)^T - (df/dp)^T v] dt.

Both use classical RK4 on a fixed grid; the backward pass reconstructs u(t)
between stored nodes by cubic Hermite interpolation from the stored states
and slopes.  Quadratures are composite Simpson (even step count required).

A third variant handles sums of point-in-time data misfits: the adjoint
jumps by (dg_k/du)^T at each data time while an accumulator integrates the
-(df/dp)^T v term.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from . import counting
from .core import as_vector
from .errors import BlowUpError, ContractError, ShapeError


@dataclass
class OdeProblem:
    """du/dt = f(u, p, t) on [0, t_final], u(0) = u0(p), with running cost
    g(u, p, t).  All callables take/return plain floats and ndarrays."""

    f: Callable
    dfdu: Callable
    dfdp: Callable
    u0: Callable
    du0dp: Callable
    g: Callable
    dgdu: Callable
    dgdp: Callable
    t_final: float
    p: np.ndarray

    def __post_init__(self):
        self.p = as_vector(self.p)
        if self.t_final <= 0:
            raise ContractError("t_final must be positive")

    @property
    def n_params(self) -> int:
        return len(self.p)

    def with_p(self, p) -> "OdeProblem":
        return replace(self, p=np.asarray(p, dtype=float))


@dataclass
class Trajectory:
    """States and slopes (f values) on the uniform time grid."""

    times: np.ndarray       # (n_steps + 1,)
    states: np.ndarray      # (n_steps + 1, n)
    slopes: np.ndarray      # (n_steps + 1, n)

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def interp_state(self, i: int, s: float) -> np.ndarray:
        """Cubic Hermite reconstruction of u at times[i] + s * dt, s in
        [0, 1], matching values and slopes at both ends of the interval."""
        dt = self.dt
        h00 = 2 * s**3 - 3 * s**2 + 1
        h10 = s**3 - 2 * s**2 + s
        h01 = -2 * s**3 + 3 * s**2
        h11 = s**3 - s**2
        return (
            h00 * self.states[i]
            + h10 * dt * self.slopes[i]
            + h01 * self.states[i + 1]
            + h11 * dt * self.slopes[i + 1]
        )


def _check_steps(n_steps: int) -> None:
    if not isinstance(n_steps, (int, np.integer)) or n_steps < 1:
        raise ContractError(f"n_steps must be a positive integer, got {n_steps!r}")


def integrate_rk4(prob: OdeProblem, n_steps: int) -> Trajectory:
    """Classical 4-stage Runge-Kutta on a uniform grid."""
    _check_steps(n_steps)
    p = prob.p
    u = as_vector(prob.u0(p))
    n = len(u)
    dt = prob.t_final / n_steps
    times = np.linspace(0.0, prob.t_final, n_steps + 1)
    states = np.empty((n_steps + 1, n))
    slopes = np.empty((n_steps + 1, n))
    states[0] = u

    def fcall(u, t):
        counting.add_rhs_components(n)
        return np.asarray(prob.f(u, p, t), dtype=float)

    for i in range(n_steps):
        t = times[i]
        k1 = fcall(u, t)
        slopes[i] = k1
        k2 = fcall(u + 0.5 * dt * k1, t + 0.5 * dt)
        k3 = fcall(u + 0.5 * dt * k2, t + 0.5 * dt)
        k4 = fcall(u + dt * k3, t + dt)
        u = u + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(u)):
            raise BlowUpError("state became non-finite", step_index=i)
        states[i + 1] = u
    slopes[n_steps] = fcall(u, times[n_steps])
    counting.add_integration(1)
    return Trajectory(times, states, slopes)


def integrate_euler(prob: OdeProblem, n_steps: int) -> Trajectory:
    """Explicit Euler on the same grid (the order-1 yardstick)."""
    _check_steps(n_steps)
    p = prob.p
    u = as_vector(prob.u0(p))
    n = len(u)
    dt = prob.t_final / n_steps
    times = np.linspace(0.0, prob.t_final, n_steps + 1)
    states = np.empty((n_steps + 1, n))
    slopes = np.empty((n_steps + 1, n))
    states[0] = u
    for i in range(n_steps):
        counting.add_rhs_components(n)
        k = np.asarray(prob.f(u, p, times[i]), dtype=float)
        slopes[i] = k
        u = u + dt * k
        if not np.all(np.isfinite(u)):
            raise BlowUpError("state became non-finite", step_index=i)
        states[i + 1] = u
    counting.add_rhs_components(n)
    slopes[n_steps] = np.asarray(prob.f(u, p, times[n_steps]), dtype=float)
    counting.add_integration(1)
    return Trajectory(times, states, slopes)


def forward_sensitivity(prob: OdeProblem, n_steps: int):
    """RK4 on the augmented system (u, S); returns (Trajectory, S_nodes)
    with S_nodes of shape (n_steps + 1, n, N).  Differentiating *inside* the
    integrator this way makes the result the exact derivative of the
    discrete trajectory."""
    _check_steps(n_steps)
    p = prob.p
    n_par = len(p)
    u = as_vector(prob.u0(p))
    n = len(u)
    s = np.asarray(prob.du0dp(p), dtype=float)
    if s.shape != (n, n_par):
        raise ShapeError(f"du0dp must be {n}x{n_par}, got {s.shape}")
    dt = prob.t_final / n_steps
    times = np.linspace(0.0, prob.t_final, n_steps + 1)
    states = np.empty((n_steps + 1, n))
    slopes = np.empty((n_steps + 1, n))
    sens = np.empty((n_steps + 1, n, n_par))
    states[0] = u
    sens[0] = s

    def aug(u, s, t):
        counting.add_rhs_components(n * (1 + n_par))
        fu = np.asarray(prob.f(u, p, t), dtype=float)
        a = np.asarray(prob.dfdu(u, p, t), dtype=float)
        b = np.asarray(prob.dfdp(u, p, t), dtype=float)
        return fu, a @ s + b

    for i in range(n_steps):
        t = times[i]
        k1u, k1s = aug(u, s, t)
        slopes[i] = k1u
        k2u, k2s = aug(u + 0.5 * dt * k1u, s + 0.5 * dt * k1s, t + 0.5 * dt)
        k3u, k3s = aug(u + 0.5 * dt * k2u, s + 0.5 * dt * k2s, t + 0.5 * dt)
        k4u, k4s = aug(u + dt * k3u, s + dt * k3s, t + dt)
        u = u + (dt / 6.0) * (k1u + 2 * k2u + 2 * k3u + k4u)
        s = s + (dt / 6.0) * (k1s + 2 * k2s + 2 * k3s + k4s)
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(s))):
            raise BlowUpError("state or sensitivity became non-finite", step_index=i)
        states[i + 1] = u
        sens[i + 1] = s
    slopes[n_steps], _ = aug(u, s, times[n_steps])
    counting.add_integration(1)
    return Trajectory(times, states, slopes), sens


def simpson(vals, dt: float):
    """Composite Simpson over equally spaced node values (scalar or
    vector-valued); needs an even, >= 2 number of intervals."""
    vals = np.asarray(vals, dtype=float)
    m = vals.shape[0] - 1
    if m < 2 or m % 2 != 0:
        raise ContractError(f"Simpson needs an even number of steps, got {m}")
    w = np.ones(m + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    out = (dt / 3.0) * np.tensordot(w, vals, axes=(0, 0))
    return float(out) if np.ndim(out) == 0 else out


def loss_G(prob: OdeProblem, traj: Trajectory) -> float:
    vals = np.array(
        [prob.g(traj.states[i], prob.p, t) for i, t in enumerate(traj.times)]
    )
    return simpson(vals, traj.dt)


def grad_G_forward(prob: OdeProblem, n_steps: int) -> np.ndarray:
    traj, sens = forward_sensitivity(prob, n_steps)
    p = prob.p
    vals = np.empty((n_steps + 1, len(p)))
    for i, t in enumerate(traj.times):
        u = traj.states[i]
        vals[i] = sens[i].T @ np.asarray(prob.dgdu(u, p, t), dtype=float) + np.asarray(
            prob.dgdp(u, p, t), dtype=float
        )
    return simpson(vals, traj.dt)


def _backward_rk4(traj: Trajectory, rhs, y_final, jumps=None):
    """RK4 backward over the trajectory grid; ``rhs(y, u, t)`` gets the
    Hermite-reconstructed state at stage times.  ``jumps`` maps node index
    to a list of callables y -> y applied on arrival at that node (latest
    time first).  Returns y at every node."""
    times = traj.times
    n_steps = traj.n_steps
    dt = traj.dt
    y = np.array(y_final, dtype=float)
    ys = np.empty((n_steps + 1,) + y.shape)
    if jumps and n_steps in jumps:
        for j in jumps[n_steps]:
            y = j(y)
    ys[n_steps] = y
    h = -dt
    for i in range(n_steps, 0, -1):
        t1 = times[i]
        u1 = traj.states[i]
        um = traj.interp_state(i - 1, 0.5)
        u0 = traj.states[i - 1]
        k1 = rhs(y, u1, t1)
        k2 = rhs(y + 0.5 * h * k1, um, t1 + 0.5 * h)
        k3 = rhs(y + 0.5 * h * k2, um, t1 + 0.5 * h)
        k4 = rhs(y + h * k3, u0, times[i - 1])
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise BlowUpError("adjoint state became non-finite", step_index=i)
        if jumps and (i - 1) in jumps:
            for j in jumps[i - 1]:
                y = j(y)
        ys[i - 1] = y
    counting.add_integration(1)
    return ys


def adjoint_solve(prob: OdeProblem, traj: Trajectory) -> np.ndarray:
    """v on the grid from dv/dt = (dg/du)^T - (df/du)^T v, v(T) = 0,
    integrated backward."""
    p = prob.p
    n = traj.states.shape[1]

    def rhs(v, u, t):
        counting.add_rhs_components(n)
        return np.asarray(prob.dgdu(u, p, t), dtype=float) - np.asarray(
            prob.dfdu(u, p, t), dtype=float
        ).T @ v

    return _backward_rk4(traj, rhs, np.zeros(n))


def grad_G_adjoint(prob: OdeProblem, n_steps: int) -> np.ndarray:
    traj = integrate_rk4(prob, n_steps)
    v = adjoint_solve(prob, traj)
    p = prob.p
    vals = np.empty((n_steps + 1, len(p)))
    for i, t in enumerate(traj.times):
        u = traj.states[i]
        vals[i] = np.asarray(prob.dgdp(u, p, t), dtype=float) - np.asarray(
            prob.dfdp(u, p, t), dtype=float
        ).T @ v[i]
    s0 = np.asarray(prob.du0dp(p), dtype=float)
    return -s0.T @ v[0] + simpson(vals, traj.dt)


@dataclass
class DataTerm:
    """One point-in-time misfit g_k(u(t_k), p); paired with its time by
    position in the ``data_times`` list."""

    dgdu: Callable                      # (u, p) -> (n,)
    dgdp: Optional[Callable] = None     # (u, p) -> (N,); default zero
    g: Optional[Callable] = None        # optional value, for loss reporting


def _node_index(t: float, dt: float, n_steps: int) -> int:
    idx = int(round(t / dt))
    if not 0 <= idx <= n_steps or abs(t - idx * dt) > 1e-9 * max(dt, 1.0):
        raise ContractError(f"data time {t} does not sit on the grid")
    return idx


def grad_G_discrete_data(prob: OdeProblem, data_times, g_k_list, n_steps: int) -> np.ndarray:
    """Gradient of sum_k g_k(u(t_k), p): the adjoint jumps by (dg_k/du)^T
    at each data time while w accumulates the - (df/dp)^T v integral; then

        grad = -(du0/dp)^T v(0) + w(0) + sum_k dg_k/dp.
    """
    if len(data_times) != len(g_k_list):
        raise ContractError("data_times and g_k_list lengths differ")
    traj = integrate_rk4(prob, n_steps)
    p = prob.p
    n = traj.states.shape[1]
    n_par = len(p)
    jumps: dict[int, list] = {}
    for t_k, term in zip(data_times, g_k_list):
        idx = _node_index(float(t_k), traj.dt, n_steps)

        # v gains +(dg_k/du)^T across t_k in forward time; marching backward
        # we arrive with v(t_k+) and leave with v(t_k-), so subtract here.
        def jump(y, term=term, idx=idx):
            y = y.copy()
            y[:n] -= np.asarray(term.dgdu(traj.states[idx], p), dtype=float)
            return y

        jumps.setdefault(idx, []).append(jump)

    def rhs(y, u, t):
        counting.add_rhs_components(n)
        v = y[:n]
        a = np.asarray(prob.dfdu(u, p, t), dtype=float)
        b = np.asarray(prob.dfdp(u, p, t), dtype=float)
        return np.concatenate([-a.T @ v, b.T @ v])

    ys = _backward_rk4(traj, rhs, np.zeros(n + n_par), jumps=jumps)
    v0 = ys[0, :n]
    w0 = ys[0, n:]
    s0 = np.asarray(prob.du0dp(p), dtype=float)
    grad = -s0.T @ v0 + w0
    for t_k, term in zip(data_times, g_k_list):
        if term.dgdp is not None:
            idx = _node_index(float(t_k), traj.dt, n_steps)
            grad = grad + np.asarray(term.dgdp(traj.states[idx], p), dtype=float)
    return grad


def loss_discrete(prob: OdeProblem, data_times, g_k_list, n_steps: int) -> float:
    if len(data_times) != len(g_k_list):
        raise ContractError("data_times and g_k_list lengths differ")
    traj = integrate_rk4(prob, n_steps)
    total = 0.0
    for t_k, term in zip(data_times, g_k_list):
        if term.g is None:
            raise ContractError("DataTerm.g missing; cannot evaluate the loss")
        idx = _node_index(float(t_k), traj.dt, n_steps)
        total += float(term.g(traj.states[idx], prob.p))
    return total


def grad_G_fd(prob: OdeProblem, n_steps: int, rel_step: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of the Simpson-discretized loss; the slow
    reference route (one pair of integrations per parameter)."""
    p = prob.p
    grad = np.empty(len(p))
    for k in range(len(p)):
        h = rel_step * (1.0 + abs(p[k]))
        pp = p.copy()
        pp[k] += h
        pm = p.copy()
        pm[k] -= h
        up = prob.with_p(pp)
        um = prob.with_p(pm)
        gp = loss_G(up, integrate_rk4(up, n_steps))
        gm = loss_G(um, integrate_rk4(um, n_steps))
        grad[k] = (gp - gm) / (2.0 * h)
    return grad


def grad_discrete_fd(prob: OdeProblem, data_times, g_k_list, n_steps: int,
                     rel_step: float = 1e-6):
    p = prob.p
    grad = np.empty(len(p))
    for k in range(len(p)):
        h = rel_step * (1.0 + abs(p[k]))
        pp = p.copy()
        pp[k] += h
        pm = p.copy()
        pm[k] -= h
        gp = loss_discrete(prob.with_p(pp), data_times, g_k_list, n_steps)
        gm = loss_discrete(prob.with_p(pm), data_times, g_k_list, n_steps)
        grad[k] = (gp - gm) / (2.0 * h)
    return grad


def reference_instance(p=(1.0, 0.5, -0.2), t_final: float = 1.0) -> OdeProblem:
    """Scalar Riccati-type tracking problem used across tests and the CLI:

        du/dt = p0 + p1 u + p2 u^2,  u(0) = 0,  g = (u - t^3)^2.
    """
    def f(u, p, t):
        return np.array([p[0] + p[1] * u[0] + p[2] * u[0] ** 2])

    def dfdu(u, p, t):
        return np.array([[p[1] + 2.0 * p[2] * u[0]]])

    def dfdp(u, p, t):
        return np.array([[1.0, u[0], u[0] ** 2]])

    def u0(p):
        return np.zeros(1)

    def du0dp(p):
        return np.zeros((1, 3))

    def g(u, p, t):
        return (u[0] - t**3) ** 2

    def dgdu(u, p, t):
        return np.array([2.0 * (u[0] - t**3)])

    def dgdp(u, p, t):
        return np.zeros(3)

    return OdeProblem(
        f=f, dfdu=dfdu, dfdp=dfdp, u0=u0, du0dp=du0dp,
        g=g, dgdu=dgdu, dgdp=dgdp, t_final=t_final,
        p=np.asarray(p, dtype=float),
    )
