"""Tests for ODE parameter-sensitivity gradients.

The recurring instance is the scalar tracking problem du/dt = p0 + p1 u +
p2 u^2, u(0) = 0, g = (u - t^3)^2 on [0, 1] at p = (1, 0.5, -0.2).  The
forward-sensitivity route differentiates the discrete RK4 map exactly, so
it is compared against finite differences *of that same discrete map* at
tight tolerance; the adjoint route solves a continuous equation backward
and is compared at quadrature accuracy.
"""

import math

import numpy as np
import pytest

from matderiv import counting, odesens
from matderiv.errors import BlowUpError, ContractError, ShapeError
from matderiv.odesens import DataTerm, reference_instance


def _exponential_problem():
    """du/dt = p0 u, u(0) = 1: closed form u(t) = exp(p0 t)."""
    return odesens.OdeProblem(
        f=lambda u, p, t: np.array([p[0] * u[0]]),
        dfdu=lambda u, p, t: np.array([[p[0]]]),
        dfdp=lambda u, p, t: np.array([[u[0]]]),
        u0=lambda p: np.ones(1),
        du0dp=lambda p: np.zeros((1, 1)),
        g=lambda u, p, t: u[0],
        dgdu=lambda u, p, t: np.ones(1),
        dgdp=lambda u, p, t: np.zeros(1),
        t_final=1.0,
        p=np.array([1.0]),
    )


class TestIntegrators:
    def test_rk4_matches_exponential(self):
        traj = odesens.integrate_rk4(_exponential_problem(), 50)
        np.testing.assert_allclose(traj.states[:, 0], np.exp(traj.times),
                                   rtol=1e-8)

    def test_rk4_fourth_order(self):
        """Halving the step divides the endpoint error by ~16."""
        prob = _exponential_problem()
        errs = {}
        for n in (10, 20):
            traj = odesens.integrate_rk4(prob, n)
            errs[n] = abs(traj.states[-1, 0] - math.e)
        assert 12.0 <= errs[10] / errs[20] <= 20.0

    def test_euler_first_order(self):
        prob = _exponential_problem()
        errs = {}
        for n in (200, 400):
            traj = odesens.integrate_euler(prob, n)
            errs[n] = abs(traj.states[-1, 0] - math.e)
        assert 1.8 <= errs[200] / errs[400] <= 2.2

    def test_step_contract(self):
        prob = _exponential_problem()
        with pytest.raises(ContractError):
            odesens.integrate_rk4(prob, 0)
        with pytest.raises(ContractError):
            odesens.integrate_rk4(prob, 2.5)

    def test_blow_up_detected(self):
        """du/dt = u^2 from 1 has a pole at t = 1; a coarse grid overflows
        and the integrator reports the offending step."""
        prob = odesens.OdeProblem(
            f=lambda u, p, t: np.array([u[0] ** 2]),
            dfdu=lambda u, p, t: np.array([[2 * u[0]]]),
            dfdp=lambda u, p, t: np.zeros((1, 1)),
            u0=lambda p: np.ones(1),
            du0dp=lambda p: np.zeros((1, 1)),
            g=lambda u, p, t: 0.0,
            dgdu=lambda u, p, t: np.zeros(1),
            dgdp=lambda u, p, t: np.zeros(1),
            t_final=2.0,
            p=np.array([0.0]),
        )
        with np.errstate(over="ignore"), pytest.raises(BlowUpError) as err:
            odesens.integrate_rk4(prob, 16)
        assert err.value.step_index is not None

    def test_rhs_component_accounting(self):
        """RK4 evaluates the n-component rhs 4x per step plus once for the
        final stored slope."""
        prob = _exponential_problem()
        with counting.tally() as c:
            odesens.integrate_rk4(prob, 30)
        assert c.rhs_components == 4 * 30 + 1
        assert c.integrations == 1


class TestTrajectory:
    def test_grid_properties(self):
        traj = odesens.integrate_rk4(_exponential_problem(), 8)
        assert traj.n_steps == 8
        assert traj.dt == pytest.approx(1.0 / 8)

    def test_hermite_matches_endpoints(self):
        traj = odesens.integrate_rk4(_exponential_problem(), 10)
        np.testing.assert_allclose(traj.interp_state(3, 0.0), traj.states[3],
                                   rtol=1e-15)
        np.testing.assert_allclose(traj.interp_state(3, 1.0), traj.states[4],
                                   rtol=1e-15)

    def test_hermite_midpoint_accuracy(self):
        """Cubic Hermite reconstruction is 4th-order accurate between
        nodes, matching the integrator's own order."""
        errs = {}
        for n in (10, 20):
            traj = odesens.integrate_rk4(_exponential_problem(), n)
            mid = traj.interp_state(n // 2, 0.5)
            t_mid = traj.times[n // 2] + 0.5 * traj.dt
            errs[n] = abs(mid[0] - math.exp(t_mid))
        assert errs[20] <= errs[10] / 8.0


class TestSimpson:
    def test_exact_on_cubics(self):
        ts = np.linspace(0.0, 1.0, 3)
        assert odesens.simpson(ts**3, 0.5) == pytest.approx(0.25, rel=1e-14)

    def test_fourth_order_on_smooth_integrands(self):
        errs = {}
        for m in (8, 16):
            ts = np.linspace(0.0, 1.0, m + 1)
            got = odesens.simpson(np.sin(ts), 1.0 / m)
            errs[m] = abs(got - (1.0 - math.cos(1.0)))
        assert 12.0 <= errs[8] / errs[16] <= 20.0

    def test_vector_valued(self):
        ts = np.linspace(0.0, 1.0, 5)
        vals = np.column_stack([ts, ts**2])
        got = odesens.simpson(vals, 0.25)
        np.testing.assert_allclose(got, [0.5, 1.0 / 3.0], rtol=1e-6)

    def test_odd_interval_count_rejected(self):
        with pytest.raises(ContractError):
            odesens.simpson(np.zeros(4), 0.1)
        with pytest.raises(ContractError):
            odesens.simpson(np.zeros(1), 0.1)


class TestForwardSensitivity:
    def test_matches_fd_of_discrete_trajectory(self):
        """The augmented integration is the exact derivative of the discrete
        RK4 map, so it agrees with central differences of that map to FD
        accuracy."""
        prob = reference_instance()
        n_steps = 60
        traj, sens = odesens.forward_sensitivity(prob, n_steps)
        for k in range(3):
            h = 1e-6 * (1.0 + abs(prob.p[k]))
            pp, pm = prob.p.copy(), prob.p.copy()
            pp[k] += h
            pm[k] -= h
            sp = odesens.integrate_rk4(prob.with_p(pp), n_steps).states
            sm = odesens.integrate_rk4(prob.with_p(pm), n_steps).states
            fd = (sp - sm) / (2 * h)
            np.testing.assert_allclose(sens[:, :, k], fd, rtol=2e-8,
                                       atol=1e-9)

    def test_rhs_cost_ratio_is_one_plus_n(self):
        """Augmenting with N sensitivity columns multiplies the nominal rhs
        component count by exactly 1 + N."""
        prob = reference_instance()
        n_steps = 40
        with counting.tally() as plain:
            odesens.integrate_rk4(prob, n_steps)
        with counting.tally() as aug:
            odesens.forward_sensitivity(prob, n_steps)
        assert aug.rhs_components / plain.rhs_components == 1 + 3

    def test_initial_shape_contract(self):
        prob = reference_instance()
        bad = odesens.OdeProblem(
            f=prob.f, dfdu=prob.dfdu, dfdp=prob.dfdp, u0=prob.u0,
            du0dp=lambda p: np.zeros((1, 2)), g=prob.g, dgdu=prob.dgdu,
            dgdp=prob.dgdp, t_final=prob.t_final, p=prob.p,
        )
        with pytest.raises(ShapeError):
            odesens.forward_sensitivity(bad, 10)


class TestGradientRoutes:
    N_STEPS = 400

    def test_forward_is_exact_gradient_of_discrete_loss(self):
        """grad_G_forward differentiates what loss_G actually computes, so
        a central difference of that loss agrees to FD accuracy."""
        prob = reference_instance()
        got = odesens.grad_G_forward(prob, self.N_STEPS)
        fd = odesens.grad_G_fd(prob, self.N_STEPS)
        np.testing.assert_allclose(got, fd, rtol=1e-7)

    def test_three_routes_agree_pairwise(self):
        prob = reference_instance()
        fwd = odesens.grad_G_forward(prob, self.N_STEPS)
        adj = odesens.grad_G_adjoint(prob, self.N_STEPS)
        fd = odesens.grad_G_fd(prob, self.N_STEPS)
        norm = np.linalg.norm(fwd)
        assert np.linalg.norm(fwd - adj) / norm <= 1e-6
        assert np.linalg.norm(fwd - fd) / norm <= 1e-6
        assert np.linalg.norm(adj - fd) / norm <= 1e-6

    def test_adjoint_uses_two_integrations(self):
        """One forward trajectory, one backward sweep -- regardless of how
        many parameters need derivatives."""
        with counting.tally() as c3:
            odesens.grad_G_adjoint(reference_instance(), 50)
        assert c3.integrations == 2
        with counting.tally() as c5:
            odesens.grad_G_adjoint(self._five_param_instance(), 50)
        assert c5.integrations == 2

    @staticmethod
    def _five_param_instance():
        """The reference dynamics padded with two inert parameters."""
        base = reference_instance()
        return odesens.OdeProblem(
            f=lambda u, p, t: base.f(u, p[:3], t),
            dfdu=lambda u, p, t: base.dfdu(u, p[:3], t),
            dfdp=lambda u, p, t: np.array([[1.0, u[0], u[0] ** 2, 0.0, 0.0]]),
            u0=lambda p: np.zeros(1),
            du0dp=lambda p: np.zeros((1, 5)),
            g=base.g,
            dgdu=base.dgdu,
            dgdp=lambda u, p, t: np.zeros(5),
            t_final=1.0,
            p=np.array([1.0, 0.5, -0.2, 7.0, -3.0]),
        )

    def test_inert_parameters_get_zero_gradient(self):
        grad = odesens.grad_G_adjoint(self._five_param_instance(), 100)
        base = odesens.grad_G_adjoint(reference_instance(), 100)
        np.testing.assert_allclose(grad[:3], base, rtol=1e-10)
        np.testing.assert_allclose(grad[3:], np.zeros(2), atol=1e-12)

    def test_adjoint_converges_with_refinement(self):
        """Adjoint-vs-forward disagreement shrinks as the grid refines."""
        prob = reference_instance()
        gaps = {}
        for n in (100, 200):
            fwd = odesens.grad_G_forward(prob, n)
            adj = odesens.grad_G_adjoint(prob, n)
            gaps[n] = np.linalg.norm(fwd - adj) / np.linalg.norm(fwd)
        assert gaps[200] < gaps[100]


class TestDiscreteData:
    def _least_squares_setting(self):
        """Four samples of the reference trajectory, perturbed targets."""
        prob = reference_instance()
        n_steps = 200
        data_times = [0.25, 0.5, 0.75, 1.0]
        targets = [0.3, 0.5, 0.6, 0.9]
        g_k = [
            DataTerm(
                dgdu=lambda u, p, y=y: np.array([2.0 * (u[0] - y)]),
                g=lambda u, p, y=y: (u[0] - y) ** 2,
            )
            for y in targets
        ]
        return prob, data_times, g_k, n_steps

    def test_matches_fd(self):
        prob, times, g_k, n_steps = self._least_squares_setting()
        got = odesens.grad_G_discrete_data(prob, times, g_k, n_steps)
        fd = odesens.grad_discrete_fd(prob, times, g_k, n_steps)
        np.testing.assert_allclose(got, fd, rtol=1e-6)

    def test_single_terminal_misfit(self):
        """A lone data point at t = T exercises the jump-at-the-final-node
        path."""
        prob = reference_instance()
        n_steps = 128
        g_k = [DataTerm(dgdu=lambda u, p: np.array([2.0 * u[0]]),
                        g=lambda u, p: u[0] ** 2)]
        got = odesens.grad_G_discrete_data(prob, [1.0], g_k, n_steps)
        fd = odesens.grad_discrete_fd(prob, [1.0], g_k, n_steps)
        np.testing.assert_allclose(got, fd, rtol=1e-6)

    def test_explicit_parameter_dependence(self):
        """A misfit with its own dg/dp contributes that term additively."""
        prob = reference_instance()
        n_steps = 100
        g_k = [DataTerm(
            dgdu=lambda u, p: np.array([2.0 * (u[0] - p[1])]),
            dgdp=lambda u, p: np.array([0.0, -2.0 * (u[0] - p[1]), 0.0]),
            g=lambda u, p: (u[0] - p[1]) ** 2,
        )]
        got = odesens.grad_G_discrete_data(prob, [0.5], g_k, n_steps)
        fd = odesens.grad_discrete_fd(prob, [0.5], g_k, n_steps)
        np.testing.assert_allclose(got, fd, rtol=1e-6)

    def test_loss_value(self):
        prob, times, g_k, n_steps = self._least_squares_setting()
        traj = odesens.integrate_rk4(prob, n_steps)
        by_hand = sum(
            (traj.states[odesens._node_index(t, traj.dt, n_steps), 0] - y) ** 2
            for t, y in zip(times, [0.3, 0.5, 0.6, 0.9])
        )
        assert odesens.loss_discrete(prob, times, g_k, n_steps) == \
            pytest.approx(by_hand, rel=1e-12)

    def test_off_grid_time_rejected(self):
        prob = reference_instance()
        g_k = [DataTerm(dgdu=lambda u, p: np.zeros(1))]
        with pytest.raises(ContractError):
            odesens.grad_G_discrete_data(prob, [1.0 / 3.0], g_k, 100)

    def test_length_mismatch_rejected(self):
        prob = reference_instance()
        with pytest.raises(ContractError):
            odesens.grad_G_discrete_data(prob, [0.5], [], 100)

    def test_loss_requires_g(self):
        prob = reference_instance()
        g_k = [DataTerm(dgdu=lambda u, p: np.zeros(1))]
        with pytest.raises(ContractError):
            odesens.loss_discrete(prob, [0.5], g_k, 100)


class TestProblemContainer:
    def test_with_p_is_nondestructive(self):
        prob = reference_instance()
        other = prob.with_p([2.0, 0.0, 0.0])
        np.testing.assert_array_equal(prob.p, [1.0, 0.5, -0.2])
        np.testing.assert_array_equal(other.p, [2.0, 0.0, 0.0])

    def test_time_horizon_contract(self):
        with pytest.raises(ContractError):
            reference_instance(t_final=0.0)
