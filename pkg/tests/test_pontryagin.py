import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from algctl.chart import AlgebroidChart, DualPoint
from algctl.errors import NoSolutionError, RegularityError, UnsupportedModelError
from algctl.fields import gradient_check
from algctl.integrate import IntegratorConfig, Trajectory, integrate
from algctl.models import sample_state
from algctl.pontryagin import (ControlSystem, FeedbackSolverConfig, QuadraticHint, coadjoint,
                               euler_poincare_residual, hamiltonian_du, pontryagin_hamiltonian,
                               reduced_hamiltonian, solve_stationarity, stationarity_residual_along)

from conftest import EPS, habitat_ep_residual, rigid_body_ep_residual

NEWTON = FeedbackSolverConfig(mode="newton")


def test_hamiltonian_zero_at_rest(bundles):
    rb = bundles["rigid-body"]
    assert pontryagin_hamiltonian(rb.control, DualPoint(np.zeros(0), [1.0, 2.0, 3.0]), np.zeros(3)) == 0.0


def test_s2_hamiltonian_at_optimum_is_reduced_value(bundles):
    s2 = bundles["s2-steering"]
    p = sample_state(s2, np.random.default_rng(4))
    w = s2.extras["inertia"].inv(p.x) @ p.mu[3:]
    u = np.concatenate([p.mu[:3], w])
    assert pontryagin_hamiltonian(s2.control, p, u) == pytest.approx(s2.hamiltonian(p), abs=1e-13)


@pytest.mark.parametrize("cfg", [FeedbackSolverConfig(), NEWTON])
@pytest.mark.parametrize("x, alpha, expected", [(0.5, 3.0, 1.0), (0.0, 0.0, 0.0)])
def test_habitat_feedback(bundles, cfg, x, alpha, expected):
    u, g = solve_stationarity(bundles["habitat"].control, DualPoint([x], [alpha]), cfg)
    assert u[0] == pytest.approx(expected, abs=1e-12)
    assert g <= 1e-12


def test_habitat_feedback_matches_numeric_maximisation(bundles):
    cs = bundles["habitat"].control
    p = DualPoint([0.3], [-0.7])
    res = minimize_scalar(lambda u: -pontryagin_hamiltonian(cs, p, [u]), bracket=(-2, 2), tol=1e-12)
    assert solve_stationarity(cs, p)[0][0] == pytest.approx(res.x, abs=1e-7)


def test_habitat_reduced_value(bundles):
    H = reduced_hamiltonian(bundles["habitat"].control)
    assert H(DualPoint([0.5], [1.0])) == pytest.approx(0.5, abs=1e-15)
    assert bundles["habitat"].hamiltonian(DualPoint([0.5], [1.0])) == pytest.approx(0.5, abs=1e-15)


def test_reduced_hamiltonian_vanishes_at_origin(bundles):
    rb = bundles["rigid-body"]
    assert reduced_hamiltonian(rb.control)(DualPoint(np.zeros(0), np.zeros(3))) == 0.0


@pytest.mark.parametrize("name", ["rigid-body", "action-so3", "s2-steering", "habitat"])
def test_envelope_gradients_and_closed_forms(bundles, name):
    m = bundles[name]
    H = reduced_hamiltonian(m.control)
    rng = np.random.default_rng(2)
    pts = [sample_state(m, rng) for _ in range(5)]
    assert gradient_check(H, pts) <= 1e-6
    for p in pts:
        assert H(p) == pytest.approx(m.hamiltonian(p), abs=1e-12)
        np.testing.assert_allclose(np.concatenate(H.gradient(p)), np.concatenate(m.hamiltonian.gradient(p)),
                                   atol=1e-12)


@pytest.mark.parametrize("name", ["rigid-body", "action-so3", "s2-steering", "habitat"])
def test_newton_matches_closed_form(bundles, name):
    m = bundles[name]
    p = sample_state(m, np.random.default_rng(8))
    u_cf, _ = solve_stationarity(m.control, p)
    u_nt, _ = solve_stationarity(m.control, p, NEWTON)
    np.testing.assert_allclose(u_nt, u_cf, atol=1e-9)


def _singular_system():
    return ControlSystem(control_dim=1, phi=lambda x, u: np.array([u[0]]), cost=lambda x, u: 0.0,
                         phi_du=lambda x, u: np.ones((1, 1)), cost_du=lambda x, u: np.zeros(1),
                         cost_duu=lambda x, u: np.zeros((1, 1)),
                         quadratic_hint=QuadraticHint(R=lambda x: np.zeros((1, 1)), r=lambda x, mu: mu))


@pytest.mark.parametrize("cfg", [FeedbackSolverConfig(), NEWTON])
def test_singular_control_hessian(cfg):
    with pytest.raises(RegularityError):
        solve_stationarity(_singular_system(), DualPoint(np.zeros(0), [1.0]), cfg)


def test_newton_reports_best_iterate():
    # H = mu u - cosh(u): solvable, but one damped step is not enough
    cs = ControlSystem(control_dim=1, phi=lambda x, u: np.array([u[0]]), cost=lambda x, u: float(np.cosh(u[0])),
                       phi_du=lambda x, u: np.ones((1, 1)), cost_du=lambda x, u: np.array([np.sinh(u[0])]),
                       cost_duu=lambda x, u: np.array([[np.cosh(u[0])]]))
    p = DualPoint(np.zeros(0), [3.0])
    with pytest.raises(NoSolutionError) as info:
        solve_stationarity(cs, p, FeedbackSolverConfig(mode="newton", max_iter=1))
    assert info.value.best_u is not None
    u, _ = solve_stationarity(cs, p, NEWTON)
    assert u[0] == pytest.approx(np.arcsinh(3.0), abs=1e-12)


def test_closed_form_needs_hint():
    cs = ControlSystem(control_dim=1, phi=lambda x, u: u, cost=lambda x, u: 0.5 * u[0] ** 2,
                       phi_du=lambda x, u: np.ones((1, 1)), cost_du=lambda x, u: u)
    with pytest.raises(UnsupportedModelError):
        solve_stationarity(cs, DualPoint(np.zeros(0), [1.0]))


@pytest.mark.parametrize("name", ["rigid-body", "habitat"])
def test_stationarity_along_reduced_flow(bundles, name):
    m = bundles[name]
    traj = m.simulate(cfg=m.default_integrator.replace(T=1.0))
    assert stationarity_residual_along(m.control, traj) <= 1e-10


def test_perturbed_controls_give_known_residual(bundles):
    hb = bundles["habitat"]
    traj = hb.simulate()
    traj.controls = traj.controls + 0.1
    assert stationarity_residual_along(hb.control, traj) == pytest.approx(0.2, abs=1e-12)


def test_zero_controls_of_zero_flow(bundles):
    rb = bundles["rigid-body"]
    traj = Trajectory(np.array([0.0, 1.0]), np.zeros((2, 0)), np.zeros((2, 3)), controls=np.zeros((2, 3)))
    assert stationarity_residual_along(rb.control, traj) == 0.0


def test_coadjoint_gives_rigid_body_sign():
    m = np.array([0.2, -0.4, 1.0])
    W = np.array([0.5, 0.1, -0.3])
    np.testing.assert_allclose(-coadjoint(EPS, W, m), np.cross(m, W))


def _rk4(m, h, T=1.0):
    return m.simulate(cfg=IntegratorConfig(scheme="rk4", h=h, T=T))


def test_rigid_body_ep_second_order(bundles):
    rb = bundles["rigid-body"]
    r1 = rigid_body_ep_residual(rb, _rk4(rb, 1e-3))
    r2 = rigid_body_ep_residual(rb, _rk4(rb, 5e-4))
    assert r1 <= 1e-5
    assert r2 / r1 == pytest.approx(0.25, abs=0.03)


def test_habitat_ep_second_order(bundles):
    hb = bundles["habitat"]
    r1 = habitat_ep_residual(hb, _rk4(hb, 1e-3))
    r2 = habitat_ep_residual(hb, _rk4(hb, 5e-4))
    assert r1 <= 1e-5
    assert r2 / r1 == pytest.approx(0.25, abs=0.03)


def test_ep_equilibrium(bundles):
    rb = bundles["rigid-body"]
    traj = rb.simulate(DualPoint(np.zeros(0), [0.0, 2.0, 0.0]), IntegratorConfig(scheme="rk4", h=1e-2, T=0.5))
    assert np.all(traj.mus == traj.mus[0])
    assert rigid_body_ep_residual(rb, traj) <= 1e-12


def test_ep_wrong_inertia(bundles):
    rb = bundles["rigid-body"]
    traj = _rk4(rb, 1e-3)
    assert rigid_body_ep_residual(rb, traj, [3.0, 2.0, 1.0]) >= 0.1
    # a uniform rescaling of l leaves the equation invariant
    assert rigid_body_ep_residual(rb, traj, [2.0, 4.0, 6.0]) <= 1e-5


def test_ep_rejects_x_dependent_structure():
    chart = AlgebroidChart(1, 2, anchor=lambda x: np.array([[1.0, 0.0]]),
                           structure=lambda x: x[0] * np.array([[[0, 0], [0, 1.0]], [[0, -1.0], [0, 0]]]),
                           derivative_mode="central", domain_box=np.array([[0.0, 2.0]]))
    cs = ControlSystem(control_dim=2, phi=lambda x, u: u, cost=lambda x, u: 0.5 * float(u @ u),
                       phi_du=lambda x, u: np.eye(2), cost_du=lambda x, u: u)
    traj = Trajectory(np.array([0.0, 0.1, 0.2]), np.array([[0.5], [0.6], [0.7]]), np.ones((3, 2)),
                      controls=np.ones((3, 2)))
    with pytest.raises(UnsupportedModelError):
        euler_poincare_residual(cs, traj, chart, lambda x, X: 0.5 * float(X @ X), lambda x, u: np.zeros(2))
