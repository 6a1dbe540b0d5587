import numpy as np
import pytest
from scipy.integrate import solve_ivp

from algctl.chart import DualPoint
from algctl.errors import DivergenceError, IntegrationError
from algctl.fields import ScalarField, constant_field
from algctl.integrate import IntegratorConfig, SphereProjection, Trajectory, drift_report, integrate

from conftest import oscillator, so3_chart, tm_chart


def test_oscillator_rk4_full_period():
    chart, H = oscillator()
    traj = integrate(chart, H, DualPoint([1.0], [0.0]), IntegratorConfig(scheme="rk4", h=1e-3, T=2 * np.pi),
                     {"H": H})
    np.testing.assert_allclose(traj.flat[-1], [1.0, 0.0], atol=1e-8)
    assert traj.times[-1] == pytest.approx(2 * np.pi, abs=1e-15)
    assert drift_report(traj, "H")[0] <= 1e-10


def test_rk4_visible_energy_error_scaling():
    # |R(ih)|^2 = 1 - h^6/72 + ... so the energy error over a fixed horizon is O(h^5)
    chart, H = oscillator()
    drifts = []
    for h in (0.1, 0.05):
        traj = integrate(chart, H, DualPoint([1.0], [0.0]), IntegratorConfig(scheme="rk4", h=h, T=2 * np.pi),
                         {"H": H})
        drifts.append(drift_report(traj, "H")[1])
    assert 1e-12 <= drifts[0] <= 1e-4
    assert drifts[1] / drifts[0] == pytest.approx(1 / 32, rel=0.1)


def test_rk4_global_order_four():
    chart, H = oscillator()
    errs = []
    for h in (0.02, 0.01, 0.005):
        end = integrate(chart, H, DualPoint([1.0], [0.0]), IntegratorConfig(scheme="rk4", h=h, T=1.0)).flat[-1]
        errs.append(np.max(np.abs(end - [np.cos(1.0), -np.sin(1.0)])))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    np.testing.assert_allclose(orders, 4.0, atol=0.1)


@pytest.mark.parametrize("scheme", ["rk4", "rk45"])
def test_zero_hamiltonian_is_stationary(scheme):
    p0 = DualPoint(np.zeros(0), [0.3, -0.1, 2.0])
    traj = integrate(so3_chart(), constant_field(0.0), p0, IntegratorConfig(scheme=scheme, T=1.0, h=0.1))
    assert np.all(traj.mus == p0.mu)


def test_rigid_body_casimir_and_scipy_oracle(bundles):
    rb = bundles["rigid-body"]
    traj = rb.simulate(cfg=rb.default_integrator.replace(T=10.0))
    assert drift_report(traj, "casimir_m_norm")[1] <= 1e-9
    I = np.array([1.0, 2.0, 3.0])
    ref = solve_ivp(lambda t, m: np.cross(m, m / I), (0, 10), [1.0, 1.0, 1.0], method="DOP853",
                    rtol=1e-13, atol=1e-14, t_eval=traj.times)
    assert np.max(np.abs(ref.y.T - traj.mus)) <= 1e-8


def test_rk45_reaches_end_exactly():
    chart, H = oscillator()
    traj = integrate(chart, H, DualPoint([1.0], [0.0]), IntegratorConfig(T=3.3))
    assert traj.times[-1] == 3.3
    assert traj.step_stats["accepted"] == len(traj) - 1


def test_zero_horizon_single_row():
    chart, H = oscillator()
    traj = integrate(chart, H, DualPoint([0.5], [0.1]), IntegratorConfig(T=0.0), {"H": H})
    assert len(traj) == 1 and traj.monitors["H"].shape == (1,)


def test_drift_report_constant_series():
    traj = Trajectory(np.array([0.0, 1.0]), np.zeros((2, 0)), np.ones((2, 1)),
                      monitors={"c": np.array([2.0, 2.0])})
    assert drift_report(traj, "c") == (0.0, 0.0)
    with pytest.raises(KeyError):
        drift_report(traj, "missing")


def test_trajectory_validates_times():
    with pytest.raises(ValueError):
        Trajectory(np.array([0.0, 0.0]), np.zeros((2, 0)), np.zeros((2, 1)))


def _blowup():
    # x' = x^2 blows up at t = 1 / x0
    return ScalarField(lambda p: float(p.mu[0] * p.x[0] ** 2), grad_x=lambda p: 2 * p.mu * p.x,
                       grad_mu=lambda p: p.x ** 2)


def test_divergence_carries_partial():
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises(DivergenceError) as info:
            integrate(tm_chart(), _blowup(), DualPoint([1.0], [1.0]), IntegratorConfig(scheme="rk4", h=0.1, T=5.0))
    partial = info.value.partial
    assert partial is not None and partial.times[-1] >= 0.9
    assert np.all(np.isfinite(info.value.last_state))


def test_step_underflow_raises():
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises(IntegrationError) as info:
            integrate(tm_chart(), _blowup(), DualPoint([1.0], [1.0]), IntegratorConfig(T=2.0, h_min=1e-6))
    assert info.value.partial.times[-1] < 1.0


def test_projection_records_defect():
    z = np.array([2.0, 0.0, 0.0, 0.5, 1.0, 0.0])
    defect = SphereProjection((0, 3), (3, 6)).apply(z)
    np.testing.assert_allclose(z, [1.0, 0.0, 0.0, 0.0, 1.0, 0.0])
    assert defect == 1.0


def test_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(scheme="euler")
    with pytest.raises(ValueError):
        IntegratorConfig(T=-1.0)
