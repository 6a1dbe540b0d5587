import numpy as np
import pytest

from algctl import models as zoo
from algctl.chart import AlgebroidChart, DualPoint, levi_civita
from algctl.fields import ScalarField
from algctl.integrate import IntegratorConfig

EPS = levi_civita()


def so3_chart(C=None, name="so3"):
    C = EPS.copy() if C is None else C
    return AlgebroidChart(0, 3, anchor=lambda x: np.zeros((0, 3)), structure=lambda x: C, name=name)


def corrupted_so3_chart():
    # C_12^1 = -C_21^1 = 1 on top of eps: antisymmetric but not a Lie algebra
    C = EPS.copy()
    C[0, 1, 0], C[1, 0, 0] = 1.0, -1.0
    return so3_chart(C, "so3-corrupted")


def zeroed_pair_so3_chart():
    C = EPS.copy()
    C[0, 1, 2] = C[1, 0, 2] = 0.0
    return so3_chart(C, "se2")


def corrupted_action_chart():
    C = -EPS.copy()
    C[0, 1, 2] = C[1, 0, 2] = 0.0
    return AlgebroidChart(3, 3, anchor=zoo._action_anchor, structure=lambda x: C,
                          anchor_dx=zoo._action_anchor_dx, structure_dx=lambda x: np.zeros((3, 3, 3, 3)),
                          domain_box=np.array([[-3.0, 3.0]] * 3), name="action-corrupted")


def tm_chart():
    return AlgebroidChart(1, 1, anchor=lambda x: np.ones((1, 1)), structure=lambda x: np.zeros((1, 1, 1)),
                          anchor_dx=lambda x: np.zeros((1, 1, 1)), structure_dx=lambda x: np.zeros((1, 1, 1, 1)),
                          domain_box=np.array([[-10.0, 10.0]]), name="TR")


def oscillator():
    H = ScalarField(lambda p: 0.5 * p.mu[0] ** 2 + 0.5 * p.x[0] ** 2,
                    grad_x=lambda p: p.x.copy(), grad_mu=lambda p: p.mu.copy(), name="H")
    return tm_chart(), H


def corrupted_model():
    base = zoo.model_rigid_body()
    return zoo.ModelBundle("corrupted", corrupted_so3_chart(), base.control, base.hamiltonian,
                           base.monitors, base.default_state, base.default_integrator)


def zero_hamiltonian_model():
    base = zoo.model_rigid_body()
    H = ScalarField(lambda p: 0.0, grad_x=lambda p: np.zeros(0), grad_mu=lambda p: np.zeros(3), name="H")
    monitors = {"H": H, "casimir_m_norm": base.monitors["casimir_m_norm"],
                "m1": ScalarField(lambda p: float(p.mu[0]), name="m1")}
    return zoo.ModelBundle("zero-H", base.chart, None, H, monitors,
                           DualPoint(np.zeros(0), [0.3, -0.2, 0.7]),
                           IntegratorConfig(scheme="rk45", T=2.0))


ZOO = ["rigid-body", "action-so3", "s2-steering", "habitat"]


@pytest.fixture(scope="session")
def bundles():
    return {name: zoo.build_model(name) for name in ZOO}


RB_INERTIA = np.array([1.0, 2.0, 3.0])


def rigid_body_ep_residual(model, traj, inertia=RB_INERTIA):
    from algctl.pontryagin import euler_poincare_residual
    I = np.asarray(inertia, dtype=float)
    return euler_poincare_residual(model.control, traj, model.chart, lambda x, X: 0.5 * float(X @ (I * X)),
                                   lambda x, u: np.zeros(3), lagrangian_dX=lambda x, X: I * X)


def habitat_ep_residual(model, traj):
    from algctl.pontryagin import euler_poincare_residual
    v, dv = model.extras["v"], model.extras["dv"]
    return euler_poincare_residual(
        model.control, traj, model.chart,
        lambda x, X: 0.5 * X[0] ** 2 + 0.5 * (X[0] - v(x[0])) ** 2,
        lambda x, u: np.array([-dv(x[0]) * u[0]]),
        lagrangian_dX=lambda x, X: np.array([2 * X[0] - v(x[0])]))


ACCEPTANCE_LINES = []


def record_criterion(number, title, passed, detail):
    line = f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
