"""Ready-to-run model bundles.

* ``rigid-body``   free rigid body on so(3)*, point base.
* ``action-so3``   action algebroid of SO(3) acting on R^3.
* ``s2-steering``  trivial groupoid S^2 x SO(3) x S^2 with configuration
  dependent inertia ``I(x) = I0 + alpha x x^T``, in embedded coordinates.
* ``habitat``      pair groupoid of [0, 1] (tangent algebroid), drift v(x).
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .chart import AlgebroidChart, DualPoint, levi_civita
from .errors import InvalidChartError
from .fields import ScalarField
from .integrate import IntegratorConfig, SphereProjection, Trajectory, integrate
from .pontryagin import ControlSystem, FeedbackSolverConfig, QuadraticHint, solve_stationarity

EPS = levi_civita()


@dataclass(frozen=True)
class ModelBundle:
    name: str
    chart: AlgebroidChart
    control: Optional[ControlSystem]
    hamiltonian: ScalarField
    monitors: dict
    default_state: DualPoint
    default_integrator: IntegratorConfig
    params: dict = field(default_factory=dict)
    constraints: tuple = ()
    extras: dict = field(default_factory=dict)

    def feedback(self, p: DualPoint) -> np.ndarray:
        return solve_stationarity(self.control, p, FeedbackSolverConfig())[0]

    def vector_field(self, p: DualPoint):
        from .poisson import hamiltonian_vector_field
        return hamiltonian_vector_field(self.chart, self.hamiltonian, p, self.constraints)

    def simulate(self, p0: Optional[DualPoint] = None, cfg: Optional[IntegratorConfig] = None,
                 hamiltonian: Optional[ScalarField] = None) -> Trajectory:
        return integrate(self.chart, hamiltonian or self.hamiltonian,
                         self.default_state if p0 is None else p0,
                         self.default_integrator if cfg is None else cfg,
                         self.monitors, constraints=self.constraints,
                         control=self.feedback if self.control is not None else None)


def _field(value, gx, gm, name):
    return ScalarField(value=value, grad_x=gx, grad_mu=gm, name=name)


def _norm_monitor(sl: slice, name: str) -> ScalarField:
    return ScalarField(lambda p: float(np.linalg.norm(p.mu[sl])), name=name)


# rigid body ---------------------------------------------------------------

def model_rigid_body(I_diag: Sequence[float] = (1.0, 2.0, 3.0)) -> ModelBundle:
    """Free rigid body ``m' = m x I^{-1} m`` on the point-base chart ``C = eps``."""
    I = np.asarray(I_diag, dtype=float).reshape(3)
    if np.any(I <= 0):
        raise ValueError("inertia entries must be positive")
    Imat = np.diag(I)
    chart = AlgebroidChart(0, 3, anchor=lambda x: np.zeros((0, 3)), structure=lambda x: EPS,
                           name="so3")
    cs = ControlSystem(
        control_dim=3,
        phi=lambda x, u: u,
        cost=lambda x, u: 0.5 * float(u @ Imat @ u),
        phi_du=lambda x, u: np.eye(3),
        cost_du=lambda x, u: Imat @ u,
        cost_duu=lambda x, u: Imat,
        phi_dx=lambda x, u: np.zeros((3, 0)),
        cost_dx=lambda x, u: np.zeros(0),
        quadratic_hint=QuadraticHint(R=lambda x: Imat, r=lambda x, mu: mu),
    )
    H = _field(lambda p: 0.5 * float(p.mu @ (p.mu / I)), lambda p: np.zeros(0),
               lambda p: p.mu / I, "H")
    monitors = {"H": H, "casimir_m_norm": _norm_monitor(slice(0, 3), "casimir_m_norm")}
    return ModelBundle("rigid-body", chart, cs, H, monitors,
                       DualPoint(np.zeros(0), [1.0, 1.0, 1.0]),
                       IntegratorConfig(scheme="rk45", T=10.0, rtol=1e-10, atol=1e-12),
                       params={"I_diag": I.tolist()})


# action algebroid so(3) x R^3 ---------------------------------------------

def _action_anchor(x):
    # column a is e_a x x
    x0, x1, x2 = x
    return np.array([[0.0, x2, -x1],
                     [-x2, 0.0, x0],
                     [x1, -x0, 0.0]])


def _action_anchor_dx(x):
    D = np.empty((3, 3, 3))
    for a in range(3):
        for i in range(3):
            D[:, a, i] = np.cross(np.eye(3)[a], np.eye(3)[i])
    return D


def action_chart() -> AlgebroidChart:
    """so(3) acting on R^3 by ``xi . x = xi x x``.

    The infinitesimal action of a left action reverses brackets, so the
    algebroid bracket of constant sections is ``-xi x eta``: ``C = -eps``.
    """
    return AlgebroidChart(3, 3, anchor=_action_anchor, structure=lambda x: -EPS,
                          anchor_dx=_action_anchor_dx,
                          structure_dx=lambda x: np.zeros((3, 3, 3, 3)),
                          domain_box=np.array([[-3.0, 3.0]] * 3), name="so3-action")


def model_action_so3(kappa: float = 0.5) -> ModelBundle:
    """Cost ``1/2 |u|^2 + V(x)`` with ``V = kappa (1 - x_3 / |x|)``; feedback ``u* = mu``."""
    kappa = float(kappa)
    chart = action_chart()

    def V(x):
        return kappa * (1.0 - x[2] / np.linalg.norm(x))

    def gradV(x):
        r = np.linalg.norm(x)
        return -kappa * (np.array([0.0, 0.0, 1.0]) / r - x[2] * x / r ** 3)

    cs = ControlSystem(
        control_dim=3,
        phi=lambda x, u: u,
        cost=lambda x, u: 0.5 * float(u @ u) + V(x),
        phi_du=lambda x, u: np.eye(3),
        cost_du=lambda x, u: u,
        cost_duu=lambda x, u: np.eye(3),
        phi_dx=lambda x, u: np.zeros((3, 3)),
        cost_dx=lambda x, u: gradV(x),
        quadratic_hint=QuadraticHint(R=lambda x: np.eye(3), r=lambda x, mu: mu),
    )
    H = _field(lambda p: 0.5 * float(p.mu @ p.mu) - V(p.x), lambda p: -gradV(p.x),
               lambda p: p.mu.copy(), "H")
    monitors = {"H": H,
                "casimir_x_norm": ScalarField(lambda p: float(np.linalg.norm(p.x)), name="casimir_x_norm")}
    return ModelBundle("action-so3", chart, cs, H, monitors,
                       DualPoint([0.6, 0.0, 0.8], [0.5, -0.5, 1.0]),
                       IntegratorConfig(scheme="rk45", T=10.0, rtol=1e-10, atol=1e-12),
                       params={"kappa": kappa})


# trivial groupoid S^2 x SO(3) x S^2 ---------------------------------------

def trivial_groupoid_chart(n: int = 3) -> AlgebroidChart:
    """``TM (+) (M x so(3))`` over an ``n``-dim coordinate base: ``rho = [Id | 0]``."""
    k = n + 3

    def structure(x):
        C = np.zeros((k, k, k))
        C[n:, n:, n:] = EPS
        return C

    rho = np.hstack([np.eye(n), np.zeros((n, 3))])
    return AlgebroidChart(n, k, anchor=lambda x: rho, structure=structure,
                          anchor_dx=lambda x: np.zeros((n, k, n)),
                          structure_dx=lambda x: np.zeros((k, k, k, n)),
                          domain_box=np.array([[-1.5, 1.5]] * n), name="trivial-groupoid")


class Inertia:
    """``I(x) = I0 + alpha x x^T``; Sherman-Morrison inverse for scalar ``I0``."""

    def __init__(self, I0: Union[float, np.ndarray], alpha: float):
        I0 = np.asarray(I0, dtype=float)
        if alpha < 0:
            raise ValueError("alpha must be >= 0")
        if I0.ndim == 0:
            if I0 <= 0:
                raise ValueError("I0 must be positive")
            self.scalar = float(I0)
            self.I0 = self.scalar * np.eye(3)
        else:
            self.scalar = None
            self.I0 = I0.reshape(3, 3)
            if not np.allclose(self.I0, self.I0.T):
                raise ValueError("I0 must be symmetric")
            np.linalg.cholesky(self.I0)
        self.alpha = float(alpha)

    def __call__(self, x):
        return self.I0 + self.alpha * np.outer(x, x)

    def inv(self, x):
        if self.scalar is not None:
            s = self.scalar
            return (np.eye(3) - self.alpha / (s + self.alpha * float(x @ x)) * np.outer(x, x)) / s
        return np.linalg.inv(self(x))


def model_trivial_groupoid_s2(I0: Union[float, np.ndarray] = 1.0, alpha: float = 1.0, kappa: float = 0.5,
                              x_target: Sequence[float] = (0.0, 0.0, 1.0)) -> ModelBundle:
    """Steering on the sphere with internal SO(3) momentum.

    State ``(x; p, m)``.  Reduced Hamiltonian
    ``1/2 |p|^2 + 1/2 m^T I(x)^{-1} m - kappa (1 - x . x_T)``.  The flow uses
    the Dirac bracket for the constraints ``|x|^2 = 1`` and ``x . p = 0``,
    whose tangential part reproduces ``p' = (Id - x x^T)(alpha (x.w) w - kappa x_T)``.
    """
    xT = np.asarray(x_target, dtype=float).reshape(3)
    if abs(np.linalg.norm(xT) - 1.0) > 1e-9:
        raise ValueError("x_target must be a unit vector")
    kappa = float(kappa)
    inertia = Inertia(I0, alpha)
    a = inertia.alpha
    chart = trivial_groupoid_chart(3)

    def V(x):
        return kappa * (1.0 - float(x @ xT))

    def value(p):
        pp, m = p.mu[:3], p.mu[3:]
        return 0.5 * float(pp @ pp) + 0.5 * float(m @ inertia.inv(p.x) @ m) - V(p.x)

    def grad_x(p):
        w = inertia.inv(p.x) @ p.mu[3:]
        return -a * float(p.x @ w) * w + kappa * xT

    def grad_mu(p):
        return np.concatenate([p.mu[:3], inertia.inv(p.x) @ p.mu[3:]])

    H = _field(value, grad_x, grad_mu, "H")

    def block_R(x):
        R = np.eye(6)
        R[3:, 3:] = inertia(x)
        return R

    cs = ControlSystem(
        control_dim=6,
        phi=lambda x, u: u,
        cost=lambda x, u: 0.5 * float(u[:3] @ u[:3]) + 0.5 * float(u[3:] @ inertia(x) @ u[3:]) + V(x),
        phi_du=lambda x, u: np.eye(6),
        cost_du=lambda x, u: np.concatenate([u[:3], inertia(x) @ u[3:]]),
        cost_duu=lambda x, u: block_R(x),
        phi_dx=lambda x, u: np.zeros((6, 3)),
        cost_dx=lambda x, u: a * float(x @ u[3:]) * u[3:] - kappa * xT,
        quadratic_hint=QuadraticHint(R=block_R, r=lambda x, mu: mu),
    )
    constraints = (
        ScalarField(lambda p: 0.5 * float(p.x @ p.x), grad_x=lambda p: p.x.copy(),
                    grad_mu=lambda p: np.zeros(6), name="sphere"),
        ScalarField(lambda p: float(p.x @ p.mu[:3]), grad_x=lambda p: p.mu[:3].copy(),
                    grad_mu=lambda p: np.concatenate([p.x, np.zeros(3)]), name="tangency"),
    )
    monitors = {
        "H": H,
        "casimir_m_norm": ScalarField(lambda p: float(np.linalg.norm(p.mu[3:])), name="casimir_m_norm"),
        "sphere_defect": ScalarField(lambda p: float(np.linalg.norm(p.x)) - 1.0, name="sphere_defect"),
        "x_dot_p": ScalarField(lambda p: float(p.x @ p.mu[:3]), name="x_dot_p"),
    }
    cfg = IntegratorConfig(scheme="rk45", T=10.0, rtol=1e-10, atol=1e-12,
                           projection=(SphereProjection(sphere=(0, 3), tangent=(3, 6)),))
    params = {"I0": inertia.I0.tolist() if inertia.scalar is None else inertia.scalar,
              "alpha": a, "kappa": kappa, "x_target": xT.tolist()}
    return ModelBundle("s2-steering", chart, cs, H, monitors,
                       DualPoint([1.0, 0.0, 0.0], [0.0, 0.3, 0.4, 0.3, 0.2, 0.5]),
                       cfg, params=params, constraints=constraints, extras={"inertia": inertia})


def s2_displayed_rates(bundle: ModelBundle, p: DualPoint):
    """``(x', p', m')`` in the projected form written for the sphere example."""
    inertia = bundle.extras["inertia"]
    xT = np.asarray(bundle.params["x_target"])
    kappa, a = bundle.params["kappa"], bundle.params["alpha"]
    x, pp, m = p.x, p.mu[:3], p.mu[3:]
    P = np.eye(3) - np.outer(x, x)
    w = inertia.inv(x) @ m
    gradV = -kappa * xT
    return P @ pp, P @ (a * float(x @ w) * w + gradV), np.cross(m, w)


# 1-D habitat --------------------------------------------------------------

def _sin_pi():
    return (lambda x: np.sin(np.pi * x), lambda x: np.pi * np.cos(np.pi * x))


@functools.lru_cache(maxsize=None)
def _habitat_default_alpha() -> float:
    from .shooting import habitat_problem, shoot
    bundle = model_habitat_1d(_default_alpha=0.0)
    theta, _, _ = shoot(habitat_problem(bundle, 0.2, 0.8, 1.0))
    return float(theta[0])


def model_habitat_1d(v_profile: Union[str, tuple] = "sin-pi", *, _default_alpha: Optional[float] = None) -> ModelBundle:
    """Tangent algebroid of M = [0, 1] with drift ``v``.

    ``x' = v(x) + u``; cost ``1/2 (v + u)^2 + 1/2 u^2``; feedback
    ``u* = (alpha - v)/2``; reduced Hamiltonian
    ``alpha^2/4 + alpha v/2 - v^2/4``.  A custom profile is a pair ``(v, dv)``
    of callables (``dv`` may be None: central differences).
    """
    if v_profile == "sin-pi":
        v, dv = _sin_pi()
    elif isinstance(v_profile, tuple) and callable(v_profile[0]):
        v, dv = v_profile
        if dv is None:
            dv = lambda x, _v=v: (_v(x + 1e-6) - _v(x - 1e-6)) / 2e-6
        grid = np.linspace(0.0, 1.0, 21)
        if not all(np.isfinite(v(s)) and np.isfinite(dv(s)) for s in grid):
            raise InvalidChartError("custom drift must be finite on [0, 1]")
    else:
        raise ValueError(f"unknown v_profile {v_profile!r}")

    chart = AlgebroidChart(1, 1, anchor=lambda x: np.ones((1, 1)), structure=lambda x: np.zeros((1, 1, 1)),
                           anchor_dx=lambda x: np.zeros((1, 1, 1)),
                           structure_dx=lambda x: np.zeros((1, 1, 1, 1)),
                           domain_box=np.array([[0.0, 1.0]]), name="T[0,1]")
    cs = ControlSystem(
        control_dim=1,
        phi=lambda x, u: np.array([v(x[0]) + u[0]]),
        cost=lambda x, u: 0.5 * (v(x[0]) + u[0]) ** 2 + 0.5 * u[0] ** 2,
        phi_du=lambda x, u: np.ones((1, 1)),
        cost_du=lambda x, u: np.array([v(x[0]) + 2.0 * u[0]]),
        cost_duu=lambda x, u: np.array([[2.0]]),
        phi_dx=lambda x, u: np.array([[dv(x[0])]]),
        cost_dx=lambda x, u: np.array([(v(x[0]) + u[0]) * dv(x[0])]),
        quadratic_hint=QuadraticHint(R=lambda x: np.array([[2.0]]),
                                     r=lambda x, mu: np.array([mu[0] - v(x[0])])),
    )

    def value(p):
        s, al = v(p.x[0]), p.mu[0]
        return al * al / 4 + al * s / 2 - s * s / 4

    H = _field(value,
               lambda p: np.array([(p.mu[0] - v(p.x[0])) * dv(p.x[0]) / 2]),
               lambda p: np.array([(p.mu[0] + v(p.x[0])) / 2]), "H")
    alpha0 = _default_alpha
    if alpha0 is None:
        alpha0 = _habitat_default_alpha() if v_profile == "sin-pi" else 0.0
    # documented horizon is the steering horizon: the default orbit stays in M
    return ModelBundle("habitat", chart, cs, H, {"H": H}, DualPoint([0.2], [alpha0]),
                       IntegratorConfig(scheme="rk45", T=1.0, rtol=1e-10, atol=1e-12),
                       params={}, extras={"v": v, "dv": dv})


def sample_state(bundle: ModelBundle, rng: np.random.Generator) -> DualPoint:
    """Random phase-space point suited to the model's Hamiltonian.

    ``x`` is uniform in the domain box and ``mu`` standard normal; sphere
    models are put on the constraint set and ``action-so3`` stays away from
    the singular origin of its potential.
    """
    chart = bundle.chart
    n, k = chart.base_dim, chart.fiber_rank
    lo, hi = chart.domain_box[:, 0], chart.domain_box[:, 1]
    x = lo + (hi - lo) * rng.random(n)
    mu = rng.standard_normal(k)
    if bundle.constraints and bundle.name == "s2-steering":
        x = x / np.linalg.norm(x)
        mu[:3] -= (mu[:3] @ x) * x
    elif bundle.name == "action-so3":
        r = np.linalg.norm(x)
        if r < 0.5:
            x = x * (0.5 / max(r, 1e-12))
    return DualPoint(x, mu)


MODEL_FACTORIES: dict[str, Callable[..., ModelBundle]] = {
    "rigid-body": model_rigid_body,
    "action-so3": model_action_so3,
    "s2-steering": model_trivial_groupoid_s2,
    "habitat": model_habitat_1d,
}


def build_model(name: str, **params) -> ModelBundle:
    try:
        factory = MODEL_FACTORIES[name]
    except KeyError:
        raise KeyError(f"unknown model {name!r}; known: {', '.join(sorted(MODEL_FACTORIES))}") from None
    return factory(**params)
