"""Pontryagin Hamiltonian, optimal feedback, reduced Hamiltonian and the
residuals that certify trajectories of the reduced flow as optimal.

For a control system ``(Phi, L)`` the Pontryagin Hamiltonian is
``H(x, mu, u) = mu . Phi(x, u) - L(x, u)``.  The optimal feedback solves
``dH/du = 0`` and the reduced Hamiltonian is ``H(x, mu, u*(x, mu))``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .chart import AlgebroidChart, DualPoint
from .errors import NoSolutionError, RegularityError, UnsupportedModelError
from .fields import ScalarField
from .integrate import Trajectory


@dataclass(frozen=True)
class QuadraticHint:
    """``dH/du = r(x, mu) - R(x) u`` exactly, with ``R(x)`` symmetric positive definite."""

    R: Callable[[np.ndarray], np.ndarray]
    r: Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ControlSystem:
    """Control data: ``Phi(x, u)`` in fiber coordinates and running cost ``L(x, u)``.

    ``phi_du`` is ``(k, m)``, ``cost_du`` is ``(m,)``; ``cost_duu`` (``(m, m)``)
    is optional.  ``phi_dx`` (``(k, n)``) and ``cost_dx`` (``(n,)``) feed the
    envelope gradient of the reduced Hamiltonian; without them that gradient
    is differenced at frozen control.
    """

    control_dim: int
    phi: Callable[[np.ndarray, np.ndarray], np.ndarray]
    cost: Callable[[np.ndarray, np.ndarray], float]
    phi_du: Callable[[np.ndarray, np.ndarray], np.ndarray]
    cost_du: Callable[[np.ndarray, np.ndarray], np.ndarray]
    cost_duu: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    phi_dx: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    cost_dx: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    quadratic_hint: Optional[QuadraticHint] = None
    h_fd: float = 1e-5


@dataclass(frozen=True)
class FeedbackSolverConfig:
    mode: str = "closed-form"
    max_iter: int = 50
    tol_grad: float = 1e-12
    damping: float = 1.0
    u_init_strategy: str = "warm"

    def __post_init__(self):
        if self.mode not in ("closed-form", "newton"):
            raise ValueError(f"unknown feedback mode {self.mode!r}")
        if self.tol_grad <= 0 or self.max_iter < 1:
            raise ValueError("need tol_grad > 0 and max_iter >= 1")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")


def pontryagin_hamiltonian(cs: ControlSystem, p: DualPoint, u) -> float:
    u = np.atleast_1d(np.asarray(u, dtype=float))
    return float(p.mu @ np.asarray(cs.phi(p.x, u), dtype=float) - cs.cost(p.x, u))


def hamiltonian_du(cs: ControlSystem, p: DualPoint, u) -> np.ndarray:
    """``dH/du = Phi_u^T mu - L_u``."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    J = np.asarray(cs.phi_du(p.x, u), dtype=float).reshape(p.mu.size, cs.control_dim)
    return J.T @ p.mu - np.asarray(cs.cost_du(p.x, u), dtype=float).reshape(cs.control_dim)


def hamiltonian_duu(cs: ControlSystem, p: DualPoint, u) -> np.ndarray:
    """Control Hessian of ``H``; the ``Phi`` part (and ``L_uu`` if absent) by differences."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    m, h = cs.control_dim, cs.h_fd
    if cs.cost_duu is not None:
        def g(v):
            J = np.asarray(cs.phi_du(p.x, v), dtype=float).reshape(p.mu.size, m)
            return J.T @ p.mu
    else:
        def g(v):
            return hamiltonian_du(cs, p, v)
    Hs = np.empty((m, m))
    for j in range(m):
        e = np.zeros(m)
        e[j] = h
        Hs[:, j] = (g(u + e) - g(u - e)) / (2 * h)
    if cs.cost_duu is not None:
        Hs = Hs - np.asarray(cs.cost_duu(p.x, u), dtype=float).reshape(m, m)
    return 0.5 * (Hs + Hs.T)


def _closed_form(cs: ControlSystem, p: DualPoint) -> np.ndarray:
    hint = cs.quadratic_hint
    R = np.asarray(hint.R(p.x), dtype=float).reshape(cs.control_dim, cs.control_dim)
    if not np.allclose(R, R.T, rtol=0, atol=1e-12 * max(1.0, np.abs(R).max())):
        raise RegularityError("quadratic hint R is not symmetric")
    try:
        L = np.linalg.cholesky(R)
    except np.linalg.LinAlgError as exc:
        raise RegularityError("quadratic hint R is not positive definite") from exc
    r = np.asarray(hint.r(p.x, p.mu), dtype=float).reshape(cs.control_dim)
    y = np.linalg.solve(L, r)
    return np.linalg.solve(L.T, y)


def solve_stationarity(cs: ControlSystem, p: DualPoint, cfg: FeedbackSolverConfig = FeedbackSolverConfig(),
                       u_init=None) -> tuple[np.ndarray, float]:
    """Solve ``dH/du = 0`` at ``p``. Returns ``(u_star, ||dH/du||_inf)``.

    Newton mode raises NoSolutionError (carrying the best iterate) when the
    gradient tolerance is not met within ``max_iter`` iterations, and
    RegularityError when the control Hessian is singular.
    """
    if cfg.mode == "closed-form":
        if cs.quadratic_hint is None:
            raise UnsupportedModelError("closed-form feedback needs a quadratic hint")
        u = _closed_form(cs, p)
        return u, float(np.max(np.abs(hamiltonian_du(cs, p, u)), initial=0.0))

    m = cs.control_dim
    u = np.zeros(m) if u_init is None else np.array(u_init, dtype=float).reshape(m)
    g = hamiltonian_du(cs, p, u)
    best_u, best = u.copy(), float(np.max(np.abs(g)))
    for _ in range(cfg.max_iter):
        if best <= cfg.tol_grad:
            return best_u, best
        Hs = hamiltonian_duu(cs, p, u)
        if np.linalg.cond(Hs) > 1e12:
            raise RegularityError("control Hessian is singular; the Lagrangian is not regular in u")
        u = u - cfg.damping * np.linalg.solve(Hs, g)
        g = hamiltonian_du(cs, p, u)
        gn = float(np.max(np.abs(g)))
        if not np.isfinite(gn):
            break
        if gn < best:
            best_u, best = u.copy(), gn
    if best <= cfg.tol_grad:
        return best_u, best
    raise NoSolutionError(f"stationarity not reached (|dH/du| = {best:.3e})", best_u, best)


@dataclass(frozen=True)
class ReducedHamiltonian(ScalarField):
    """The reduced Hamiltonian; also exposes the optimal ``feedback``."""

    feedback: Callable[[DualPoint], np.ndarray] = None
    control_system: ControlSystem = None


def reduced_hamiltonian(cs: ControlSystem, cfg: FeedbackSolverConfig = FeedbackSolverConfig()) -> ReducedHamiltonian:
    """Reduced Hamiltonian ``H(x, mu, u*(x, mu))`` with envelope gradients.

    ``d/dmu = Phi(x, u*)`` and ``d/dx = mu . Phi_x - L_x`` at frozen ``u*``.
    With newton feedback the last solution is reused as warm start; such a
    field should therefore drive one integration at a time.
    """
    warm = {"u": None}

    def feedback(p: DualPoint) -> np.ndarray:
        init = warm["u"] if cfg.u_init_strategy == "warm" else None
        u, _ = solve_stationarity(cs, p, cfg, u_init=init)
        if cfg.mode == "newton":
            warm["u"] = u
        return u

    cache = {}

    def ustar(p):
        key = (p.x.tobytes(), p.mu.tobytes())
        if key not in cache:
            if len(cache) > 64:
                cache.clear()
            cache[key] = feedback(p)
        return cache[key]

    def value(p):
        return pontryagin_hamiltonian(cs, p, ustar(p))

    def grad_mu(p):
        return np.asarray(cs.phi(p.x, ustar(p)), dtype=float)

    def grad_x(p):
        u = ustar(p)
        if cs.phi_dx is not None and cs.cost_dx is not None:
            Jx = np.asarray(cs.phi_dx(p.x, u), dtype=float).reshape(p.mu.size, p.x.size)
            return Jx.T @ p.mu - np.asarray(cs.cost_dx(p.x, u), dtype=float).reshape(p.x.size)
        g = np.empty(p.x.size)
        h = cs.h_fd
        for i in range(p.x.size):
            e = np.zeros(p.x.size)
            e[i] = h
            g[i] = (pontryagin_hamiltonian(cs, DualPoint(p.x + e, p.mu), u)
                    - pontryagin_hamiltonian(cs, DualPoint(p.x - e, p.mu), u)) / (2 * h)
        return g

    return ReducedHamiltonian(value=value, grad_x=grad_x, grad_mu=grad_mu, h_fd=cs.h_fd,
                              name="reduced_H", feedback=feedback, control_system=cs)


def stationarity_residual_along(cs: ControlSystem, traj: Trajectory,
                                cfg: FeedbackSolverConfig = FeedbackSolverConfig()) -> float:
    """Max over recorded times of ``||dH/du(x, mu, u)||_inf``.

    Controls are recomputed from the feedback when the trajectory has none.
    """
    worst = 0.0
    for i, p in enumerate(traj.states):
        u = traj.controls[i] if traj.controls is not None else solve_stationarity(cs, p, cfg)[0]
        worst = max(worst, float(np.max(np.abs(hamiltonian_du(cs, p, u)), initial=0.0)))
    return worst


def _constant_structure(chart: AlgebroidChart, xs: np.ndarray) -> np.ndarray:
    C0 = chart.C(xs[0])
    for x in xs:
        if np.max(np.abs(chart.C(x) - C0), initial=0.0) > 1e-12 or (
                chart.base_dim and np.max(np.abs(chart.C_dx(x)), initial=0.0) > 1e-12):
            raise UnsupportedModelError(
                "Euler-Poincare residual needs x-independent structure functions")
    return C0


def coadjoint(C: np.ndarray, X: np.ndarray, kappa: np.ndarray) -> np.ndarray:
    """``(ad*_X kappa)_a = C[a, b, c] X^b kappa_c``.

    Sign chosen so that the free rigid body (``C = eps``) gives
    ``m' = -ad*_Omega m = m x Omega``, matching the Hamiltonian flow.
    """
    return np.einsum("abc,b,c->a", C, X, kappa)


def euler_poincare_residual(cs: ControlSystem, traj: Trajectory, chart: AlgebroidChart,
                            reduced_lagrangian: Callable[[np.ndarray, np.ndarray], float],
                            force: Callable[[np.ndarray, np.ndarray], np.ndarray],
                            lagrangian_dX: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None,
                            h_fd: float = 1e-5) -> float:
    """Max over interior grid times of ``||d/dt dl/dX + ad*_X dl/dX - F(u)||_inf``.

    ``X(t) = Phi(x(t), u(t))``; the time derivative uses second-order
    differences on the trajectory grid.  Charts whose structure functions
    depend on ``x`` are rejected with UnsupportedModelError.
    """
    if len(traj) < 3:
        raise ValueError("need at least three samples for centred differences")
    C = _constant_structure(chart, traj.xs) if chart.base_dim else chart.C(np.zeros(0))
    controls = traj.controls
    if controls is None:
        raise ValueError("trajectory carries no controls")

    def dl_dX(x, X):
        if lagrangian_dX is not None:
            return np.asarray(lagrangian_dX(x, X), dtype=float)
        g = np.empty(X.size)
        for a in range(X.size):
            e = np.zeros(X.size)
            e[a] = h_fd
            g[a] = (reduced_lagrangian(x, X + e) - reduced_lagrangian(x, X - e)) / (2 * h_fd)
        return g

    Xs = np.array([np.asarray(cs.phi(x, u), dtype=float) for x, u in zip(traj.xs, controls)])
    kappas = np.array([dl_dX(x, X) for x, X in zip(traj.xs, Xs)])
    t = traj.times
    worst = 0.0
    for i in range(1, len(t) - 1):
        h0, h1 = t[i] - t[i - 1], t[i + 1] - t[i]
        dk = (-h1 / (h0 * (h0 + h1)) * kappas[i - 1] + (h1 - h0) / (h0 * h1) * kappas[i]
              + h0 / (h1 * (h0 + h1)) * kappas[i + 1])
        r = dk + coadjoint(C, Xs[i], kappas[i]) - np.asarray(force(traj.xs[i], controls[i]), dtype=float)
        worst = max(worst, float(np.max(np.abs(r))))
    return worst
