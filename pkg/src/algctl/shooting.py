"""Indirect single shooting for fixed-endpoint steering problems.

The unknowns are initial costate coordinates; the residual measures how far
the Hamiltonian flow ends from the target configuration at time ``T``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .chart import DualPoint
from .errors import IntegrationError, NoConvergenceError
from .integrate import IntegratorConfig, Trajectory, integrate
from .models import ModelBundle


def tangent_basis(x) -> np.ndarray:
    """Orthonormal basis ``(t1, t2)`` of the tangent plane of the unit sphere at ``x``.

    Gram-Schmidt starts from the coordinate axis where ``|x_k|`` is smallest
    (lowest index on ties); ``t2 = x x t1``.  Returned as rows.
    """
    x = np.asarray(x, dtype=float)
    k = int(np.argmin(np.abs(x)))
    e = np.zeros(3)
    e[k] = 1.0
    t1 = e - (e @ x) * x
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(x, t1)
    return np.vstack([t1, t2])


@dataclass
class ShootingProblem:
    model: ModelBundle
    x0: np.ndarray
    xT: np.ndarray
    T: float
    dim: int
    assemble: Callable[[np.ndarray], DualPoint]
    terminal: Callable[[DualPoint], np.ndarray]
    integrator: IntegratorConfig
    fixed_data: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.T <= 0:
            raise ValueError("horizon T must be positive")


def _shooting_integrator(model: ModelBundle, T: float, rtol: float, atol: float) -> IntegratorConfig:
    return model.default_integrator.replace(scheme="rk45", T=T, rtol=rtol, atol=atol)


def habitat_problem(model: ModelBundle, x0: float, xT: float, T: float,
                    rtol: float = 1e-12, atol: float = 1e-14) -> ShootingProblem:
    """Unknown: the initial costate ``alpha_0``. Residual ``x(T) - xT``."""
    for v in (x0, xT):
        if not 0.0 <= v <= 1.0:
            raise ValueError("habitat endpoints must lie in [0, 1]")
    return ShootingProblem(
        model=model, x0=np.array([x0], dtype=float), xT=np.array([xT], dtype=float), T=float(T), dim=1,
        assemble=lambda th: DualPoint([x0], [th[0]]),
        terminal=lambda p: np.array([p.x[0] - xT]),
        integrator=_shooting_integrator(model, T, rtol, atol),
    )


def s2_problem(model: ModelBundle, x0, xT, T: float, m0,
               rtol: float = 1e-12, atol: float = 1e-14) -> ShootingProblem:
    """Unknown: ``p0`` in the tangent basis at ``x0``; ``m0`` is fixed data.

    Residual: components of ``x(T)/|x(T)| - xT`` in the tangent basis at ``xT``.
    """
    x0 = np.asarray(x0, dtype=float)
    xT = np.asarray(xT, dtype=float)
    for v in (x0, xT):
        if abs(np.linalg.norm(v) - 1.0) > 1e-9:
            raise ValueError("sphere endpoints must be unit vectors")
    m0 = np.asarray(m0, dtype=float).reshape(3)
    B0, BT = tangent_basis(x0), tangent_basis(xT)

    def assemble(th):
        return DualPoint(x0, np.concatenate([B0.T @ np.asarray(th, dtype=float), m0]))

    def terminal(p):
        xh = p.x / np.linalg.norm(p.x)
        return BT @ (xh - xT)

    return ShootingProblem(model=model, x0=x0, xT=xT, T=float(T), dim=2, assemble=assemble,
                           terminal=terminal, integrator=_shooting_integrator(model, T, rtol, atol),
                           fixed_data={"m0": m0, "basis_x0": B0, "basis_xT": BT})


def _flow_end(prob: ShootingProblem, theta) -> DualPoint:
    m = prob.model
    traj = integrate(m.chart, m.hamiltonian, prob.assemble(theta), prob.integrator,
                     constraints=m.constraints)
    return traj.final()


def shooting_residual(prob: ShootingProblem, theta) -> np.ndarray:
    """Terminal mismatch for initial unknowns ``theta``; ``inf`` if the flow fails."""
    theta = np.asarray(theta, dtype=float).reshape(prob.dim)
    if not np.all(np.isfinite(theta)):
        raise ValueError("theta must be finite")
    try:
        r = prob.terminal(_flow_end(prob, theta))
    except (IntegrationError, FloatingPointError):
        return np.full(prob.dim, np.inf)
    return r if np.all(np.isfinite(r)) else np.full(prob.dim, np.inf)


@dataclass(frozen=True)
class ShootingConfig:
    max_iter: int = 30
    tol_residual: float = 1e-10
    fd_step: float = 1e-7
    backtrack: float = 0.5
    min_step: float = 1.0 / 256
    restarts: Optional[Sequence[Sequence[float]]] = None

    def __post_init__(self):
        if self.tol_residual <= 0:
            raise ValueError("tol_residual must be positive")


@dataclass
class ShootingReport:
    converged: bool
    restart_index: int
    iterations: int
    theta_star: np.ndarray
    residual_norm: float
    residual_history: list
    final_jacobian: Optional[np.ndarray]
    restarts_tried: int


def _jacobian(prob, theta, r, h):
    J = np.empty((prob.dim, prob.dim))
    for j in range(prob.dim):
        e = np.zeros(prob.dim)
        e[j] = h * max(1.0, abs(theta[j]))
        J[:, j] = (shooting_residual(prob, theta + e) - r) / e[j]
    return J


def _newton(prob, theta, cfg):
    history = []
    r = shooting_residual(prob, theta)
    rn = float(np.max(np.abs(r)))
    history.append(rn)
    J = None
    for it in range(cfg.max_iter):
        if rn <= cfg.tol_residual:
            return theta, rn, history, J, it
        J = _jacobian(prob, theta, r, cfg.fd_step)
        if not np.all(np.isfinite(J)):
            break
        step = np.linalg.lstsq(J, -r, rcond=None)[0]
        lam = 1.0
        while lam >= cfg.min_step:
            trial = theta + lam * step
            rt = shooting_residual(prob, trial)
            rtn = float(np.max(np.abs(rt)))
            if rtn < rn:
                theta, r, rn = trial, rt, rtn
                break
            lam *= cfg.backtrack
        else:
            break
        history.append(rn)
    return theta, rn, history, J, cfg.max_iter


def shoot(prob: ShootingProblem, cfg: ShootingConfig = ShootingConfig()):
    """Damped Newton with a forward-difference Jacobian over the restart guesses.

    Returns ``(theta_star, trajectory, report)`` for the first restart (in
    index order) that meets ``tol_residual``.  Raises NoConvergenceError with
    the best candidate otherwise.
    """
    guesses = cfg.restarts if cfg.restarts is not None else [np.zeros(prob.dim)]
    if len(guesses) == 0:
        raise ValueError("need at least one restart guess")
    best = (None, np.inf)
    histories = []
    for idx, g in enumerate(guesses):
        theta0 = np.asarray(g, dtype=float).reshape(prob.dim)
        theta, rn, hist, J, iters = _newton(prob, theta0, cfg)
        histories.append(hist)
        if rn < best[1]:
            best = (theta, rn)
        if rn <= cfg.tol_residual:
            m = prob.model
            traj = integrate(m.chart, m.hamiltonian, prob.assemble(theta), prob.integrator,
                             m.monitors, constraints=m.constraints,
                             control=m.feedback if m.control is not None else None)
            report = ShootingReport(True, idx, iters, theta, rn, histories,
                                    J if J is not None else np.full((prob.dim, prob.dim), np.nan),
                                    idx + 1)
            if J is None:
                report.final_jacobian = _jacobian(prob, theta, shooting_residual(prob, theta), cfg.fd_step)
            return theta, traj, report
    raise NoConvergenceError(f"shooting failed after {len(guesses)} restarts (best |r| = {best[1]:.3e})",
                             best_theta=best[0], best_residual=best[1], history=histories)
