"""Integration of Hamiltonian flows with invariant monitoring.

Two explicit schemes are provided: classical fixed-step RK4 and the
Dormand-Prince 5(4) embedded pair with standard step-size control.  Neither
preserves the Poisson structure; conservation is verified by monitoring.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .chart import AlgebroidChart, DualPoint
from .errors import DivergenceError, IntegrationError
from .fields import ScalarField
from .poisson import hamiltonian_vector_field


@dataclass(frozen=True)
class SphereProjection:
    """Renormalise ``z[sphere]`` to unit length after each step.

    If ``tangent`` is given, that block is additionally made orthogonal to
    the normalised sphere block (cotangent vectors of the sphere).
    Blocks are ``(start, stop)`` index ranges in the flat state ``(x, mu)``.
    """

    sphere: tuple[int, int]
    tangent: Optional[tuple[int, int]] = None

    def apply(self, z: np.ndarray) -> float:
        s = slice(*self.sphere)
        r = float(np.linalg.norm(z[s]))
        defect = abs(r - 1.0)
        z[s] = z[s] / r
        if self.tangent is not None:
            t = slice(*self.tangent)
            normal = float(z[t] @ z[s])
            defect = max(defect, abs(normal))
            z[t] = z[t] - normal * z[s]
        return defect


@dataclass(frozen=True)
class IntegratorConfig:
    scheme: str = "rk45"
    T: float = 1.0
    h: float = 1e-3
    rtol: float = 1e-10
    atol: float = 1e-12
    h_init: Optional[float] = None
    h_min: float = 1e-12
    h_max: float = math.inf
    projection: tuple[SphereProjection, ...] = ()

    def __post_init__(self):
        if self.scheme not in ("rk4", "rk45"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.T < 0 or not math.isfinite(self.T):
            raise ValueError("T must be finite and >= 0")
        if self.h <= 0 or self.rtol <= 0 or self.atol <= 0 or self.h_min <= 0:
            raise ValueError("h, rtol, atol and h_min must be positive")

    def replace(self, **changes) -> "IntegratorConfig":
        from dataclasses import replace
        return replace(self, **changes)


@dataclass
class Trajectory:
    times: np.ndarray
    xs: np.ndarray
    mus: np.ndarray
    controls: Optional[np.ndarray] = None
    monitors: dict = field(default_factory=dict)
    step_stats: dict = field(default_factory=dict)

    def __post_init__(self):
        N = len(self.times)
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        for name, series in self.monitors.items():
            if len(series) != N:
                raise ValueError(f"monitor {name!r} length mismatch")
        if self.controls is not None and len(self.controls) != N:
            raise ValueError("controls length mismatch")

    def __len__(self):
        return len(self.times)

    @property
    def states(self) -> list[DualPoint]:
        return [DualPoint(x, mu) for x, mu in zip(self.xs, self.mus)]

    @property
    def flat(self) -> np.ndarray:
        return np.hstack([self.xs, self.mus])

    def final(self) -> DualPoint:
        return DualPoint(self.xs[-1], self.mus[-1])


def drift_report(traj: Trajectory, monitor_name: str) -> tuple[float, float]:
    """Largest absolute and relative deviation of a monitor from its initial value."""
    if monitor_name not in traj.monitors:
        raise KeyError(f"unknown monitor {monitor_name!r}; have {sorted(traj.monitors)}")
    series = np.asarray(traj.monitors[monitor_name], dtype=float)
    dev = float(np.max(np.abs(series - series[0]), initial=0.0))
    return dev, dev / max(abs(float(series[0])), 1e-300)


# Dormand-Prince 5(4) tableau
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_DP_E = _DP_B5 - _DP_B4


def _rk4_step(f, t, z, h):
    k1 = f(t, z)
    k2 = f(t + h / 2, z + h / 2 * k1)
    k3 = f(t + h / 2, z + h / 2 * k2)
    k4 = f(t + h, z + h * k3)
    return z + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _dp_step(f, t, z, h, k1):
    ks = [k1]
    for s in range(1, 7):
        zs = z + h * sum(a * k for a, k in zip(_DP_A[s], ks))
        ks.append(f(t + _DP_C[s] * h, zs))
    # stage 7 is evaluated at the 5th-order solution (FSAL)
    znew = z + h * sum(b * k for b, k in zip(_DP_B5[:6], ks[:6]))
    err = h * sum(e * k for e, k in zip(_DP_E, ks))
    return znew, err, ks[6]


class _Recorder:
    def __init__(self, n, monitors, control, proj_on):
        self.n = n
        self.monitors = dict(monitors or {})
        self.control = control
        self.times, self.states, self.controls = [], [], []
        self.series = {name: [] for name in self.monitors}
        if proj_on:
            self.series["proj_defect"] = []

    def record(self, t, z, defect=None):
        p = DualPoint.from_flat(z, self.n)
        self.times.append(t)
        self.states.append(z.copy())
        if self.control is not None:
            self.controls.append(np.atleast_1d(np.asarray(self.control(p), dtype=float)))
        for name, F in self.monitors.items():
            self.series[name].append(float(F(p)))
        if "proj_defect" in self.series:
            self.series["proj_defect"].append(0.0 if defect is None else defect)

    def trajectory(self, stats) -> Trajectory:
        Z = np.array(self.states).reshape(len(self.states), -1)
        return Trajectory(
            times=np.array(self.times),
            xs=Z[:, :self.n],
            mus=Z[:, self.n:],
            controls=np.array(self.controls) if self.control is not None else None,
            monitors={k: np.array(v) for k, v in self.series.items()},
            step_stats=dict(stats),
        )


def integrate(chart: AlgebroidChart, H: ScalarField, p0: DualPoint, cfg: IntegratorConfig,
              monitors: Optional[Mapping[str, Callable[[DualPoint], float]]] = None, *,
              constraints: Sequence[ScalarField] = (),
              control: Optional[Callable[[DualPoint], np.ndarray]] = None) -> Trajectory:
    """Integrate the Hamiltonian flow of ``H`` from ``p0`` over ``[0, cfg.T]``.

    Monitors (and the control feedback, if given) are evaluated at every
    accepted step.  With projection enabled the pre-projection defect is
    stored as the ``proj_defect`` monitor.

    Raises IntegrationError on step underflow and DivergenceError on a
    non-finite state; both carry the partial trajectory.
    """
    n = chart.base_dim
    z = p0.flat()
    if z.size != chart.dim:
        raise ValueError(f"state has size {z.size}, chart expects {chart.dim}")
    nfev = 0

    def f(t, zz):
        nonlocal nfev
        nfev += 1
        dx, dmu = hamiltonian_vector_field(chart, H, DualPoint.from_flat(zz, n), constraints)
        return np.concatenate([dx, dmu])

    def project(zz):
        d = 0.0
        for proj in cfg.projection:
            d = max(d, proj.apply(zz))
        return d

    rec = _Recorder(n, monitors, control, bool(cfg.projection))
    stats = {"accepted": 0, "rejected": 0, "nfev": 0}
    rec.record(0.0, z, project(z) if cfg.projection else None)
    T = cfg.T
    t = 0.0

    def fail(exc_cls, msg, **kw):
        stats["nfev"] = nfev
        return exc_cls(msg, partial=rec.trajectory(stats), **kw)

    if cfg.scheme == "rk4":
        nsteps = int(math.ceil(T / cfg.h - 1e-9)) if T > 0 else 0
        for i in range(nsteps):
            t_next = min(T, (i + 1) * cfg.h)
            znew = _rk4_step(f, t, z, t_next - t)
            if not np.all(np.isfinite(znew)):
                raise fail(DivergenceError, f"non-finite state at t={t_next}", last_state=z.copy())
            defect = project(znew) if cfg.projection else None
            z, t = znew, t_next
            stats["accepted"] += 1
            rec.record(t, z, defect)
        stats["nfev"] = nfev
        return rec.trajectory(stats)

    h = cfg.h_init if cfg.h_init is not None else min(cfg.h_max, 1e-2 * max(T, 1e-300))
    k1 = f(t, z) if T > 0 else None
    while t < T:
        h = min(h, cfg.h_max)
        last = t + h >= T * (1 - 1e-14)
        if last:
            h = T - t
        elif h < cfg.h_min or t + h <= t:
            raise fail(IntegrationError, f"step size underflow at t={t} (h={h:.3e})")
        znew, err, k7 = _dp_step(f, t, z, h, k1)
        if not np.all(np.isfinite(znew)):
            stats["rejected"] += 1
            h *= 0.25
            if h < cfg.h_min:
                raise fail(DivergenceError, f"non-finite state near t={t}", last_state=z.copy())
            continue
        scale = cfg.atol + cfg.rtol * np.maximum(np.abs(z), np.abs(znew))
        enorm = float(np.max(np.abs(err / scale)))
        if enorm <= 1.0:
            t = T if last else t + h
            z = znew
            defect = project(z) if cfg.projection else None
            k1 = f(t, z) if cfg.projection else k7
            stats["accepted"] += 1
            rec.record(t, z, defect)
            fac = 5.0 if enorm == 0 else min(5.0, max(0.2, 0.9 * enorm ** -0.2))
            h = h * fac
        else:
            stats["rejected"] += 1
            h = h * max(0.2, 0.9 * enorm ** -0.2)
            if h < cfg.h_min:
                raise fail(IntegrationError, f"step size underflow at t={t} (h={h:.3e})")
    stats["nfev"] = nfev
    return rec.trajectory(stats)
