"""Lie algebroids in a single coordinate chart.

A chart stores the anchor ``rho[i, a]`` (base index ``i``, fiber index ``a``)
and the structure functions ``C[a, b, c]`` of the bracket
``[e_a, e_b] = C[a, b, c] e_c``.  Derivatives are either supplied analytically
or obtained by central differences.  The residual functions below vanish
identically exactly when the chart data define a Lie algebroid, which is what
makes the linear bracket on the dual bundle a Poisson bracket.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, InvalidChartError

ANTISYMMETRY_TOL = 1e-12
DEFAULT_H_FD = 1e-5


def levi_civita() -> np.ndarray:
    """The 3x3x3 permutation symbol, the structure constants of so(3)."""
    eps = np.zeros((3, 3, 3))
    eps[0, 1, 2] = eps[1, 2, 0] = eps[2, 0, 1] = 1.0
    eps[0, 2, 1] = eps[2, 1, 0] = eps[1, 0, 2] = -1.0
    return eps


@dataclass(frozen=True)
class DualPoint:
    """A point ``(x, mu)`` of the dual bundle: base coordinates and fiber momenta."""

    x: np.ndarray
    mu: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.atleast_1d(np.asarray(self.x, dtype=float)).reshape(-1))
        object.__setattr__(self, "mu", np.atleast_1d(np.asarray(self.mu, dtype=float)).reshape(-1))

    @classmethod
    def from_flat(cls, z, n: int) -> "DualPoint":
        z = np.asarray(z, dtype=float)
        return cls(z[:n], z[n:])

    def flat(self) -> np.ndarray:
        return np.concatenate([self.x, self.mu])


@dataclass(frozen=True)
class AlgebroidChart:
    """Local-coordinate Lie algebroid.

    Parameters
    ----------
    base_dim, fiber_rank
        ``n`` (0 for a Lie algebra) and ``k``.
    anchor
        ``x -> (n, k)`` array ``rho[i, a]``.
    structure
        ``x -> (k, k, k)`` array ``C[a, b, c]``, antisymmetric in ``a, b``.
    anchor_dx, structure_dx
        Analytic derivatives ``d rho[j, a] / d x^i`` with shape ``(n, k, n)``
        and ``d C[a, b, c] / d x^i`` with shape ``(k, k, k, n)``.  Required
        when ``derivative_mode == "analytic"``.
    derivative_mode
        ``"analytic"`` or ``"central"`` (central differences with ``h_fd``).
    domain_box
        ``(n, 2)`` array of closed coordinate intervals.
    """

    base_dim: int
    fiber_rank: int
    anchor: Callable[[np.ndarray], np.ndarray]
    structure: Callable[[np.ndarray], np.ndarray]
    anchor_dx: Optional[Callable[[np.ndarray], np.ndarray]] = None
    structure_dx: Optional[Callable[[np.ndarray], np.ndarray]] = None
    derivative_mode: str = "analytic"
    h_fd: float = DEFAULT_H_FD
    domain_box: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    name: str = ""

    def __post_init__(self):
        if self.base_dim < 0 or self.fiber_rank < 1:
            raise InvalidChartError("need base_dim >= 0 and fiber_rank >= 1")
        box = np.asarray(self.domain_box, dtype=float).reshape(-1, 2)
        if box.shape[0] != self.base_dim:
            raise InvalidChartError(
                f"domain_box has {box.shape[0]} rows, expected {self.base_dim}")
        if np.any(box[:, 0] > box[:, 1]):
            raise InvalidChartError("domain_box lower bound exceeds upper bound")
        object.__setattr__(self, "domain_box", box)
        if self.derivative_mode not in ("analytic", "central"):
            raise InvalidChartError(f"unknown derivative_mode {self.derivative_mode!r}")
        if self.derivative_mode == "analytic" and self.base_dim > 0 and (
                self.anchor_dx is None or self.structure_dx is None):
            raise InvalidChartError("analytic mode needs anchor_dx and structure_dx")
        if self.h_fd <= 0:
            raise InvalidChartError("h_fd must be positive")

    @property
    def dim(self) -> int:
        return self.base_dim + self.fiber_rank

    def check_x(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float)).reshape(-1)
        if x.size != self.base_dim:
            raise DomainError(f"base point has length {x.size}, expected {self.base_dim}")
        lo, hi = self.domain_box[:, 0], self.domain_box[:, 1]
        if np.any(x < lo) or np.any(x > hi):
            raise DomainError(f"base point {x} outside domain box")
        return x

    def point(self, x, mu) -> DualPoint:
        """Validated constructor for a DualPoint on this chart."""
        p = DualPoint(x if self.base_dim else np.zeros(0), mu)
        self.check_x(p.x)
        if p.mu.size != self.fiber_rank:
            raise DomainError(f"mu has length {p.mu.size}, expected {self.fiber_rank}")
        return p

    # Raw evaluators: no domain or antisymmetry checks, used on hot paths.

    def rho(self, x) -> np.ndarray:
        if self.base_dim == 0:
            return np.zeros((0, self.fiber_rank))
        return np.asarray(self.anchor(x), dtype=float).reshape(self.base_dim, self.fiber_rank)

    def C(self, x) -> np.ndarray:
        k = self.fiber_rank
        return np.asarray(self.structure(x), dtype=float).reshape(k, k, k)

    def rho_dx(self, x) -> np.ndarray:
        n, k = self.base_dim, self.fiber_rank
        if n == 0:
            return np.zeros((0, k, 0))
        if self.derivative_mode == "analytic":
            return np.asarray(self.anchor_dx(x), dtype=float).reshape(n, k, n)
        return _central_jacobian(self.rho, x, self.h_fd)

    def C_dx(self, x) -> np.ndarray:
        n, k = self.base_dim, self.fiber_rank
        if n == 0:
            return np.zeros((k, k, k, 0))
        if self.derivative_mode == "analytic":
            return np.asarray(self.structure_dx(x), dtype=float).reshape(k, k, k, n)
        return _central_jacobian(self.C, x, self.h_fd)


def _central_jacobian(f, x, h):
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((f(x + e) - f(x - e)) / (2 * h))
    return np.stack(cols, axis=-1)


def eval_anchor(chart: AlgebroidChart, x) -> np.ndarray:
    """Anchor matrix ``rho[i, a]`` at ``x``; shape ``(n, k)``."""
    x = chart.check_x(x) if chart.base_dim else np.zeros(0)
    return chart.rho(x)


def antisymmetry_defect(C: np.ndarray) -> float:
    return float(np.max(np.abs(C + C.transpose(1, 0, 2)), initial=0.0))


def eval_structure(chart: AlgebroidChart, x) -> np.ndarray:
    """Structure functions ``C[a, b, c]`` at ``x``.

    Raises InvalidChartError when antisymmetry in ``(a, b)`` fails by more
    than 1e-12.  Nothing is symmetrized.
    """
    x = chart.check_x(x) if chart.base_dim else np.zeros(0)
    C = chart.C(x)
    defect = antisymmetry_defect(C)
    if defect > ANTISYMMETRY_TOL:
        raise InvalidChartError(f"structure functions not antisymmetric (defect {defect:.3e})")
    return C


def anchor_compatibility_residual(chart: AlgebroidChart, x) -> np.ndarray:
    """``R[j, a, b] = rho[j, c] C[a, b, c] - [rho_a, rho_b]^j``.

    The second term is the Lie bracket of the anchor vector fields.  Zero
    exactly when the anchor is a bracket homomorphism.  Shape ``(n, k, k)``.
    """
    x = chart.check_x(x) if chart.base_dim else np.zeros(0)
    rho, C, drho = chart.rho(x), chart.C(x), chart.rho_dx(x)
    # drho[j, b, i] = d rho_b^j / d x^i
    vf_bracket = (np.einsum("ia,jbi->jab", rho, drho)
                  - np.einsum("ib,jai->jab", rho, drho))
    return np.einsum("jc,abc->jab", rho, C) - vf_bracket


def jacobi_residual(chart: AlgebroidChart, x) -> np.ndarray:
    """Cyclic sum over ``(a, b, c)`` of ``C[a,b,e] C[e,c,d] - rho[i,c] dC[a,b,d]/dx^i``.

    Equals the ``e_d`` component of the Jacobiator of ``e_a, e_b, e_c``.
    Shape ``(k, k, k, k)``.
    """
    x = chart.check_x(x) if chart.base_dim else np.zeros(0)
    rho, C, dC = chart.rho(x), chart.C(x), chart.C_dx(x)
    T = np.einsum("abe,ecd->abcd", C, C) - np.einsum("ic,abdi->abcd", rho, dC)
    return T + np.einsum("bcad->abcd", T) + np.einsum("cabd->abcd", T)


@dataclass
class SampleFailure:
    index: int
    x: np.ndarray
    error: str


@dataclass
class VerificationReport:
    """Worst structure residuals over seeded samples of the domain box."""

    chart_name: str
    num_samples: int
    seed: int
    tol: float
    antisymmetry: float
    anchor_compatibility: float
    jacobi: float
    worst_check: str
    worst_index: int
    worst_x: np.ndarray
    failures: list = field(default_factory=list)

    @property
    def max_residual(self) -> float:
        return max(self.antisymmetry, self.anchor_compatibility, self.jacobi)

    @property
    def passed(self) -> bool:
        return all(row[3] for row in self.rows())

    def rows(self):
        """``(check, max_residual, tol, pass)`` tuples in the CSV report schema."""
        out = []
        for check, val, tol in (("antisymmetry", self.antisymmetry, ANTISYMMETRY_TOL),
                                ("anchor_compatibility", self.anchor_compatibility, self.tol),
                                ("jacobi", self.jacobi, self.tol)):
            out.append((check, val, tol, val <= tol))
        if self.failures:
            out.append(("sample_evaluation", float(len(self.failures)), 0.0, False))
        return out


def sample_box(chart: AlgebroidChart, num_samples: int, seed: int, margin: float = 0.0) -> np.ndarray:
    """Uniform seeded samples of the domain box, shrunk by ``margin`` on each side."""
    rng = np.random.default_rng(seed)
    lo = chart.domain_box[:, 0] + margin
    hi = chart.domain_box[:, 1] - margin
    return lo + (hi - lo) * rng.random((num_samples, chart.base_dim))


def sample_verify(chart: AlgebroidChart, num_samples: int = 100, seed: int = 7,
                  tol_struct: float = 1e-6) -> VerificationReport:
    """Check antisymmetry, anchor compatibility and Jacobi at seeded samples.

    Samples are drawn uniformly inside the box, kept ``2 h_fd`` away from the
    faces so that difference stencils stay in the domain.  Evaluation errors
    are recorded per sample and make the report fail.
    """
    if num_samples < 1:
        raise ValueError("num_samples must be >= 1")
    xs = sample_box(chart, num_samples, seed, margin=2 * chart.h_fd if chart.base_dim else 0.0)
    worst = {"antisymmetry": (0.0, 0), "anchor_compatibility": (0.0, 0), "jacobi": (0.0, 0)}
    failures = []
    for idx, x in enumerate(xs):
        try:
            vals = {
                "antisymmetry": antisymmetry_defect(chart.C(x)),
                "anchor_compatibility": float(np.max(np.abs(anchor_compatibility_residual(chart, x)), initial=0.0)),
                "jacobi": float(np.max(np.abs(jacobi_residual(chart, x)), initial=0.0)),
            }
        except Exception as exc:  # recorded, not fatal
            failures.append(SampleFailure(idx, x.copy(), f"{type(exc).__name__}: {exc}"))
            continue
        for key, v in vals.items():
            if not np.isfinite(v):
                failures.append(SampleFailure(idx, x.copy(), f"non-finite {key}"))
                v = np.inf
            if v > worst[key][0]:
                worst[key] = (v, idx)
    # normalise each check by its own tolerance to pick the worst offender
    tols = {"antisymmetry": ANTISYMMETRY_TOL, "anchor_compatibility": tol_struct, "jacobi": tol_struct}
    worst_check = max(worst, key=lambda k: worst[k][0] / tols[k])
    worst_index = worst[worst_check][1]
    return VerificationReport(
        chart_name=chart.name,
        num_samples=num_samples,
        seed=seed,
        tol=tol_struct,
        antisymmetry=worst["antisymmetry"][0],
        anchor_compatibility=worst["anchor_compatibility"][0],
        jacobi=worst["jacobi"][0],
        worst_check=worst_check,
        worst_index=worst_index,
        worst_x=xs[worst_index].copy() if len(xs) else np.zeros(0),
        failures=failures,
    )
