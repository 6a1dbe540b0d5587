"""The linear Poisson bracket on the dual bundle and Hamiltonian vector fields.

Sign convention.  In coordinates ``z = (x, mu)`` the bracket is

    {F, G} = rho[i, a] (dF/dx^i dG/dmu_a - dG/dx^i dF/dmu_a)
             - C[a, b, c] mu_c dF/dmu_a dG/dmu_b,

so ``{x^i, mu_a} = rho[i, a]`` and ``{mu_a, mu_b} = -C[a, b, c] mu_c``.  With
this sign ``dF/dt = {F, H}`` yields

    x'^i  = rho[i, a] dH/dmu_a
    mu'_a = -rho[i, a] dH/dx^i - C[a, b, c] mu_c dH/dmu_b,

and for so(3) (``C = eps``) the familiar ``m' = m x Omega``.

Optional second-class constraints (used for the sphere model, which lives in
embedded coordinates) are handled through the Dirac bracket
``P_D = P - P dphi (dphi^T P dphi)^{-1} dphi^T P``; the constraints are then
Casimirs of ``P_D``.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .chart import AlgebroidChart, DualPoint
from .errors import AlgctlError
from .fields import ScalarField


def poisson_tensor(chart: AlgebroidChart, p: DualPoint) -> np.ndarray:
    """Matrix ``P`` with ``{F, G} = grad F . P grad G`` in flat coordinates."""
    n, k = chart.base_dim, chart.fiber_rank
    rho = chart.rho(p.x)
    C = chart.C(p.x)
    P = np.zeros((n + k, n + k))
    P[:n, n:] = rho
    P[n:, :n] = -rho.T
    P[n:, n:] = -np.einsum("abc,c->ab", C, p.mu)
    return P


def dirac_tensor(chart: AlgebroidChart, p: DualPoint, constraints: Sequence[ScalarField]) -> np.ndarray:
    P = poisson_tensor(chart, p)
    if not constraints:
        return P
    D = np.stack([np.concatenate(c.gradient(p)) for c in constraints], axis=1)
    PD = P @ D
    M = D.T @ PD
    try:
        correction = PD @ np.linalg.solve(M, D.T @ P)
    except np.linalg.LinAlgError as exc:
        raise AlgctlError("constraints are not second class at this point") from exc
    return P - correction


def _flat_grad(F: ScalarField, p: DualPoint) -> np.ndarray:
    gx, gm = F.gradient(p)
    return np.concatenate([gx, gm])


def poisson_bracket(chart: AlgebroidChart, F: ScalarField, G: ScalarField, p: DualPoint,
                    constraints: Sequence[ScalarField] = ()) -> float:
    """``{F, G}(p)``; antisymmetric by construction."""
    if constraints:
        return float(_flat_grad(F, p) @ dirac_tensor(chart, p, constraints) @ _flat_grad(G, p))
    n = chart.base_dim
    fx, fm = F.gradient(p)
    gx, gm = G.gradient(p)
    rho = chart.rho(p.x)
    C = chart.C(p.x)
    anchor = fx @ rho @ gm - gx @ rho @ fm if n else 0.0
    return float(anchor - np.einsum("abc,c,a,b->", C, p.mu, fm, gm))


def hamiltonian_vector_field(chart: AlgebroidChart, H: ScalarField, p: DualPoint,
                             constraints: Sequence[ScalarField] = ()) -> tuple[np.ndarray, np.ndarray]:
    """``(dx, dmu)`` of the Hamiltonian flow of ``H`` at ``p``."""
    if constraints:
        dz = dirac_tensor(chart, p, constraints) @ _flat_grad(H, p)
        n = chart.base_dim
        return dz[:n], dz[n:]
    hx, hm = H.gradient(p)
    rho = chart.rho(p.x)
    C = chart.C(p.x)
    dx = rho @ hm
    dmu = -rho.T @ hx - np.einsum("abc,c,b->a", C, p.mu, hm)
    return dx, dmu


def bracket_field(chart: AlgebroidChart, F: ScalarField, G: ScalarField,
                  constraints: Sequence[ScalarField] = (), h_fd: float = 1e-5) -> ScalarField:
    """``{F, G}`` as a ScalarField; its own gradients are central differences."""
    return ScalarField(lambda p: poisson_bracket(chart, F, G, p, constraints), h_fd=h_fd,
                       name=f"{{{F.name},{G.name}}}")


def jacobiator(chart: AlgebroidChart, F: ScalarField, G: ScalarField, K: ScalarField,
               p: DualPoint, constraints: Sequence[ScalarField] = (), h_fd: float = 1e-5) -> float:
    """Cyclic sum ``{F,{G,K}} + {G,{K,F}} + {K,{F,G}}`` with nested differences.

    This is the brute-force oracle that pins the signs of the chart residuals.
    """
    total = 0.0
    for A, B, Cf in ((F, G, K), (G, K, F), (K, F, G)):
        total += poisson_bracket(chart, A, bracket_field(chart, B, Cf, constraints, h_fd), p, constraints)
    return total
