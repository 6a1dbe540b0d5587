"""Smooth functions on the dual bundle with gradient access."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .chart import DEFAULT_H_FD, DualPoint


@dataclass(frozen=True)
class ScalarField:
    """A real function of ``(x, mu)``.

    ``grad_x`` and ``grad_mu`` are optional analytic suppliers; missing ones
    fall back to central differences with step ``h_fd``.
    """

    value: Callable[[DualPoint], float]
    grad_x: Optional[Callable[[DualPoint], np.ndarray]] = None
    grad_mu: Optional[Callable[[DualPoint], np.ndarray]] = None
    h_fd: float = DEFAULT_H_FD
    name: str = ""

    def __call__(self, p: DualPoint) -> float:
        return float(self.value(p))

    def gradient(self, p: DualPoint) -> tuple[np.ndarray, np.ndarray]:
        gx = (np.asarray(self.grad_x(p), dtype=float).reshape(p.x.size)
              if self.grad_x is not None else self.fd_grad_x(p))
        gmu = (np.asarray(self.grad_mu(p), dtype=float).reshape(p.mu.size)
               if self.grad_mu is not None else self.fd_grad_mu(p))
        return gx, gmu

    def fd_grad_x(self, p: DualPoint, h: Optional[float] = None) -> np.ndarray:
        h = self.h_fd if h is None else h
        g = np.empty(p.x.size)
        for i in range(p.x.size):
            e = np.zeros(p.x.size)
            e[i] = h
            g[i] = (self.value(DualPoint(p.x + e, p.mu)) - self.value(DualPoint(p.x - e, p.mu))) / (2 * h)
        return g

    def fd_grad_mu(self, p: DualPoint, h: Optional[float] = None) -> np.ndarray:
        h = self.h_fd if h is None else h
        g = np.empty(p.mu.size)
        for a in range(p.mu.size):
            e = np.zeros(p.mu.size)
            e[a] = h
            g[a] = (self.value(DualPoint(p.x, p.mu + e)) - self.value(DualPoint(p.x, p.mu - e))) / (2 * h)
        return g

    def numeric(self, h: Optional[float] = None) -> "ScalarField":
        """Same value, gradients forced through central differences."""
        return ScalarField(self.value, h_fd=self.h_fd if h is None else h, name=self.name)

    def __mul__(self, other: "ScalarField") -> "ScalarField":
        def grad(p):
            fx, fm = self.gradient(p)
            gx, gm = other.gradient(p)
            f, g = self(p), other(p)
            return f * gx + g * fx, f * gm + g * fm

        return ScalarField(lambda p: self(p) * other(p),
                           grad_x=lambda p: grad(p)[0], grad_mu=lambda p: grad(p)[1])


def constant_field(c: float = 0.0) -> ScalarField:
    return ScalarField(lambda p: c, grad_x=lambda p: np.zeros(p.x.size),
                       grad_mu=lambda p: np.zeros(p.mu.size), name="const")


def coordinate_field(index: int, n: int) -> ScalarField:
    """The coordinate function ``z_index`` in the flat ordering ``(x, mu)``."""

    def gx(p):
        g = np.zeros(p.x.size)
        if index < n:
            g[index] = 1.0
        return g

    def gm(p):
        g = np.zeros(p.mu.size)
        if index >= n:
            g[index - n] = 1.0
        return g

    return ScalarField(lambda p: float(p.flat()[index]), grad_x=gx, grad_mu=gm,
                       name=f"z{index}")


def quadratic_field(coef_const: float, coef_lin, coef_quad, n: int) -> ScalarField:
    """``c + b.z + 1/2 z^T A z`` on the flat coordinates ``z = (x, mu)``."""
    b = np.asarray(coef_lin, dtype=float)
    A = np.asarray(coef_quad, dtype=float)
    A = 0.5 * (A + A.T)

    def grad(p):
        return b + A @ p.flat()

    return ScalarField(
        lambda p: float(coef_const + b @ p.flat() + 0.5 * p.flat() @ A @ p.flat()),
        grad_x=lambda p: grad(p)[:n], grad_mu=lambda p: grad(p)[n:], name="quadratic")


def random_quadratic_field(rng: np.random.Generator, n: int, k: int, scale: float = 1.0) -> ScalarField:
    d = n + k
    return quadratic_field(scale * rng.standard_normal(), scale * rng.standard_normal(d),
                           scale * rng.standard_normal((d, d)), n)


def gradient_check(field_: ScalarField, points, h: float = DEFAULT_H_FD) -> float:
    """Worst relative mismatch between supplied and central-difference gradients."""
    worst = 0.0
    for p in points:
        gx, gm = field_.gradient(p)
        exact = np.concatenate([gx, gm])
        num = np.concatenate([field_.fd_grad_x(p, h), field_.fd_grad_mu(p, h)])
        scale = max(1.0, float(np.max(np.abs(exact), initial=0.0)))
        worst = max(worst, float(np.max(np.abs(exact - num), initial=0.0)) / scale)
    return worst
