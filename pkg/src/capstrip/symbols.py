"""Operators built from the surface slope, symbol products and empirical operator order.

``Lambda_a = |D|^2 - (d_i a d_j a / (1 + |grad a|^2)) D_i D_j`` and
``sigma_a = (1 + |grad a|^2)^(-1/4)``; ``P_a`` is the factored second-order operator
whose principal part is ``-Lambda_a``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .spectral import (Symbol, TorusGrid, derivative, divergence, gradient, l2_norm,
                       multi_indices, sobolev_norm)

Operator = Callable[[np.ndarray], np.ndarray]


def _slope(grid: TorusGrid, a, grad_a) -> np.ndarray:
    if grad_a is None:
        return gradient(grid, a)
    ga = np.asarray(grad_a, dtype=float)
    if ga.ndim == 1:
        ga = ga.reshape((grid.d,) + (1,) * grid.d)
    return np.broadcast_to(ga, (grid.d,) + grid.shape)


def sigma_weight(grid: TorusGrid, a=None, grad_a=None) -> np.ndarray:
    """``(1 + |grad a|^2)^(-1/4)``; ``grad_a`` overrides ``a`` (test hook)."""
    ga = _slope(grid, a, grad_a)
    return (1.0 + np.sum(ga**2, axis=0)) ** -0.25


def lambda_a_apply(grid: TorusGrid, a, f: np.ndarray, grad_a=None) -> np.ndarray:
    """``Lambda_a f = -g_ij(grad a) d_i d_j f`` with ``g_ij = delta_ij - d_i a d_j a / (1+|grad a|^2)``."""
    ga = _slope(grid, a, grad_a)
    q = 1.0 + np.sum(ga**2, axis=0)
    out = np.zeros(grid.shape)
    for i in range(grid.d):
        for j in range(grid.d):
            alpha = tuple((k == i) + (k == j) for k in range(grid.d))
            gij = float(i == j) - ga[i] * ga[j] / q
            out -= gij * derivative(grid, f, alpha)
    return out


def lambda_symbol(grid: TorusGrid, a, grad_a=None) -> Symbol:
    """``lambda_a(x, xi) = |xi|^2 - (grad a . xi)^2 / (1 + |grad a|^2)`` (exact xi-derivatives)."""
    ga = _slope(grid, a, grad_a).reshape(grid.d, -1)
    q = (1.0 + np.sum(ga**2, axis=0))[:, None]

    def fn(beta, xi):
        order = sum(beta)
        gx = ga.T @ xi                                  # (nodes, K)
        if order == 0:
            out = np.sum(xi**2, axis=0)[None] - gx**2 / q
        elif order == 1:
            i = beta.index(1)
            out = 2 * xi[i][None] - 2 * gx * ga[i][:, None] / q
        elif order == 2:
            i, j = [k for k, m in enumerate(beta) for _ in range(m)]
            out = np.broadcast_to(2.0 * (i == j) - 2 * (ga[i] * ga[j])[:, None] / q, gx.shape)
        else:
            out = np.zeros_like(gx)
        return np.asarray(out, dtype=complex).reshape(grid.shape + (xi.shape[1],))

    return Symbol(grid, fn, 2.0, n_reg=64, name="lambda_a")


def p_a_apply(grid: TorusGrid, a, f: np.ndarray, grad_a=None) -> np.ndarray:
    """``(sigma grad sigma^-1 .)^2 f - (grad a . grad sigma^-1 . / (1+|grad a|^2)^(3/4))^2 f``,
    evaluated factor by factor."""
    ga = _slope(grid, a, grad_a)
    q = 1.0 + np.sum(ga**2, axis=0)
    sig = q**-0.25
    v = sig * gradient(grid, f / sig)
    first = sig * divergence(grid, v / sig)

    def s_factor(u):
        return np.sum(ga * gradient(grid, u / sig), axis=0) / q**0.75

    return first - s_factor(s_factor(f))


def _x_derivative(grid: TorusGrid, vals: np.ndarray, alpha: tuple) -> np.ndarray:
    """Spectral x-derivative of symbol samples of shape ``grid.shape + (K,)``."""
    if sum(alpha) == 0:
        return vals
    moved = np.moveaxis(vals, -1, 0)
    return np.moveaxis(derivative(grid, moved, alpha), 0, -1)


def sharp_product(s1: Symbol, s2: Symbol, n: int) -> Symbol:
    """``s1 #_n s2 = sum_{|alpha| <= n} (-i)^|alpha| / alpha! d_xi^alpha s1 d_x^alpha s2``."""
    if s1.n_reg < n:
        raise ValueError(f"{s1.name} supplies xi-derivatives to order {s1.n_reg} < {n}")
    grid = s1.grid
    d = grid.d
    alphas = list(multi_indices(d, n))

    def fn(beta, xi):
        acc = 0.0
        for alpha in alphas:
            c = (-1j) ** sum(alpha) / math.prod(math.factorial(k) for k in alpha)
            for gamma in multi_indices(d, sum(beta)):
                if any(g > b for g, b in zip(gamma, beta)):
                    continue
                rest = tuple(b - g for b, g in zip(beta, gamma))
                up = tuple(a + g for a, g in zip(alpha, gamma))
                w = math.prod(math.comb(b, g) for b, g in zip(beta, gamma))
                acc = acc + c * w * s1.fn(up, xi) * _x_derivative(grid, s2.fn(rest, xi), alpha)
        return acc

    return Symbol(grid, fn, s1.order + s2.order, min(s1.n_reg - n, s2.n_reg),
                  f"{s1.name}#{n}{s2.name}")


def poisson_bracket(s1: Symbol, s2: Symbol, n: int) -> Symbol:
    """``{s1, s2}_n = s1 #_n s2 - s2 #_n s1``."""
    out = sharp_product(s1, s2, n) - sharp_product(s2, s1, n)
    return Symbol(out.grid, out.fn, out.order, out.n_reg, f"{{{s1.name},{s2.name}}}{n}")


# ---------------------------------------------------------------------------
# empirical operator order

def default_carrier(grid: TorusGrid) -> np.ndarray:
    x = grid.x
    w = 1.0 + 0.5 * np.cos(x[0]) + 0.25 * np.sin(2 * x[0])
    if grid.d == 2:
        w = w * (1.0 + 0.4 * np.cos(x[1] + 0.3))
    return w


@dataclass
class OrderProbe:
    """Oscillatory family ``f_lambda = cos(lambda x_1) w(x)`` for order measurement."""

    grid: TorusGrid
    frequencies: tuple = (4, 8, 16, 32)
    carrier: np.ndarray | None = None
    dealiased: bool = True
    norms: list = field(default_factory=list)
    measured_slope: float = float("nan")

    def __post_init__(self):
        if self.carrier is None:
            self.carrier = default_carrier(self.grid)
        limit = self.grid.n / 3 if self.dealiased else self.grid.n / 2 - 1
        top = max(self.frequencies) * 2 * math.pi / self.grid.L
        if top > limit:
            raise ValueError(f"probe frequency {top} outside resolved range {limit:.1f}")

    def member(self, lam: float) -> np.ndarray:
        k = lam * 2 * math.pi / self.grid.L
        return np.cos(k * self.grid.x[0]) * self.carrier


def measure_order(op: Operator, probe: OrderProbe) -> float:
    """Least-squares slope of ``log |op f_lambda|_L2`` against ``log lambda``."""
    grid = probe.grid
    norms = [l2_norm(grid, np.real(op(probe.member(lam)))) for lam in probe.frequencies]
    probe.norms = norms
    if max(norms) < 1e-13:
        raise ValueError("degenerate order fit: all norms below 1e-13")
    logs = np.log(np.maximum(norms, 1e-300))
    slope = float(np.polyfit(np.log(probe.frequencies), logs, 1)[0])
    probe.measured_slope = slope
    return slope


def commutator(A: Operator, B: Operator) -> Operator:
    return lambda f: A(B(f)) - B(A(f))


def compose(*ops: Operator) -> Operator:
    def run(f):
        for op in reversed(ops):
            f = op(f)
        return f
    return run


def coercivity_constant(grid: TorusGrid, a, rng: np.random.Generator, samples: int = 20,
                        k_low: int = 3, grad_a=None) -> float:
    """``min |Lambda_a f|_L2 / |f|_H2`` over random band-limited, high-pass ``f``."""
    keep = grid.dealias_mask & (grid.xi_norm >= k_low)
    ratios = []
    for _ in range(samples):
        c = (rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)) * keep
        f = np.fft.ifftn(c, axes=grid.axes).real
        ratios.append(l2_norm(grid, lambda_a_apply(grid, a, f, grad_a)) / sobolev_norm(grid, f, 2.0))
    return float(min(ratios))
