"""Dirichlet-Neumann operator: exact (strip solve) and principal-symbol backends,
the remainder, the symbols eta_+-, the approximate extension and the shape
derivative."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .elliptic import StripOperator
from .geometry import CoeffField, DomainShape, StripSampling, build_coeff, flat_shape
from .spectral import Symbol, TorusGrid, divergence, inner, quantize

log = logging.getLogger(__name__)


def sqrt_quadratic_symbol(grid: TorusGrid, Q: np.ndarray, b: np.ndarray | None = None,
                          c: np.ndarray | float = 1.0, sign: float = 1.0,
                          order_name: str = "g") -> Symbol:
    """Symbol ``(i b.xi + sign * sqrt(xi.Q xi)) / c`` with analytic xi-derivatives to order 2.

    ``Q`` has shape ``(d, d, n, ...)``; the value and derivatives at ``xi = 0`` are 0.
    """
    d = grid.d
    Qf = Q.reshape(d, d, -1)
    bf = None if b is None else np.asarray(b).reshape(d, -1)
    cf = np.broadcast_to(np.asarray(c, dtype=float), grid.shape).reshape(-1, 1)

    def fn(beta, xi):
        Qxi = np.einsum("ijn,jk->ink", Qf, xi)           # (d, nodes, K)
        r2 = np.einsum("ink,ik->nk", Qxi, xi)
        zero = np.all(xi == 0, axis=0)
        r = np.sqrt(np.where(zero, 1.0, r2))
        order = sum(beta)
        if order == 0:
            out = sign * r.astype(complex)
            if bf is not None:
                out = out + 1j * np.einsum("in,ik->nk", bf, xi)
        elif order == 1:
            i = beta.index(1)
            out = sign * (Qxi[i] / r).astype(complex)
            if bf is not None:
                out = out + 1j * bf[i][:, None]
        elif order == 2:
            idx = [i for i, m in enumerate(beta) for _ in range(m)]
            i, j = idx
            out = sign * (Qf[i, j][:, None] / r - Qxi[i] * Qxi[j] / r**3).astype(complex)
        else:
            raise ValueError("xi-derivatives supplied to order 2 only")
        out = np.where(zero[None, :], 0.0, out) / cf
        return out.reshape(grid.shape + (xi.shape[1],))

    return Symbol(grid, fn, 1.0, n_reg=2, name=order_name)


def principal_symbol(shape: DomainShape) -> Symbol:
    """``g_a(X, xi) = sqrt((1 + |grad a|^2)|xi|^2 - (xi . grad a)^2)``."""
    grid, ga = shape.grid, shape.grad_a
    d = grid.d
    Q = (1.0 + np.sum(ga**2, axis=0))[None, None] * np.eye(d).reshape(d, d, *(1,) * d) \
        - ga[:, None] * ga[None, :]
    return sqrt_quadratic_symbol(grid, Q, order_name="g_a")


@lru_cache(maxsize=None)
def _orientation(grid: TorusGrid, M: int) -> float:
    """Sign making the strip flux formula positive, fixed once per discretisation."""
    sampling = StripSampling(grid, M)
    op = StripOperator(build_coeff(flat_shape(grid), sampling))
    f = np.cos(grid.x[0])
    raw = -op.top_flux(op.solve(f).u)
    if inner(grid, raw, f) < 0:
        log.info("DN orientation flipped: -conormal flux is negative on the flat strip")
        return -1.0
    return 1.0


@dataclass(eq=False)
class DnoBackend:
    """``G(a, b)`` on a fixed geometry; ``mode`` is ``"exact"`` or ``"symbol"``."""

    shape: DomainShape
    sampling: StripSampling
    mode: str = "exact"
    tol: float = 1e-11
    coeff: CoeffField = field(init=False)
    op: StripOperator = field(init=False)
    orientation: float = field(init=False)

    def __post_init__(self):
        if self.mode not in ("exact", "symbol"):
            raise ValueError(f"unknown DN backend {self.mode!r}")
        self.coeff = build_coeff(self.shape, self.sampling)
        self.op = StripOperator(self.coeff)
        self.orientation = _orientation(self.sampling.grid, self.sampling.M)
        self._symbol = None

    @property
    def grid(self) -> TorusGrid:
        return self.sampling.grid

    @property
    def symbol(self) -> Symbol:
        if self._symbol is None:
            self._symbol = principal_symbol(self.shape)
        return self._symbol

    def extension(self, f: np.ndarray) -> np.ndarray:
        """Discrete harmonic extension ``f^b`` of ``f`` into the strip."""
        return self.op.solve(f, tol=self.tol).u

    def apply(self, f: np.ndarray) -> np.ndarray:
        f = self.grid.check(np.asarray(f, dtype=float))
        if self.mode == "symbol":
            return quantize(self.symbol, f)
        u = self.extension(f)
        out = -self.orientation * self.op.top_flux(u)
        # constants lie in the kernel; drop the solver-tolerance residue in the mean
        return out - out.mean()

    __call__ = apply


def dn_apply(backend: DnoBackend, f: np.ndarray) -> np.ndarray:
    return backend.apply(f)


def remainder_apply(shape: DomainShape, sampling: StripSampling, f: np.ndarray,
                    backend: DnoBackend | None = None) -> np.ndarray:
    """``R_a f = G(a, b) f - g_a(X, D) f``."""
    backend = backend or DnoBackend(shape, sampling)
    return backend.apply(f) - quantize(backend.symbol, f)


class EtaSymbols(NamedTuple):
    plus: Symbol
    minus: Symbol
    c_plus: float
    discriminant_ratio: float


def eta_symbols(coeff: CoeffField, level: int) -> EtaSymbols:
    """The factorisation roots at the vertical node ``level``.

    ``eta_+- = (-i p.xi +- sqrt(p_{d+1} xi.P1 xi - (p.xi)^2)) / p_{d+1}``.
    ``c_plus`` is the sampled ``min Re eta_+ / |xi|``; ``discriminant_ratio`` is the
    sampled minimum of the discriminant over ``ptilde^2 |xi|^2``.
    """
    grid, d = coeff.sampling.grid, coeff.d
    P = coeff.P[:, :, level]
    P1, p, pd = P[:d, :d], P[:d, d], P[d, d]
    Q = pd[None, None] * P1 - p[:, None] * p[None, :]
    xi = grid.xi.reshape(d, -1)
    nz = np.any(xi != 0, axis=0)
    xi = xi[:, nz]
    disc = np.einsum("ijn,ik,jk->nk", Q.reshape(d, d, -1), xi, xi)
    xi2 = np.sum(xi**2, axis=0)
    if np.min(disc) < 0:
        raise ValueError("negative discriminant: coefficient field is not elliptic")
    ratio = float(np.min(disc / (coeff.ptilde**2 * xi2)))
    plus = sqrt_quadratic_symbol(grid, Q, b=-p, c=pd, sign=1.0, order_name="eta+")
    minus = sqrt_quadratic_symbol(grid, Q, b=-p, c=pd, sign=-1.0, order_name="eta-")
    c_plus = float(np.min(np.sqrt(disc) / pd.reshape(-1, 1) / np.sqrt(xi2)))
    return EtaSymbols(plus, minus, c_plus, ratio)


def approx_extension(shape: DomainShape, sampling: StripSampling, f: np.ndarray,
                     coeff: CoeffField | None = None) -> np.ndarray:
    """``f_app(X, y~) = sigma_app(X, y~, D) f`` with
    ``sigma_app = exp(-int_{y~}^0 eta_+ dy')`` (trapezoid rule in y~)."""
    coeff = coeff or build_coeff(shape, sampling)
    grid = sampling.grid
    M, dy = sampling.M, sampling.dy
    etas = [eta_symbols(coeff, j).plus for j in range(M + 1)]

    def sigma_app(j: int) -> Symbol:
        def fn(beta, xi):
            if sum(beta):
                raise ValueError("sigma_app carries no xi-derivatives")
            vals = [etas[i](xi) for i in range(j, M + 1)]
            if len(vals) == 1:
                return np.ones_like(vals[0])
            integral = dy * (sum(vals) - 0.5 * (vals[0] + vals[-1]))
            return np.exp(-integral)

        return Symbol(grid, fn, 0.0, n_reg=0, name=f"sigma_app[{j}]")

    out = sampling.zeros()
    out[-1] = f
    for j in range(M):
        out[j] = quantize(sigma_app(j), f)
    return out


def shape_derivative(zeta: np.ndarray, psi: np.ndarray, zeta_dot: np.ndarray,
                     backend: DnoBackend) -> np.ndarray:
    """Derivative of ``zeta -> G(zeta) psi`` in the direction ``zeta_dot``:
    ``-G(Z zeta_dot) - div(zeta_dot v)``; ``backend`` is built on ``zeta``."""
    from .evolution import surface_velocity

    grid = backend.grid
    Z, v = surface_velocity(grid, zeta, psi, backend.apply(psi))
    return -backend.apply(Z * zeta_dot) - divergence(grid, zeta_dot[None] * v)
