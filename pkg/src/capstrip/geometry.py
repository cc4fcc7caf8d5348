"""Flattening of the fluid layer onto the strip ``grid x [-1, 0]``.

The map is ``(X, y~) -> (X, s(X, y~))`` with ``s = -b y~ + (1 + y~) a``; under it the
Laplacian becomes the divergence-form operator ``-div(P grad)`` with the symmetric
matrix

    P = 1/(a-b) [[(a-b)^2 I, -(a-b) grad s], [-(a-b) grad s^T, 1 + |grad s|^2]].
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .spectral import TorusGrid, gradient

log = logging.getLogger(__name__)


class GeometryError(ValueError):
    """The surface/bottom pair does not bound a uniformly thick fluid layer."""


@dataclass(frozen=True, eq=False)
class DomainShape:
    grid: TorusGrid
    a: np.ndarray
    b: np.ndarray
    h0: float

    def __post_init__(self):
        a = np.broadcast_to(np.asarray(self.a, dtype=float), self.grid.shape)
        b = np.broadcast_to(np.asarray(self.b, dtype=float), self.grid.shape)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        if not self.h0 > 0:
            raise GeometryError("h0 must be positive")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise GeometryError("non-finite surface or bottom")
        sep = min_separation(a, b)
        if sep < self.h0:
            raise GeometryError(f"layer too thin: min{{-b, a-b}} = {sep:.3g} < h0 = {self.h0}")

    @classmethod
    def flat_bottom(cls, grid: TorusGrid, a, depth: float = 1.0, h0: float | None = None):
        a = np.broadcast_to(np.asarray(a, dtype=float), grid.shape)
        b = np.full(grid.shape, -depth)
        if h0 is None:
            h0 = 0.5 * min_separation(a, b)
        return cls(grid, a, b, h0)

    @cached_property
    def grad_a(self) -> np.ndarray:
        return gradient(self.grid, self.a)

    @cached_property
    def grad_b(self) -> np.ndarray:
        return gradient(self.grid, self.b)


def min_separation(a: np.ndarray, b: np.ndarray) -> float:
    return float(min(np.min(-b), np.min(a - b)))


@dataclass(frozen=True)
class StripSampling:
    """Uniform vertical nodes ``y~_j = -1 + j/M``, ``j = 0..M``, over a torus grid."""

    grid: TorusGrid
    M: int

    def __post_init__(self):
        if self.M < 8:
            raise ValueError(f"M must be >= 8, got {self.M}")

    @property
    def dy(self) -> float:
        return 1.0 / self.M

    @cached_property
    def nodes(self) -> np.ndarray:
        return np.linspace(-1.0, 0.0, self.M + 1)

    @cached_property
    def half_nodes(self) -> np.ndarray:
        return 0.5 * (self.nodes[1:] + self.nodes[:-1])

    @cached_property
    def weights(self) -> np.ndarray:
        """Trapezoid weights of the vertical nodes."""
        w = np.full(self.M + 1, self.dy)
        w[[0, -1]] = 0.5 * self.dy
        return w

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.M + 1,) + self.grid.shape

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def check(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u)
        if u.shape != self.shape:
            raise ValueError(f"strip field shape {u.shape} != {self.shape}")
        return u


def _levels(y: np.ndarray, d: int) -> np.ndarray:
    return y.reshape((-1,) + (1,) * d)


def strip_map(shape: DomainShape, sampling: StripSampling) -> np.ndarray:
    """The vertical coordinate ``s(X, y~)`` at every strip node."""
    y = _levels(sampling.nodes, shape.grid.d)
    return -shape.b * y + (1.0 + y) * shape.a


def grad_strip_map(shape: DomainShape, y: np.ndarray) -> np.ndarray:
    """``grad_X s`` at the levels ``y``; shape ``(d, len(y), n, ...)``."""
    y = _levels(np.asarray(y, dtype=float), shape.grid.d)
    return np.stack([-shape.grad_b[i] * y + (1.0 + y) * shape.grad_a[i]
                     for i in range(shape.grid.d)])


def coefficient_matrix(shape: DomainShape, y: np.ndarray) -> np.ndarray:
    """The matrix P at levels ``y``; shape ``(d+1, d+1, len(y), n, ...)``."""
    d = shape.grid.d
    gs = grad_strip_map(shape, y)
    h = (shape.a - shape.b)[None]
    P = np.zeros((d + 1, d + 1) + gs.shape[1:])
    for i in range(d):
        P[i, i] = h
        P[i, d] = P[d, i] = -gs[i]
    P[d, d] = (1.0 + np.sum(gs**2, axis=0)) / h
    return P


def _min_eig(P: np.ndarray) -> float:
    """Smallest eigenvalue of P over all nodes.

    Directions orthogonal to ``(grad s, 0)`` and ``e_{d+1}`` see the eigenvalue
    ``h = a - b``; on the remaining plane P reduces to ``[[h, -r], [-r, (1+r^2)/h]]``
    with ``r = |grad s|``, whose determinant is 1. Its smaller root lies below ``h``.
    """
    d = P.shape[0] - 1
    h = P[0, 0]
    r2 = np.sum(P[:d, d] ** 2, axis=0)
    tr = h + (1.0 + r2) / h
    lam = 2.0 / (tr + np.sqrt(np.maximum(tr**2 - 4.0, 0.0)))
    return float(np.min(lam))


@dataclass(frozen=True, eq=False)
class CoeffField:
    """P at the vertical nodes and at the half-nodes used by the flux-form solver."""

    sampling: StripSampling
    shape: DomainShape
    P: np.ndarray
    P_half: np.ndarray
    ptilde: float
    ptilde_bound: float

    @property
    def d(self) -> int:
        return self.sampling.grid.d

    def quadratic_form(self, theta: np.ndarray) -> np.ndarray:
        """``P Theta . Theta`` at every node for one vector ``theta``."""
        return np.einsum("ij...,i,j->...", self.P, theta, theta)


def build_coeff(shape: DomainShape, sampling: StripSampling) -> CoeffField:
    """Assemble P on the strip and certify its ellipticity constant numerically."""
    if sampling.grid != shape.grid:
        raise ValueError("shape and sampling live on different grids")
    P = coefficient_matrix(shape, sampling.nodes)
    P_half = coefficient_matrix(shape, sampling.half_nodes)
    ptilde = min(_min_eig(P), _min_eig(P_half))
    if not ptilde > 0:
        raise GeometryError(f"coefficient matrix not elliptic (min eigenvalue {ptilde:.3g})")
    slopes = np.concatenate([shape.grad_a, shape.grad_b])
    slope_inf = float(np.max(np.sqrt(np.sum(slopes**2, axis=0))))
    bound = shape.h0**2 / (float(np.max(shape.a - shape.b)) * (1.0 + slope_inf**2))
    log.debug("ptilde certified %.6g, analytic reference (C=1) %.6g", ptilde, bound)
    return CoeffField(sampling, shape, P, P_half, ptilde, bound)


def flat_shape(grid: TorusGrid, height: float = 0.0, depth: float = 1.0) -> DomainShape:
    return DomainShape.flat_bottom(grid, np.full(grid.shape, float(height)), depth)


def wavy_shape(grid: TorusGrid, amplitude: float = 0.1, depth: float = 1.0,
               bottom_amplitude: float = 0.0, phase: float = 0.0) -> DomainShape:
    """A smooth test geometry: a few low modes on the surface, optional bumpy bottom."""
    x = grid.x
    a = amplitude * (np.cos(x[0] + phase) + 0.5 * np.sin(2 * x[0] - phase))
    b = -depth + bottom_amplitude * np.cos(x[0] - 2 * phase)
    if grid.d == 2:
        a = a + amplitude * 0.7 * np.cos(x[1] - phase) * np.cos(x[0])
        b = b + bottom_amplitude * 0.5 * np.sin(x[1])
    h0 = 0.5 * min_separation(a, b)
    return DomainShape(grid, a, b, h0)
