"""Linearization around an admissible reference flow.

With the good unknown ``V = (zeta, psi - Z zeta)`` the linearized system reads

    d_t V1 + div(v V1) - G V2 = H1
    d_t V2 + (a - A) V1 + v . grad V2 = H2

where ``a = g + d_t Z + v . grad Z`` is the Taylor coefficient of the reference and
``A`` the linearized surface-tension operator. The module also houses the energy
functional ``E_k`` (k = 0, 1), the Levy-condition check and the pressure-problem
cross-check of ``a``.
"""
from __future__ import annotations

import logging
import math
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .dno import DnoBackend
from .elliptic import StripOperator, vertical_derivative
from .evolution import (PhysParams, SimulationError, WaveState, a_operator, dt_max, make_backend,
                        rhs as nonlinear_rhs, surface_velocity)
from .geometry import DomainShape, build_coeff, grad_strip_map
from .spectral import TorusGrid, divergence, gradient, inner, l2_norm, sobolev_norm
from .symbols import lambda_a_apply, sigma_weight

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class LinState:
    V1: np.ndarray
    V2: np.ndarray
    t: float = 0.0


@dataclass(frozen=True, eq=False)
class CoeffFrame:
    """Reference quantities at one time (or interpolated between two)."""

    t: float
    zeta: np.ndarray
    Z: np.ndarray
    v: np.ndarray
    a_bar: np.ndarray


@dataclass(eq=False)
class LinCoeffs:
    """Time-indexed reference coefficients; a single frame means a frozen reference."""

    params: PhysParams
    times: np.ndarray
    zeta: np.ndarray        # (F, n, ...)
    psi: np.ndarray
    Z: np.ndarray
    v: np.ndarray           # (F, d, n, ...)
    a_bar: np.ndarray
    cache_size: int = 8
    _backends: OrderedDict = field(default_factory=OrderedDict, init=False, repr=False)

    @property
    def grid(self) -> TorusGrid:
        return self.params.grid

    @property
    def frozen(self) -> bool:
        return len(self.times) == 1

    def backend(self, i: int) -> DnoBackend:
        """DN backend on frame ``i`` (LRU cached)."""
        if i in self._backends:
            self._backends.move_to_end(i)
            return self._backends[i]
        be = make_backend(self.zeta[i], self.params)
        self._backends[i] = be
        if len(self._backends) > self.cache_size:
            self._backends.popitem(last=False)
        return be

    def locate(self, t: float) -> list[tuple[int, float]]:
        """Frames and linear-interpolation weights for time ``t``."""
        if self.frozen:
            return [(0, 1.0)]
        t0, t1 = self.times[0], self.times[-1]
        span = t1 - t0
        if t < t0 - 1e-9 * span or t > t1 + 1e-9 * span:
            raise ValueError(f"t={t} outside the reference window [{t0}, {t1}]")
        dt = span / (len(self.times) - 1)
        x = (min(max(t, t0), t1) - t0) / dt
        i = int(math.floor(x + 1e-9))
        w = x - i
        if abs(w) < 1e-9 or i >= len(self.times) - 1:
            return [(min(i, len(self.times) - 1), 1.0)]
        if abs(w - 1.0) < 1e-9:
            return [(i + 1, 1.0)]
        return [(i, 1.0 - w), (i + 1, w)]

    def at(self, t: float) -> CoeffFrame:
        parts = self.locate(t)

        def mix(arr):
            return sum(w * arr[i] for i, w in parts)

        return CoeffFrame(t, mix(self.zeta), mix(self.Z), mix(self.v), mix(self.a_bar))

    def G(self, t: float, f: np.ndarray) -> np.ndarray:
        return sum(w * self.backend(i).apply(f) for i, w in self.locate(t))

    def A(self, t: float, f: np.ndarray) -> np.ndarray:
        if self.params.kappa == 0:
            return np.zeros_like(f)
        return sum(w * a_operator(self.grid, self.zeta[i], self.params.kappa, f)
                   for i, w in self.locate(t))


def _frame_velocities(frames: Sequence[WaveState], params: PhysParams):
    grid = params.grid
    Zs, vs = [], []
    for U in frames:
        be = make_backend(U.zeta, params)
        Z, v = surface_velocity(grid, U.zeta, U.psi, be.apply(U.psi))
        Zs.append(Z)
        vs.append(v)
    return np.array(Zs), np.array(vs)


def build_coeffs(frames: Sequence[WaveState], params: PhysParams) -> LinCoeffs:
    """Coefficients from a reference trajectory sampled at uniform time steps."""
    if len(frames) < 3:
        raise ValueError(f"need at least 3 reference frames, got {len(frames)}")
    times = np.array([U.t for U in frames], dtype=float)
    steps = np.diff(times)
    if np.any(steps <= 0) or np.ptp(steps) > 1e-9 * max(abs(steps[0]), 1e-300):
        raise ValueError("reference frames must be sampled at a uniform, increasing dt")
    grid = params.grid
    Z, v = _frame_velocities(frames, params)
    dZ = np.gradient(Z, steps[0], axis=0, edge_order=2)
    a_bar = np.array([params.g + dZ[i] + np.sum(v[i] * gradient(grid, Z[i]), axis=0)
                      for i in range(len(frames))])
    return LinCoeffs(params, times, np.array([U.zeta for U in frames]),
                     np.array([U.psi for U in frames]), Z, v, a_bar)


def frozen_coeffs(U: WaveState, params: PhysParams) -> LinCoeffs:
    """Coefficients frozen at one state (``d_t Z`` taken as 0)."""
    Z, v = _frame_velocities([U], params)
    a_bar = params.g + np.sum(v[0] * gradient(params.grid, Z[0]), axis=0)
    return LinCoeffs(params, np.array([U.t]), U.zeta[None], U.psi[None], Z, v, a_bar[None])


def forcing_adapter(coeffs: LinCoeffs, G1: Callable, G2: Callable) -> Callable:
    """Source in good-unknown form, ``H = (G1, G2 - Z G1)``."""
    def H(t):
        g1 = G1(t)
        return g1, G2(t) - coeffs.at(t).Z * g1
    return H


def lin_rhs(V: LinState, coeffs: LinCoeffs, H: Callable | None = None):
    t = V.t
    grid = coeffs.grid
    fr = coeffs.at(t)
    dV1 = -divergence(grid, fr.v * V.V1[None]) + coeffs.G(t, V.V2)
    dV2 = -fr.a_bar * V.V1 + coeffs.A(t, V.V1) - np.sum(fr.v * gradient(grid, V.V2), axis=0)
    if H is not None:
        h1, h2 = H(t)
        dV1, dV2 = dV1 + h1, dV2 + h2
    return dV1, dV2


def solve_linearized(V0: LinState, coeffs: LinCoeffs, T: float, dt: float,
                     H: Callable | None = None, check_cfl: bool = True) -> list[LinState]:
    """RK4 on the linearized system from ``V0.t`` to ``T``; returns every step."""
    if check_cfl and abs(dt) > dt_max(coeffs.params) * (1 + 1e-12):
        raise ValueError(f"dt={dt:.4g} exceeds the stability bound {dt_max(coeffs.params):.4g}")
    nsteps = max(1, int(math.ceil(abs(T - V0.t) / abs(dt) - 1e-9)))
    dt = (T - V0.t) / nsteps
    out = [V0]
    V = V0

    def f(t, a, b):
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise SimulationError("non-finite values in linearized state")
        return lin_rhs(LinState(a, b, t), coeffs, H)

    for _ in range(nsteps):
        t, a, b = V.t, V.V1, V.V2
        k1 = f(t, a, b)
        k2 = f(t + dt / 2, a + dt / 2 * k1[0], b + dt / 2 * k1[1])
        k3 = f(t + dt / 2, a + dt / 2 * k2[0], b + dt / 2 * k2[1])
        k4 = f(t + dt, a + dt * k3[0], b + dt * k3[1])
        V = LinState(a + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
                     b + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]), t + dt)
        out.append(V)
    return out


def flat_mode_solution(grid: TorusGrid, k: int, g: float, kappa: float, depth: float,
                       t: float, amplitude: float = 1.0):
    """Exact flat frozen solution with ``V1(0) = amplitude cos(k x)``, ``V2(0) = 0``."""
    kk = k * 2 * math.pi / grid.L
    gk = kk * math.tanh(kk * depth)
    omega = math.sqrt((g + kappa * kk**2) * gk)
    c = np.cos(kk * grid.x[0])
    return (amplitude * math.cos(omega * t) * c,
            -amplitude * (omega / gk) * math.sin(omega * t) * c)


def energy_functional(V: LinState, coeffs: LinCoeffs, k: int = 0) -> float:
    """``E_k(V) = (L^k s V1, s^-1 (a - A) s^-1 L^k s V1) + (L^k s^-1 V2, s G s L^k s^-1 V2)``
    with ``s`` the slope weight and ``L = Lambda`` of the reference surface."""
    if k not in (0, 1):
        raise ValueError("k must be 0 or 1")
    grid = coeffs.grid
    t = V.t
    fr = coeffs.at(t)
    sig = sigma_weight(grid, fr.zeta)

    def lam(f):
        return lambda_a_apply(grid, fr.zeta, f) if k == 1 else f

    w1 = lam(sig * V.V1)
    w2 = lam(V.V2 / sig)
    u1 = w1 / sig
    e1 = inner(grid, w1, (fr.a_bar * u1 - coeffs.A(t, u1)) / sig)
    e2 = inner(grid, w2, sig * coeffs.G(t, sig * w2))
    return float(e1 + e2)


def check_levy(coeffs: LinCoeffs, c0: float | None = None) -> tuple[float, bool]:
    """Minimum of ``a`` over all frames and nodes, and whether it exceeds ``c0``
    (default ``g / 2``)."""
    c0 = 0.5 * coeffs.params.g if c0 is None else c0
    if not c0 > 0:
        raise ValueError("c0 must be positive")
    m = float(np.min(coeffs.a_bar))
    return m, bool(m >= c0)


# ---------------------------------------------------------------------------
# energy diagnostics

def energy_norm(V: LinState, coeffs: LinCoeffs) -> float:
    """``kappa |V1|_H1^2 + min(a) |V1|^2 + |V2|_{H^1/2}^2``."""
    grid = coeffs.grid
    amin = float(np.min(coeffs.at(V.t).a_bar))
    return (coeffs.params.kappa * sobolev_norm(grid, V.V1, 1.0) ** 2
            + amin * l2_norm(grid, V.V1) ** 2 + sobolev_norm(grid, V.V2, 0.5) ** 2)


def equivalence_constants(coeffs: LinCoeffs, rng: np.random.Generator, samples: int = 20,
                          k_low: float = 2.0, t: float | None = None) -> tuple[float, float]:
    """Measured ``(c1, c2)`` with ``c1 N(V) <= E_0(V) <= c2 N(V)`` on random high-pass ``V``."""
    grid = coeffs.grid
    t = coeffs.times[0] if t is None else t
    keep = grid.dealias_mask & (grid.xi_norm >= k_low)
    ratios = []
    for _ in range(samples):
        parts = []
        for _ in range(2):
            c = (rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)) * keep
            c /= (1.0 + grid.xi_norm**2)
            parts.append(np.fft.ifftn(c, axes=grid.axes).real)
        V = LinState(parts[0], parts[1], t)
        ratios.append(energy_functional(V, coeffs, 0) / energy_norm(V, coeffs))
    return float(min(ratios)), float(max(ratios))


@dataclass(frozen=True)
class GrowthFit:
    rate: float            # fitted lambda: exp(-2 lambda t) E is non-increasing within tol
    curvature: float       # quadratic coefficient of log E times T^2
    super_exponential: bool


def fit_growth(times, energies, tol: float = 0.05, curvature_limit: float = 0.1) -> GrowthFit:
    """Smallest ``lambda >= 0`` making ``exp(-2 lambda t) E(t)`` non-increasing within ``tol``,
    plus a quadratic fit of ``log E`` to flag faster-than-exponential growth."""
    t = np.asarray(times, dtype=float)
    E = np.asarray(energies, dtype=float)
    if np.any(E <= 0):
        raise ValueError("energies must be positive")
    logE = np.log(E)
    rate = 0.0
    for j in range(1, len(t)):
        gaps = t[j] - t[:j]
        rise = logE[j] - logE[:j] - math.log1p(tol)
        ok = gaps > 0
        if np.any(ok):
            rate = max(rate, float(np.max(rise[ok] / (2 * gaps[ok]))))
    span = t[-1] - t[0]
    curv = float(np.polyfit(t - t[0], logE, 2)[0]) * span**2 if len(t) >= 3 else 0.0
    return GrowthFit(rate, curv, bool(curv > curvature_limit))


# ---------------------------------------------------------------------------
# pressure problem

@dataclass(frozen=True, eq=False)
class TaylorResult:
    a_pressure: np.ndarray     # Taylor coefficient recovered from the pressure trace
    conormal: np.ndarray       # rescaled upward conormal derivative of the pressure
    pressure: np.ndarray       # strip field
    residual: float            # relative residual of the reference in the nonlinear equations


def mean_curvature(grid: TorusGrid, zeta: np.ndarray) -> np.ndarray:
    gz = gradient(grid, zeta)
    return divergence(grid, gz / np.sqrt(1.0 + np.sum(gz**2, axis=0)))


def physical_gradient(shape: DomainShape, sampling, u: np.ndarray) -> np.ndarray:
    """``(grad_X u, d_y u)`` in physical coordinates at every strip node, by the
    chain rule of the strip map."""
    grid = shape.grid
    d = grid.d
    h = shape.a - shape.b
    uy = vertical_derivative(u, sampling.dy)
    gs = grad_strip_map(shape, sampling.nodes)
    out = np.empty((d + 1,) + u.shape)
    out[d] = uy / h
    gx = gradient(grid, u)
    for i in range(d):
        out[i] = gx[i] - gs[i] * uy / h
    return out


def frame_residual(frames: Sequence[WaveState], index: int, params: PhysParams) -> float:
    """Relative residual of the nonlinear equations at frame ``index`` with centred
    differences in time (one-sided at the ends)."""
    if len(frames) < 3:
        raise ValueError("need at least 3 frames for a residual")
    dt = frames[1].t - frames[0].t
    z = np.gradient(np.array([U.zeta for U in frames]), dt, axis=0, edge_order=2)[index]
    p = np.gradient(np.array([U.psi for U in frames]), dt, axis=0, edge_order=2)[index]
    dz, dp = nonlinear_rhs(frames[index], params)
    scale = max(l2_norm(params.grid, dz) + l2_norm(params.grid, dp), 1e-300)
    return (l2_norm(params.grid, z - dz) + l2_norm(params.grid, p - dp)) / scale


def taylor_check(U: WaveState, params: PhysParams, residual: float = 0.0,
                 max_residual: float = 1e-2, tol: float = 1e-11) -> TaylorResult:
    """Taylor coefficient of a solving state from the pressure problem.

    ``-Delta P = |Hess phi|^2`` in the fluid, ``P = -kappa H`` on the surface
    (``H`` the mean curvature) and ``-d_y P = g`` on the flat bottom. With ``F`` the
    rescaled upward conormal derivative of ``P`` at the surface, the exact identity
    ``a = (-F + kappa grad zeta . grad H) / (1 + |grad zeta|^2)`` is returned.
    ``residual`` is the caller's measured equation residual for ``U``.
    """
    if residual > max_residual:
        raise ValueError(f"reference does not solve the equations (residual {residual:.3g})")
    grid, sampling = params.grid, params.sampling
    if np.ptp(params.bottom) > 0 or not np.isclose(params.bottom.flat[0], -1.0):
        raise ValueError("the pressure cross-check needs the flat bottom b = -1")
    shape = DomainShape(grid, U.zeta, params.bottom, params.h0)
    coeff = build_coeff(shape, sampling)
    op = StripOperator(coeff)
    phi = op.solve(U.psi, tol=tol).u
    grad_phi = physical_gradient(shape, sampling, phi)
    hess2 = np.zeros(sampling.shape)
    for comp in grad_phi:
        hess2 += np.sum(physical_gradient(shape, sampling, comp) ** 2, axis=0)
    h = (shape.a - shape.b)[None] * hess2
    H = mean_curvature(grid, U.zeta)
    top = -params.kappa * H
    P = op.solve(top, h=h, g_bottom=np.full(grid.shape, -params.g), tol=tol).u
    F = op.top_flux(P, h)
    gz = gradient(grid, U.zeta)
    a_p = (-F + params.kappa * np.sum(gz * gradient(grid, H), axis=0)) / (1.0 + np.sum(gz**2, axis=0))
    return TaylorResult(a_p, F, P, residual)
