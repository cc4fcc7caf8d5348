"""Nonlinear gravity-capillary water waves in (zeta, psi) variables.

    d_t zeta = G(zeta) psi
    d_t psi  = -g zeta - |grad psi|^2 / 2
               + (G(zeta) psi + grad zeta . grad psi)^2 / (2 (1 + |grad zeta|^2))
               + kappa div(grad zeta / sqrt(1 + |grad zeta|^2))

time-stepped with classical RK4; the DN operator is rebuilt for every stage.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .dno import DnoBackend
from .geometry import DomainShape, GeometryError, StripSampling, min_separation
from .spectral import TorusGrid, dealias, divergence, gradient, inner

log = logging.getLogger(__name__)


class SimulationError(RuntimeError):
    """A run left the admissible set or produced non-finite values."""


@dataclass(frozen=True, eq=False)
class PhysParams:
    sampling: StripSampling
    bottom: np.ndarray
    g: float = 1.0
    kappa: float = 0.0
    h0: float = 0.1
    backend: str = "exact"
    dealias: bool = True
    c_cfl: float = 0.5
    tol: float = 1e-11

    def __post_init__(self):
        if not self.g > 0:
            raise ValueError("g must be positive")
        if self.kappa < 0:
            raise ValueError("kappa must be non-negative")
        b = np.broadcast_to(np.asarray(self.bottom, dtype=float), self.grid.shape)
        object.__setattr__(self, "bottom", b)

    @property
    def grid(self) -> TorusGrid:
        return self.sampling.grid

    def with_kappa(self, kappa: float) -> PhysParams:
        return PhysParams(self.sampling, self.bottom, self.g, kappa, self.h0, self.backend,
                          self.dealias, self.c_cfl, self.tol)


@dataclass(frozen=True, eq=False)
class WaveState:
    zeta: np.ndarray
    psi: np.ndarray
    t: float = 0.0


def make_backend(zeta: np.ndarray, params: PhysParams) -> DnoBackend:
    try:
        shape = DomainShape(params.grid, zeta, params.bottom, params.h0)
    except GeometryError as exc:
        raise SimulationError(f"inadmissible surface: {exc}") from exc
    return DnoBackend(shape, params.sampling, mode=params.backend, tol=params.tol)


def surface_velocity(grid: TorusGrid, zeta, psi, Gpsi):
    """Vertical and horizontal velocity traces ``(Z, v)`` given ``G(zeta) psi``."""
    gz = gradient(grid, zeta)
    gp = gradient(grid, psi)
    Z = (Gpsi + np.sum(gz * gp, axis=0)) / (1.0 + np.sum(gz**2, axis=0))
    return Z, gp - Z[None] * gz


def z_trace(U: WaveState, params: PhysParams, backend: DnoBackend | None = None) -> np.ndarray:
    backend = backend or make_backend(U.zeta, params)
    return surface_velocity(params.grid, U.zeta, U.psi, backend.apply(U.psi))[0]


def v_field(U: WaveState, params: PhysParams, backend: DnoBackend | None = None) -> np.ndarray:
    backend = backend or make_backend(U.zeta, params)
    return surface_velocity(params.grid, U.zeta, U.psi, backend.apply(U.psi))[1]


def a_operator(grid: TorusGrid, zeta: np.ndarray, kappa: float, f: np.ndarray,
               grad_zeta: np.ndarray | None = None) -> np.ndarray:
    """``kappa div[grad f / sqrt(1+|grad zeta|^2) - grad zeta (grad zeta . grad f) / (1+|grad zeta|^2)^(3/2)]``.

    ``grad_zeta`` may be passed directly (e.g. a constant slope, which no periodic
    ``zeta`` can realise).
    """
    gz = gradient(grid, zeta) if grad_zeta is None else np.asarray(grad_zeta, dtype=float)
    gz = np.broadcast_to(gz.reshape((grid.d,) + gz.shape[1:]), (grid.d,) + grid.shape)
    q = 1.0 + np.sum(gz**2, axis=0)
    gf = gradient(grid, f)
    flux = gf / np.sqrt(q) - gz * np.sum(gz * gf, axis=0) / q**1.5
    return kappa * divergence(grid, flux)


def a_op_apply(U: WaveState, params: PhysParams, f: np.ndarray) -> np.ndarray:
    return a_operator(params.grid, U.zeta, params.kappa, f)


def surface_tension_term(grid: TorusGrid, zeta: np.ndarray, kappa: float,
                         dealiased: bool = True) -> np.ndarray:
    """``kappa div(grad zeta / sqrt(1 + |grad zeta|^2))``."""
    if kappa == 0:
        return np.zeros(grid.shape)
    gz = gradient(grid, zeta)
    n = gz / np.sqrt(1.0 + np.sum(gz**2, axis=0))
    if dealiased:
        n = dealias(grid, n)
    out = kappa * divergence(grid, n)
    return dealias(grid, out) if dealiased else out


def rhs(U: WaveState, params: PhysParams, backend: DnoBackend | None = None):
    """Time derivatives ``(d zeta/dt, d psi/dt)``."""
    grid = params.grid
    backend = backend or make_backend(U.zeta, params)
    Gpsi = backend.apply(U.psi)
    gz = gradient(grid, U.zeta)
    gp = gradient(grid, U.psi)
    w = Gpsi + np.sum(gz * gp, axis=0)
    dpsi = (-params.g * U.zeta - 0.5 * np.sum(gp**2, axis=0)
            + w**2 / (2.0 * (1.0 + np.sum(gz**2, axis=0))))
    dpsi = dpsi + surface_tension_term(grid, U.zeta, params.kappa, params.dealias)
    if params.dealias:
        return dealias(grid, Gpsi), dealias(grid, dpsi)
    return Gpsi, dpsi


def dt_max(params: PhysParams) -> float:
    """Linear gravity-capillary stability heuristic ``c / sqrt(g k + kappa k^3)``."""
    grid = params.grid
    k = grid.k_cut if params.dealias else float(np.max(grid.xi_norm))
    return params.c_cfl / math.sqrt(params.g * k + params.kappa * k**3)


def _check_finite(*fields):
    for f in fields:
        if not np.all(np.isfinite(f)):
            raise SimulationError("non-finite values in state")


def check_admissible(U: WaveState, params: PhysParams) -> float:
    sep = min_separation(U.zeta, params.bottom)
    if sep < params.h0:
        raise SimulationError(f"layer thickness {sep:.3g} fell below h0={params.h0} at t={U.t:.6g}")
    return sep


def step(U: WaveState, dt: float, params: PhysParams, check_cfl: bool = True) -> WaveState:
    """One classical RK4 step (``dt`` may be negative for backward integration)."""
    if check_cfl and abs(dt) > dt_max(params) * (1 + 1e-12):
        raise ValueError(f"dt={dt:.4g} exceeds the stability bound {dt_max(params):.4g}")

    def f(z, p):
        _check_finite(z, p)
        return rhs(WaveState(z, p), params)

    z, p = U.zeta, U.psi
    k1 = f(z, p)
    k2 = f(z + 0.5 * dt * k1[0], p + 0.5 * dt * k1[1])
    k3 = f(z + 0.5 * dt * k2[0], p + 0.5 * dt * k2[1])
    k4 = f(z + dt * k3[0], p + dt * k3[1])
    zn = z + dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    pn = p + dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    _check_finite(zn, pn)
    out = WaveState(zn, pn, U.t + dt)
    check_admissible(out, params)
    return out


def hamiltonian(U: WaveState, params: PhysParams, backend: DnoBackend | None = None) -> float:
    """``(psi, G psi)/2 + (g/2) int zeta^2 + kappa int (sqrt(1 + |grad zeta|^2) - 1)``."""
    grid = params.grid
    backend = backend or make_backend(U.zeta, params)
    kinetic = 0.5 * inner(grid, U.psi, backend.apply(U.psi))
    potential = 0.5 * params.g * inner(grid, U.zeta, U.zeta)
    gz = gradient(grid, U.zeta)
    area = float(np.sum(np.sqrt(1.0 + np.sum(gz**2, axis=0)) - 1.0) * grid.cell_volume)
    return kinetic + potential + params.kappa * area


DIAGNOSTIC_COLUMNS = ("t", "H", "mass", "max_abs_zeta", "min_separation", "dt")


@dataclass
class Trajectory:
    times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    aborted: bool = False
    reason: str = ""

    @property
    def final(self) -> WaveState:
        return self.snapshots[-1]

    def column(self, name: str) -> np.ndarray:
        i = DIAGNOSTIC_COLUMNS.index(name)
        return np.array([row[i] for row in self.diagnostics])


def diagnostics_row(U: WaveState, params: PhysParams, dt: float) -> tuple:
    grid = params.grid
    return (U.t, hamiltonian(U, params), float(np.sum(U.zeta) * grid.cell_volume),
            float(np.max(np.abs(U.zeta))), min_separation(U.zeta, params.bottom), dt)


def simulate(U0: WaveState, params: PhysParams, T: float, dt: float | None = None,
             snapshot_stride: int = 1, with_diagnostics: bool = True,
             callback=None) -> Trajectory:
    """Step from ``U0`` to ``T``; an abort returns the partial trajectory flagged."""
    if dt is None:
        dt = dt_max(params)
    nsteps = max(1, int(math.ceil(abs(T - U0.t) / abs(dt) - 1e-9)))
    dt = (T - U0.t) / nsteps
    traj = Trajectory()
    U = U0
    try:
        check_admissible(U, params)
    except SimulationError as exc:
        traj.aborted, traj.reason = True, str(exc)
        return traj
    traj.times.append(U.t)
    traj.snapshots.append(U)
    if with_diagnostics:
        traj.diagnostics.append(diagnostics_row(U, params, dt))
    for i in range(1, nsteps + 1):
        try:
            U = step(U, dt, params)
        except SimulationError as exc:
            log.warning("run aborted: %s", exc)
            traj.aborted, traj.reason = True, str(exc)
            break
        if callback is not None:
            callback(U)
        if with_diagnostics:
            traj.diagnostics.append(diagnostics_row(U, params, dt))
        if i % snapshot_stride == 0 or i == nsteps:
            traj.times.append(U.t)
            traj.snapshots.append(U)
    return traj
