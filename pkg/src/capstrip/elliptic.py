"""Variable-coefficient elliptic solver on the flattened strip.

Discretisation: spectral collocation in X, second-order differences on the
uniform vertical grid, written in flux form. The full gradient ``(D mu u, delta u)``
lives on the vertical half-nodes (``mu`` = two-point average, ``delta`` = two-point
difference, ``D`` = spectral derivative) and the discrete energy is

    B(u, v) = dy * sum_{half-nodes} grad_h u . P_half grad_h v,

so the operator ``A`` with ``(A u, v) = B(u, v)`` is symmetric positive
semi-definite by construction. The Neumann condition at the bottom is natural;
the top Dirichlet row is eliminated. The top conormal flux is read off the
Dirichlet row of ``A`` (variational flux), which keeps the discrete
Dirichlet-Neumann map exactly symmetric.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .geometry import CoeffField
from .spectral import divergence, gradient

log = logging.getLogger(__name__)


class EllipticSolveError(RuntimeError):
    """The linear solve failed to converge or the system is singular."""


@dataclass(frozen=True, eq=False)
class BvpProblem:
    coeff: CoeffField
    f_top: np.ndarray
    h: np.ndarray | None = None
    g_bottom: np.ndarray | None = None


@dataclass(frozen=True, eq=False)
class BvpSolution:
    u: np.ndarray
    residual: float
    iterations: int


class StripOperator:
    """Matrix-free flux-form operator for one coefficient field, with its solver."""

    def __init__(self, coeff: CoeffField, direct_limit: int = 2000):
        self.coeff = coeff
        self.sampling = coeff.sampling
        self.grid = coeff.sampling.grid
        self.direct_limit = direct_limit
        self._factor_preconditioner()

    # -- operator -----------------------------------------------------------
    def half_gradient(self, u: np.ndarray) -> np.ndarray:
        """Full gradient at the half-nodes, shape ``(d+1, M, n, ...)``."""
        dy = self.sampling.dy
        um = 0.5 * (u[1:] + u[:-1])
        return np.concatenate([gradient(self.grid, um), ((u[1:] - u[:-1]) / dy)[None]])

    def flux(self, u: np.ndarray) -> np.ndarray:
        """``P grad u`` at the half-nodes."""
        return np.einsum("ij...,j...->i...", self.coeff.P_half, self.half_gradient(u))

    def apply(self, u: np.ndarray) -> np.ndarray:
        """``A u`` on all ``M + 1`` levels (rows are weak-form test functions)."""
        d, dy = self.grid.d, self.sampling.dy
        F = self.flux(u)
        hx = -divergence(self.grid, F[:d]) * (0.5 * dy)
        out = np.zeros_like(u)
        out[:-1] += hx - F[d]
        out[1:] += hx + F[d]
        return out

    def energy(self, u: np.ndarray, v: np.ndarray) -> float:
        """The bilinear form ``B(u, v)`` (horizontal quadrature weight omitted)."""
        gu, gv = self.half_gradient(u), self.half_gradient(v)
        return float(self.sampling.dy * np.sum(np.einsum("ij...,i...,j...->...", self.coeff.P_half, gu, gv)))

    def top_flux(self, u: np.ndarray, h: np.ndarray | None = None) -> np.ndarray:
        """Outward conormal flux ``e_{d+1} . P grad u`` at the top, read off the
        Dirichlet row of the discrete system."""
        row = self.apply(u)[-1]
        if h is not None:
            row = row - self.sampling.weights[-1] * h[-1]
        return row

    # -- preconditioner: flat operator per horizontal mode -------------------
    def _factor_preconditioner(self):
        g, s, d = self.grid, self.sampling, self.grid.d
        M, dy = s.M, s.dy
        # half spectrum of the real FFT along the last axis
        self._rxi = g.xi_eff[(slice(None),) * d + (slice(0, g.n // 2 + 1),)]
        rshape = self._rxi.shape[1:]
        axes = tuple(range(1, d + 1))
        ch = np.mean(np.trace(self.coeff.P_half[:d, :d]), axis=axes) / d
        cv = np.mean(self.coeff.P_half[d, d], axis=axes)
        k2 = np.sum(self._rxi**2, axis=0)[None]
        alpha = (0.25 * dy * ch).reshape((M,) + (1,) * d) * k2
        beta = (cv / dy).reshape((M,) + (1,) * d) * np.ones_like(k2)
        diag = np.zeros((M,) + rshape)
        diag += alpha + beta
        diag[1:] += (alpha + beta)[:-1]
        off = (alpha - beta)[:-1]
        cp = np.zeros_like(diag)
        den = np.zeros_like(diag)
        den[0] = diag[0]
        for j in range(M - 1):
            cp[j] = off[j] / den[j]
            den[j + 1] = diag[j + 1] - off[j] * cp[j]
        self._off, self._cp, self._den = off, cp, den

    def precondition(self, r: np.ndarray) -> np.ndarray:
        axes = self.grid.axes
        R = np.fft.rfftn(r, axes=axes)
        M = self.sampling.M
        x = np.zeros_like(R)
        x[0] = R[0] / self._den[0]
        for j in range(1, M):
            x[j] = (R[j] - self._off[j - 1] * x[j - 1]) / self._den[j]
        for j in range(M - 2, -1, -1):
            x[j] -= self._cp[j] * x[j + 1]
        return np.fft.irfftn(x, s=self.grid.shape, axes=axes)

    # -- solve ----------------------------------------------------------------
    def rhs(self, f_top, h=None, g_bottom=None) -> np.ndarray:
        s = self.sampling
        lift = s.zeros()
        lift[-1] = f_top
        b = -self.apply(lift)[:-1]
        if h is not None:
            b += s.weights[:-1].reshape((-1,) + (1,) * self.grid.d) * h[:-1]
        if g_bottom is not None:
            b[0] -= g_bottom
        return b

    def solve(self, f_top, h=None, g_bottom=None, tol: float = 1e-10,
              x0: np.ndarray | None = None) -> BvpSolution:
        if not 0 < tol <= 1e-6:
            raise ValueError("tol must lie in (0, 1e-6]")
        if self.coeff.ptilde <= 0:
            raise EllipticSolveError("coefficient field is not elliptic")
        s = self.sampling
        f_top = np.broadcast_to(np.asarray(f_top, dtype=float), self.grid.shape)
        b = self.rhs(f_top, h, g_bottom)
        inner_shape = b.shape
        N = b.size
        u = s.zeros()
        u[-1] = f_top
        bnorm = float(np.linalg.norm(b))
        if bnorm == 0.0:
            return BvpSolution(u, 0.0, 0)

        def mv(v):
            full = np.zeros(s.shape)
            full[:-1] = v.reshape(inner_shape)
            return self.apply(full)[:-1].ravel()

        A = LinearOperator((N, N), matvec=mv, dtype=float)
        P = LinearOperator((N, N), matvec=lambda v: self.precondition(v.reshape(inner_shape)).ravel(),
                           dtype=float)
        count = [0]

        def cb(_):
            count[0] += 1

        maxiter = 10 * N
        guess = None if x0 is None else x0[:-1].ravel()
        x, info = cg(A, b.ravel(), x0=guess, rtol=tol, atol=0.0, maxiter=maxiter, M=P, callback=cb)
        res = float(np.linalg.norm(b.ravel() - mv(x))) / bnorm
        if info != 0 or res > tol * 10:
            if N > self.direct_limit:
                raise EllipticSolveError(f"CG did not converge (info={info}, residual={res:.3g})")
            log.warning("CG failed (info=%s), falling back to a dense direct solve", info)
            dense = np.column_stack([mv(e) for e in np.eye(N)])
            try:
                x = np.linalg.solve(dense, b.ravel())
            except np.linalg.LinAlgError as exc:
                raise EllipticSolveError("singular strip system") from exc
            res = float(np.linalg.norm(b.ravel() - mv(x))) / bnorm
        u[:-1] = x.reshape(inner_shape)
        return BvpSolution(u, res, count[0])


def solve_bvp(problem: BvpProblem, tol: float = 1e-10) -> BvpSolution:
    """Solve ``-div(P grad u) = h`` on the strip, ``u = f`` on top and
    ``e_{d+1} . P grad u = g`` on the bottom.

    ``h`` is the right-hand side of the strip equation itself (for a physical
    source ``h_phys`` pass ``(a - b) * h_phys``).
    """
    op = StripOperator(problem.coeff)
    return op.solve(problem.f_top, problem.h, problem.g_bottom, tol=tol)


def vertical_derivative(u: np.ndarray, dy: float) -> np.ndarray:
    """Second-order differences in y~: centered inside, one-sided at the faces."""
    return np.gradient(u, dy, axis=0, edge_order=2)


def conormal_trace(u: np.ndarray, coeff: CoeffField, side: str) -> np.ndarray:
    """``e_{d+1} . P grad u`` on the top or bottom face (one-sided stencil)."""
    s, grid = coeff.sampling, coeff.sampling.grid
    d = grid.d
    u = s.check(u)
    if side == "top":
        j, dyu = -1, (3 * u[-1] - 4 * u[-2] + u[-3]) / (2 * s.dy)
    elif side == "bottom":
        j, dyu = 0, (-3 * u[0] + 4 * u[1] - u[2]) / (2 * s.dy)
    else:
        raise ValueError("side must be 'top' or 'bottom'")
    gx = gradient(grid, u[j])
    P = coeff.P[:, :, j]
    return np.sum(P[d, :d] * gx, axis=0) + P[d, d] * dyu
