"""Periodic grids, FFT helpers, Fourier multipliers and left quantization of symbols.

Fields are plain numpy arrays whose trailing ``d`` axes are the grid; any leading
axes are treated as a batch, so the same routines act on a single surface field,
a vector field ``(d, n, ...)`` or a strip field ``(M + 1, n, ...)``.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np


class QuantizationWarning(UserWarning):
    """Raised when a real input produced a genuinely complex quantized output."""


@dataclass(frozen=True)
class TorusGrid:
    """Uniform grid on the torus ``[0, L)^d`` with ``n`` points per axis."""

    d: int
    n: int
    L: float = 2 * math.pi

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError(f"d must be 1 or 2, got {self.d}")
        if self.n < 8 or self.n % 2:
            raise ValueError(f"n must be even and >= 8, got {self.n}")
        if not self.L > 0:
            raise ValueError("L must be positive")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def axes(self) -> tuple[int, ...]:
        return tuple(range(-self.d, 0))

    @property
    def size(self) -> int:
        return self.n**self.d

    @property
    def dx(self) -> float:
        return self.L / self.n

    @property
    def cell_volume(self) -> float:
        return self.dx**self.d

    @cached_property
    def x(self) -> np.ndarray:
        """Node coordinates, shape ``(d, n, ..., n)``."""
        x1 = np.arange(self.n) * self.dx
        return np.array(np.meshgrid(*([x1] * self.d), indexing="ij"))

    @cached_property
    def modes(self) -> np.ndarray:
        """Integer mode numbers in FFT order, shape ``(d, n, ..., n)``."""
        m1 = np.fft.fftfreq(self.n, 1.0 / self.n).round().astype(int)
        return np.array(np.meshgrid(*([m1] * self.d), indexing="ij"))

    @cached_property
    def nyquist(self) -> np.ndarray:
        """Boolean mask of lattice points carrying an unmatched Nyquist component."""
        return np.any(np.abs(self.modes) == self.n // 2, axis=0)

    @cached_property
    def xi(self) -> np.ndarray:
        """Frequency lattice ``2 pi m / L``, shape ``(d, n, ..., n)``."""
        return self.modes * (2 * math.pi / self.L)

    @cached_property
    def xi_eff(self) -> np.ndarray:
        """Frequencies used for differentiation: the Nyquist component is zeroed."""
        out = self.xi.copy()
        out[:, self.nyquist] = 0.0
        return out

    @cached_property
    def rxi_eff(self) -> np.ndarray:
        """``xi_eff`` restricted to the half spectrum of a real FFT (last axis)."""
        return self.xi_eff[(slice(None),) * self.d + (slice(0, self.n // 2 + 1),)]

    @cached_property
    def xi_norm(self) -> np.ndarray:
        return np.sqrt(np.sum(self.xi**2, axis=0))

    @cached_property
    def neg_index(self) -> tuple[np.ndarray, ...]:
        """Index arrays mapping each lattice point to its negation (mod n)."""
        return tuple((-self.modes[i]) % self.n for i in range(self.d))

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """True on modes kept by the 2/3 rule."""
        return np.all(np.abs(self.modes) <= self.n // 3, axis=0)

    @property
    def k_cut(self) -> float:
        """Largest retained wavenumber under the 2/3 rule."""
        return (self.n // 3) * 2 * math.pi / self.L

    def check(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f)
        if f.shape[f.ndim - self.d:] != self.shape or f.ndim < self.d:
            raise ValueError(f"field shape {f.shape} does not match grid {self.shape}")
        return f

    def zeros(self, *lead: int) -> np.ndarray:
        return np.zeros(lead + self.shape)


def forward_transform(grid: TorusGrid, f: np.ndarray) -> np.ndarray:
    """Coefficients ``c`` with ``f(x) = sum_xi c_xi exp(i x.xi)``."""
    f = grid.check(f)
    return np.fft.fftn(f, axes=grid.axes) / grid.size


def inverse_transform(grid: TorusGrid, F: np.ndarray, real: bool = True) -> np.ndarray:
    F = grid.check(F)
    out = np.fft.ifftn(F * grid.size, axes=grid.axes)
    return out.real if real else out


def _is_hermitian(grid: TorusGrid, m: np.ndarray) -> bool:
    mm = np.where(grid.nyquist, 0.0, m)
    neg = mm[grid.neg_index]
    scale = max(np.max(np.abs(mm)), 1e-300)
    return bool(np.max(np.abs(neg - np.conj(mm))) <= 1e-13 * scale)


def _multiplier_values(grid: TorusGrid, m) -> np.ndarray:
    if callable(m):
        vals = np.asarray(m(grid.xi), dtype=complex)
    else:
        vals = np.asarray(m, dtype=complex)
    vals = np.broadcast_to(vals, grid.shape)
    if not np.all(np.isfinite(vals)):
        raise ValueError("multiplier has non-finite values on the lattice")
    return vals


def fourier_multiplier(grid: TorusGrid, m, f: np.ndarray) -> np.ndarray:
    """Apply the Fourier multiplier ``m(xi)`` to ``f``; the Nyquist mode is zeroed.

    ``m`` is either an array on the lattice (FFT order) or a callable of the
    ``(d, n, ...)`` frequency array.
    """
    vals = _multiplier_values(grid, m)
    vals = np.where(grid.nyquist, 0.0, vals)
    out = np.fft.ifftn(np.fft.fftn(grid.check(f), axes=grid.axes) * vals, axes=grid.axes)
    if np.isrealobj(f) and _is_hermitian(grid, vals):
        return out.real
    return out


def _apply_real(grid: TorusGrid, vals: np.ndarray, f: np.ndarray) -> np.ndarray:
    return np.fft.ifftn(np.fft.fftn(f, axes=grid.axes) * vals, axes=grid.axes).real


def gradient(grid: TorusGrid, f: np.ndarray) -> np.ndarray:
    """Spectral gradient; result has a new leading axis of length ``d``."""
    f = grid.check(f)
    if np.isrealobj(f):
        F = np.fft.rfftn(f, axes=grid.axes)
        return np.stack([np.fft.irfftn(1j * grid.rxi_eff[i] * F, s=grid.shape, axes=grid.axes)
                         for i in range(grid.d)])
    F = np.fft.fftn(f, axes=grid.axes)
    return np.stack([np.fft.ifftn(1j * grid.xi_eff[i] * F, axes=grid.axes)
                     for i in range(grid.d)])


def divergence(grid: TorusGrid, v: np.ndarray) -> np.ndarray:
    """Spectral divergence of a vector field whose first axis has length ``d``."""
    v = np.asarray(v)
    if v.shape[0] != grid.d:
        raise ValueError("vector field must have leading axis of length d")
    acc = 0.0
    if np.isrealobj(v):
        for i in range(grid.d):
            acc = acc + 1j * grid.rxi_eff[i] * np.fft.rfftn(grid.check(v[i]), axes=grid.axes)
        return np.fft.irfftn(acc, s=grid.shape, axes=grid.axes)
    for i in range(grid.d):
        acc = acc + 1j * grid.xi_eff[i] * np.fft.fftn(grid.check(v[i]), axes=grid.axes)
    return np.fft.ifftn(acc, axes=grid.axes)


def laplacian(grid: TorusGrid, f: np.ndarray) -> np.ndarray:
    return _apply_real(grid, -np.sum(grid.xi_eff**2, axis=0), grid.check(f))


def derivative(grid: TorusGrid, f: np.ndarray, alpha: tuple[int, ...]) -> np.ndarray:
    """Mixed spectral derivative ``d^alpha f`` (works on complex input too)."""
    f = grid.check(f)
    if sum(alpha) == 0:
        return f
    m = np.ones(grid.shape, dtype=complex)
    for i, a in enumerate(alpha):
        m = m * (1j * grid.xi_eff[i]) ** a
    out = np.fft.ifftn(np.fft.fftn(f, axes=grid.axes) * m, axes=grid.axes)
    return out.real if np.isrealobj(f) else out


def dealias(grid: TorusGrid, f: np.ndarray) -> np.ndarray:
    """Zero every mode outside the 2/3-rule band."""
    return _apply_real(grid, grid.dealias_mask.astype(float), grid.check(f))


def inner(grid: TorusGrid, f: np.ndarray, g: np.ndarray) -> float:
    """Grid quadrature of ``f g`` (trapezoid rule, spectrally exact on the torus)."""
    return float(np.sum(f * g) * grid.cell_volume)


def l2_norm(grid: TorusGrid, f: np.ndarray) -> float:
    return math.sqrt(inner(grid, f, f))


def sobolev_norm(grid: TorusGrid, f: np.ndarray, s: float) -> float:
    """Lattice-sum H^s norm with weight ``(1 + |xi|^2)^s`` and Parseval scaling."""
    c = forward_transform(grid, f)
    w = (1.0 + grid.xi_norm**2) ** s
    return math.sqrt(float(np.sum(w * np.abs(c) ** 2)) * grid.L**grid.d)


# ---------------------------------------------------------------------------
# symbols

def multi_indices(d: int, order: int):
    """All multi-indices of length ``d`` with total order ``<= order``."""
    for beta in itertools.product(range(order + 1), repeat=d):
        if sum(beta) <= order:
            yield beta


def _binom(beta, gamma) -> int:
    return math.prod(math.comb(b, g) for b, g in zip(beta, gamma))


SymbolFn = Callable[[tuple, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Symbol:
    """Symbol ``sigma(x, xi)`` sampled on grid nodes.

    ``fn(beta, xi)`` returns ``d_xi^beta sigma`` at every node for the ``K``
    frequencies in ``xi`` (shape ``(d, K)``); the result has shape
    ``grid.shape + (K,)``. Derivatives are available up to total order ``n_reg``.
    """

    grid: TorusGrid
    fn: SymbolFn
    order: float
    n_reg: int = 0
    name: str = field(default="sigma", compare=False)

    def __call__(self, xi: np.ndarray, beta: tuple | None = None) -> np.ndarray:
        beta = beta or (0,) * self.grid.d
        if sum(beta) > self.n_reg:
            raise ValueError(f"{self.name}: xi-derivative of order {sum(beta)} "
                             f"not supplied (n_reg={self.n_reg})")
        xi = np.asarray(xi, dtype=float).reshape(self.grid.d, -1)
        return self.fn(tuple(beta), xi)

    def lattice(self, beta: tuple | None = None) -> np.ndarray:
        """Values on the whole lattice, shape ``grid.shape + grid.shape``."""
        g = self.grid
        return self(g.xi.reshape(g.d, -1), beta).reshape(g.shape + g.shape)

    def __add__(self, other: Symbol) -> Symbol:
        return Symbol(self.grid, lambda b, xi: self.fn(b, xi) + other.fn(b, xi),
                      max(self.order, other.order), min(self.n_reg, other.n_reg),
                      f"({self.name}+{other.name})")

    def __neg__(self) -> Symbol:
        return Symbol(self.grid, lambda b, xi: -self.fn(b, xi), self.order,
                      self.n_reg, f"-{self.name}")

    def __sub__(self, other: Symbol) -> Symbol:
        return self + (-other)

    def __mul__(self, other) -> Symbol:
        if np.isscalar(other):
            return Symbol(self.grid, lambda b, xi: other * self.fn(b, xi), self.order,
                          self.n_reg, f"{other}*{self.name}")

        def fn(beta, xi):
            acc = 0.0
            for gamma in multi_indices(len(beta), sum(beta)):
                if all(g <= b for g, b in zip(gamma, beta)):
                    rest = tuple(b - g for b, g in zip(beta, gamma))
                    acc = acc + _binom(beta, gamma) * self.fn(gamma, xi) * other.fn(rest, xi)
            return acc

        return Symbol(self.grid, fn, self.order + other.order,
                      min(self.n_reg, other.n_reg), f"{self.name}*{other.name}")

    __rmul__ = __mul__


def _zero_like(grid: TorusGrid, xi: np.ndarray) -> np.ndarray:
    return np.zeros(grid.shape + (xi.shape[1],), dtype=complex)


def multiplication_symbol(grid: TorusGrid, m: np.ndarray, name: str = "m") -> Symbol:
    """x-only symbol: multiplication by the field ``m``."""
    m = grid.check(m)

    def fn(beta, xi):
        if sum(beta):
            return _zero_like(grid, xi)
        return np.broadcast_to(m[..., None], grid.shape + (xi.shape[1],)).astype(complex)

    return Symbol(grid, fn, 0.0, n_reg=64, name=name)


def xi_component_symbol(grid: TorusGrid, axis: int) -> Symbol:
    """The symbol ``i xi_axis`` of the derivative ``d/dx_axis``."""

    def fn(beta, xi):
        out = _zero_like(grid, xi)
        if sum(beta) == 0:
            out[...] = 1j * xi[axis]
        elif sum(beta) == 1 and beta[axis] == 1:
            out[...] = 1j
        return out

    return Symbol(grid, fn, 1.0, n_reg=64, name=f"i*xi{axis + 1}")


def multiplier_symbol(grid: TorusGrid, m: Callable[[np.ndarray], np.ndarray],
                      order: float, name: str = "m(xi)") -> Symbol:
    """x-independent symbol from a callable of the ``(d, K)`` frequency array."""

    def fn(beta, xi):
        if sum(beta):
            raise ValueError("multiplier_symbol carries no xi-derivatives")
        return np.broadcast_to(np.asarray(m(xi), dtype=complex),
                               grid.shape + (xi.shape[1],)).copy()

    return Symbol(grid, fn, order, n_reg=0, name=name)


def quantize(sym: Symbol, f: np.ndarray, chunk: int = 512) -> np.ndarray:
    """Left quantization ``Op(sigma) f(x) = sum_xi sigma(x, xi) c_xi exp(i x.xi)``.

    The sum runs over the whole lattice at every node; the Nyquist mode is
    skipped. A real input with a Hermitian symbol gives a real output; otherwise
    the complex result is returned with a :class:`QuantizationWarning`.
    """
    g = sym.grid
    f = g.check(f)
    c = forward_transform(g, f).reshape(-1)
    keep = ~g.nyquist.reshape(-1)
    xi_all = g.xi.reshape(g.d, -1)[:, keep]
    c = c[keep]
    xs = g.x.reshape(g.d, -1)
    out = np.zeros(g.size, dtype=complex)
    for lo in range(0, c.size, chunk):
        sl = slice(lo, lo + chunk)
        vals = sym(xi_all[:, sl]).reshape(g.size, -1)
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"symbol {sym.name} has non-finite samples")
        phase = np.exp(1j * (xs.T @ xi_all[:, sl]))
        out += (vals * phase) @ c[sl]
    out = out.reshape(g.shape)
    if np.isrealobj(f):
        scale = max(float(np.max(np.abs(out))), 1e-300)
        if np.max(np.abs(out.imag)) <= 1e-10 * scale:
            return out.real
        warnings.warn(f"Op({sym.name}) of a real field is complex; symbol is not "
                      "Hermitian", QuantizationWarning, stacklevel=2)
    return out


def check_xi_derivatives(sym: Symbol, rng: np.random.Generator, samples: int = 32,
                         h: float | None = None) -> float:
    """Worst mismatch between declared first xi-derivatives and centered differences.

    Frequencies are sampled at ``|xi| >= 1``; ``h`` defaults to the lattice spacing.
    Returns the maximum error normalised by ``10 h^2`` (<= 1 means consistent).
    """
    g = sym.grid
    h = h or 2 * math.pi / g.L
    lat = g.xi.reshape(g.d, -1)
    pick = lat[:, np.linalg.norm(lat, axis=0) >= 1.0 + h]
    xi = pick[:, rng.choice(pick.shape[1], size=min(samples, pick.shape[1]), replace=False)]
    worst = 0.0
    if sym.n_reg < 1:
        return worst
    for i in range(g.d):
        e = np.zeros((g.d, 1))
        e[i] = h
        fd = (sym(xi + e) - sym(xi - e)) / (2 * h)
        beta = tuple(int(j == i) for j in range(g.d))
        worst = max(worst, float(np.max(np.abs(fd - sym(xi, beta)))))
    return worst / (10 * h**2)
