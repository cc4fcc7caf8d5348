"""Property checks and experiments shared by the command line and the test suite.

Each check returns ``PropertyResult`` rows (name, measured value, threshold,
relation, pass flag); experiments return plain tables.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dno import DnoBackend, principal_symbol, remainder_apply, shape_derivative
from .evolution import (PhysParams, WaveState, dt_max, hamiltonian, make_backend, simulate)
from .geometry import DomainShape, StripSampling, flat_shape, wavy_shape
from .linearized import (LinState, build_coeffs, check_levy, energy_functional,
                         equivalence_constants, fit_growth, flat_mode_solution, frame_residual,
                         frozen_coeffs, solve_linearized, taylor_check)
from .spectral import (TorusGrid, forward_transform, inner, l2_norm, multiplication_symbol,
                       quantize, sobolev_norm)
from .symbols import (OrderProbe, commutator, coercivity_constant, compose, lambda_a_apply,
                      lambda_symbol, measure_order, p_a_apply, poisson_bracket, sharp_product,
                      sigma_weight)

log = logging.getLogger(__name__)

_RELATIONS = {
    "<=": lambda m, t: m <= t,
    ">=": lambda m, t: m >= t,
    "<": lambda m, t: m < t,
    ">": lambda m, t: m > t,
}


@dataclass(frozen=True)
class PropertyResult:
    name: str
    measured: float
    threshold: float
    relation: str
    passed: bool

    def row(self) -> tuple:
        return (self.name, self.measured, f"{self.relation} {self.threshold!r}", self.passed)


REPORT_COLUMNS = ("name", "measured", "threshold", "pass")


def check(name: str, measured: float, relation: str, threshold: float) -> PropertyResult:
    measured = float(measured)
    ok = bool(np.isfinite(measured) and _RELATIONS[relation](measured, threshold))
    return PropertyResult(name, measured, float(threshold), relation, ok)


def random_field(grid: TorusGrid, rng: np.random.Generator, decay: float = 1.0,
                 k_low: float = 0.0) -> np.ndarray:
    """Real band-limited random field (dealiased band, optional low-mode cut)."""
    keep = grid.dealias_mask & (grid.xi_norm >= k_low) & ~grid.nyquist
    c = (rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)) * keep
    c = c / (1.0 + grid.xi_norm**2) ** (0.5 * decay)
    return np.fft.ifftn(c, axes=grid.axes).real


def mode_amplitude(grid: TorusGrid, f: np.ndarray, k: int) -> float:
    """Coefficient of ``cos(k x_1)`` in ``f``."""
    F = forward_transform(grid, f)
    idx = (k,) + (0,) * (grid.d - 1)
    return float(2.0 * F[idx].real)


# ---------------------------------------------------------------------------
# Dirichlet-Neumann operator

def dn_flat_errors(n: int = 128, M: int = 64, ks: Sequence[int] = (1, 2, 4),
                   depth: float = 1.0) -> dict[int, float]:
    grid = TorusGrid(1, n)
    be = DnoBackend(flat_shape(grid, depth=depth), StripSampling(grid, M))
    out = {}
    for k in ks:
        f = np.cos(k * grid.x[0])
        ref = k * math.tanh(k * depth) * f
        out[k] = l2_norm(grid, be.apply(f) - ref) / l2_norm(grid, f)
    return out


def dn_vertical_slope(n: int = 128, Ms: Sequence[int] = (16, 32, 64), k: int = 2) -> float:
    """Least-squares slope of ``-log(error)`` against ``log M`` on the flat strip."""
    errs = [dn_flat_errors(n, M, (k,))[k] for M in Ms]
    return float(-np.polyfit(np.log(Ms), np.log(errs), 1)[0])


def dn_symmetry(backend: DnoBackend, rng: np.random.Generator, pairs: int = 20):
    """Worst normalised asymmetry and smallest ``(Gf, f)`` over random pairs."""
    grid = backend.grid
    asym, positivity = 0.0, math.inf
    for _ in range(pairs):
        f, g = random_field(grid, rng), random_field(grid, rng)
        Gf, Gg = backend.apply(f), backend.apply(g)
        scale = sobolev_norm(grid, f, 1.0) * sobolev_norm(grid, g, 1.0)
        asym = max(asym, abs(inner(grid, Gf, g) - inner(grid, f, Gg)) / scale)
        positivity = min(positivity, inner(grid, Gf, f), inner(grid, Gg, g))
    return asym, positivity


def reference_shapes(d: int, n: int, M: int):
    """The two non-flat reference geometries used by the order checks."""
    grid = TorusGrid(d, n)
    return grid, StripSampling(grid, M), [
        wavy_shape(grid, 0.15),
        wavy_shape(grid, 0.1, bottom_amplitude=0.2, phase=0.7),
    ]


def dno_properties(d: int = 1, n: int = 128, M: int = 64, seed: int = 0,
                   shapes: Sequence[DomainShape] | None = None,
                   frequencies: Sequence[float] = (4, 8, 16, 32)) -> list[PropertyResult]:
    """DN oracle, symmetry, positivity and remainder order on the given shapes."""
    rng = np.random.default_rng(seed)
    out = []
    if d == 1:
        errs = dn_flat_errors(n, M)
        for k, e in errs.items():
            out.append(check(f"dn_flat_error_k{k}", e, "<=", 1e-4))
    grid, sampling, default = reference_shapes(d, n, M)
    shapes = list(default) if shapes is None else list(shapes)
    for i, sh in enumerate([flat_shape(grid)] + shapes):
        be = DnoBackend(sh, sampling)
        asym, pos = dn_symmetry(be, rng)
        out.append(check(f"dn_asymmetry_shape{i}", asym, "<=", 1e-8))
        out.append(check(f"dn_positivity_shape{i}", pos, ">=", -1e-10))
        if i == 0:
            continue
        probe = OrderProbe(grid, tuple(frequencies))
        out.append(check(f"dn_order_shape{i}_low", measure_order(be.apply, probe), ">=", 0.9))
        out.append(check(f"dn_order_shape{i}_high", probe.measured_slope, "<=", 1.1))
        r = measure_order(lambda f: remainder_apply(sh, sampling, f, be), probe)
        out.append(check(f"remainder_order_shape{i}", r, "<=", 0.3))
        if d == 1:
            sym = principal_symbol(sh)
            xi = grid.xi.reshape(1, -1)
            dev = float(np.max(np.abs(sym(xi) - np.abs(xi[0])[None])))
            out.append(check(f"principal_symbol_is_abs_xi_shape{i}", dev, "<=", 1e-12))
    return out


# ---------------------------------------------------------------------------
# symbol calculus

def bracket_cancellation(grid: TorusGrid, a: np.ndarray, samples: int = 256) -> float:
    """``max |{s g s, lambda}_1| / max |s g s lambda|`` over lattice frequencies."""
    shape = DomainShape.flat_bottom(grid, a)
    ms = multiplication_symbol(grid, sigma_weight(grid, a), "sigma")
    sgs = ms * principal_symbol(shape) * ms
    lam = lambda_symbol(grid, a)
    xi = grid.xi.reshape(grid.d, -1)
    xi = xi[:, np.any(xi != 0, axis=0)][:, :samples]
    br = poisson_bracket(sgs, lam, 1)(xi)
    ref = np.max(np.abs(sgs(xi) * lam(xi)))
    return float(np.max(np.abs(br)) / ref)


def order_properties(d: int = 2, n: int = 48, M: int = 32,
                     frequencies: Sequence[float] = (2, 4, 8, 16),
                     shapes: Sequence[DomainShape] | None = None,
                     seed: int = 0, composition: bool = False) -> list[PropertyResult]:
    grid, sampling, default = reference_shapes(d, n, M)
    shapes = list(default) if shapes is None else list(shapes)
    rng = np.random.default_rng(seed)
    out = []
    for i, sh in enumerate(shapes, 1):
        a = sh.a
        be = DnoBackend(sh, sampling)
        sig = sigma_weight(grid, a)

        def sgs(f, be=be, sig=sig):
            return sig * be.apply(sig * f)

        def lam(f, a=a):
            return lambda_a_apply(grid, a, f)

        probe = OrderProbe(grid, tuple(frequencies))
        out.append(check(f"commutator_k1_shape{i}", measure_order(commutator(sgs, lam), probe),
                         "<=", 1.2))
        out.append(check(f"commutator_k2_shape{i}",
                         measure_order(commutator(sgs, compose(lam, lam)), probe), "<=", 3.2))
        out.append(check(f"p_plus_lambda_order_shape{i}",
                         measure_order(lambda f: p_a_apply(grid, a, f) + lam(f), probe), "<=", 1.15))
        out.append(check(f"lambda_coercivity_shape{i}", coercivity_constant(grid, a, rng), ">", 1e-3))
        if d == 2:
            out.append(check(f"bracket_cancellation_shape{i}", bracket_cancellation(grid, a),
                             "<=", 1e-10))
        if composition:
            ms = multiplication_symbol(grid, sig, "sigma")
            s1 = ms * principal_symbol(sh) * ms
            s2 = lambda_symbol(grid, a)
            s12 = sharp_product(s1, s2, 1)
            defect = measure_order(lambda f: quantize(s1, quantize(s2, f)) - quantize(s12, f), probe)
            out.append(check(f"composition_defect_shape{i}", defect, "<=", 1.2))
    return out


# ---------------------------------------------------------------------------
# nonlinear evolution

def linear_period(k: float, g: float = 1.0, kappa: float = 0.0, depth: float = 1.0) -> float:
    return 2 * math.pi / math.sqrt((g * k + kappa * k**3) * math.tanh(k * depth))


def single_mode(grid: TorusGrid, k: int, amplitude: float) -> WaveState:
    c = np.cos(k * 2 * math.pi / grid.L * grid.x[0])
    return WaveState(amplitude * c, np.zeros(grid.shape))


@dataclass(frozen=True)
class ConservationReport:
    hamiltonian_drift: float
    mass_drift: float
    steps: int


def conservation_run(amplitude: float, periods: float = 10, steps_per_period: int = 150,
                     n: int = 128, M: int = 64, sample_every: int = 25) -> ConservationReport:
    """Relative Hamiltonian drift (max over samples) and absolute mass drift."""
    grid = TorusGrid(1, n)
    params = PhysParams(StripSampling(grid, M), -1.0)
    U0 = single_mode(grid, 1, amplitude)
    T = periods * linear_period(1.0)
    H0 = hamiltonian(U0, params)
    m0 = float(np.sum(U0.zeta) * grid.cell_volume)
    worst = [0.0, 0.0]
    count = [0]

    def probe(U):
        count[0] += 1
        worst[1] = max(worst[1], abs(float(np.sum(U.zeta) * grid.cell_volume) - m0))
        if count[0] % sample_every == 0:
            worst[0] = max(worst[0], abs(hamiltonian(U, params) - H0) / H0)

    tr = simulate(U0, params, T, T / (periods * steps_per_period), snapshot_stride=10**9,
                  with_diagnostics=False, callback=probe)
    if tr.aborted:
        raise RuntimeError(tr.reason)
    worst[0] = max(worst[0], abs(hamiltonian(tr.final, params) - H0) / H0)
    return ConservationReport(worst[0], worst[1], count[0])


def rk4_self_convergence(amplitude: float = 0.05, T: float = 1.0, dts=(0.08, 0.04, 0.02),
                         n: int = 64, M: int = 32) -> float:
    """Observed order from successive differences of runs at halving ``dt``."""
    grid = TorusGrid(1, n)
    params = PhysParams(StripSampling(grid, M), -1.0)
    U0 = single_mode(grid, 1, amplitude)
    U0 = WaveState(U0.zeta + 0.3 * amplitude * np.sin(2 * grid.x[0]), 0.5 * amplitude * np.sin(grid.x[0]))
    finals = [simulate(U0, params, T, dt, snapshot_stride=10**9, with_diagnostics=False).final
              for dt in dts]
    diffs = [l2_norm(grid, a.zeta - b.zeta) + l2_norm(grid, a.psi - b.psi)
             for a, b in zip(finals[:-1], finals[1:])]
    ratios = [dts[i] / dts[i + 1] for i in range(len(diffs) - 1)]
    return float(min(math.log(diffs[i] / diffs[i + 1]) / math.log(ratios[i])
                     for i in range(len(ratios))))


def zero_crossing_frequency(times: np.ndarray, signal: np.ndarray) -> float:
    """Angular frequency from a straight-line fit to the zero-crossing times."""
    s = np.asarray(signal)
    t = np.asarray(times)
    idx = np.nonzero(np.signbit(s[:-1]) != np.signbit(s[1:]))[0]
    crossings = [t[i] - s[i] * (t[i + 1] - t[i]) / (s[i + 1] - s[i]) for i in idx]
    if len(crossings) < 4:
        raise ValueError(f"frequency fit needs 4 zero crossings, found {len(crossings)}")
    half_period = np.polyfit(np.arange(len(crossings)), crossings, 1)[0]
    return float(math.pi / half_period)


DISPERSION_COLUMNS = ("k", "kappa", "omega_measured", "omega_predicted", "rel_error")


def dispersion_experiment(ks=(1, 2, 3), kappas=(0.0, 0.1), n: int = 32, M: int = 32,
                          amplitude: float = 1e-4, periods: float = 2.5, g: float = 1.0,
                          depth: float = 1.0, L: float = 2 * math.pi,
                          backend: str = "exact") -> list[tuple]:
    grid = TorusGrid(1, n, L)
    rows = []
    for kappa in kappas:
        params = PhysParams(StripSampling(grid, M), -depth, g=g, kappa=kappa, backend=backend)
        for k in ks:
            kk = k * 2 * math.pi / L
            omega = 2 * math.pi / linear_period(kk, g, kappa, depth)
            T = periods * 2 * math.pi / omega
            dt = min(dt_max(params), T / (40 * periods))
            samples = ([], [])

            def record(U, samples=samples, k=k):
                samples[0].append(U.t)
                samples[1].append(mode_amplitude(grid, U.zeta, k))

            U0 = single_mode(grid, k, amplitude)
            record(U0)
            tr = simulate(U0, params, T, dt, snapshot_stride=10**9, with_diagnostics=False,
                          callback=record)
            if tr.aborted:
                raise RuntimeError(tr.reason)
            w = zero_crossing_frequency(np.array(samples[0]), np.array(samples[1]))
            rows.append((k, kappa, w, omega, abs(w - omega) / omega))
    return rows


LIMIT_COLUMNS = ("kappa", "delta")


def limit_experiment(kappa0: float = 1e-2, amplitude: float = 1e-3, T: float = 2.0,
                     n: int = 64, M: int = 32, factors=(1, 4, 16)) -> tuple[list[tuple], dict]:
    """``delta(kappa) = |zeta^k - zeta^0|(T) + |psi^k - psi^0|(T)`` for ``kappa0 / factors``
    against ``kappa = 0``; every member uses the same ``dt``."""
    grid = TorusGrid(1, n)
    sampling = StripSampling(grid, M)
    base = PhysParams(sampling, -1.0)
    kappas = [kappa0 / f for f in factors]
    dt = min(dt_max(base.with_kappa(max(kappas + [0.0]))), 0.05)
    U0 = WaveState(amplitude * np.cos(grid.x[0]), amplitude * 0.5 * np.sin(2 * grid.x[0]))
    finals = {}
    for kappa in [0.0] + kappas:
        tr = simulate(U0, base.with_kappa(kappa), T, dt, snapshot_stride=10**9, with_diagnostics=False)
        if tr.aborted:
            return [(k, l2_norm(grid, finals[k].zeta - finals[0.0].zeta)
                     + l2_norm(grid, finals[k].psi - finals[0.0].psi)) for k in finals], \
                {"aborted": True, "reason": tr.reason}
        finals[kappa] = tr.final
    ref = finals[0.0]
    rows = [(k, l2_norm(grid, finals[k].zeta - ref.zeta) + l2_norm(grid, finals[k].psi - ref.psi))
            for k in kappas]
    deltas = [r[1] for r in rows]
    positive = [r for r in rows if r[0] > 0 and r[1] > 0]
    slope = (float(np.polyfit(np.log([r[0] for r in positive]), np.log([r[1] for r in positive]), 1)[0])
             if len(positive) >= 2 else float("nan"))
    summary = {
        "aborted": False,
        "monotone": bool(all(a > b for a, b in zip(deltas[:-1], deltas[1:]))),
        "ratio": deltas[-1] / deltas[0] if deltas[0] > 0 else float("nan"),
        "slope": slope,
        "dt": dt,
    }
    return rows, summary


def limit_properties(rows, summary) -> list[PropertyResult]:
    return [
        check("limit_monotone_decrease", float(summary["monotone"]), ">=", 1.0),
        check("limit_ratio_smallest_over_largest", summary["ratio"], "<=", 0.5),
        check("limit_loglog_slope_DERIVED", summary["slope"], ">=", 0.9),
    ]


# ---------------------------------------------------------------------------
# linearized system

def frozen_mode_error(n: int = 16, M: int = 512, k: int = 1, g: float = 1.0, kappa: float = 0.0,
                      steps: int = 400) -> float:
    """Max error of the frozen flat single-mode solution after one period."""
    grid = TorusGrid(1, n)
    params = PhysParams(StripSampling(grid, M), -1.0, g=g, kappa=kappa)
    coeffs = frozen_coeffs(WaveState(np.zeros(grid.shape), np.zeros(grid.shape)), params)
    T = linear_period(k, g, kappa)
    V0 = LinState(*flat_mode_solution(grid, k, g, kappa, 1.0, 0.0))
    V = solve_linearized(V0, coeffs, T, T / steps)[-1]
    e1, e2 = flat_mode_solution(grid, k, g, kappa, 1.0, T)
    return float(max(np.max(np.abs(V.V1 - e1)), np.max(np.abs(V.V2 - e2))))


def _reference_frames(grid, params, amplitude, T, dt):
    U0 = WaveState(amplitude * np.cos(grid.x[0]), 0.5 * amplitude * np.sin(grid.x[0]))
    tr = simulate(U0, params, T, dt, with_diagnostics=False)
    if tr.aborted:
        raise RuntimeError(tr.reason)
    return tr.snapshots


def linearization_consistency(eps_list=(1e-2, 5e-3, 2.5e-3), amplitude: float = 0.05,
                              T: float = 1.0, dt: float = 0.05, n: int = 64,
                              M: int = 64) -> tuple[float, list[float]]:
    """Slope in ``eps`` of ``|Phi(U + eps dU) - Phi(U) - eps dU_lin|`` at time ``T``."""
    grid = TorusGrid(1, n)
    params = PhysParams(StripSampling(grid, M), -1.0)
    frames = _reference_frames(grid, params, amplitude, T, dt / 2)
    coeffs = build_coeffs(frames, params)
    x = grid.x[0]
    dz, dp = 0.5 * np.cos(2 * x) + 0.2 * np.sin(3 * x), 0.4 * np.sin(2 * x)
    Z0 = coeffs.Z[0]
    lin = solve_linearized(LinState(dz, dp - Z0 * dz), coeffs, T, dt)[-1]
    lz, lp = lin.V1, lin.V2 + coeffs.Z[-1] * lin.V1
    base = frames[0]
    ref = simulate(base, params, T, dt, snapshot_stride=10**9, with_diagnostics=False).final
    errs = []
    for eps in eps_list:
        U = WaveState(base.zeta + eps * dz, base.psi + eps * dp)
        fin = simulate(U, params, T, dt, snapshot_stride=10**9, with_diagnostics=False).final
        errs.append(l2_norm(grid, fin.zeta - ref.zeta - eps * lz)
                    + l2_norm(grid, fin.psi - ref.psi - eps * lp))
    slope = float(np.polyfit(np.log(eps_list), np.log(errs), 1)[0])
    return slope, errs


ENERGY_COLUMNS = ("t", "E0", "E1")


def energy_run(amplitude: float = 0.05, T: float = 2.0, dt: float = 0.05, n: int = 64,
               M: int = 32, kappa: float = 0.0, seed: int = 0):
    """E_0, E_1 along a source-free linearized run, the growth fit and the
    equivalence constants."""
    grid = TorusGrid(1, n)
    params = PhysParams(StripSampling(grid, M), -1.0, kappa=kappa)
    dt = min(dt, dt_max(params))
    frames = _reference_frames(grid, params, amplitude, T, dt / 2)
    coeffs = build_coeffs(frames, params)
    rng = np.random.default_rng(seed)
    V0 = LinState(random_field(grid, rng, 2.0), random_field(grid, rng, 1.5))
    traj = solve_linearized(V0, coeffs, T, dt)
    rows = [(V.t, energy_functional(V, coeffs, 0), energy_functional(V, coeffs, 1)) for V in traj]
    fit = fit_growth([r[0] for r in rows], [r[1] for r in rows])
    c1, c2 = equivalence_constants(coeffs, rng)
    return rows, fit, (c1, c2), check_levy(coeffs)


# ---------------------------------------------------------------------------
# Taylor coefficient

TAYLOR_COLUMNS = ("x", "a_formula", "a_pressure")


def taylor_comparison(amplitude: float = 0.02, kappa: float = 0.0, n: int = 64, M: int = 64,
                      dt: float = 0.02, frames: int = 11):
    """Taylor coefficient two ways at the middle frame of a short solving run.

    Returns the table, the max difference, and a discretisation-error estimate
    (difference of the pressure route at ``M`` and ``M/2``)."""
    grid = TorusGrid(1, n)
    params = PhysParams(StripSampling(grid, M), -1.0, kappa=kappa)
    dt = min(dt, dt_max(params))
    U0 = WaveState(amplitude * np.cos(grid.x[0]), np.zeros(grid.shape))
    tr = simulate(U0, params, (frames - 1) * dt, dt, with_diagnostics=False)
    if tr.aborted:
        raise RuntimeError(tr.reason)
    snaps = tr.snapshots
    coeffs = build_coeffs(snaps, params)
    i = len(snaps) // 2
    res = frame_residual(snaps, i, params)
    fine = taylor_check(snaps[i], params, res)
    coarse = taylor_check(snaps[i], PhysParams(StripSampling(grid, M // 2), -1.0, kappa=kappa), res)
    a_formula = coeffs.a_bar[i]
    diff = float(np.max(np.abs(fine.a_pressure - a_formula)))
    disc = float(np.max(np.abs(fine.a_pressure - coarse.a_pressure)))
    table = list(zip(grid.x[0], a_formula, fine.a_pressure))
    return table, diff, disc, float(np.min(fine.a_pressure))


def shape_derivative_error(n: int = 16, M: int = 256, h: float = 1e-4,
                           surface_amplitude: float = 0.0) -> float:
    """Relative gap between the shape-derivative formula and a centred difference
    for ``psi = zeta_dot = cos x`` on the surface ``amplitude * cos(x)``.

    The data are smooth and band-limited so products do not alias; the gap is the
    vertical discretisation error (second order in ``1/M``)."""
    grid = TorusGrid(1, n)
    params = PhysParams(StripSampling(grid, M), -1.0, tol=1e-13)
    x = grid.x[0]
    zeta = surface_amplitude * np.cos(x)
    psi = zdot = np.cos(x)
    formula = shape_derivative(zeta, psi, zdot, make_backend(zeta, params))
    fd = (make_backend(zeta + h * zdot, params).apply(psi)
          - make_backend(zeta - h * zdot, params).apply(psi)) / (2 * h)
    return l2_norm(grid, formula - fd) / l2_norm(grid, formula)


def selftest(seed: int = 0) -> list[PropertyResult]:
    """Quick aggregate of module oracles on flat and mildly wavy shapes."""
    out = []
    for k, e in dn_flat_errors(64, 32, (1, 2)).items():
        out.append(check(f"dn_flat_error_k{k}_M32", e, "<=", 1e-3))
    grid = TorusGrid(1, 64)
    sampling = StripSampling(grid, 32)
    rng = np.random.default_rng(seed)
    asym, pos = dn_symmetry(DnoBackend(flat_shape(grid), sampling), rng, 5)
    out.append(check("dn_asymmetry_flat", asym, "<=", 1e-8))
    out.append(check("dn_positivity_flat", pos, ">=", -1e-10))
    flat = np.zeros(grid.shape)
    f = np.cos(grid.x[0])
    out.append(check("lambda_flat_is_minus_laplacian",
                     np.max(np.abs(lambda_a_apply(grid, flat, f) - f)), "<=", 1e-12))
    out.append(check("p_flat_is_laplacian", np.max(np.abs(p_a_apply(grid, flat, f) + f)), "<=", 1e-12))
    params = PhysParams(sampling, -1.0, g=1.0, kappa=1.0)
    coeffs = frozen_coeffs(WaveState(flat, flat), params)
    out.append(check("levy_flat_equals_g", abs(check_levy(coeffs)[0] - 1.0), "<=", 0.0))
    e0 = energy_functional(LinState(f, flat), coeffs, 0)
    out.append(check("energy_flat_oracle", abs(e0 - 2 * math.pi) / (2 * math.pi), "<=", 1e-10))
    tc = taylor_check(WaveState(flat, flat), params.with_kappa(0.0))
    out.append(check("taylor_flat_equals_g", np.max(np.abs(tc.a_pressure - 1.0)), "<=", 1e-10))
    U = WaveState(1e-4 * f, flat)
    tr = simulate(U, params.with_kappa(0.0), 1.0, 0.05)
    H = tr.column("H")
    out.append(check("short_run_hamiltonian_drift", abs(H[-1] - H[0]) / H[0], "<=", 1e-6))
    return out
