import math

import numpy as np
import pytest

from capstrip.elliptic import (BvpProblem, StripOperator, conormal_trace, solve_bvp,
                               vertical_derivative)
from capstrip.geometry import StripSampling, build_coeff, flat_shape, strip_map, wavy_shape
from capstrip.spectral import TorusGrid


@pytest.fixture(scope="module")
def wavy_op():
    g = TorusGrid(1, 32)
    s = StripSampling(g, 16)
    return StripOperator(build_coeff(wavy_shape(g, 0.15, bottom_amplitude=0.2), s))


def test_operator_symmetric(wavy_op, rng):
    s = wavy_op.sampling
    u, v = rng.standard_normal(s.shape), rng.standard_normal(s.shape)
    assert np.sum(wavy_op.apply(u) * v) == pytest.approx(np.sum(u * wavy_op.apply(v)), rel=1e-12)
    assert wavy_op.energy(u, v) == pytest.approx(np.sum(wavy_op.apply(u) * v), rel=1e-12)
    assert wavy_op.energy(u, u) > 0


def test_constants_in_kernel(wavy_op):
    u = np.full(wavy_op.sampling.shape, 2.5)
    assert np.max(np.abs(wavy_op.apply(u))) < 1e-12


def test_vertical_coordinate_is_discrete_solution(wavy_op):
    # u = y is harmonic with unit upward conormal flux on any bottom
    shape = wavy_op.coeff.shape
    exact = strip_map(shape, wavy_op.sampling)
    sol = wavy_op.solve(shape.a, g_bottom=np.ones(shape.grid.shape), tol=1e-12)
    assert np.max(np.abs(sol.u - exact)) < 1e-9
    assert np.allclose(wavy_op.top_flux(sol.u), 1.0, atol=1e-8)


def test_quadratic_source_is_exact():
    g = TorusGrid(1, 16)
    s = StripSampling(g, 10)
    coeff = build_coeff(flat_shape(g), s)
    y = s.nodes[:, None] * np.ones(g.shape)
    sol = solve_bvp(BvpProblem(coeff, np.zeros(g.shape), h=-np.ones(s.shape),
                               g_bottom=-np.ones(g.shape)), tol=1e-12)
    assert np.max(np.abs(sol.u - 0.5 * y**2)) < 1e-10


def test_flat_harmonic_extension():
    g = TorusGrid(1, 32)
    s = StripSampling(g, 64)
    op = StripOperator(build_coeff(flat_shape(g), s))
    x = g.x[0]
    y = s.nodes[:, None]
    sol = op.solve(np.cos(2 * x), tol=1e-12)
    exact = np.cosh(2 * (y + 1)) / math.cosh(2) * np.cos(2 * x)
    assert np.max(np.abs(sol.u - exact)) < 1e-4
    assert sol.residual <= 1e-11
    assert sol.iterations < 30


def test_tolerance_validation(wavy_op):
    with pytest.raises(ValueError):
        wavy_op.solve(np.zeros(wavy_op.grid.shape), tol=1e-3)


def test_zero_data_returns_zero(wavy_op):
    sol = wavy_op.solve(np.zeros(wavy_op.grid.shape))
    assert np.all(sol.u == 0) and sol.iterations == 0


def test_conormal_trace_flat():
    g = TorusGrid(1, 32)
    s = StripSampling(g, 64)
    coeff = build_coeff(flat_shape(g), s)
    y = s.nodes[:, None]
    u = np.cosh(2 * (y + 1)) * np.cos(2 * g.x[0])
    top = conormal_trace(u, coeff, "top")
    assert np.allclose(top, 2 * np.sinh(2) * np.cos(2 * g.x[0]), atol=5e-3)
    assert np.max(np.abs(conormal_trace(u, coeff, "bottom"))) < 5e-3
    with pytest.raises(ValueError):
        conormal_trace(u, coeff, "side")


def test_vertical_derivative_exact_on_quadratics():
    y = np.linspace(-1, 0, 9)[:, None]
    assert np.allclose(vertical_derivative(y**2, 1 / 8), 2 * y)
