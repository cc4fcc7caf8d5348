import math

import numpy as np
import pytest

from capstrip.dno import (DnoBackend, approx_extension, dn_apply, eta_symbols, principal_symbol,
                          remainder_apply, shape_derivative, sqrt_quadratic_symbol)
from capstrip.experiments import dn_symmetry, shape_derivative_error
from capstrip.geometry import StripSampling, build_coeff, flat_shape, wavy_shape
from capstrip.spectral import TorusGrid, check_xi_derivatives, l2_norm, quantize


@pytest.fixture(scope="module")
def setup1():
    g = TorusGrid(1, 64)
    s = StripSampling(g, 32)
    return g, s


@pytest.mark.parametrize("k", [1, 2, 4])
def test_flat_oracle(setup1, k):
    g, s = setup1
    be = DnoBackend(flat_shape(g), s)
    f = np.cos(k * g.x[0])
    err = l2_norm(g, be(f) - k * math.tanh(k) * f) / l2_norm(g, f)
    assert err < 5e-4


def test_deep_water_limit():
    g = TorusGrid(1, 64)
    be = DnoBackend(flat_shape(g, depth=4.0), StripSampling(g, 64))
    f = np.cos(3 * g.x[0])
    assert np.allclose(be(f), 3 * math.tanh(12) * f, atol=2e-3)


def test_constants_in_kernel(setup1, wavy1):
    g, s = setup1
    be = DnoBackend(wavy1, s)
    assert np.max(np.abs(be(np.full(g.shape, 1.7)))) < 1e-9


def test_symmetry_positivity(setup1, wavy1, rng):
    be = DnoBackend(wavy1, setup1[1])
    asym, pos = dn_symmetry(be, rng, pairs=5)
    assert asym < 1e-8
    assert pos > -1e-10


def test_orientation_makes_flat_positive(setup1):
    g, s = setup1
    be = DnoBackend(flat_shape(g), s)
    f = np.cos(g.x[0])
    assert np.sum(be(f) * f) > 0
    assert be.orientation in (-1.0, 1.0)


def test_unknown_mode(setup1, wavy1):
    with pytest.raises(ValueError):
        DnoBackend(wavy1, setup1[1], mode="taylor")


def test_principal_symbol_1d_is_abs_xi(wavy1):
    g = wavy1.grid
    xi = g.xi.reshape(1, -1)
    assert np.allclose(principal_symbol(wavy1)(xi), np.abs(xi[0])[None], atol=1e-13)


def test_principal_symbol_2d_formula(grid2, rng):
    sh = wavy_shape(grid2, 0.2)
    sym = principal_symbol(sh)
    xi = np.array([[1.0, -2.0], [3.0, 0.5]])
    ga = sh.grad_a
    for j in range(2):
        e = xi[:, j]
        ref = np.sqrt((1 + np.sum(ga**2, 0)) * (e @ e) - (e[0] * ga[0] + e[1] * ga[1]) ** 2)
        assert np.allclose(sym(xi)[..., j], ref)
    assert check_xi_derivatives(sym, rng) <= 1.0
    assert np.all(sym(np.zeros((2, 1))) == 0)


def test_symbol_backend_flat_is_abs_d(setup1):
    g, s = setup1
    be = DnoBackend(flat_shape(g), s, mode="symbol")
    f = np.cos(3 * g.x[0])
    assert np.allclose(dn_apply(be, f), 3 * f, atol=1e-10)


def test_remainder_decays_with_frequency(setup1, wavy1):
    g, s = setup1
    be = DnoBackend(wavy1, s)
    w = 1 + 0.5 * np.cos(g.x[0])
    r = [l2_norm(g, remainder_apply(wavy1, s, np.cos(k * g.x[0]) * w, be)) for k in (4, 8, 16)]
    assert r[0] > r[1] > r[2]


def test_sqrt_symbol_derivatives(grid2, rng):
    Q = np.zeros((2, 2) + grid2.shape)
    Q[0, 0] = 2 + np.cos(grid2.x[0])
    Q[1, 1] = 1.5
    Q[0, 1] = Q[1, 0] = 0.3 * np.sin(grid2.x[1])
    sym = sqrt_quadratic_symbol(grid2, Q, b=np.ones((2,) + grid2.shape), c=2.0)
    assert check_xi_derivatives(sym, rng) <= 1.0
    with pytest.raises(ValueError):
        sym(np.ones((2, 1)), (3, 0))


def test_eta_symbols_flat(setup1):
    g, s = setup1
    coeff = build_coeff(flat_shape(g), s)
    eta = eta_symbols(coeff, s.M)
    xi = np.array([[2.0, -3.0]])
    assert np.allclose(eta.plus(xi), np.abs(xi[0])[None])
    assert np.allclose(eta.minus(xi), -np.abs(xi[0])[None])
    assert eta.c_plus == pytest.approx(1.0)
    assert eta.discriminant_ratio >= 1.0 - 1e-12


def test_eta_plus_has_positive_real_part(setup1, wavy1):
    coeff = build_coeff(wavy1, setup1[1])
    for level in (0, 16, 32):
        eta = eta_symbols(coeff, level)
        assert eta.c_plus > 0
        assert eta.discriminant_ratio > 0


def test_approx_extension_flat_and_constants(setup1):
    g, s = setup1
    sh = flat_shape(g)
    f = np.cos(2 * g.x[0])
    ext = approx_extension(sh, s, f)
    assert np.array_equal(ext[-1], f)
    y = s.nodes[:, None]
    assert np.allclose(ext, np.exp(2 * y) * f, atol=1e-12)
    c = approx_extension(sh, s, np.full(g.shape, 2.0))
    assert np.allclose(c, 2.0)


def test_shape_derivative_trivial_cases(setup1, wavy1):
    g, s = setup1
    be = DnoBackend(wavy1, s)
    psi = np.cos(g.x[0])
    assert np.allclose(shape_derivative(wavy1.a, psi, np.zeros(g.shape), be), 0.0)
    out = shape_derivative(wavy1.a, np.full(g.shape, 3.0), np.cos(g.x[0]), be)
    assert np.max(np.abs(out)) < 1e-8


def test_shape_derivative_finite_difference():
    assert shape_derivative_error() <= 1e-5
    assert shape_derivative_error(surface_amplitude=0.1) <= 1e-5
