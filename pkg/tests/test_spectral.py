import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from capstrip.spectral import (QuantizationWarning, Symbol, TorusGrid, check_xi_derivatives,
                               dealias, derivative, divergence, forward_transform, fourier_multiplier,
                               gradient, inner, inverse_transform, l2_norm, laplacian,
                               multi_indices, multiplication_symbol, multiplier_symbol, quantize,
                               sobolev_norm, xi_component_symbol)


def test_grid_validation():
    with pytest.raises(ValueError):
        TorusGrid(3, 16)
    with pytest.raises(ValueError):
        TorusGrid(1, 15)
    with pytest.raises(ValueError):
        TorusGrid(1, 4)
    with pytest.raises(ValueError):
        TorusGrid(1, 16, L=0.0)


def test_grid_geometry():
    g = TorusGrid(2, 16, L=4.0)
    assert g.shape == (16, 16)
    assert g.x.shape == (2, 16, 16)
    assert g.dx == pytest.approx(0.25)
    assert g.xi[0, 1, 0] == pytest.approx(2 * math.pi / 4.0)
    assert not np.any(g.xi_eff[:, g.nyquist])
    assert g.k_cut == pytest.approx(5 * 2 * math.pi / 4.0)


def test_transform_roundtrip(grid1, rng):
    f = rng.standard_normal(grid1.shape)
    assert np.allclose(inverse_transform(grid1, forward_transform(grid1, f)), f, atol=1e-13)


def test_constant_has_only_zero_mode(grid1):
    c = forward_transform(grid1, np.full(grid1.shape, 3.0))
    assert c[0] == pytest.approx(3.0)
    assert np.max(np.abs(c[1:])) < 1e-14


def test_gradient_of_trig(grid2):
    x, y = grid2.x
    f = np.sin(2 * x) * np.cos(3 * y)
    gx, gy = gradient(grid2, f)
    assert np.allclose(gx, 2 * np.cos(2 * x) * np.cos(3 * y), atol=1e-12)
    assert np.allclose(gy, -3 * np.sin(2 * x) * np.sin(3 * y), atol=1e-12)


def test_divergence_and_laplacian(grid2):
    x, y = grid2.x
    f = np.cos(x + 2 * y)
    assert np.allclose(divergence(grid2, gradient(grid2, f)), laplacian(grid2, f), atol=1e-11)
    assert np.allclose(laplacian(grid2, f), -5 * f, atol=1e-11)


def test_gradient_keeps_batch_axes(grid1):
    f = np.stack([np.sin(grid1.x[0]), np.cos(grid1.x[0])])
    g = gradient(grid1, f)
    assert g.shape == (1, 2, 64)
    assert np.allclose(g[0, 0], np.cos(grid1.x[0]), atol=1e-12)


def test_nyquist_is_not_differentiated():
    g = TorusGrid(1, 16)
    f = np.cos(8 * g.x[0])
    assert np.max(np.abs(gradient(g, f))) < 1e-12


def test_mixed_derivative(grid2):
    x, y = grid2.x
    f = np.sin(x) * np.sin(2 * y)
    assert np.allclose(derivative(grid2, f, (1, 1)), 2 * np.cos(x) * np.cos(2 * y), atol=1e-11)
    assert derivative(grid2, f, (0, 0)) is not None


def test_fourier_multiplier_real_and_complex(grid1):
    f = np.cos(3 * grid1.x[0])
    out = fourier_multiplier(grid1, lambda xi: np.abs(xi[0]), f)
    assert np.isrealobj(out)
    assert np.allclose(out, 3 * f, atol=1e-12)
    out = fourier_multiplier(grid1, lambda xi: (xi[0] > 0).astype(float), f)
    assert np.iscomplexobj(out)


def test_dealias_removes_high_modes():
    g = TorusGrid(1, 24)
    f = np.cos(2 * g.x[0]) + np.cos(10 * g.x[0])
    assert np.allclose(dealias(g, f), np.cos(2 * g.x[0]), atol=1e-13)


def test_norms(grid1):
    f = np.cos(2 * grid1.x[0])
    assert l2_norm(grid1, f) == pytest.approx(math.sqrt(math.pi))
    assert sobolev_norm(grid1, f, 0.0) == pytest.approx(math.sqrt(math.pi))
    assert sobolev_norm(grid1, f, 1.0) == pytest.approx(math.sqrt(5 * math.pi))
    assert inner(grid1, f, np.sin(2 * grid1.x[0])) == pytest.approx(0.0, abs=1e-13)


def test_multi_indices():
    assert sorted(multi_indices(2, 1)) == [(0, 0), (0, 1), (1, 0)]
    assert len(list(multi_indices(2, 2))) == 6


def test_quantize_multiplication_and_derivative(grid1):
    x = grid1.x[0]
    m = 1 + 0.3 * np.cos(x)
    f = np.sin(3 * x)
    assert np.allclose(quantize(multiplication_symbol(grid1, m), f), m * f, atol=1e-12)
    assert np.allclose(quantize(xi_component_symbol(grid1, 0), f), 3 * np.cos(3 * x), atol=1e-11)


def test_quantize_is_left_quantization(grid1):
    # Op(i xi m(x)) = m d/dx, not d/dx m
    x = grid1.x[0]
    m = np.cos(x)
    sym = multiplication_symbol(grid1, m) * xi_component_symbol(grid1, 0)
    f = np.sin(2 * x)
    assert np.allclose(quantize(sym, f), m * 2 * np.cos(2 * x), atol=1e-11)


def test_quantize_multiplier_matches_fft(grid2, rng):
    f = rng.standard_normal(grid2.shape)
    sym = multiplier_symbol(grid2, lambda xi: np.sqrt(np.sum(xi**2, axis=0)), 1.0)
    ref = fourier_multiplier(grid2, lambda xi: np.sqrt(np.sum(xi**2, axis=0)), f)
    assert np.allclose(quantize(sym, f), ref, atol=1e-10)


def test_quantize_warns_on_non_hermitian_symbol(grid1):
    sym = multiplier_symbol(grid1, lambda xi: (xi[0] > 0).astype(float), 0.0)
    with pytest.warns(QuantizationWarning):
        out = quantize(sym, np.cos(grid1.x[0]))
    assert np.iscomplexobj(out)


def test_symbol_algebra(grid1):
    x = grid1.x[0]
    a = multiplication_symbol(grid1, np.cos(x))
    b = xi_component_symbol(grid1, 0)
    xi = np.array([[2.0, -1.0]])
    assert np.allclose((a + b)(xi), a(xi) + b(xi))
    assert np.allclose((a - b)(xi), a(xi) - b(xi))
    assert np.allclose((2.0 * b)(xi), 2 * b(xi))
    prod = a * b
    assert np.allclose(prod(xi, (1,)), a(xi) * 1j)
    with pytest.raises(ValueError):
        multiplier_symbol(grid1, lambda xi: xi[0], 1.0)(xi, (1,))


def test_check_xi_derivatives_detects_inconsistency(grid1, rng):
    good = xi_component_symbol(grid1, 0) * xi_component_symbol(grid1, 0)
    assert check_xi_derivatives(good, rng) <= 1.0

    def fn(beta, xi):
        base = np.broadcast_to(xi[0] ** 2, grid1.shape + (xi.shape[1],)).astype(complex)
        return base if sum(beta) == 0 else 5 * base

    bad = Symbol(grid1, fn, 2.0, n_reg=1)
    assert check_xi_derivatives(bad, rng) > 1.0


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=6, max_size=6))
def test_gradient_matches_trig_polynomial(coeffs):
    g = TorusGrid(1, 32)
    x = g.x[0]
    f = sum(c * np.cos((k + 1) * x) for k, c in enumerate(coeffs[:3])) \
        + sum(c * np.sin((k + 1) * x) for k, c in enumerate(coeffs[3:]))
    df = sum(-c * (k + 1) * np.sin((k + 1) * x) for k, c in enumerate(coeffs[:3])) \
        + sum(c * (k + 1) * np.cos((k + 1) * x) for k, c in enumerate(coeffs[3:]))
    assert np.allclose(gradient(g, f)[0], df, atol=1e-11)


@settings(max_examples=20, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_quantize_is_linear(alpha, beta):
    g = TorusGrid(1, 16)
    x = g.x[0]
    sym = multiplication_symbol(g, 1 + 0.5 * np.sin(x)) * xi_component_symbol(g, 0)
    f1, f2 = np.cos(x), np.sin(3 * x)
    lhs = quantize(sym, alpha * f1 + beta * f2)
    rhs = alpha * quantize(sym, f1) + beta * quantize(sym, f2)
    assert np.allclose(lhs, rhs, atol=1e-11)
