import math

import numpy as np
import pytest

from capstrip.spectral import (TorusGrid, derivative, gradient, l2_norm, laplacian,
                               multiplication_symbol, multiplier_symbol, quantize,
                               xi_component_symbol)
from capstrip.symbols import (OrderProbe, coercivity_constant, commutator, compose,
                              lambda_a_apply, lambda_symbol, measure_order, p_a_apply,
                              poisson_bracket, sharp_product, sigma_weight)


@pytest.fixture(scope="module")
def g1():
    return TorusGrid(1, 32)


def test_lambda_flat_is_minus_laplacian(grid2, rng):
    f = np.cos(grid2.x[0] + 2 * grid2.x[1]) + 0.3 * np.sin(3 * grid2.x[1])
    assert np.allclose(lambda_a_apply(grid2, np.zeros(grid2.shape), f), -laplacian(grid2, f),
                       atol=1e-11)


def test_lambda_1d_reduction(grid1):
    a = 0.3 * np.sin(grid1.x[0])
    f = np.cos(2 * grid1.x[0])
    ap = gradient(grid1, a)[0]
    ref = -derivative(grid1, f, (2,)) / (1 + ap**2)
    assert np.allclose(lambda_a_apply(grid1, a, f), ref, atol=1e-11)


def test_sigma_constant_slope(grid2):
    s = sigma_weight(grid2, grad_a=[3.0, 4.0])
    assert np.allclose(s, 26.0 ** -0.25)
    assert np.allclose(sigma_weight(grid2, np.zeros(grid2.shape)), 1.0)


def test_p_flat_is_laplacian(grid2):
    f = np.sin(grid2.x[0]) * np.cos(2 * grid2.x[1])
    assert np.allclose(p_a_apply(grid2, np.zeros(grid2.shape), f), laplacian(grid2, f), atol=1e-11)
    assert np.allclose(p_a_apply(grid2, np.zeros(grid2.shape), np.ones(grid2.shape)), 0.0)


def test_lambda_symbol_matches_operator(g1):
    a = 0.2 * np.cos(g1.x[0])
    f = np.cos(3 * g1.x[0]) + 0.5 * np.sin(g1.x[0])
    assert np.allclose(quantize(lambda_symbol(g1, a), f), lambda_a_apply(g1, a, f), atol=1e-10)


def test_sharp_zero_is_pointwise_product(g1):
    m1 = multiplication_symbol(g1, 1 + 0.5 * np.cos(g1.x[0]))
    s2 = xi_component_symbol(g1, 0)
    xi = np.array([[1.0, 2.0, -3.0]])
    assert np.allclose(sharp_product(m1, s2, 0)(xi), (m1 * s2)(xi))


def test_sharp_leibniz_example(g1):
    m = 1 + 0.5 * np.cos(g1.x[0])
    s = sharp_product(xi_component_symbol(g1, 0), multiplication_symbol(g1, m), 1)
    f = np.sin(2 * g1.x[0])
    assert np.allclose(quantize(s, f), gradient(g1, m * f)[0], atol=1e-11)


def test_sharp_needs_regularity(g1):
    rough = multiplier_symbol(g1, lambda xi: np.abs(xi[0]), 1.0)
    with pytest.raises(ValueError):
        sharp_product(rough, multiplication_symbol(g1, np.ones(g1.shape)), 1)


def test_bracket_antisymmetry(grid2):
    a = 0.2 * np.cos(grid2.x[0]) * np.sin(grid2.x[1])
    s1 = lambda_symbol(grid2, a)
    s2 = multiplication_symbol(grid2, 1 + 0.3 * np.sin(grid2.x[0] + grid2.x[1]))
    xi = np.array([[1.0, -2.0, 3.0], [0.5, 2.0, -1.0]])
    b12 = poisson_bracket(s1, s2, 2)(xi)
    b21 = poisson_bracket(s2, s1, 2)(xi)
    assert np.max(np.abs(b12 + b21)) < 1e-13 * max(1.0, np.max(np.abs(b12)))


@pytest.mark.parametrize("op,order", [("d1", 1.0), ("id", 0.0), ("d2", 2.0)])
def test_measure_order_known(g1, op, order):
    grid = TorusGrid(1, 64)
    ops = {"d1": lambda f: gradient(grid, f)[0], "id": lambda f: f,
           "d2": lambda f: -laplacian(grid, f)}
    probe = OrderProbe(grid, (4, 8, 16))
    assert measure_order(ops[op], probe) == pytest.approx(order, abs=0.05)
    assert len(probe.norms) == 3


def test_measure_order_degenerate(grid1):
    with pytest.raises(ValueError, match="degenerate"):
        measure_order(lambda f: 0 * f, OrderProbe(grid1, (2, 4)))


def test_probe_range(grid1):
    with pytest.raises(ValueError):
        OrderProbe(grid1, (4, 30))


def test_commutator_of_multipliers_vanishes(grid1, rng):
    A = lambda f: gradient(grid1, f)[0]
    B = lambda f: -laplacian(grid1, f)
    f = np.cos(3 * grid1.x[0]) + np.sin(grid1.x[0])
    assert np.allclose(commutator(A, B)(f), 0.0, atol=1e-9)
    assert np.allclose(compose(A, A)(f), -B(f), atol=1e-9)


def test_coercivity_flat(grid1, rng):
    c = coercivity_constant(grid1, np.zeros(grid1.shape), rng, samples=5)
    assert 0.5 < c <= 1.0
