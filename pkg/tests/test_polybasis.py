from math import factorial

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import UNIT_SQUARE, composite_mesh
from polystokes.errors import UnsupportedDegree
from polystokes.mesh import subtriangulate, subtriangulate_polygon
from polystokes.polybasis import (
    PolyCell, decompose_poly, dim_poly, edge_rule, exponents, gperp_basis, gperp_dim,
    gradient_coefficients, integrate_on_cell, triangle_rule,
)


def square_cell(exactness=10, half=1.0):
    coords = half * np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])
    return PolyCell(subtriangulate_polygon(coords), exactness)


def test_dimensions_and_exponent_order():
    assert [dim_poly(s) for s in range(4)] == [1, 3, 6, 10]
    assert exponents(2).tolist() == [[0, 0], [1, 0], [0, 1], [2, 0], [1, 1], [0, 2]]
    assert [gperp_dim(s) for s in range(4)] == [0, 1, 3, 6]


def test_centroid_rule():
    rule = triangle_rule(1)
    assert rule.points.shape == (1, 2)
    np.testing.assert_allclose(rule.points[0], [1 / 3, 1 / 3], atol=1e-15)
    np.testing.assert_allclose(rule.weights, [0.5], atol=1e-15)


def test_two_point_gauss():
    rule = edge_rule(3)
    np.testing.assert_allclose(np.sort(rule.points), [-1 / np.sqrt(3), 1 / np.sqrt(3)], atol=1e-15)
    np.testing.assert_allclose(rule.weights, [1.0, 1.0], atol=1e-15)


def test_unsupported_exactness():
    with pytest.raises(UnsupportedDegree):
        triangle_rule(21)
    with pytest.raises(UnsupportedDegree):
        edge_rule(21)


@pytest.mark.parametrize("exactness", range(0, 21))
def test_triangle_rule_integrates_monomials(exactness):
    rule = triangle_rule(exactness)
    assert rule.weights.sum() == pytest.approx(0.5, rel=1e-14)
    assert (rule.weights > 0).all()
    for a, b in exponents(exactness):
        exact = factorial(a) * factorial(b) / factorial(a + b + 2)
        approx = rule.weights @ (rule.points[:, 0] ** a * rule.points[:, 1] ** b)
        assert approx == pytest.approx(exact, rel=1e-13)


@pytest.mark.parametrize("exactness", range(0, 21))
def test_edge_rule_integrates_monomials(exactness):
    rule = edge_rule(exactness)
    for p in range(exactness + 1):
        exact = 0.0 if p % 2 else 2.0 / (p + 1)
        assert rule.weights @ rule.points ** p == pytest.approx(exact, rel=1e-13, abs=1e-15)


def test_x4y6_on_reference_triangle():
    rule = triangle_rule(10)
    value = rule.weights @ (rule.points[:, 0] ** 4 * rule.points[:, 1] ** 6)
    assert value == pytest.approx(factorial(4) * factorial(6) / factorial(12), rel=1e-13)


def test_integrate_on_unit_square():
    sub = subtriangulate_polygon(UNIT_SQUARE)
    assert integrate_on_cell(sub, lambda x: np.ones(len(x)), 1) == pytest.approx(1.0, rel=1e-15)
    assert integrate_on_cell(sub, lambda x: x[:, 0], 1) == pytest.approx(0.5, rel=1e-15)


def test_hydrostatic_pressure_mean_constant():
    sub = subtriangulate_polygon(UNIT_SQUARE)

    def pressure(x):
        return sum(x[:, 0] ** j * x[:, 1] ** (7 - j) for j in range(8)) - 761 / 1260

    assert abs(integrate_on_cell(sub, pressure, 7)) <= 1e-13


def test_gperp_empty_for_constants():
    assert gperp_basis(square_cell(), 0).dim == 0


def test_gperp_degree_one_is_rotation():
    cell = square_cell()
    basis = gperp_basis(cell, 1)
    assert basis.dim == 1
    c = basis.coeffs[:, 0] / basis.coeffs[2, 0]  # normalize x-component of eta
    # (eta, -xi) up to sign: x-block [0, 0, 1], y-block [0, -1, 0]
    np.testing.assert_allclose(c, [0, 0, 1, 0, -1, 0], atol=1e-12)
    grads = gradient_coefficients(1)[:, 1:]
    ortho = grads.T @ cell.vector_gram(1) @ basis.coeffs
    assert np.abs(ortho).max() <= 1e-12


def test_gperp_degree_two_dimension_on_unit_square():
    cell = PolyCell(subtriangulate_polygon(UNIT_SQUARE), 10)
    assert gperp_basis(cell, 2).dim == 3


@pytest.mark.parametrize("level", [0, 1, 2])
def test_gperp_dimensions_on_composite_meshes(level):
    mesh = composite_mesh(level)
    for c in range(mesh.n_cells):
        cell = PolyCell(subtriangulate(mesh, c), 10)
        for s in range(3):
            basis = gperp_basis(cell, s)
            assert basis.dim == gperp_dim(s)
            if basis.dim:
                gram = basis.coeffs.T @ cell.vector_gram(s) @ basis.coeffs
                np.testing.assert_allclose(gram, np.eye(basis.dim), atol=1e-11)


def test_decompose_zero():
    r, c = decompose_poly(square_cell(), np.zeros(12), 2)
    assert np.abs(r).max() == 0 and np.abs(c).max() == 0


def test_decompose_pure_gradient():
    cell = square_cell(half=0.5)
    s = 2
    # q = grad(xi^2 eta) in scaled coordinates
    target = np.zeros(dim_poly(3))
    target[list(map(tuple, exponents(3))).index((2, 1))] = 1.0
    q = gradient_coefficients(s) @ target / cell.diameter
    r, c = decompose_poly(cell, q, s)
    mean = cell.gram(3)[0] @ target
    expected = target.copy()
    expected[0] -= mean
    np.testing.assert_allclose(r, expected, atol=1e-12)
    assert np.abs(c).max() <= 1e-12


def test_decompose_shear_on_centered_square():
    cell = square_cell()
    q = np.zeros(6)
    q[2] = 1.0  # (eta, 0)
    r, c = decompose_poly(cell, q, 1)
    basis = gperp_basis(cell, 1)
    g = basis.coeffs @ c
    np.testing.assert_allclose(g / g[2], [0, 0, 1, 0, -1, 0], atol=1e-12)
    np.testing.assert_allclose(g[2], 0.5, atol=1e-12)
    # r = xi*eta/2 in scaled coordinates, times the diameter from the gradient scaling
    assert r[4] == pytest.approx(0.5 * cell.diameter, rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 3), st.integers(0, 2**32 - 1))
def test_decompose_reassembles(s, seed):
    cell = PolyCell(subtriangulate(composite_mesh(0), seed % 18), 12)
    q = np.random.default_rng(seed).normal(size=2 * dim_poly(s))
    basis = gperp_basis(cell, s)
    r, c = decompose_poly(cell, q, s, basis)
    back = gradient_coefficients(s) @ r / cell.diameter + basis.coeffs @ c
    np.testing.assert_allclose(back, q, atol=1e-12 * np.abs(q).max())
    assert abs(cell.gram(s + 1)[0] @ r) <= 1e-12 * np.abs(r).max()


def test_gram_conditioning_uniform_over_levels():
    coarse, fine = composite_mesh(0), composite_mesh(4)
    for s in range(1, 4):
        conds = []
        for mesh in (coarse, fine):
            conds.append(max(np.linalg.cond(PolyCell(subtriangulate(mesh, c), 10).gram(s))
                             for c in range(0, mesh.n_cells, max(1, mesh.n_cells // 72))))
        assert conds[1] / conds[0] < 10
