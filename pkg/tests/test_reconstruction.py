import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import UNIT_SQUARE, normal_trace_jump, regular_polygon
from polystokes.errors import OrderTooHigh
from polystokes.polybasis import dim_poly, map_triangle, monomials, triangle_rule
from polystokes.reconstruction import (
    RTSpace, Reconstruction, build_constraints, divergence_defect, rt_interpolate_polynomial,
    triangle_projection,
)
from polystokes.vem import VemElement

TRIANGLE = np.array([[0.0, 0.0], [1.0, 0.2], [0.3, 0.9]])


def field(fx, fy):
    return lambda x: np.column_stack([fx(x[:, 0], x[:, 1]), fy(x[:, 0], x[:, 1])])


def l2_distance(fn, func, exactness=10):
    total = 0.0
    for t, tri in enumerate(fn.space.triangles):
        x, w = map_triangle(tri.corners, triangle_rule(exactness))
        total += w @ ((fn.eval_on_triangle(t, x) - func(x)) ** 2).sum(1)
    return np.sqrt(total)


@pytest.mark.parametrize("m", [0, 1, 2])
def test_interpolating_constants(m):
    space = RTSpace(VemElement(regular_polygon(5), 3).subtri, m)
    const = field(lambda x, y: 0 * x + 1.5, lambda x, y: 0 * x - 0.5)
    assert l2_distance(rt_interpolate_polynomial(space, const), const) <= 1e-13


@pytest.mark.parametrize("m", [0, 1])
def test_interpolating_divergence_free_field(m):
    space = RTSpace(VemElement(regular_polygon(6), 2).subtri, m)
    fn = rt_interpolate_polynomial(space, field(lambda x, y: x, lambda x, y: -y))
    for div in fn.divergence():
        np.testing.assert_allclose(div, 0, atol=1e-13)


def test_interpolated_divergence_is_projection():
    el = VemElement(UNIT_SQUARE, 2)
    space = RTSpace(el.subtri, 1)
    assert len(space.triangles) == 2
    fn = rt_interpolate_polynomial(space, field(lambda x, y: x ** 2, lambda x, y: 0 * y))
    for tri, div in zip(space.triangles, fn.divergence()):
        expected = triangle_projection(tri, lambda x: 2 * x[:, 0], 1)
        np.testing.assert_allclose(div, expected, atol=1e-13)


def _square_dofs(el, fx, fy):
    return el.dofs_of_polynomial(el.polynomial_coefficients(field(fx, fy)))


def test_constraints_for_constant_field():
    el = VemElement(UNIT_SQUARE, 2)
    cons = build_constraints(el, 0)
    g = cons.rhs @ _square_dofs(el, lambda x, y: 1 + 0 * x, lambda x, y: 0 * x)
    n_tri = len(el.subtri.triangles)
    np.testing.assert_allclose(g[:n_tri], 0, atol=1e-14)
    # edge i runs from vertex i to i + 1; normals (0,-1), (1,0), (0,1), (-1,0); the closing
    # edge is stored from vertex 0 to 3 so its oriented normal flips
    np.testing.assert_allclose(g[n_tri:], [0, 1, 0, 1], atol=1e-14)


def test_constraints_vanish_without_divergence_or_flux():
    el = VemElement(regular_polygon(5), 2)
    rng = np.random.default_rng(2)
    v = rng.normal(size=el.layout.ndof)
    v[:el.layout.n_boundary] = 0
    v[el.layout.dv4_offset:] = 0
    cons = build_constraints(el, 1)
    np.testing.assert_allclose(cons.rhs @ v, 0, atol=1e-14)


def test_constraints_match_polynomial_oracle():
    el = VemElement(UNIT_SQUARE, 2)
    space = RTSpace(el.subtri, 1)
    cons = build_constraints(el, 1, space)
    g = cons.rhs @ _square_dofs(el, lambda x, y: x ** 2, lambda x, y: 0 * x)
    expected = []
    for tri in space.triangles:
        x, w = map_triangle(tri.corners, triangle_rule(8))
        expected.extend(np.einsum("q,qa,q->a", w, monomials(tri.scaled(x), 1), 2 * x[:, 0]))
    for i in range(4):
        j = (i + 1) % 4
        e = space.edge_of(i, j)
        a, b, normal, length = space.edge_frame(e)
        s, w = np.polynomial.legendre.leggauss(6)
        s = 0.5 * (s + 1)
        pts = a + s[:, None] * (b - a)
        flux = pts[:, 0] ** 2 * normal[0]
        expected.extend(0.5 * np.array([w @ flux, w @ (flux * (2 * s - 1))]))
    np.testing.assert_allclose(g, expected, atol=1e-12)


def test_order_too_high():
    el = VemElement(UNIT_SQUARE, 2)
    with pytest.raises(OrderTooHigh):
        build_constraints(el, 2)
    with pytest.raises(OrderTooHigh):
        Reconstruction(el, 2)


@pytest.mark.parametrize("m", [0, 1])
def test_constant_fields_are_reproduced(m):
    el = VemElement(regular_polygon(7), 2)
    rec = Reconstruction(el, m)
    d = _square_dofs(el, lambda x, y: 2 + 0 * x, lambda x, y: -1 + 0 * y)
    const = field(lambda x, y: 2 + 0 * x, lambda x, y: -1 + 0 * y)
    assert l2_distance(rec.reconstruct(d), const) <= 1e-12


@settings(max_examples=15, deadline=None)
@given(st.sampled_from([(2, 0), (2, 1), (3, 0), (3, 1), (3, 2)]), st.integers(0, 2**32 - 1))
def test_triangle_cell_matches_standard_interpolation(km, seed):
    k, m = km
    el = VemElement(TRIANGLE, k)
    rec = Reconstruction(el, m)
    q = np.random.default_rng(seed).normal(size=2 * dim_poly(k))
    d = el.dofs_of_polynomial(q)
    expected = rec.space.interpolate(lambda x: el.eval_projection(d, x))
    np.testing.assert_allclose(rec.matrix @ d, expected, atol=1e-11 * max(1, np.abs(expected).max()))


def test_pentagon_divergence_preserved():
    el = VemElement(regular_polygon(5, 0.3, (0.5, 0.5)), 2)
    rec = Reconstruction(el, 1)
    fn = rec.reconstruct(_square_dofs(el, lambda x, y: x ** 2, lambda x, y: x * y))
    for tri, div in zip(rec.space.triangles, fn.divergence()):
        np.testing.assert_allclose(div, triangle_projection(tri, lambda x: 3 * x[:, 0], 1),
                                   atol=1e-11)


@pytest.mark.parametrize("level", [0, 1, 2])
@pytest.mark.parametrize("m", [0, 1])
def test_divergence_preservation_on_composite_meshes(level, m, disc_cache):
    disc = disc_cache(level)
    assert max(divergence_defect(rec) for rec in disc.reconstructions(m)) <= 1e-10


def test_divergence_preservation_order_three():
    el = VemElement(regular_polygon(6, 0.5), 3)
    for m in range(3):
        assert divergence_defect(Reconstruction(el, m)) <= 1e-10


@pytest.mark.parametrize("k,m", [(2, 1), (3, 1), (3, 2)])
def test_moment_preservation(k, m):
    el = VemElement(regular_polygon(5, 0.4, (0.3, 0.1), 0.2), k)
    rec = Reconstruction(el, m)
    q = np.random.default_rng(5).normal(size=2 * dim_poly(k))
    d = el.dofs_of_polynomial(q)
    fn = rec.reconstruct(d)
    for tq in range(2 * dim_poly(m - 1)):
        total = 0.0
        for t, tri in enumerate(rec.space.triangles):
            x, w = map_triangle(tri.corners, triangle_rule(10))
            test = np.zeros((len(x), 2))
            comp, a = divmod(tq, dim_poly(m - 1))
            test[:, comp] = el.cell.eval(x, m - 1)[:, a]
            total += w @ ((el.eval_projection(d, x) - fn.eval_on_triangle(t, x)) * test).sum(1)
        assert abs(total) <= 1e-11 * np.abs(q).max()


@pytest.mark.parametrize("m", [0, 1])
def test_global_normal_continuity(m, disc_cache):
    disc = disc_cache(1)
    velocity = np.random.default_rng(9).normal(size=disc.n_velocity)
    assert normal_trace_jump(disc, velocity, m) <= 1e-10


def approximation_constant(el, rec, coeffs):
    d = el.dofs_of_polynomial(coeffs)
    fn = rec.reconstruct(d)
    num = l2_distance(fn, lambda x: el.eval_projection(d, x))
    pts, w = el.cell.points, el.cell.weights
    g = el.grad_projection(d, pts)
    return num / (el.h * np.sqrt(w @ (g ** 2).sum((1, 2))))


@pytest.mark.parametrize("level", [0, 2])
def test_approximation_constant_bounded(level, disc_cache):
    disc = disc_cache(level)
    q = np.random.default_rng(4).normal(size=12)
    for m in (0, 1):
        worst = max(approximation_constant(el, rec, q)
                    for el, rec in zip(disc.elements, disc.reconstructions(m)))
        assert worst <= 10
