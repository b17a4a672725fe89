import functools

import numpy as np
import pytest

from polystokes.mesh import build_paper_mesh
from polystokes.stokes import Discretization


@functools.lru_cache(maxsize=None)
def composite_mesh(level):
    return build_paper_mesh(level)


@functools.lru_cache(maxsize=None)
def discretization(level, k=2):
    return Discretization(composite_mesh(level), k)


@pytest.fixture(scope="session")
def disc_cache():
    return discretization


UNIT_SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


def regular_polygon(n, radius=1.0, center=(0.0, 0.0), phase=0.0):
    t = phase + 2 * np.pi * np.arange(n) / n
    return np.column_stack([center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)])


def sample_hexagon():
    """Non-convex hexagon, reentrant corner first, in degrees/radius pairs."""
    polar = [(280, 2), (60, 10), (110, 11), (150, 11), (180, 11), (230, 11)]
    return np.array([[r * np.cos(np.radians(a)), r * np.sin(np.radians(a))] for a, r in polar])


def poincare_constant(el, coeffs):
    """||r|| / (h ||grad r||) for the remainder r = v - Pi I v of a degree-4 polynomial v."""
    def v(x):
        return np.column_stack([np.polynomial.polynomial.polyval2d(x[:, 0], x[:, 1], coeffs[0]),
                                np.polynomial.polynomial.polyval2d(x[:, 0], x[:, 1], coeffs[1])])

    def grad(x):
        out = []
        for c in range(2):
            dx = np.polynomial.polynomial.polyder(coeffs[c], axis=0)
            dy = np.polynomial.polynomial.polyder(coeffs[c], axis=1)
            out.append([np.polynomial.polynomial.polyval2d(x[:, 0], x[:, 1], dx),
                        np.polynomial.polynomial.polyval2d(x[:, 0], x[:, 1], dy)])
        return np.array(out).transpose(2, 0, 1)

    def div(x):
        g = grad(x)
        return g[:, 0, 0] + g[:, 1, 1]

    d = el.dofs_of_function(v, div)
    pts, w = el.cell.points, el.cell.weights
    diff = v(pts) - el.eval_projection(d, pts)
    dgrad = grad(pts) - el.grad_projection(d, pts)
    return np.sqrt(w @ (diff ** 2).sum(1)) / (el.h * np.sqrt(w @ (dgrad ** 2).sum((1, 2))))


SURROGATE = np.random.default_rng(11).normal(size=(2, 5, 5))
SURROGATE[:, np.add.outer(np.arange(5), np.arange(5)) > 4] = 0.0


def _edge_triangle(space, i, j):
    for t, tri in enumerate(space.subtri.triangles):
        if i in tri and j in tri:
            return t
    raise AssertionError("edge not found")


def normal_trace_jump(disc, velocity, m):
    mesh = disc.mesh
    recs = disc.reconstructions(m)
    traces = {}
    s = np.linspace(0.05, 0.95, 7)
    worst = 0.0
    for c, rec in enumerate(recs):
        fn = rec.reconstruct(velocity[disc.velocity_maps[c]])
        loop = mesh.cells[c]
        n = len(loop)
        for i, e in enumerate(mesh.cell_edges[c]):
            a, b = loop[i], loop[(i + 1) % n]
            lo, hi = min(a, b), max(a, b)
            pts = mesh.vertices[lo] + s[:, None] * (mesh.vertices[hi] - mesh.vertices[lo])
            t = _edge_triangle(rec.space, i, (i + 1) % n)
            tangent = mesh.vertices[hi] - mesh.vertices[lo]
            normal = np.array([tangent[1], -tangent[0]]) / np.linalg.norm(tangent)
            flux = fn.eval_on_triangle(t, pts) @ normal
            if e in traces:
                worst = max(worst, np.abs(traces[e] - flux).max())
            else:
                traces[e] = flux
    return worst
