"""Scaled monomial bases, the gradient / orthogonal-complement splitting of
vector polynomials, and quadrature on triangles, edges and subtriangulated
polygons.

Vector polynomial coefficient vectors of degree ``s`` are laid out as
``[x-component monomials, y-component monomials]``, each block following
:func:`exponents`.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import cholesky, null_space, solve_triangular
from scipy.special import roots_jacobi, roots_legendre

from .errors import RankError, UnsupportedDegree

MAX_EXACTNESS = 20


def dim_poly(s):
    """Dimension of scalar polynomials of degree at most ``s`` in 2D."""
    return (s + 1) * (s + 2) // 2 if s >= 0 else 0


@lru_cache(maxsize=None)
def _exponents(s):
    return tuple((d - j, j) for d in range(s + 1) for j in range(d + 1))


def exponents(s):
    """Monomial exponents ``(a, b)`` of degree at most ``s``, graded order."""
    return np.array(_exponents(s), dtype=int).reshape(-1, 2)


@lru_cache(maxsize=None)
def _exponent_index(s):
    return {e: i for i, e in enumerate(_exponents(s))}


def monomials(xi, s):
    """Values of ``xi^a eta^b`` at points ``xi`` of shape (n, 2)."""
    xi = np.atleast_2d(xi)
    e = exponents(s)
    px = xi[:, 0:1] ** e[None, :, 0]
    py = xi[:, 1:2] ** e[None, :, 1]
    return px * py


def monomial_gradients(xi, s):
    """Gradients with respect to ``xi``; shape (n, dim, 2)."""
    xi = np.atleast_2d(xi)
    e = exponents(s)
    a, b = e[:, 0], e[:, 1]
    x, y = xi[:, 0:1], xi[:, 1:2]
    dx = a * x ** np.maximum(a - 1, 0) * y ** b
    dy = b * x ** a * y ** np.maximum(b - 1, 0)
    return np.stack([dx, dy], axis=-1)


@lru_cache(maxsize=None)
def gradient_coefficients(s):
    """Coefficients (in the vector degree-``s`` basis) of ``grad_xi m`` for
    each monomial ``m`` of degree ``s + 1``.  Shape (2 dim_s, dim_{s+1})."""
    n = dim_poly(s)
    idx = _exponent_index(s)
    out = np.zeros((2 * n, dim_poly(s + 1)))
    for j, (a, b) in enumerate(_exponents(s + 1)):
        if a > 0:
            out[idx[(a - 1, b)], j] = a
        if b > 0:
            out[n + idx[(a, b - 1)], j] = b
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def laplacian_coefficients(s):
    """Matrix mapping degree-``s`` monomial coefficients to the coefficients
    of their ``xi``-Laplacian in the degree ``s - 2`` basis."""
    idx = _exponent_index(s - 2) if s >= 2 else {}
    out = np.zeros((dim_poly(s - 2), dim_poly(s)))
    for j, (a, b) in enumerate(_exponents(s)):
        if a >= 2:
            out[idx[(a - 2, b)], j] += a * (a - 1)
        if b >= 2:
            out[idx[(a, b - 2)], j] += b * (b - 1)
    return out


def embed_vector(coeffs, s_from, s_to):
    """Re-index vector coefficients of degree ``s_from`` into degree ``s_to``."""
    n_from, n_to = dim_poly(s_from), dim_poly(s_to)
    coeffs = np.asarray(coeffs)
    out = np.zeros((2 * n_to,) + coeffs.shape[1:])
    out[:n_from] = coeffs[:n_from]
    out[n_to:n_to + n_from] = coeffs[n_from:]
    return out


def vector_indices(s_low, s_high):
    """Positions of the degree ``s_low`` vector basis inside degree ``s_high``."""
    n_low, n_high = dim_poly(s_low), dim_poly(s_high)
    return np.concatenate([np.arange(n_low), n_high + np.arange(n_low)])


# ---------------------------------------------------------------- quadrature

@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    degree: int


def _check_exactness(exactness):
    if exactness < 0 or exactness > MAX_EXACTNESS:
        raise UnsupportedDegree(f"quadrature exactness {exactness} outside [0, {MAX_EXACTNESS}]")


@lru_cache(maxsize=None)
def triangle_rule(exactness):
    """Collapsed Gauss-Jacobi rule on the reference triangle (0,0),(1,0),(0,1).

    Exact for polynomials of total degree ``exactness``; positive weights
    summing to 1/2.
    """
    _check_exactness(exactness)
    n = max(1, (exactness + 2) // 2)
    tj, wj = roots_jacobi(n, 1.0, 0.0)
    tl, wl = roots_legendre(n)
    u = 0.5 * (tj + 1.0)
    v = 0.5 * (tl + 1.0)
    wu = wj / 4.0
    wv = wl / 2.0
    uu, vv = np.meshgrid(u, v, indexing="ij")
    points = np.column_stack([uu.ravel(), ((1.0 - uu) * vv).ravel()])
    weights = np.outer(wu, wv).ravel()
    points.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(points, weights, exactness)


@lru_cache(maxsize=None)
def edge_rule(exactness):
    """Gauss-Legendre rule on [-1, 1] exact to degree ``exactness``."""
    _check_exactness(exactness)
    n = max(1, (exactness + 2) // 2)
    t, w = roots_legendre(n)
    t.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(t, w, exactness)


def map_triangle(tri, rule):
    """Physical points and weights of ``rule`` mapped onto triangle ``tri``."""
    tri = np.asarray(tri, dtype=float)
    e1, e2 = tri[1] - tri[0], tri[2] - tri[0]
    jac = abs(e1[0] * e2[1] - e1[1] * e2[0])
    pts = tri[0] + rule.points[:, 0:1] * e1 + rule.points[:, 1:2] * e2
    return pts, rule.weights * jac


def cell_points(subtri, exactness):
    """Quadrature points and weights on a subtriangulated cell."""
    rule = triangle_rule(exactness)
    pts, wts = [], []
    for tri in subtri.triangle_coords():
        p, w = map_triangle(tri, rule)
        pts.append(p)
        wts.append(w)
    return np.vstack(pts), np.concatenate(wts)


def integrate_on_cell(subtri, integrand, exactness):
    """Integrate a point-evaluable ``integrand`` over the cell of ``subtri``."""
    pts, wts = cell_points(subtri, exactness)
    vals = np.asarray(integrand(pts), dtype=float)
    return float(np.tensordot(wts, vals, axes=(0, 0)))


# ------------------------------------------------------------ cell-level bases

class PolyCell:
    """Centroid/diameter-scaled monomials on one polygon with a quadrature."""

    def __init__(self, subtri, exactness):
        self.subtri = subtri
        self.center = subtri.centroid
        self.diameter = subtri.diameter
        self.points, self.weights = cell_points(subtri, exactness)
        self.area = float(self.weights.sum())
        self._gram = {}

    def scaled(self, x):
        return (np.atleast_2d(x) - self.center) / self.diameter

    def eval(self, x, s):
        return monomials(self.scaled(x), s)

    def grad(self, x, s):
        """Physical gradients of the degree-``s`` monomials, (n, dim, 2)."""
        return monomial_gradients(self.scaled(x), s) / self.diameter

    def gram(self, s):
        """Mean-normalised Gram matrix ``(1/|K|) int m_a m_b`` of degree ``s``."""
        if s not in self._gram:
            v = self.eval(self.points, s)
            self._gram[s] = (v * self.weights[:, None]).T @ v / self.area
        return self._gram[s]

    def vector_gram(self, s):
        g = self.gram(s)
        n = g.shape[0]
        out = np.zeros((2 * n, 2 * n))
        out[:n, :n] = g
        out[n:, n:] = g
        return out

    def orthonormal(self, s):
        """Coefficients of a mean-orthonormal basis of P_s, first member = 1.

        Column ``i`` lives in the span of the first ``i + 1`` monomials.
        """
        lower = cholesky(self.gram(s), lower=True)
        return solve_triangular(lower.T, np.eye(lower.shape[0]), lower=False)


@dataclass(frozen=True)
class GPerpBasis:
    """Mean-orthonormal basis of the complement of grad P_{s+1} in P_s^2."""

    center: np.ndarray
    diameter: float
    degree: int
    coeffs: np.ndarray

    @property
    def dim(self):
        return self.coeffs.shape[1]

    def eval(self, x):
        """Values at points ``x``; shape (n, dim, 2)."""
        m = monomials((np.atleast_2d(x) - self.center) / self.diameter, self.degree)
        n = m.shape[1]
        return np.stack([m @ self.coeffs[:n], m @ self.coeffs[n:]], axis=-1)


def gperp_dim(s):
    return 2 * dim_poly(s) - dim_poly(s + 1) + 1 if s >= 0 else 0


def gperp_basis(cell, s):
    """Orthonormal basis (w.r.t. ``(1/|K|) int_K``) of G_s(K)^perp."""
    n = dim_poly(s)
    if s < 0:
        return GPerpBasis(cell.center, cell.diameter, s, np.zeros((0, 0)))
    mass = cell.vector_gram(s)
    grads = gradient_coefficients(s)[:, 1:]
    comp = null_space(grads.T @ mass, rcond=1e-11)
    if comp.shape[1] != gperp_dim(s):
        raise RankError(f"complement of gradients has dimension {comp.shape[1]}, "
                        f"expected {gperp_dim(s)}")
    if comp.shape[1]:
        lower = cholesky(comp.T @ mass @ comp, lower=True)
        comp = solve_triangular(lower, comp.T, lower=True).T
    assert comp.shape[0] == 2 * n
    return GPerpBasis(cell.center, cell.diameter, s, comp)


def decompose_poly(cell, q, s, basis=None):
    """Split a degree-``s`` vector polynomial as ``q = grad r + g``.

    Returns ``(r, c)``: ``r`` holds the degree ``s + 1`` monomial coefficients
    of the mean-free potential and ``c`` the coordinates of ``g`` in
    ``basis`` (defaults to :func:`gperp_basis`).
    """
    q = np.asarray(q, dtype=float)
    if basis is None:
        basis = gperp_basis(cell, s)
    mass = cell.vector_gram(s)
    grads = gradient_coefficients(s)[:, 1:] / cell.diameter
    lhs = grads.T @ mass @ grads
    y = np.linalg.solve(lhs, grads.T @ mass @ q)
    g = q - grads @ y
    c = basis.coeffs.T @ mass @ g if basis.dim else np.zeros((0,) + q.shape[1:])
    r = np.zeros((dim_poly(s + 1),) + q.shape[1:])
    r[1:] = y
    means = cell.gram(s + 1)[0]
    r[0] = -means[1:] @ y
    return r, c
