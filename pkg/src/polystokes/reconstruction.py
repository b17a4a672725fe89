"""Raviart-Thomas fields on a polygon's subtriangulation and the
divergence-preserving reconstruction of virtual element functions.

RT degrees of freedom on each subtriangulation edge ``(lo, hi)`` are the
normal-flux moments ``(1/|e|) int_e w . n_e L_j(s) ds`` with ``n_e`` the
clockwise rotation of the unit tangent from point ``lo`` to ``hi``, ``s`` the
arc-length parameter on [0, 1] in the same direction and ``L_j`` Legendre
polynomials. Interior DOFs are ``(1/|T|) int_T w . xi^a e_i`` with
triangle-scaled monomials of degree ``m - 1``. The nodal basis on each triangle
comes from inverting the DOF matrix of a raw ``P_m^2 + xi P_m`` basis.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.polynomial import legendre
from scipy.linalg import qr, solve_triangular

from .errors import InfeasibleConstraints, OrderTooHigh
from .mesh import geometry
from .polybasis import (
    dim_poly, edge_rule, gperp_basis, gradient_coefficients, map_triangle, monomials,
    triangle_rule, vector_indices,
)

RANK_TOLERANCE = 1e-10
FEASIBILITY_TOLERANCE = 1e-9


def _raw_values(xi, m):
    """Raw RT_m basis at scaled points: (n, 2 dim_m + m + 1, 2)."""
    mono = monomials(xi, m)
    n, d = mono.shape
    top = mono[:, dim_poly(m - 1):]
    out = np.zeros((n, 2 * d + m + 1, 2))
    out[:, :d, 0] = mono
    out[:, d:2 * d, 1] = mono
    out[:, 2 * d:, 0] = xi[:, 0:1] * top
    out[:, 2 * d:, 1] = xi[:, 1:2] * top
    return out


def _raw_divergence(m):
    """Raw RT_m basis -> divergence in scaled degree-m monomials (times h)."""
    d = dim_poly(m)
    out = np.zeros((d, 2 * d + m + 1))
    if m >= 1:
        grads = gradient_coefficients(m - 1)
        dm1 = dim_poly(m - 1)
        out[:dm1, :d] = grads[:dm1]
        out[:dm1, d:2 * d] = grads[dm1:]
    out[dim_poly(m - 1):, 2 * d:] = (m + 2) * np.eye(m + 1)
    return out


@dataclass
class _Triangle:
    corners: np.ndarray
    center: np.ndarray
    h: float
    area: float
    m: int
    dofs: np.ndarray  # global RT DOF index of each local basis function
    coeffs: np.ndarray = None  # raw -> nodal basis

    def scaled(self, x):
        return (x - self.center) / self.h

    def values(self, x):
        return np.einsum("nrc,rb->nbc", _raw_values(self.scaled(x), self.m), self.coeffs)


class RTSpace:
    """RT_m fields over a subtriangulation, H(div)-conforming inside the cell."""

    def __init__(self, subtri, m):
        if m < 0:
            raise OrderTooHigh("RT order must be nonnegative")
        self.subtri = subtri
        self.m = m
        pts, tris = subtri.points, subtri.triangles
        index = {}
        for t in tris:
            for a, b in zip(t, np.roll(t, -1)):
                key = (min(a, b), max(a, b))
                index.setdefault(key, len(index))
        self.edges = np.array(list(index), dtype=int).reshape(-1, 2)
        self._edge_index = index
        n_edge_dofs = len(self.edges) * (m + 1)
        n_int = 2 * dim_poly(m - 1)
        self.ndof = n_edge_dofs + len(tris) * n_int
        rule = edge_rule(2 * m + 2)
        self._edge_s = 0.5 * (rule.points + 1.0)
        self._edge_w = 0.5 * rule.weights
        self._legendre = legendre.legvander(2 * self._edge_s - 1.0, m)
        self.triangles = []
        for t_id, t in enumerate(tris):
            corners = pts[t]
            g = geometry(corners)
            local = []
            for a, b in zip(t, np.roll(t, -1)):
                e = index[(min(a, b), max(a, b))]
                local.extend(e * (m + 1) + np.arange(m + 1))
            local.extend(n_edge_dofs + t_id * n_int + np.arange(n_int))
            tri = _Triangle(corners, g.centroid, g.diameter, g.area, m, np.array(local))
            raw = self._functionals(tri, lambda x, tri=tri: _raw_values(tri.scaled(x), m), t)
            tri.coeffs = np.linalg.inv(raw)
            self.triangles.append(tri)

    def edge_frame(self, e):
        lo, hi = self.edges[e]
        a, b = self.subtri.points[lo], self.subtri.points[hi]
        t = b - a
        length = float(np.hypot(*t))
        return a, b, np.array([t[1], -t[0]]) / length, length

    def edge_of(self, a, b):
        return self._edge_index[(min(a, b), max(a, b))]

    def _functionals(self, tri, func, t):
        """DOF functionals of one triangle applied to ``func`` -> (nloc, ...)."""
        m = self.m
        rows = []
        for a, b in zip(t, np.roll(t, -1)):
            e = self.edge_of(a, b)
            p0, p1, normal, _ = self.edge_frame(e)
            x = p0 + self._edge_s[:, None] * (p1 - p0)
            flux = np.einsum("nrc,c->nr", func(x), normal)
            rows.append(np.einsum("q,qj,qr->jr", self._edge_w, self._legendre, flux))
        if m >= 1:
            x, w = map_triangle(tri.corners, triangle_rule(2 * m))
            mono = monomials(tri.scaled(x), m - 1)
            vals = func(x)
            for c in range(2):
                rows.append(np.einsum("q,qa,qr->ar", w, mono, vals[:, :, c]) / tri.area)
        return np.vstack(rows)

    def quadrature(self, exactness):
        """Per triangle: points, weights and basis values (nq, nloc, 2)."""
        rule = triangle_rule(exactness)
        out = []
        for tri in self.triangles:
            x, w = map_triangle(tri.corners, rule)
            out.append((x, w, tri.values(x), tri.dofs))
        return out

    @cached_property
    def mass(self):
        out = np.zeros((self.ndof, self.ndof))
        for x, w, vals, dofs in self.quadrature(2 * self.m + 2):
            out[np.ix_(dofs, dofs)] += np.einsum("q,qac,qbc->ab", w, vals, vals)
        return out

    def project_moments(self, func, exactness):
        """``int_K func . phi_j`` for all basis functions; ``func`` returns
        (n, 2, ...)."""
        out = None
        for x, w, vals, dofs in self.quadrature(exactness):
            f = np.asarray(func(x), dtype=float)
            part = np.einsum("q,qbc,qc...->b...", w, vals, f)
            if out is None:
                out = np.zeros((self.ndof,) + part.shape[1:])
            out[dofs] += part
        return out

    def divergence_coefficients(self, coeffs):
        """Per-triangle divergence in triangle-scaled P_m monomials."""
        raw = _raw_divergence(self.m)
        return [raw @ tri.coeffs @ coeffs[tri.dofs] / tri.h for tri in self.triangles]

    def interpolate(self, func):
        """Standard RT interpolation of a point-evaluable field (n, 2)."""
        out = np.zeros(self.ndof)
        for tri, t in zip(self.triangles, self.subtri.triangles):
            vals = self._functionals(tri, lambda x: np.asarray(func(x), float)[:, None, :], t)
            out[tri.dofs] = vals[:, 0]
        return out


@dataclass(frozen=True)
class RTFunction:
    space: RTSpace
    coeffs: np.ndarray

    def eval_on_triangle(self, t, x):
        tri = self.space.triangles[t]
        return np.einsum("nbc,b->nc", tri.values(np.atleast_2d(x)), self.coeffs[tri.dofs])

    def divergence(self):
        return self.space.divergence_coefficients(self.coeffs)


def rt_interpolate_polynomial(space, func):
    return RTFunction(space, space.interpolate(func))


@dataclass(frozen=True)
class ConstraintSet:
    matrix: np.ndarray
    rhs: np.ndarray  # one column per local velocity DOF


def build_constraints(element, m, space=None):
    """Linear constraints ``C w = G v`` defining the admissible RT fields."""
    if m > element.k - 1:
        raise OrderTooHigh(f"reconstruction order {m} exceeds k - 1 = {element.k - 1}")
    space = space if space is not None else RTSpace(element.subtri, m)
    k = element.k
    rows, rhs = [], []
    div_mono = element.divergence_monomial
    ex = m + max(m, k - 1)
    raw_div = _raw_divergence(m)
    for tri in space.triangles:
        x, w = map_triangle(tri.corners, triangle_rule(ex))
        test = monomials(tri.scaled(x), m)
        gram = np.einsum("q,qa,qb->ab", w, test, monomials(tri.scaled(x), m))
        row = np.zeros((test.shape[1], space.ndof))
        row[:, tri.dofs] = gram @ raw_div @ tri.coeffs / tri.h
        rows.append(row)
        vals = element.cell.eval(x, k - 1) @ div_mono
        rhs.append(np.einsum("q,qa,qd->ad", w, test, vals))
    if m >= 2:
        basis = gperp_basis(element.cell, m - 1)
        if basis.dim:
            row = space.project_moments(lambda x: basis.eval(x).transpose(0, 2, 1), 2 * m).T
            rows.append(row)
            emb = np.zeros((2 * dim_poly(k - 2), basis.dim))
            emb[vector_indices(m - 1, k - 2)] = basis.coeffs
            rhs.append(emb.T @ element.classical_moments)
    n = len(element.coords)
    leg = legendre.legvander(2 * element.edge_param - 1.0, m)
    for i in range(n):
        j = (i + 1) % n
        e = space.edge_of(i, j)
        sign = 1.0 if i < j else -1.0
        lg = leg if sign > 0 else legendre.legvander(1.0 - 2 * element.edge_param, m)
        row = np.zeros((m + 1, space.ndof))
        row[:, e * (m + 1) + np.arange(m + 1)] = np.eye(m + 1)
        rows.append(row)
        length = element.geom.lengths[i]
        rhs.append(sign * np.einsum("q,qj,qd->jd", element.edge_weights[i], lg,
                                    element.edge_flux[i]) / length)
    return ConstraintSet(np.vstack(rows), np.vstack(rhs))


def _constrained_minimizer(mass, target, cons):
    """Minimise ``|w - target|_M`` subject to ``C w = G`` column by column."""
    q, r, piv = qr(cons.matrix.T, pivoting=True)
    diag = np.abs(np.diag(r))
    rank = int((diag > RANK_TOLERANCE * diag[0]).sum()) if diag.size else 0
    q1, q2 = q[:, :rank], q[:, rank:]
    r11 = r[:rank, :rank]
    w0 = q1 @ solve_triangular(r11, cons.rhs[piv[:rank]], trans="T")
    if q2.shape[1]:
        red = q2.T @ mass @ q2
        y = np.linalg.solve(red, q2.T @ (target - mass @ w0))
        w = w0 + q2 @ y
    else:
        w = w0
    resid = np.linalg.norm(cons.matrix @ w - cons.rhs)
    scale = np.linalg.norm(cons.rhs)
    if resid > FEASIBILITY_TOLERANCE * scale + 1e-14:
        raise InfeasibleConstraints(f"constraint residual {resid:.3e} (data norm {scale:.3e})")
    return w


class Reconstruction:
    """The linear map from local velocity DOFs to RT_m coefficients."""

    def __init__(self, element, m):
        if m > element.k - 1:
            raise OrderTooHigh(f"reconstruction order {m} exceeds k - 1 = {element.k - 1}")
        self.element = element
        self.m = m
        self.space = RTSpace(element.subtri, m)
        self.constraints = build_constraints(element, m, self.space)

    @cached_property
    def matrix(self):
        el = self.element
        k = el.k
        dk = dim_poly(k)

        def poly_basis(x):
            mono = el.cell.eval(x, k)
            out = np.zeros((len(x), 2, 2 * dk))
            out[:, 0, :dk] = mono
            out[:, 1, dk:] = mono
            return out

        objective = self.space.project_moments(poly_basis, self.m + 1 + k)
        target = objective @ el.projector
        return _constrained_minimizer(self.space.mass, target, self.constraints)

    def reconstruct(self, dofs):
        return RTFunction(self.space, self.matrix @ dofs)

    def load(self, func, exactness):
        """``int_K f . I_RT(phi_i)`` for every local velocity basis function."""
        moments = self.space.project_moments(lambda x: np.asarray(func(x), float), exactness)
        return self.matrix.T @ moments


def reconstruct(element, m, dofs):
    return Reconstruction(element, m).reconstruct(dofs)


def triangle_projection(tri, func, m, exactness=12):
    """L2 projection of a scalar field onto P_m of one triangle (scaled monomials)."""
    x, w = map_triangle(tri.corners, triangle_rule(exactness))
    mono = monomials(tri.scaled(x), m)
    gram = np.einsum("q,qa,qb->ab", w, mono, mono)
    return np.linalg.solve(gram, np.einsum("q,qa,q->a", w, mono, func(x)))



def divergence_defect(rec, exactness=12):
    """Largest coefficient gap between the piecewise divergence of the
    reconstructed basis and the piecewise P_m projection of the virtual
    divergence, over all local basis functions."""
    el = rec.element
    div_mono = el.divergence_monomial
    worst = 0.0
    for tri, dw in zip(rec.space.triangles, rec.space.divergence_coefficients(rec.matrix)):
        x, w = map_triangle(tri.corners, triangle_rule(exactness))
        mono = monomials(tri.scaled(x), rec.m)
        gram = np.einsum("q,qa,qb->ab", w, mono, mono)
        vals = el.cell.eval(x, el.k - 1) @ div_mono
        proj = np.linalg.solve(gram, np.einsum("q,qa,qd->ad", w, mono, vals))
        worst = max(worst, float(np.abs(dw - proj).max()))
    return worst
