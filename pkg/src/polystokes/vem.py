"""Local divergence-free virtual element spaces of order ``k``.

Each :class:`VemElement` works purely from degrees of freedom:

* DV1 vertex values, DV2 values at the interior Gauss-Lobatto points of each
  edge (listed from the lower to the higher global vertex id);
* DV3 moments ``(1/|K|) int v . g_j`` against a mean-orthonormal basis of the
  complement of gradients in vector polynomials of degree ``k - 2``;
* DV4 moments ``(h/|K|) int div(v) psi_j`` against the mean-free members of a
  mean-orthonormal basis ``psi`` of scalar polynomials of degree ``k - 1``.

Pressures are stored as coefficients in the same ``psi`` basis.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.polynomial import legendre
from scipy.linalg import block_diag, null_space

from .errors import OrderTooHigh, SingularLocalSystem, UnsupportedDegree
from .mesh import geometry, subtriangulate_polygon
from .polybasis import (
    PolyCell, decompose_poly, dim_poly, edge_rule, gperp_basis, gperp_dim,
    gradient_coefficients, laplacian_coefficients, vector_indices,
)

SINGULAR_CONDITION = 1e13


def default_exactness(k):
    return max(2 * k + 3, 10)


@dataclass(frozen=True)
class DofLayout:
    """Local velocity/pressure DOF counts and offsets for an ``n``-gon."""

    k: int
    n_vertices: int

    @property
    def n_gperp(self):
        return gperp_dim(self.k - 2)

    @property
    def n_div(self):
        return dim_poly(self.k - 1) - 1

    @property
    def n_pressure(self):
        return dim_poly(self.k - 1)

    @property
    def dv3_offset(self):
        return 2 * self.n_vertices * self.k

    @property
    def dv4_offset(self):
        return self.dv3_offset + self.n_gperp

    @property
    def n_boundary(self):
        return self.dv3_offset

    @property
    def n_interior(self):
        return self.n_gperp + self.n_div

    @property
    def ndof(self):
        return self.dv4_offset + self.n_div

    def vertex_dof(self, j, c):
        return 2 * j + c

    def edge_dof(self, i, j, c):
        return 2 * self.n_vertices + 2 * (i * (self.k - 1) + j) + c


def lobatto_interior(k):
    """Interior Gauss-Lobatto nodes of [0, 1] for degree ``k`` (ascending)."""
    if k < 2:
        return np.zeros(0)
    roots = legendre.Legendre.basis(k).deriv().roots()
    return np.sort(0.5 * (np.real(roots) + 1.0))


def lagrange_matrix(nodes, s):
    """Values of the Lagrange basis on ``nodes`` at parameters ``s``."""
    out = np.ones((len(s), len(nodes)))
    for n, sn in enumerate(nodes):
        for m, sm in enumerate(nodes):
            if m != n:
                out[:, n] *= (s - sm) / (sn - sm)
    return out


def vector_eval(basis_values, coeffs):
    """Evaluate vector polynomials from scalar basis values (n, d).

    ``coeffs`` has shape (2 d, ...); result has shape (n, 2, ...).
    """
    d = basis_values.shape[1]
    return np.stack([np.tensordot(basis_values, coeffs[:d], axes=(1, 0)),
                     np.tensordot(basis_values, coeffs[d:], axes=(1, 0))], axis=1)


class VemElement:
    """Projectors and local forms of one polygon.

    ``vertex_ids`` are the global vertex numbers used to orient DV2 points;
    they default to ``range(n)``.
    """

    def __init__(self, coords, k=2, vertex_ids=None, exactness=None, subtri=None):
        if k < 2:
            raise UnsupportedDegree("the velocity order must be at least 2")
        self.coords = np.asarray(coords, dtype=float)
        self.k = k
        n = len(self.coords)
        self.vertex_ids = np.arange(n) if vertex_ids is None else np.asarray(vertex_ids)
        self.exactness = default_exactness(k) if exactness is None else exactness
        self.subtri = subtri if subtri is not None else subtriangulate_polygon(self.coords)
        self.geom = geometry(self.coords)
        self.area = self.geom.area
        self.h = self.geom.diameter
        self.center = self.geom.centroid
        self.cell = PolyCell(self.subtri, self.exactness)
        self.layout = DofLayout(k, n)
        self._build_edges()

    # ---------------------------------------------------------- boundary

    def _build_edges(self):
        k, n, lay = self.k, len(self.coords), self.layout
        interior = lobatto_interior(k)
        nodes = np.concatenate([[0.0], interior, [1.0]])
        rule = edge_rule(2 * k + 2)
        s = 0.5 * (rule.points + 1.0)
        lag = lagrange_matrix(nodes, s)
        nq = len(s)
        ndof = lay.ndof
        self.edge_reversed = np.array([self.vertex_ids[i] > self.vertex_ids[(i + 1) % n]
                                       for i in range(n)])
        pts = np.zeros((n, nq, 2))
        wts = np.zeros((n, nq))
        trace = np.zeros((n, nq, 2, ndof))
        dof_points = np.zeros((lay.n_boundary // 2, 2))
        for i in range(n):
            a, b = self.coords[i], self.coords[(i + 1) % n]
            pts[i] = a + s[:, None] * (b - a)
            wts[i] = 0.5 * rule.weights * self.geom.lengths[i]
            dof_points[i] = a
            for node in range(k + 1):
                if node == 0:
                    idx = lay.vertex_dof(i, 0)
                elif node == k:
                    idx = lay.vertex_dof((i + 1) % n, 0)
                else:
                    j = node - 1
                    if self.edge_reversed[i]:
                        j = k - 2 - j
                    idx = lay.edge_dof(i, j, 0)
                    dof_points[idx // 2] = a + nodes[node] * (b - a)
                trace[i, :, 0, idx] += lag[:, node]
                trace[i, :, 1, idx + 1] += lag[:, node]
        self.edge_param = s
        self.edge_points = pts
        self.edge_weights = wts
        self.edge_trace = trace
        self.dof_points = dof_points
        normals = self.geom.normals
        self.edge_flux = np.einsum("ic,iqcd->iqd", normals, trace)

    def _boundary_moment(self, values):
        """``sum_E int_E values * (v . n)`` for values of shape (n, nq, m)."""
        return np.einsum("iq,iqm,iqd->md", self.edge_weights, values, self.edge_flux)

    # ------------------------------------------------------------ bases

    @cached_property
    def gperp(self):
        return gperp_basis(self.cell, self.k - 2)

    @cached_property
    def psi(self):
        """Mean-orthonormal P_{k-1} basis, monomial coefficients by column."""
        return self.cell.orthonormal(self.k - 1)

    def _selector(self, start, count):
        out = np.zeros((count, self.layout.ndof))
        out[np.arange(count), start + np.arange(count)] = 1.0
        return out

    # -------------------------------------------------------- divergence

    @cached_property
    def divergence_map(self):
        """DOFs -> coefficients of div v in the ``psi`` basis."""
        lay = self.layout
        mean = np.einsum("iq,iqd->d", self.edge_weights, self.edge_flux) / self.area
        rest = self._selector(lay.dv4_offset, lay.n_div) / self.h
        return np.vstack([mean, rest])

    @cached_property
    def divergence_monomial(self):
        """DOFs -> monomial coefficients of div v (degree k - 1)."""
        return self.psi @ self.divergence_map

    def divergence_from_dofs(self, dofs):
        return self.divergence_monomial @ dofs

    # ------------------------------------------------------------ moments

    def gradient_moments(self, r):
        """``int_K v . grad r`` for scalar polynomials ``r`` (columns of
        monomial coefficients of degree ``<= k + 1``) via integration by parts."""
        r = np.atleast_2d(np.asarray(r, dtype=float).T).T
        deg = next(s for s in range(self.k + 2) if dim_poly(s) >= r.shape[0])
        dk1 = dim_poly(self.k - 1)
        gram = self.cell.gram(max(deg, self.k - 1))
        volume = self.area * r.T @ gram[:r.shape[0], :dk1] @ self.divergence_monomial
        vals = self.cell.eval(self.edge_points.reshape(-1, 2), deg) @ r
        boundary = self._boundary_moment(vals.reshape(self.edge_weights.shape + (-1,)))
        return boundary - volume

    @cached_property
    def classical_moments(self):
        """DOFs -> ``int_K v . p`` for the vector monomials ``p`` of degree k - 2."""
        s = self.k - 2
        ident = np.eye(2 * dim_poly(s))
        r, c = decompose_poly(self.cell, ident, s, self.gperp)
        dv3 = self._selector(self.layout.dv3_offset, self.layout.n_gperp)
        return self.gradient_moments(r) + self.area * c.T @ dv3

    @cached_property
    def stiffness(self):
        """``int_K grad p_a : grad p_b`` over the vector monomials of degree k."""
        g = self.cell.grad(self.cell.points, self.k)
        scalar = np.einsum("q,qai,qbi->ab", self.cell.weights, g, g)
        return block_diag(scalar, scalar)

    @cached_property
    def projector(self):
        """DOFs -> monomial coefficients of the energy projection (2 d_k rows)."""
        k, dk = self.k, dim_poly(self.k)
        lap = laplacian_coefficients(k) / self.h ** 2
        rhs = -block_diag(lap, lap).T @ self.classical_moments
        gn = np.einsum("iqac,ic->iqa",
                       self.cell.grad(self.edge_points.reshape(-1, 2), k)
                       .reshape(self.edge_points.shape[:2] + (dk, 2)), self.geom.normals)
        for c in range(2):
            rhs[c * dk:(c + 1) * dk] += np.einsum(
                "iq,iqa,iqd->ad", self.edge_weights, gn, self.edge_trace[:, :, c, :])
        lhs = self.stiffness.copy()
        means = self.cell.gram(k)[0]
        dk2 = dim_poly(k - 2)
        for c in range(2):
            row = c * dk
            lhs[row] = 0.0
            lhs[row, c * dk:(c + 1) * dk] = means
            rhs[row] = self.classical_moments[c * dk2] / self.area
        if np.linalg.cond(lhs) > SINGULAR_CONDITION:
            raise SingularLocalSystem("energy projection system is numerically singular")
        return np.linalg.solve(lhs, rhs)

    @property
    def gradient_projector(self):
        return self.projector

    @cached_property
    def dof_matrix(self):
        """Vector monomials of degree k -> their DOF vectors (columns)."""
        k, lay = self.k, self.layout
        dk, dk1, dk2 = dim_poly(k), dim_poly(k - 1), dim_poly(k - 2)
        out = np.zeros((lay.ndof, 2 * dk))
        vals = self.cell.eval(self.dof_points, k)
        out[0:lay.n_boundary:2, :dk] = vals
        out[1:lay.n_boundary:2, dk:] = vals
        gram = self.cell.gram(k)
        if lay.n_gperp:
            mixed = block_diag(gram[:dk2], gram[:dk2])
            out[lay.dv3_offset:lay.dv4_offset] = self.gperp.coeffs.T @ mixed
        grads = gradient_coefficients(k - 1)
        div = np.hstack([grads[:dk1], grads[dk1:]]) / self.h
        dvals = self.h * self.psi.T @ gram[:dk1, :dk1] @ div
        out[lay.dv4_offset:] = dvals[1:]
        return out

    def dofs_of_polynomial(self, coeffs):
        """DOF vector(s) of vector polynomials given by degree-k coefficients."""
        return self.dof_matrix @ np.asarray(coeffs, dtype=float)

    def dofs_of_function(self, func, divergence):
        """DOFs of a smooth field given pointwise together with its divergence."""
        lay = self.layout
        out = np.zeros(lay.ndof)
        vals = np.asarray(func(self.dof_points), dtype=float)
        out[0:lay.n_boundary:2] = vals[:, 0]
        out[1:lay.n_boundary:2] = vals[:, 1]
        pts, w = self.cell.points, self.cell.weights
        if lay.n_gperp:
            g = self.gperp.eval(pts)
            out[lay.dv3_offset:lay.dv4_offset] = np.einsum(
                "q,qc,qjc->j", w, np.asarray(func(pts), float), g) / self.area
        psi = self.cell.eval(pts, self.k - 1) @ self.psi
        moments = (w * np.asarray(divergence(pts), float)) @ psi
        out[lay.dv4_offset:] = self.h * moments[1:] / self.area
        return out

    def polynomial_coefficients(self, func, s=None):
        """Degree-``s`` vector coefficients of a vector field by L2 fitting.

        Exact when ``func`` is a polynomial of degree ``<= s``.
        """
        s = self.k if s is None else s
        vals = np.asarray(func(self.cell.points), dtype=float)
        basis = self.cell.eval(self.cell.points, s)
        w = self.cell.weights
        gram = (basis * w[:, None]).T @ basis
        rhs = (basis * w[:, None]).T @ vals
        return np.linalg.solve(gram, rhs).T.reshape(-1)

    @cached_property
    def enhanced_moments(self):
        """DOFs -> ``int_K v . p`` for vector monomials of degree k in the
        enhanced space, where moments against the complement of
        ``grad P_{k+1} + G_{k-2}^perp`` are taken from the energy projection."""
        k, dk = self.k, dim_poly(self.k)
        grads = gradient_coefficients(k)[:, 1:] / self.h
        gemb = np.zeros((2 * dk, self.layout.n_gperp))
        if self.layout.n_gperp:
            gemb[vector_indices(k - 2, k)] = self.gperp.coeffs
        known = np.hstack([grads, gemb])
        mass = self.cell.vector_gram(k)
        extra = null_space(known.T @ mass, rcond=1e-11)
        basis = np.hstack([known, extra])
        r = np.zeros((dim_poly(k + 1), grads.shape[1]))
        r[1:] = np.eye(grads.shape[1])
        rows = [self.gradient_moments(r)]
        if self.layout.n_gperp:
            rows.append(self.area * self._selector(self.layout.dv3_offset, self.layout.n_gperp))
        rows.append(self.area * extra.T @ mass @ self.projector)
        return np.linalg.solve(basis.T, np.vstack(rows))

    def l2_projector(self, s, enhanced=False):
        """DOFs -> degree-``s`` vector coefficients of the L2 projection."""
        limit = self.k if enhanced else self.k - 2
        if s < 0 or s > limit:
            raise OrderTooHigh(f"L2 projection of degree {s} needs s <= {limit}")
        if enhanced:
            moments = self.enhanced_moments[vector_indices(s, self.k)]
        else:
            moments = self.classical_moments[vector_indices(s, self.k - 2)]
        return np.linalg.solve(self.cell.vector_gram(s), moments / self.area)

    # -------------------------------------------------------------- forms

    @cached_property
    def stabilization(self):
        return np.eye(self.layout.ndof)

    @cached_property
    def stiffness_matrix(self):
        """Local viscous form for unit viscosity."""
        proj = self.projector
        rest = np.eye(self.layout.ndof) - self.dof_matrix @ proj
        return proj.T @ self.stiffness @ proj + rest.T @ self.stabilization @ rest

    @cached_property
    def divergence_matrix(self):
        """``int_K psi_i div v`` for pressure basis ``psi`` (rows) and DOFs."""
        return self.area * self.divergence_map

    def local_matrices(self, nu=1.0):
        return nu * self.stiffness_matrix, self.divergence_matrix

    # ------------------------------------------------------- evaluation

    def eval_projection(self, dofs, x):
        """Values of the energy projection at points ``x``: (n, 2, ...)."""
        return vector_eval(self.cell.eval(x, self.k), self.projector @ dofs)

    def grad_projection(self, dofs, x):
        """Gradient of the energy projection: (n, 2 comp, 2 deriv, ...)."""
        g = self.cell.grad(x, self.k)
        coeffs = self.projector @ dofs
        dk = dim_poly(self.k)
        return np.stack([np.tensordot(g, coeffs[:dk], axes=(1, 0)),
                         np.tensordot(g, coeffs[dk:], axes=(1, 0))], axis=1)

    def eval_pressure(self, coeffs, x):
        return self.cell.eval(x, self.k - 1) @ (self.psi @ coeffs)
