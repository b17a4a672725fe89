"""Global assembly and solution of the discrete Stokes problem.

Global velocity numbering: vertex ``v`` component ``c`` is ``2 v + c``; the
``j``-th interior point of edge ``e`` (from its lower to its higher vertex) is
``2 n_v + 2 (e (k - 1) + j) + c``; cell-interior moments follow cell by cell.
Pressures are per-cell coefficients in the element's orthonormal basis.
"""
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import AssemblyError, SolverFailure
from .polybasis import dim_poly
from .reconstruction import Reconstruction
from .vem import VemElement, default_exactness

RESIDUAL_TOLERANCE = 1e-12
REFINEMENT_STEPS = 3


class RhsMode(str, Enum):
    CVEM = "cvem"
    EVEM = "evem"
    PRVEM1 = "prvem1"
    PRVEM0 = "prvem0"

    @classmethod
    def parse(cls, text):
        return cls(text.strip().lower())


@dataclass(frozen=True)
class StokesProblem:
    """Viscosity, body force and optional boundary data / exact solution.

    ``velocity_gradient`` returns arrays of shape (n, 2, 2) indexed by
    (component, derivative).
    """

    nu: float
    force: object
    dirichlet: object = None
    velocity: object = None
    velocity_gradient: object = None
    pressure: object = None

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError("viscosity must be positive")


class Discretization:
    """Elements, numbering and unit-viscosity matrices of one mesh and order."""

    def __init__(self, mesh, k=2, exactness=None):
        self.mesh = mesh
        self.k = k
        self.exactness = default_exactness(k) if exactness is None else exactness
        self.elements = [
            VemElement(mesh.cell_coords(c), k, mesh.cells[c], self.exactness)
            for c in range(mesh.n_cells)
        ]
        self._number()
        self._reconstructions = {}

    # ----------------------------------------------------------- numbering

    def _number(self):
        mesh, k = self.mesh, self.k
        nv, ne = mesh.n_vertices, mesh.n_edges
        offset = 2 * nv + 2 * ne * (k - 1)
        self.velocity_maps = []
        self.pressure_maps = []
        n_p = dim_poly(k - 1)
        points = np.zeros((nv + ne * (k - 1), 2))
        for c, el in enumerate(self.elements):
            lay = el.layout
            loop = mesh.cells[c]
            idx = np.empty(lay.ndof, dtype=int)
            for j, v in enumerate(loop):
                idx[2 * j:2 * j + 2] = 2 * v + np.arange(2)
            for i, e in enumerate(mesh.cell_edges[c]):
                for j in range(k - 1):
                    g = 2 * nv + 2 * (e * (k - 1) + j)
                    loc = lay.edge_dof(i, j, 0)
                    idx[loc:loc + 2] = g + np.arange(2)
                    points[g // 2] = el.dof_points[loc // 2]
            points[np.array(loop)] = el.coords
            idx[lay.n_boundary:] = offset + np.arange(lay.n_interior)
            offset += lay.n_interior
            self.velocity_maps.append(idx)
            self.pressure_maps.append(c * n_p + np.arange(n_p))
        self.n_velocity = offset
        self.n_pressure = mesh.n_cells * n_p
        self.node_points = points
        boundary = np.zeros(self.n_velocity, dtype=bool)
        vflags = mesh.boundary_vertex_flags
        boundary[:2 * nv] = np.repeat(vflags, 2)
        eflags = np.repeat(mesh.boundary_edge_flags, 2 * (k - 1))
        boundary[2 * nv:2 * nv + len(eflags)] = eflags
        self.boundary = boundary
        self.free = np.flatnonzero(~boundary)
        self.fixed = np.flatnonzero(boundary)

    @property
    def ndof(self):
        """Free velocity DOFs + pressure DOFs + the mean-value multiplier."""
        return len(self.free) + self.n_pressure + 1

    # ------------------------------------------------------------ matrices

    @cached_property
    def stiffness(self):
        rows, cols, vals = [], [], []
        for el, idx in zip(self.elements, self.velocity_maps):
            a = el.stiffness_matrix
            rows.append(np.repeat(idx, len(idx)))
            cols.append(np.tile(idx, len(idx)))
            vals.append(a.ravel())
        n = self.n_velocity
        return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(n, n))

    @cached_property
    def divergence(self):
        """``int psi_i div v`` rows over all cells."""
        rows, cols, vals = [], [], []
        for el, idx, pidx in zip(self.elements, self.velocity_maps, self.pressure_maps):
            b = el.divergence_matrix
            rows.append(np.repeat(pidx, len(idx)))
            cols.append(np.tile(idx, len(pidx)))
            vals.append(b.ravel())
        return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(self.n_pressure, self.n_velocity))

    @cached_property
    def mean_row(self):
        out = np.zeros(self.n_pressure)
        for el, pidx in zip(self.elements, self.pressure_maps):
            out[pidx[0]] = el.area
        return out

    @cached_property
    def saddle_matrix(self):
        free = self.free
        a = self.stiffness[free][:, free]
        b = self.divergence[:, free]
        m = sp.csr_matrix(self.mean_row.reshape(-1, 1))
        mat = sp.bmat([[a, -b.T, None], [-b, None, m], [None, m.T, None]], format="csc")
        if mat.shape[0] != self.ndof:
            raise AssemblyError("saddle-point system size does not match the DOF count")
        return mat

    @cached_property
    def factorization(self):
        return splu(self.saddle_matrix)

    @cached_property
    def _extended_matrix(self):
        return self.saddle_matrix.astype(np.longdouble)

    def solve_saddle(self, rhs):
        """Solve with the cached factorization.

        Residuals of the refinement steps are formed in extended precision so
        that the velocity keeps its accuracy when the load is dominated by a
        large gradient part (small viscosity).
        """
        scale = np.linalg.norm(rhs)
        if scale == 0.0:
            return np.zeros_like(rhs)
        mat = self._extended_matrix
        target = rhs.astype(np.longdouble)
        x = self.factorization.solve(rhs).astype(np.longdouble)
        for _ in range(REFINEMENT_STEPS):
            resid = target - mat @ x
            if np.linalg.norm(resid.astype(float)) <= 1e-17 * scale:
                break
            x += self.factorization.solve(resid.astype(float))
        x = x.astype(float)
        rel = np.linalg.norm(rhs - self.saddle_matrix @ x) / scale
        if not rel <= RESIDUAL_TOLERANCE:
            raise SolverFailure(f"relative residual {rel:.3e} exceeds {RESIDUAL_TOLERANCE:g}")
        return x

    # --------------------------------------------------------------- loads

    def reconstructions(self, m):
        if m not in self._reconstructions:
            self._reconstructions[m] = [Reconstruction(el, m) for el in self.elements]
        return self._reconstructions[m]

    def local_load(self, c, mode, force):
        el = self.elements[c]
        mode = RhsMode(mode)
        if mode in (RhsMode.CVEM, RhsMode.EVEM):
            enhanced = mode is RhsMode.EVEM
            s = el.k if enhanced else el.k - 2
            pts, w = el.cell.points, el.cell.weights
            vals = np.asarray(force(pts), dtype=float)
            mono = el.cell.eval(pts, s)
            moments = np.concatenate([mono.T @ (w * vals[:, 0]), mono.T @ (w * vals[:, 1])])
            return el.l2_projector(s, enhanced).T @ moments
        m = el.k - 1 if mode is RhsMode.PRVEM1 else 0
        return self.reconstructions(m)[c].load(force, self.exactness)

    def load(self, mode, force):
        out = np.zeros(self.n_velocity)
        for c, idx in enumerate(self.velocity_maps):
            np.add.at(out, idx, self.local_load(c, mode, force))
        return out

    def boundary_values(self, g):
        """Velocity vector holding ``g`` at the boundary vertex/edge points."""
        out = np.zeros(self.n_velocity)
        if g is None:
            return out
        nodes = self.fixed[::2] // 2
        vals = np.asarray(g(self.node_points[nodes]), dtype=float)
        out[self.fixed[::2]] = vals[:, 0]
        out[self.fixed[1::2]] = vals[:, 1]
        return out


# ------------------------------------------------------------- functional API

@dataclass(frozen=True)
class SaddleSystem:
    discretization: Discretization
    nu: float
    mode: RhsMode
    load: np.ndarray
    boundary: np.ndarray = field(default=None)

    @property
    def matrix(self):
        return self.discretization.saddle_matrix


def assemble(mesh_or_disc, k, nu, mode, force):
    disc = mesh_or_disc if isinstance(mesh_or_disc, Discretization) else Discretization(mesh_or_disc, k)
    if not nu > 0:
        raise ValueError("viscosity must be positive")
    mode = RhsMode(mode)
    return SaddleSystem(disc, float(nu), mode, disc.load(mode, force))


def apply_dirichlet(system, g):
    return replace(system, boundary=system.discretization.boundary_values(g))


@dataclass(frozen=True)
class Solution:
    discretization: Discretization
    velocity: np.ndarray
    pressure: np.ndarray

    def cell_velocity(self, c):
        return self.velocity[self.discretization.velocity_maps[c]]

    def cell_pressure(self, c):
        return self.pressure[self.discretization.pressure_maps[c]]

    def divergence_coefficients(self, c):
        return self.discretization.elements[c].divergence_from_dofs(self.cell_velocity(c))


def solve(system):
    """Solve for ``(u_h, p_h)``; the viscous block is factorized once per mesh."""
    disc = system.discretization
    nu = system.nu
    g = system.boundary if system.boundary is not None else np.zeros(disc.n_velocity)
    free, fixed = disc.free, disc.fixed
    a_fb = disc.stiffness[free][:, fixed]
    b_b = disc.divergence[:, fixed]
    rhs = np.concatenate([
        system.load[free] / nu - a_fb @ g[fixed],
        b_b @ g[fixed],
        [0.0],
    ])
    x = disc.solve_saddle(rhs)
    u = g.copy()
    u[free] = x[:len(free)]
    p = nu * x[len(free):len(free) + disc.n_pressure]
    return Solution(disc, u, p)


def solve_problem(disc, problem, mode):
    system = apply_dirichlet(assemble(disc, disc.k, problem.nu, mode, problem.force),
                             problem.dirichlet)
    return solve(system)


# --------------------------------------------------------------------- errors

def error_velocity(solution, velocity_gradient):
    """``|| grad(u - Pi u_h) ||`` over the domain."""
    disc = solution.discretization
    total = 0.0
    for c, el in enumerate(disc.elements):
        pts, w = el.cell.points, el.cell.weights
        diff = np.asarray(velocity_gradient(pts)) - el.grad_projection(solution.cell_velocity(c), pts)
        total += float(np.einsum("q,qij,qij->", w, diff, diff))
    return float(np.sqrt(total))


def error_pressure(solution, pressure):
    disc = solution.discretization
    total = 0.0
    for c, el in enumerate(disc.elements):
        pts, w = el.cell.points, el.cell.weights
        diff = np.asarray(pressure(pts)) - el.eval_pressure(solution.cell_pressure(c), pts)
        total += float(w @ diff ** 2)
    return float(np.sqrt(total))


# ----------------------------------------------------------------- dual norms

def reference_load(disc, force, potential=None, potential_gradient=None):
    """Surrogate for ``int f . v``: gradient part by integration by parts,
    remainder through the enhanced degree-k projection."""
    remainder = force
    if potential is not None:
        def remainder(x):
            return np.asarray(force(x)) - np.asarray(potential_gradient(x))
    out = disc.load(RhsMode.EVEM, remainder)
    if potential is None:
        return out
    for el, idx in zip(disc.elements, disc.velocity_maps):
        pts, w = el.cell.points, el.cell.weights
        div = el.cell.eval(pts, el.k - 1) @ el.divergence_monomial
        volume = (w * np.asarray(potential(pts))) @ div
        edge_vals = np.asarray(potential(el.edge_points.reshape(-1, 2)))
        boundary = el._boundary_moment(edge_vals.reshape(el.edge_weights.shape + (1,)))[0]
        np.add.at(out, idx, boundary - volume)
    return out


def consistency_dual_norm(disc, mode, force, restrict_to_kernel=True,
                          potential=None, potential_gradient=None):
    """Discrete dual norm of ``F - F_mode`` in the unit-viscosity energy.

    With ``restrict_to_kernel`` the supremum runs over discretely
    divergence-free test functions only.
    """
    delta = reference_load(disc, force, potential, potential_gradient) - disc.load(mode, force)
    free = disc.free
    rhs = delta[free]
    if restrict_to_kernel:
        x = disc.solve_saddle(np.concatenate([rhs, np.zeros(disc.n_pressure + 1)]))
        r = x[:len(free)]
    else:
        a = disc.stiffness[free][:, free].tocsc()
        r = splu(a).solve(rhs)
    a_ff = disc.stiffness[free][:, free]
    return float(np.sqrt(max(r @ (a_ff @ r), 0.0)))
