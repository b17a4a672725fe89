"""Manufactured-solution experiments, convergence rates and CSV output."""
import csv
import math
import time
from dataclasses import dataclass, field
from itertools import groupby

import numpy as np
from numpy.polynomial import polynomial as P

from .mesh import build_paper_mesh, load_mesh
from .reconstruction import divergence_defect
from .stokes import (
    Discretization, RhsMode, StokesProblem, error_pressure, error_velocity, solve_problem,
)

CSV_COLUMNS = ("experiment", "mode", "nu", "level", "ndof", "err_vel", "rate_vel",
               "err_p", "rate_p", "seconds")
EXPERIMENTS = ("hydrostatic", "vorticity", "potflow2", "potflow3")
HYDROSTATIC_MEAN = 761.0 / 1260.0


@dataclass(frozen=True)
class ExactSolution:
    """Exact Stokes data; ``force(nu)`` returns the body force for ``nu``.

    ``potential`` is a scalar whose gradient is the irrotational part of
    the force (independent of ``nu`` in every experiment here).
    """

    name: str
    velocity: object
    velocity_gradient: object
    pressure: object
    viscous_force: object  # -Laplacian(u)
    potential: object
    potential_gradient: object

    def force(self, nu):
        def f(x):
            return nu * np.asarray(self.viscous_force(x)) + np.asarray(self.potential_gradient(x))
        return f

    def problem(self, nu):
        return StokesProblem(nu, self.force(nu), self.velocity, self.velocity,
                             self.velocity_gradient, self.pressure)


def _zero_vector(x):
    return np.zeros((len(x), 2))


def _zero_tensor(x):
    return np.zeros((len(x), 2, 2))


def hydrostatic():
    def pressure(x):
        return sum(x[:, 0] ** j * x[:, 1] ** (7 - j) for j in range(8)) - HYDROSTATIC_MEAN

    def grad(x):
        px = sum(j * x[:, 0] ** (j - 1) * x[:, 1] ** (7 - j) for j in range(1, 8))
        py = sum((7 - j) * x[:, 0] ** j * x[:, 1] ** (6 - j) for j in range(7))
        return np.column_stack([px, py])

    return ExactSolution("hydrostatic", _zero_vector, _zero_tensor, pressure,
                         _zero_vector, pressure, grad)


def vorticity():
    """Velocity = curl of X(x) Y(y) with X = x^2 (x - 1)^2 (same for Y)."""
    base = P.polymul([0, 0, 1], P.polypow([-1, 1], 2))
    d = [base] + [P.polyder(base, j) for j in range(1, 4)]

    def ev(j, t):
        return P.polyval(t, d[j])

    def velocity(x):
        X, Y = x[:, 0], x[:, 1]
        return np.column_stack([-ev(0, X) * ev(1, Y), ev(1, X) * ev(0, Y)])

    def gradient(x):
        X, Y = x[:, 0], x[:, 1]
        out = np.empty((len(x), 2, 2))
        out[:, 0, 0] = -ev(1, X) * ev(1, Y)
        out[:, 0, 1] = -ev(0, X) * ev(2, Y)
        out[:, 1, 0] = ev(2, X) * ev(0, Y)
        out[:, 1, 1] = ev(1, X) * ev(1, Y)
        return out

    def minus_laplacian(x):
        X, Y = x[:, 0], x[:, 1]
        lap_u = -(ev(2, X) * ev(1, Y) + ev(0, X) * ev(3, Y))
        lap_v = ev(3, X) * ev(0, Y) + ev(1, X) * ev(2, Y)
        return -np.column_stack([lap_u, lap_v])

    def pressure(x):
        return np.sin(2 * np.pi * x[:, 0]) * np.cos(2 * np.pi * x[:, 1])

    def pressure_gradient(x):
        sx, cx = np.sin(2 * np.pi * x[:, 0]), np.cos(2 * np.pi * x[:, 0])
        sy, cy = np.sin(2 * np.pi * x[:, 1]), np.cos(2 * np.pi * x[:, 1])
        return 2 * np.pi * np.column_stack([cx * cy, -sx * sy])

    return ExactSolution("vorticity", velocity, gradient, pressure, minus_laplacian,
                         pressure, pressure_gradient)


def potential_flow(degree):
    """Harmonic velocity ``grad`` of a degree-``degree + 1`` polynomial; the
    pressure balances the convective term of the corresponding Euler flow."""
    if degree == 2:
        def velocity(x):
            return np.column_stack([2 * x[:, 0], -2 * x[:, 1]])

        def gradient(x):
            out = np.zeros((len(x), 2, 2))
            out[:, 0, 0], out[:, 1, 1] = 2.0, -2.0
            return out

        def pressure(x):
            return 2 * x[:, 0] ** 2 + 2 * x[:, 1] ** 2 - 4.0 / 3.0

        def pressure_gradient(x):
            return np.column_stack([4 * x[:, 0], 4 * x[:, 1]])
    elif degree == 3:
        def velocity(x):
            X, Y = x[:, 0], x[:, 1]
            return np.column_stack([3 * X ** 2 - 3 * Y ** 2, -6 * X * Y])

        def gradient(x):
            X, Y = x[:, 0], x[:, 1]
            out = np.empty((len(x), 2, 2))
            out[:, 0, 0], out[:, 0, 1] = 6 * X, -6 * Y
            out[:, 1, 0], out[:, 1, 1] = -6 * Y, -6 * X
            return out

        def pressure(x):
            X, Y = x[:, 0], x[:, 1]
            return 4.5 * (X ** 4 + Y ** 4) + 9 * X ** 2 * Y ** 2 - 14.0 / 5.0

        def pressure_gradient(x):
            X, Y = x[:, 0], x[:, 1]
            return 18 * np.column_stack([X ** 3 + X * Y ** 2, Y ** 3 + X ** 2 * Y])
    else:
        raise ValueError("potential flows are defined for degree 2 and 3")
    return ExactSolution(f"potflow{degree}", velocity, gradient, pressure, _zero_vector,
                         pressure, pressure_gradient)


def exact_solution(name):
    builders = {"hydrostatic": hydrostatic, "vorticity": vorticity,
                "potflow2": lambda: potential_flow(2), "potflow3": lambda: potential_flow(3)}
    if name not in builders:
        raise ValueError(f"unknown experiment {name!r}")
    return builders[name]()


DEFAULT_NUS = {
    "hydrostatic": (1.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6),
    "vorticity": (1.0, 1e-4),
    "potflow2": (1.0, 1e-4),
    "potflow3": (1.0, 1e-4),
}
DEFAULT_LEVELS = {"hydrostatic": (2,), "vorticity": (0, 1, 2, 3, 4),
                  "potflow2": (0, 1, 2, 3), "potflow3": (0, 1, 2, 3)}


@dataclass(frozen=True)
class ExperimentSpec:
    experiment: str
    k: int = 2
    modes: tuple = tuple(RhsMode)
    nus: tuple = None
    levels: tuple = None
    exactness: int = None
    output: str = None
    mesh_file: str = None
    timing: bool = False

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.k < 2:
            raise ValueError("k must be at least 2")
        modes = tuple(RhsMode(m) for m in self.modes)
        if not modes:
            raise ValueError("at least one right-hand-side mode is required")
        object.__setattr__(self, "modes", modes)
        nus = tuple(float(v) for v in (self.nus or DEFAULT_NUS[self.experiment]))
        if not nus or any(not v > 0 for v in nus):
            raise ValueError("viscosities must be positive")
        object.__setattr__(self, "nus", nus)
        levels = tuple(int(v) for v in (self.levels if self.levels is not None
                                         else DEFAULT_LEVELS[self.experiment]))
        if not levels or any(v < 0 for v in levels):
            raise ValueError("levels must be nonnegative")
        object.__setattr__(self, "levels", levels)


@dataclass
class ResultRow:
    experiment: str
    mode: str
    nu: float
    level: int
    ndof: int
    err_vel: float
    err_p: float
    rate_vel: float = None
    rate_p: float = None
    seconds: float = None


def _mesh_for(spec, level):
    if spec.mesh_file:
        return load_mesh(spec.mesh_file, level)
    return build_paper_mesh(level)


def run_experiment(spec):
    exact = exact_solution(spec.experiment)
    rows = {}
    for level in spec.levels:
        disc = Discretization(_mesh_for(spec, level), spec.k, spec.exactness)
        for mode in spec.modes:
            for nu in spec.nus:
                start = time.perf_counter()
                sol = solve_problem(disc, exact.problem(nu), mode)
                ev = error_velocity(sol, exact.velocity_gradient)
                ep = error_pressure(sol, exact.pressure)
                elapsed = time.perf_counter() - start if spec.timing else None
                rows[(mode.value, nu, level)] = ResultRow(
                    spec.experiment, mode.value, nu, level, disc.ndof, ev, ep, seconds=elapsed)
    ordered = [rows[(m.value, nu, lv)] for m in spec.modes for nu in spec.nus
               for lv in spec.levels]
    return compute_rates(ordered)


def _rate(e0, e1, n0, n1):
    if e0 is None or e1 is None or e0 <= 0 or e1 <= 0 or n1 == n0:
        return None
    return math.log(e0 / e1) / math.log(math.sqrt(n1 / n0))


def compute_rates(rows):
    """Fill rates against ``ndof^(-1/2)`` within each (experiment, mode, nu)."""
    def key(r):
        return (r.experiment, r.mode, r.nu)

    for _, group in groupby(rows, key=key):
        group = sorted(group, key=lambda r: r.level)
        group[0].rate_vel = group[0].rate_p = None
        for prev, cur in zip(group, group[1:]):
            cur.rate_vel = _rate(prev.err_vel, cur.err_vel, prev.ndof, cur.ndof)
            cur.rate_p = _rate(prev.err_p, cur.err_p, prev.ndof, cur.ndof)
    return rows


def _fmt(value):
    return "" if value is None else f"{value:.5e}"


def emit_csv(rows, path):
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for r in rows:
                writer.writerow([r.experiment, r.mode, f"{r.nu:g}", r.level, r.ndof,
                                 _fmt(r.err_vel), _fmt(r.rate_vel), _fmt(r.err_p),
                                 _fmt(r.rate_p), _fmt(r.seconds)])
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""
    extra: dict = field(default_factory=dict)


def _check_projectors(level, k):
    mesh = build_paper_mesh(level)
    disc = Discretization(mesh, k)
    worst = 0.0
    for el in disc.elements:
        ident = np.eye(el.dof_matrix.shape[1])
        worst = max(worst, np.abs(el.projector @ el.dof_matrix - ident).max(),
                    np.abs(el.l2_projector(k, True) @ el.dof_matrix - ident).max())
    return CheckResult(f"projectors reproduce polynomials (level {level}, k={k})",
                       worst <= 1e-11, f"max deviation {worst:.2e}")


def _check_divergence_preservation(level):
    disc = Discretization(build_paper_mesh(level), 2)
    worst = max(divergence_defect(rec) for m in (0, 1) for rec in disc.reconstructions(m))
    return CheckResult(f"reconstruction preserves the divergence (level {level})",
                       worst <= 1e-10, f"max deviation {worst:.2e}")


def _check_robustness(level):
    exact = hydrostatic()
    disc = Discretization(build_paper_mesh(level), 2)
    worst = 0.0
    for mode in (RhsMode.PRVEM1, RhsMode.PRVEM0):
        for nu in (1.0, 1e-6):
            sol = solve_problem(disc, exact.problem(nu), mode)
            worst = max(worst, nu * error_velocity(sol, exact.velocity_gradient))
    return CheckResult(f"gradient forces leave the velocity at rest (level {level})",
                       worst <= 1e-10, f"max nu * error {worst:.2e}")


def _check_potential_flow(level):
    exact = potential_flow(2)
    disc = Discretization(build_paper_mesh(level), 2)
    worst = max(error_velocity(solve_problem(disc, exact.problem(1.0), mode),
                               exact.velocity_gradient)
                for mode in (RhsMode.EVEM, RhsMode.PRVEM1, RhsMode.PRVEM0))
    return CheckResult(f"quadratic potential flow is reproduced (level {level})",
                       worst <= 1e-9, f"max error {worst:.2e}")


def run_checks():
    """Quick invariant suite used by ``polystokes check``."""
    return [
        _check_projectors(0, 2), _check_projectors(0, 3), _check_projectors(1, 2),
        _check_divergence_preservation(1), _check_robustness(1), _check_potential_flow(1),
    ]
