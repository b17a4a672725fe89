"""Command line entry point: ``polystokes run|mesh|check``."""
import argparse
import sys

from .errors import PolystokesError, SolverFailure
from .harness import EXPERIMENTS, ExperimentSpec, emit_csv, run_checks, run_experiment
from .mesh import build_paper_mesh, save_mesh
from .stokes import RhsMode

EXIT_OK, EXIT_CHECK_FAILED, EXIT_SOLVER, EXIT_SPEC = 0, 1, 2, 3


class SpecError(ValueError):
    pass


def parse_levels(text):
    """``"0..4"``, ``"1,3"`` or ``"2"`` -> tuple of levels."""
    try:
        if ".." in text:
            lo, hi = text.split("..")
            levels = tuple(range(int(lo), int(hi) + 1))
        else:
            levels = tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise SpecError(f"bad level range {text!r}") from None
    if not levels:
        raise SpecError(f"empty level range {text!r}")
    return levels


def parse_floats(text):
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise SpecError(f"bad number list {text!r}") from None


def parse_modes(text):
    try:
        return tuple(RhsMode.parse(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise SpecError(f"bad mode list {text!r}") from None


def build_parser():
    parser = argparse.ArgumentParser(prog="polystokes",
                                     description="Divergence-free virtual element Stokes solver")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment and write a CSV table")
    run.add_argument("--experiment", required=True, choices=EXPERIMENTS)
    run.add_argument("--modes", default="cvem,evem,prvem1,prvem0")
    run.add_argument("--nu", default=None, help="comma-separated viscosities")
    run.add_argument("--levels", default=None, help="e.g. 0..4 or 1,2")
    run.add_argument("--k", type=int, default=2)
    run.add_argument("--out", required=True)
    run.add_argument("--mesh-file", default=None)
    run.add_argument("--quad-exactness", type=int, default=None)
    run.add_argument("--timing", action="store_true", help="fill the seconds column")

    mesh = sub.add_parser("mesh", help="write a composite mesh to a file")
    mesh.add_argument("--level", type=int, required=True)
    mesh.add_argument("--out", required=True)

    sub.add_parser("check", help="run the quick invariant suite")
    return parser


def _run(args):
    try:
        spec = ExperimentSpec(
            args.experiment, k=args.k, modes=parse_modes(args.modes),
            nus=parse_floats(args.nu) if args.nu else None,
            levels=parse_levels(args.levels) if args.levels else None,
            exactness=args.quad_exactness, output=args.out, mesh_file=args.mesh_file,
            timing=args.timing)
    except ValueError as exc:
        print(f"invalid experiment spec: {exc}", file=sys.stderr)
        return EXIT_SPEC
    try:
        rows = run_experiment(spec)
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (PolystokesError, OSError) as exc:
        print(f"invalid experiment spec: {exc}", file=sys.stderr)
        return EXIT_SPEC
    emit_csv(rows, spec.output)
    return EXIT_OK


def _mesh(args):
    if args.level < 0:
        print("level must be nonnegative", file=sys.stderr)
        return EXIT_SPEC
    save_mesh(build_paper_mesh(args.level), args.out)
    return EXIT_OK


def _check(_args):
    ok = True
    for result in run_checks():
        print(f"{'PASS' if result.passed else 'FAIL'}  {result.name}: {result.detail}")
        ok &= result.passed
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def main(argv=None):
    args = build_parser().parse_args(argv)
    handler = {"run": _run, "mesh": _mesh, "check": _check}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
