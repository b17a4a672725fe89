"""Print the unit-viscosity vorticity convergence table: ndof, velocity and
pressure errors with rates, one block per right-hand-side mode."""
import argparse

from polystokes.harness import ExperimentSpec, run_experiment
from polystokes.stokes import RhsMode


def _cell(value, fmt):
    return "-" if value is None else format(value, fmt)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--levels", type=int, default=4, help="finest level (inclusive)")
    parser.add_argument("--nu", type=float, default=1.0)
    args = parser.parse_args()

    spec = ExperimentSpec("vorticity", nus=(args.nu,), levels=tuple(range(args.levels + 1)))
    rows = run_experiment(spec)
    for mode in RhsMode:
        print(f"\n{mode.value}")
        print(f"{'ndof':>7} {'err_u':>11} {'rate':>5} {'err_p':>11} {'rate':>5}")
        for r in (r for r in rows if r.mode == mode.value):
            print(f"{r.ndof:>7} {r.err_vel:>11.3e} {_cell(r.rate_vel, '5.2f'):>5} "
                  f"{r.err_p:>11.3e} {_cell(r.rate_p, '5.2f'):>5}")


if __name__ == "__main__":
    main()
