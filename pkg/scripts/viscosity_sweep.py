"""Velocity error of the gradient-force (hydrostatic) problem across viscosities.

The classical and enhanced loads grow like 1/nu; the reconstructed loads stay
at roundoff level."""
import argparse

from polystokes.harness import ExperimentSpec, run_experiment


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--level", type=int, default=2)
    args = parser.parse_args()

    nus = tuple(10.0 ** -j for j in range(7))
    rows = run_experiment(ExperimentSpec("hydrostatic", nus=nus, levels=(args.level,)))
    modes = list(dict.fromkeys(r.mode for r in rows))
    print(f"{'nu':>7} " + " ".join(f"{m:>11}" for m in modes))
    for nu in nus:
        errs = {r.mode: r.err_vel for r in rows if r.nu == nu}
        print(f"{nu:>7.0e} " + " ".join(f"{errs[m]:>11.3e}" for m in modes))


if __name__ == "__main__":
    main()
