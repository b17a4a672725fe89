"""Run every experiment on its default grid and write one CSV per experiment."""
import argparse
import pathlib
import time

from polystokes.harness import EXPERIMENTS, ExperimentSpec, emit_csv, run_experiment


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="results")
    parser.add_argument("--experiments", nargs="+", default=list(EXPERIMENTS), choices=EXPERIMENTS)
    parser.add_argument("--max-level", type=int, default=None,
                        help="drop levels above this one (quick runs)")
    args = parser.parse_args()

    out = pathlib.Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name in args.experiments:
        spec = ExperimentSpec(name)
        if args.max_level is not None:
            spec = ExperimentSpec(name, levels=[lv for lv in spec.levels if lv <= args.max_level]
                                  or [min(spec.levels)])
        start = time.perf_counter()
        rows = run_experiment(spec)
        emit_csv(rows, out / f"{name}.csv")
        print(f"{name}: {len(rows)} rows in {time.perf_counter() - start:.1f}s -> {out / name}.csv")


if __name__ == "__main__":
    main()
