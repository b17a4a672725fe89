import csv
import filecmp

import pytest

from polystokes.cli import main, parse_levels, SpecError
from polystokes.harness import (
    CSV_COLUMNS, ExperimentSpec, ResultRow, compute_rates, emit_csv, read_csv, run_experiment,
)
from polystokes.mesh import build_paper_mesh, load_mesh


def _row(level, ndof, err_vel, err_p=1.0, mode="cvem"):
    return ResultRow("vorticity", mode, 1.0, level, ndof, err_vel, err_p)


def test_rate_of_quartered_error():
    rows = compute_rates([_row(0, 100, 1.0), _row(1, 400, 0.25)])
    assert rows[0].rate_vel is None
    assert rows[1].rate_vel == pytest.approx(2.0)


def test_rate_from_tabulated_errors():
    rows = compute_rates([_row(3, 3171, 2.407e-2), _row(4, 12931, 6.257e-3)])
    assert rows[1].rate_vel == pytest.approx(1.92, abs=0.01)


def test_rates_are_per_mode():
    rows = compute_rates([_row(0, 100, 1.0), _row(0, 100, 2.0, mode="evem"),
                          _row(1, 400, 0.5, mode="evem")])
    assert rows[0].rate_vel is None
    assert rows[2].rate_vel == pytest.approx(2.0)


def test_single_level_has_no_rate(tmp_path):
    rows = compute_rates([_row(2, 3171, 1e-2)])
    emit_csv(rows, tmp_path / "one.csv")
    (record,) = read_csv(tmp_path / "one.csv")
    assert record["rate_vel"] == "" and record["rate_p"] == ""


def test_csv_round_trip(tmp_path):
    rows = compute_rates([_row(0, 177, 0.123456789, 0.5), _row(1, 763, 0.0312, 0.2),
                          _row(2, 3171, 0.00788, 0.07)])
    path = tmp_path / "rows.csv"
    emit_csv(rows, path)
    back = read_csv(path)
    assert list(back[0]) == list(CSV_COLUMNS)
    for r, b in zip(rows, back):
        assert int(b["ndof"]) == r.ndof and int(b["level"]) == r.level
        assert float(b["err_vel"]) == pytest.approx(r.err_vel, rel=5e-6)
        assert float(b["err_p"]) == pytest.approx(r.err_p, rel=5e-6)
        if r.rate_vel is not None:
            assert float(b["rate_vel"]) == pytest.approx(r.rate_vel, rel=1e-5)


def test_empty_rows_give_header_only(tmp_path):
    emit_csv([], tmp_path / "empty.csv")
    with open(tmp_path / "empty.csv", newline="") as fh:
        assert list(csv.reader(fh)) == [list(CSV_COLUMNS)]


def test_unwritable_path_raises(tmp_path):
    with pytest.raises(OSError):
        emit_csv([], tmp_path / "missing" / "out.csv")


def test_repeated_runs_are_identical(tmp_path):
    spec = ExperimentSpec("potflow2", levels=(0,), nus=(1.0,))
    emit_csv(run_experiment(spec), tmp_path / "a.csv")
    emit_csv(run_experiment(spec), tmp_path / "b.csv")
    assert filecmp.cmp(tmp_path / "a.csv", tmp_path / "b.csv", shallow=False)


def test_row_ordering():
    spec = ExperimentSpec("potflow2", modes=("prvem1", "cvem"), nus=(1.0, 1e-2), levels=(0, 1))
    rows = run_experiment(spec)
    keys = [(r.mode, r.nu, r.level) for r in rows]
    assert keys == [(m, nu, lv) for m in ("prvem1", "cvem") for nu in (1.0, 1e-2) for lv in (0, 1)]
    assert all(r.seconds is None for r in rows)


@pytest.mark.parametrize("kwargs", [
    dict(experiment="stokes"), dict(experiment="vorticity", k=1),
    dict(experiment="vorticity", nus=(0.0,)), dict(experiment="vorticity", levels=(-1,)),
    dict(experiment="vorticity", modes=()), dict(experiment="vorticity", modes=("fem",)),
])
def test_invalid_specs(kwargs):
    with pytest.raises(ValueError):
        ExperimentSpec(**kwargs)


def test_default_grid():
    spec = ExperimentSpec("hydrostatic")
    assert spec.levels == (2,) and len(spec.nus) == 7 and len(spec.modes) == 4


def test_level_ranges():
    assert parse_levels("0..4") == (0, 1, 2, 3, 4)
    assert parse_levels("1,3") == (1, 3)
    with pytest.raises(SpecError):
        parse_levels("a..b")


def test_cli_run(tmp_path):
    out = tmp_path / "r.csv"
    code = main(["run", "--experiment", "potflow2", "--modes", "prvem1", "--nu", "1",
                 "--levels", "0..1", "--out", str(out)])
    assert code == 0
    rows = read_csv(out)
    assert [r["level"] for r in rows] == ["0", "1"]
    assert float(rows[1]["err_vel"]) < 1e-9


@pytest.mark.parametrize("argv", [
    ["--modes", "fem"], ["--nu", "-1"], ["--levels", "x"], ["--k", "1"],
    ["--mesh-file", "/nonexistent/mesh.txt"],
])
def test_cli_invalid_spec(argv, tmp_path):
    base = ["run", "--experiment", "potflow2", "--out", str(tmp_path / "r.csv")]
    assert main(base + argv) == 3


def test_cli_mesh(tmp_path):
    out = tmp_path / "m.txt"
    assert main(["mesh", "--level", "1", "--out", str(out)]) == 0
    mesh = load_mesh(out, 1)
    assert mesh.n_cells == build_paper_mesh(1).n_cells


def test_cli_mesh_file_run(tmp_path):
    mesh_path = tmp_path / "m.txt"
    main(["mesh", "--level", "0", "--out", str(mesh_path)])
    out = tmp_path / "r.csv"
    assert main(["run", "--experiment", "potflow2", "--modes", "evem", "--nu", "1",
                 "--levels", "0", "--mesh-file", str(mesh_path), "--out", str(out)]) == 0
    assert read_csv(out)[0]["ndof"] == "177"


def test_cli_check(capsys):
    assert main(["check"]) == 0
    assert "FAIL" not in capsys.readouterr().out


def test_classical_pressure_rate_on_coarse_meshes():
    rows = run_experiment(ExperimentSpec("vorticity", modes=("cvem",), nus=(1.0,), levels=(0, 1)))
    assert [r.ndof for r in rows] == [177, 763]
    assert 0.9 <= rows[1].rate_p <= 1.4


def test_hydrostatic_classical_magnitude():
    rows = run_experiment(ExperimentSpec("hydrostatic", modes=("cvem",), nus=(1.0, 1e-6)))
    assert 1e-3 <= rows[0].err_vel <= 1e-2
    assert rows[1].err_vel / rows[0].err_vel == pytest.approx(1e6, rel=0.01)
