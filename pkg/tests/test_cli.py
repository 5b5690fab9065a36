import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from rcca import cli
from rcca.errors import DataError, DegenerateError, DimensionError
from rcca.testing import METHODS
from rcca.estimators import elkaroui_estimate

DATA = cli.DATA_DIR


def write_csv(path, rows, header):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return str(path)


@pytest.fixture
def xy_files(tmp_path):
    rng = np.random.default_rng(1)
    X, Y = rng.standard_normal((5, 40)), rng.standard_normal((8, 40))
    fx = write_csv(tmp_path / "x.csv", X.T.tolist(), [f"x{i}" for i in range(5)])
    fy = write_csv(tmp_path / "y.csv", Y.T.tolist(), [f"y{i}" for i in range(8)])
    return fx, fy, X, Y


def run_main(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_fixture_prices_give_returns_matrix():
    names, R = cli.ingest_prices(DATA / "prices_10x21.csv")
    assert R.shape == (10, 20)
    assert names[0] == "S01"


def test_log_returns_by_hand(tmp_path):
    e = np.e
    f = write_csv(tmp_path / "p.csv", [["2000-01-03", 1.0], ["2000-01-04", e],
                                       ["2000-01-05", e * e]], ["date", "A"])
    _, R = cli.ingest_prices(f)
    assert R == pytest.approx(np.array([[1.0, 1.0]]), abs=1e-15)


def test_read_matrix_errors(tmp_path):
    f = write_csv(tmp_path / "m.csv", [[1, ""], [2, 3]], ["a", "b"])
    with pytest.raises(DataError, match="row 2, column 'b'"):
        cli.read_matrix(f)
    f = write_csv(tmp_path / "m2.csv", [[1, "x"]], ["a", "b"])
    with pytest.raises(DataError, match="non-numeric"):
        cli.read_matrix(f)
    f = write_csv(tmp_path / "m3.csv", [[1, -2.0], [1, 2]], ["a", "b"])
    with pytest.raises(DataError, match="non-positive"):
        cli.ingest_prices(f)
    with pytest.raises(DataError):
        cli.read_matrix(tmp_path / "missing.csv")


def test_coint_construction_indices():
    dY = np.arange(12.0).reshape(2, 6) + 1
    X, Y = cli.coint_construct(dY)
    # 1-based columns 2, 4, 6 go to X and 1, 3, 5 to Y
    assert X[0].tolist() == [2.0, 4.0, 6.0]
    assert Y[0].tolist() == [1.0, 3.0, 5.0]
    X, Y = cli.coint_construct(np.ones((2, 7)))
    assert X.shape == Y.shape == (2, 3)
    with pytest.raises(DimensionError):
        cli.coint_construct(np.ones((2, 3)))


def test_cli_test_matches_library(xy_files, tmp_path, capsys):
    fx, fy, X, Y = xy_files
    out = tmp_path / "rep.json"
    code, _, _ = run_main(["test", "--method", "sn", "--x", fx, "--y", fy, "--out", str(out)],
                          capsys)
    assert code == 0
    got = json.loads(out.read_text())
    want = json.loads(METHODS["sn"](X, Y).to_json())
    assert got.keys() == want.keys()
    for key in ("statistic_raw", "centering", "mean", "variance", "z_score", "p_value"):
        assert got[key] == pytest.approx(want[key], rel=1e-12, abs=1e-15)
    assert got["reject_at"] == want["reject_at"]


def test_cli_json_to_stdout(xy_files, capsys):
    fx, fy, X, Y = xy_files
    code, out, err = run_main(["test", "--method", "tn", "--x", fx, "--y", fy, "--t", "5"],
                              capsys)
    assert code == 0 and err == ""
    rep = json.loads(out)
    assert rep["method"] == "tn" and rep["diagnostics"]["t"] == 5.0
    assert rep["z_score"] == pytest.approx(METHODS["tn"](X, Y, t=5.0).z_score, rel=1e-12)


def test_constant_prices_fail_with_degenerate_error(tmp_path, capsys):
    rng = np.random.default_rng(0)
    P = np.exp(np.cumsum(0.01 * rng.standard_normal((30, 4)), axis=0))
    P[:, 1] = 5.0
    fx = write_csv(tmp_path / "px.csv", P.tolist(), ["a", "b", "c", "d"])
    fy = write_csv(tmp_path / "py.csv", np.exp(0.01 * rng.standard_normal((30, 6))).tolist(),
                   list("uvwxyz"))
    code, out, err = run_main(["test", "--x", fx, "--y", fy, "--prices"], capsys)
    assert code != 0 and out == ""
    msg = json.loads(err)
    assert msg["type"] == "DegenerateError" and msg["exit_code"] == code
    with pytest.raises(DegenerateError):
        cli.run(cli.config_from_args(cli.build_parser().parse_args(
            ["test", "--x", fx, "--y", fy, "--prices"])))


def test_missing_file_gives_input_exit_code(capsys):
    code, _, err = run_main(["test", "--x", "nope.csv", "--y", "nope.csv"], capsys)
    assert code == cli.EXIT_INPUT
    assert json.loads(err)["error"] == "data"


def test_regime_checked_before_computation(xy_files, capsys):
    fx, fy, _, _ = xy_files
    code, _, err = run_main(["test", "--method", "mlr", "--x", fx, "--y", fy, "--alpha", "0.05",
                             "--standardize"], capsys)
    assert code == 0
    code, _, err = run_main(["test", "--method", "sn", "--x", fx, "--y", fy, "--alpha", "0.7"],
                            capsys)
    assert code == cli.EXIT_INPUT and json.loads(err)["error"] == "parameter"


def test_coint_fixture_is_too_wide_for_classical_cca(capsys):
    # 10 series over 20 differences leave n = 10 columns per half
    code, _, err = run_main(["coint", "--x", str(DATA / "prices_10x21.csv"), "--prices"], capsys)
    assert code == cli.EXIT_INPUT
    assert json.loads(err)["error"] == "regime"


def test_coint_command_on_levels(tmp_path, capsys):
    rng = np.random.default_rng(2)
    levels = 100 + np.cumsum(rng.standard_normal((41, 4)), axis=0)
    rows = [[f"d{i}"] + list(r) for i, r in enumerate(levels)]
    f = write_csv(tmp_path / "lv.csv", rows, ["date", "a", "b", "c", "d"])
    code, out, _ = run_main(["coint", "--x", f], capsys)
    assert code == 0
    rep = json.loads(out)
    assert rep["construction"] == {"p": 4, "T": 40, "n": 20}
    assert rep["method"] == "sn"
    assert 0 <= rep["p_value"] <= 1


def test_estimate_lsd_round_trip(xy_files, capsys):
    fx, _, X, _ = xy_files
    code, out, _ = run_main(["estimate-lsd", "--x", fx], capsys)
    assert code == 0
    rep = json.loads(out)
    assert rep["p1"] == 5 and rep["n"] == 40
    assert rep["measure"] == json.loads(json.dumps(elkaroui_estimate(X).to_dict()))


def test_scan_is_reproducible_and_binned(capsys):
    argv = ["scan", "--reps", "30", "--p1", "10", "--p2", "15", "--n", "20", "--seed", "3"]
    code, first, _ = run_main(argv, capsys)
    assert code == 0
    code, second, _ = run_main(argv, capsys)
    assert first == second
    rows = list(csv.DictReader(io.StringIO(first)))
    assert [r["lo"] for r in rows[:9]] == [str(lo) for lo, _ in cli.SCAN_BINS]
    assert rows[-1]["lo"] == "unbinned"
    assert sum(int(r["count"]) for r in rows) == 30


def test_bin_pvalues_edges():
    rows = cli.bin_pvalues(np.array([0.0, 0.05, 0.55, 0.95, 1.0, 0.75]))
    counts = {r["lo"]: r["count"] for r in rows}
    assert counts[0.0] == 1 and counts[0.05] == 1 and counts[0.9] == 2
    assert counts["unbinned"] == 2


def test_simulate_writes_table_csv(tmp_path, capsys):
    out = tmp_path / "t.csv"
    code, _, _ = run_main(["simulate", "--dgp", "null_a", "--rows", "10,20,40", "--reps", "20",
                           "--out", str(out)], capsys)
    assert code == 0
    rows = list(csv.DictReader(open(out)))
    assert rows[0]["dgp"] == "null_a" and rows[0]["K"] == "20"
    code, _, err = run_main(["simulate", "--reps", "5"], capsys)
    assert code == cli.EXIT_INPUT


def test_argparse_errors_exit_two():
    res = subprocess.run([sys.executable, "-m", "rcca", "test", "--method", "bogus"],
                         capture_output=True, text=True)
    assert res.returncode == 2


def test_module_entry_point(xy_files):
    fx, fy, _, _ = xy_files
    res = subprocess.run([sys.executable, "-m", "rcca", "test", "--x", fx, "--y", fy],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout)["schema_version"] == 1
