import csv
import io
import json
import subprocess
import sys

import pytest

from mgsl.cli import main
from mgsl.fv_solver import HISTORY_COLUMNS
from mgsl.lfa import RESULT_COLUMNS, SPECTRUM_COLUMNS
from mgsl.tables import TABLE_COLUMNS


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_analyze_emits_one_row_per_combination(capsys):
    code, out, _ = run(capsys, "analyze", "--scheme", "AW3,ARK3J", "--precond", "sgs", "--d", "0.5", "--cstar", "3,10")
    assert code == 0
    assert out.splitlines()[0] == ",".join(RESULT_COLUMNS)
    r = rows(out)
    assert len(r) == 4
    assert {x["scheme"] for x in r} == {"AW3", "ARK3J"}
    assert all(0 < float(x["smoothing"]) <= float(x["rho"]) for x in r)


def test_analyze_is_deterministic(capsys):
    argv = ("analyze", "--scheme", "ARK3J", "--precond", "sgs", "--ar", "100", "--d", "0.5", "--cstar", "1000")
    assert run(capsys, *argv)[1] == run(capsys, *argv)[1]


def test_missing_required_flag_prints_usage(capsys):
    code, out, err = run(capsys, "analyze", "--scheme", "AW3")
    assert code == 2
    assert out == ""
    assert "usage:" in err and "cstar" in err


@pytest.mark.parametrize(
    "argv",
    [
        ("analyze", "--scheme", "RK7", "--cstar", "1"),
        ("analyze", "--scheme", "AW3", "--cstar", "abc"),
        ("analyze", "--scheme", "AW3", "--cstar", "1", "--d", "3"),
        ("analyze", "--scheme", "AW3", "--cstar", "1", "--state", "1,0,0,-1"),
        ("optimize", "--scheme", "AW3", "--cstar-grid", ""),
        ("tables", "no-such-table"),
        ("solve", "--scheme", "ROS3J"),
    ],
)
def test_configuration_errors_exit_2(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2
    assert err


def test_config_file_and_flag_override(capsys, tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"scheme": "AW3", "precond": "sgs", "cstar": 3, "eta": 0.8, "d": 0.5}))
    _, base, _ = run(capsys, "analyze", "--config", str(cfg))
    _, over, _ = run(capsys, "analyze", "--config", str(cfg), "--cstar", "10")
    assert rows(base)[0]["c_star"] == "3" and rows(over)[0]["c_star"] == "10"


def test_unknown_config_key_rejected(capsys, tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"scheme": "AW3", "cstar": 3, "colour": "red"}))
    code, _, err = run(capsys, "analyze", "--config", str(cfg))
    assert code == 2 and "colour" in err


def test_stability_unbounded_sentinel(capsys):
    code, out, _ = run(capsys, "stability", "--scheme", "AW3", "--precond", "sgs", "--d", "0.5", "--eta", "0.8")
    assert code == 0
    assert "unbounded" in out.splitlines()[1].split(",")


def test_stability_bisection_and_grid(capsys):
    _, out, _ = run(capsys, "stability", "--scheme", "ARK3J", "--precond", "sgs", "--d", "0.5")
    limit = float(rows(out)[0]["c_star_max"])
    assert 1.0 < limit < 1000.0
    _, out, _ = run(capsys, "stability", "--scheme", "ARK3J", "--precond", "sgs", "--d", "0.5", "--cstar-grid", "1,2,5,1000")
    assert float(rows(out)[0]["c_star_max"]) == 5.0


def test_optimize_row(capsys, tmp_path):
    dest = tmp_path / "opt.csv"
    code, out, _ = run(
        capsys, "optimize", "--scheme", "AW3", "--precond", "sgs", "--d", "0.5",
        "--cstar-grid", "2,3", "--eta-grid", "0.4,0.8", "-o", str(dest),
    )
    assert code == 0 and out == ""
    r = rows(dest.read_text())
    assert len(r) == 1 and float(r[0]["eta_opt"]) in (0.4, 0.8)


def test_spectrum_rows(capsys):
    code, out, _ = run(capsys, "spectrum", "--scheme", "AW3", "--precond", "sgs", "--cstar", "3")
    assert code == 0
    assert out.splitlines()[0] == ",".join(SPECTRUM_COLUMNS)
    assert len(rows(out)) == 64


def test_tables_list_and_small_table(capsys):
    code, out, _ = run(capsys, "tables", "--list")
    assert code == 0 and "erk-ark" in out.split() and "aw-opt-a45" in out.split()
    code, out, _ = run(capsys, "tables", "erk-ark")
    assert code == 0
    assert out.splitlines()[0] == ",".join(TABLE_COLUMNS)
    r = rows(out)
    assert len(r) == 2 * 3 * 2
    assert {x["quantity"] for x in r} == {"rho", "smoothing"}


def test_solve_history(capsys):
    code, out, err = run(capsys, "solve", "--n-x", "8", "--levels", "2", "--max-cycles", "5", "--cstar", "1000")
    assert code == 0
    assert out.splitlines()[0] == ",".join(HISTORY_COLUMNS)
    assert len(rows(out)) == 6
    assert "rate" in err


def test_solve_already_converged(capsys):
    code, out, err = run(capsys, "solve", "--n-x", "8", "--levels", "2", "--amplitude", "0")
    assert code == 0
    assert rows(out)[0]["rate_so_far"] == ""
    assert "already converged" in err


def test_solve_divergence_exit_3(capsys):
    code, _, err = run(
        capsys, "solve", "--scheme", "ERK3", "--precond", "none", "--cstar", "50", "--n-x", "8",
        "--levels", "1", "--startup-iters", "0", "--amplitude", "0.01",
    )
    assert code == 3
    assert "diverged at cycle" in err


def test_console_script_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "mgsl.cli", "tables", "--list"], capture_output=True, text=True, check=False
    )
    assert proc.returncode == 0 and "prec-ark" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "mgsl.cli", "analyze"], capture_output=True, text=True, check=False)
    assert proc.returncode == 2
