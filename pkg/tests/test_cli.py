import subprocess
import sys
import textwrap

import pytest

from fairmac.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main

SMALL = textwrap.dedent("""
    [run]
    scheduler = ucb
    n = 2
    m = 2
    T = 200
    seeds = 1
    output = out

    [utility]
    kind = log_prop

    [segment]
    q = [[0.9, 0.1], [0.2, 0.8]]
""")


@pytest.fixture
def small(tmp_path):
    p = tmp_path / "small.cfg"
    p.write_text(SMALL)
    return p


def test_run(small, capsys):
    assert main(["run", str(small)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "wrote 1 trace" in out
    assert (small.parent / "out" / "ucb_seed1.csv").exists()


def test_run_output_flag_and_seeds(small, tmp_path):
    assert main(["run", str(small), "-o", str(tmp_path / "x"), "--seeds", "3", "4", "--raw"]) == EXIT_OK
    assert (tmp_path / "x" / "ucb_seed4.csv").exists()
    assert len((tmp_path / "x" / "ucb_seed3.csv").read_text().splitlines()) == 201


def test_oracle(small, capsys):
    assert main(["oracle", str(small)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "phi* = " in out and "P* =" in out and "gamma* =" in out


def test_scenarios_list_and_show(capsys):
    assert main(["scenarios", "list"]) == EXIT_OK
    out = capsys.readouterr().out
    assert [line.split()[0] for line in out.splitlines()] == ["scenario1", "scenario2", "scenario3", "scenario4"]
    assert main(["scenarios", "show", "scenario2"]) == EXIT_OK
    assert "[segment]" in capsys.readouterr().out


def test_config_error_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.cfg"
    p.write_text(SMALL.replace("n = 2", "n = 2\nbogus = 1"))
    assert main(["run", str(p)]) == EXIT_CONFIG
    assert "line" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.cfg")]) == EXIT_CONFIG


def test_runtime_error_exit_code(tmp_path, capsys):
    p = tmp_path / "big.cfg"
    q = "[" + ", ".join(["[0.5, 0.5]"] * 8) + "]"
    p.write_text(SMALL.replace("n = 2", "n = 8").replace("[[0.9, 0.1], [0.2, 0.8]]", q))
    assert main(["oracle", str(p)]) == EXIT_RUNTIME
    assert "exceeds" in capsys.readouterr().err


def test_module_entry_point(small):
    r = subprocess.run([sys.executable, "-m", "fairmac", "scenarios", "list"], capture_output=True, text=True)
    assert r.returncode == 0 and "scenario1" in r.stdout
