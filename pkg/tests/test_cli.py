import json
import os
import random
import subprocess
import sys

import pytest

from demkov.cli import GridAxis, UsageError, main, read_csv_table
from demkov.core import ModelParams, final_inversion, time_series
from demkov.oracle import oracle_w_infinity

REF = ["--gamma", "0.1", "--delta", "1.5", "--omega", "25"]


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_evolve_csv(tmp_path, capsys):
    path = tmp_path / "traj.csv"
    code, _, _ = run(["evolve", *REF, "--t-min", "-5", "--t-max", "5", "--n", "11", "-o", str(path)], capsys)
    assert code == 0
    header, rows = read_csv_table(str(path))
    assert header == ["t", "u", "v", "w"] and len(rows) == 11
    ts = time_series(ModelParams.from_reduced(0.1, 1.5, 25), -5, 5, 11)
    assert [r[3] for r in rows] == [s.w for s in ts.states]
    assert not [f for f in os.listdir(tmp_path) if f.endswith(".tmp")]


def test_evolve_without_pulse(capsys):
    code, out, _ = run(["evolve", "--delta", "1", "--omega", "0", "--n", "5"], capsys)
    assert code == 0
    assert {line.split(",")[3] for line in out.splitlines()[1:]} == {"-1"}


def test_json_output(capsys):
    code, out, _ = run(["evolve", *REF, "--n", "3", "--format", "json"], capsys)
    records = json.loads(out)
    assert code == 0 and [r["t"] for r in records] == [-10, 0, 10]


def test_inversion(capsys):
    code, out, err = run(["inversion", "--delta", "1", "--omega", "0"], capsys)
    assert code == 0 and out.splitlines()[1].startswith("-1,0,0,trivial")
    code, out, err = run(["inversion", "--gamma", "0.1", "--delta", "0", "--omega", "5"], capsys)
    assert "route: resonant" in err and out.strip().endswith("resonant")
    code, out, _ = run(["inversion", "--detuning", "3", "--rabi0", "50", "--dephasing", "0.2"], capsys)
    phys = float(out.splitlines()[1].split(",")[0])
    assert phys == pytest.approx(-0.32183565871194225, abs=1e-13)


@pytest.mark.parametrize(
    "argv",
    [
        ["inversion", "--gamma", "0.1", "--delta", "1", "--omega", "1", "--rabi0", "2"],
        ["inversion", "--gamma", "0.1", "--delta", "1"],
        ["inversion", "--delta", "1", "--omega", "1", "--bogus"],
        ["frobnicate"],
        ["sweep", "--gamma", "0.1", "--omega", "1", "--grid", "delta=1:2"],
        ["sweep", "--gamma", "0.1", "--omega", "1", "--grid", "delta=0:2:3:log"],
        ["sweep", "--omega", "1"],
        ["sweep", "--delta", "1", "--omega", "1", "--grid", "delta=1:2:3"],
        ["evolve", *REF, "--n", "1"],
        ["evolve", *REF, "--t-min", "3", "--t-max", "1"],
        ["resonant", "--delta", "0.5", "--omega", "1"],
        ["inversion", "--delta", "1", "--omega", "-1"],
        ["inversion", *REF, "--target-rel-error", "2"],
    ],
)
def test_usage_errors(argv, capsys):
    assert run(argv, capsys)[0] == 1


def test_bad_env_is_usage_error(monkeypatch, capsys):
    monkeypatch.setenv("DEMKOV_PRECISION_DIGITS", "many")
    assert run(["inversion", *REF], capsys)[0] == 1


def test_precision_env_changes_nothing_visible(monkeypatch, capsys):
    _, base, _ = run(["inversion", *REF], capsys)
    monkeypatch.setenv("DEMKOV_PRECISION_DIGITS", "40")
    _, more, _ = run(["inversion", *REF], capsys)
    assert float(more.splitlines()[1].split(",")[0]) == pytest.approx(
        float(base.splitlines()[1].split(",")[0]), abs=1e-14
    )


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# reference settings\ngamma = 0.1\ndelta=1.5\nomega=25\nt-min=-1\nt_max=1\nn=3\n")
    code, out, _ = run(["evolve", "--config", str(cfg), "--n", "5"], capsys)
    assert code == 0 and len(out.splitlines()) == 6
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour=blue\n")
    assert run(["evolve", "--config", str(bad)], capsys)[0] == 1
    assert run(["evolve", "--config", str(tmp_path / "missing.cfg")], capsys)[0] == 1


def test_grid_axis():
    ax = GridAxis.parse("omega=0.1:10:3:log")
    assert ax.values() == pytest.approx([0.1, 1.0, 10.0]) and ax.values()[-1] == 10.0
    assert GridAxis.parse("delta=1:1:1").values() == [1.0]
    with pytest.raises(UsageError):
        GridAxis.parse("delta=1:2:0")


def test_sweep_single_point_equals_inversion(capsys):
    _, inv, _ = run(["inversion", *REF], capsys)
    _, sw, _ = run(["sweep", "--gamma", "0.1", "--omega", "25", "--grid", "delta=1.5:1.5:1"], capsys)
    assert sw.splitlines()[1] == "1.5," + inv.splitlines()[1]


def test_sweep_order_and_physicality(capsys):
    code, out, _ = run(["sweep", "--delta", "1.5", "--grid", "gamma=0:1:4", "--grid", "omega=0.5:5:3"], capsys)
    lines = out.splitlines()
    assert code == 0 and lines[0] == "gamma,omega,w_inf,p,est_error,route"
    keys = [tuple(map(float, line.split(",")[:2])) for line in lines[1:]]
    assert keys == sorted(keys) and len(keys) == 12
    assert all(-1.0 <= float(line.split(",")[2]) <= 1.0 for line in lines[1:])


def test_sweep_parallel_matches_serial(capsys):
    argv = ["sweep", "--gamma", "0.1", "--grid", "delta=0.5:3:3", "--grid", "omega=1:5:2"]
    _, serial, _ = run(argv, capsys)
    _, parallel, _ = run(argv + ["--jobs", "2"], capsys)
    assert serial == parallel


def test_sweep_oracle_audit(tmp_path, capsys):
    path = tmp_path / "sweep.csv"
    code, _, _ = run(
        ["sweep", "--gamma", "0.1", "--grid", "delta=0.1:3:20", "--grid", "omega=0.1:25:20:log", "-o", str(path)],
        capsys,
    )
    assert code == 0
    _, rows = read_csv_table(str(path))
    assert len(rows) == 400
    for row in random.Random(7).sample(rows, 10):
        ref = oracle_w_infinity(ModelParams.from_reduced(0.1, row[0], row[1]))
        assert abs(row[2] - ref) <= 1e-6


def test_numerical_failure_writes_nothing(tmp_path, capsys):
    path = tmp_path / "out.csv"
    code, _, err = run(["sweep", "--gamma", "0.1", "--omega", "25", "--grid", "delta=1:2:2",
                        "--max-terms", "3", "-o", str(path)], capsys)
    assert code == 2 and "numerical failure" in err
    assert os.listdir(tmp_path) == []


def test_compare(tmp_path, capsys):
    path = tmp_path / "cmp.json"
    code, _, err = run(["compare", *REF, "--n", "51", "--format", "json", "-o", str(path)], capsys)
    rep = json.loads(path.read_text())
    assert code == 0 and rep["passed"] and "pass" in err
    assert rep["sup_norm"] == max(p["abs_diff"] for p in rep["points"])
    code, out, _ = run(["compare", "--delta", "1", "--omega", "0", "--n", "11"], capsys)
    assert code == 0 and {line.split(",")[3] for line in out.splitlines()[1:]} == {"0"}


def test_compare_loosened_policy_fails(capsys):
    code, _, err = run(["compare", *REF, "--n", "51", "--target-rel-error", "1e-2"], capsys)
    assert code == 3 and "FAIL" in err


def test_resonant_command(capsys):
    code, out, err = run(["resonant", "--omega", "1", "--n", "3"], capsys)
    assert code == 0 and "route: resonant" in err
    assert out.splitlines()[2].split(",")[1] == "0"


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "demkov", "inversion", *REF], capture_output=True, text=True, check=False
    )
    assert proc.returncode == 0
    assert float(proc.stdout.splitlines()[1].split(",")[0]) == final_inversion(
        ModelParams.from_reduced(0.1, 1.5, 25)
    ).w_inf
