import csv
import json
import shutil
import subprocess
import sys

import pytest

from sitnikov import __version__, build_circular_polygon
from sitnikov.cli import main


def _rows(path):
    lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
    return list(csv.DictReader(lines))


def test_certify_builtin(tmp_path):
    assert main(["certify", "--builtin", "circular:2", "--out", str(tmp_path)]) == 0
    cert = json.loads((tmp_path / "certificate.json").read_text())
    assert cert["certificate"]["passed"] and cert["version"] == __version__
    assert len(cert["config_hash"]) == 16
    # the ensemble file feeds later commands
    assert main(["bounds", "--ensemble", str(tmp_path / "ensemble.json"), "--out", str(tmp_path)]) == 0
    b = json.loads((tmp_path / "bounds.json").read_text())["bounds"]
    assert b["m"] == pytest.approx(33.0) and b["M"] == pytest.approx(33.0)


def test_certify_file(tmp_path):
    ens = build_circular_polygon(4)
    ens.to_table(128).write(tmp_path / "t.csv", tmp_path / "t.json", ens.symmetry)
    assert main(["certify", "--file", str(tmp_path / "t.csv"), "--spec", str(tmp_path / "t.json"),
                 "--out", str(tmp_path / "o")]) == 0
    data = json.loads((tmp_path / "t.json").read_text())
    data["masses"][0] *= 1.01
    (tmp_path / "t.json").write_text(json.dumps(data))
    code = main(["certify", "--file", str(tmp_path / "t.csv"), "--spec", str(tmp_path / "t.json"),
                 "--out", str(tmp_path / "bad")])
    assert code == 2
    cert = json.loads((tmp_path / "bad" / "certificate.json").read_text())["certificate"]
    assert not cert["passed"] and cert["max_mass_residual"] > 1e-3


def test_input_errors(tmp_path):
    (tmp_path / "m.csv").write_text("time,x1\n0,1\n")
    (tmp_path / "m.json").write_text('{"masses": [1]}')
    assert main(["certify", "--file", str(tmp_path / "m.csv"), "--spec", str(tmp_path / "m.json"),
                 "--out", str(tmp_path)]) == 2
    assert main(["certify", "--builtin", "kepler:1.2", "--out", str(tmp_path)]) == 2
    assert main(["certify", "--builtin", "torus:3", "--out", str(tmp_path)]) == 2
    assert main(["certify", "--out", str(tmp_path)]) == 2
    assert main(["seed", "--builtin", "circular:2", "--p", "0", "--out", str(tmp_path)]) == 2
    with pytest.raises(SystemExit) as info:
        main(["seed", "--p", "x"])
    assert info.value.code == 2


def test_seed_and_period_table(tmp_path):
    assert main(["seed", "--builtin", "circular:2", "--p", "5", "--out", str(tmp_path)]) == 0
    seed = json.loads((tmp_path / "seed_p5_q1.json").read_text())["seed"]
    assert seed["zero_count"] == 10
    assert _rows(tmp_path / "seed_p5_q1.csv")[0].keys() == {"t", "z", "zdot"}
    assert main(["seed", "--builtin", "circular:2", "--p", "7", "--out", str(tmp_path)]) == 1
    assert main(["period-table", "--builtin", "circular:2", "--n-energies", "12",
                 "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "period_table.csv")
    T = [float(r["T"]) for r in rows]
    assert len(rows) == 12 and all(a < b for a, b in zip(T, T[1:]))


def test_pipeline_circular(tmp_path):
    code = main(["pipeline", "--builtin", "circular:2", "--p", "1", "3", "5", "7",
                 "--out", str(tmp_path), "--p-max", "6"])
    assert code == 0
    rows = {int(r["p"]): r for r in _rows(tmp_path / "summary.csv")}
    for p in (1, 3, 5):
        assert rows[p]["status"] == "ReachedLambdaOne" and rows[p]["verified"] == "True"
        assert int(rows[p]["zero_count"]) == 2 * p
    assert rows[7]["status"] == "NoSeed" and rows[7]["reason"] == "p > sqrt(beta)*q"
    for lam in ("0", "0.5", "1"):
        rep = json.loads((tmp_path / f"spectrum_q1_lam{lam}.json").read_text())
        assert rep["report"]["p_max"] == 6
    head = json.loads((tmp_path / "branch_p3_q1.jsonl").read_text().splitlines()[0])
    assert head["run"]["config_hash"] == json.loads((tmp_path / "summary.json").read_text())["config_hash"]


def test_pipeline_reproducible(tmp_path):
    args = ["pipeline", "--builtin", "kepler:0.2", "--p", "1", "--p-max", "3"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b"), "--threads", "2"]) == 0
    for f in sorted((tmp_path / "a").iterdir()):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes(), f.name


def test_pipeline_partial_failure(tmp_path):
    code = main(["pipeline", "--builtin", "circular:2", "--p", "1", "2", "--p-max", "2",
                 "--out", str(tmp_path)])
    assert code == 1
    rows = {int(r["p"]): r for r in _rows(tmp_path / "summary.csv")}
    assert rows[1]["status"] == "ReachedLambdaOne"
    assert rows[2]["status"] == "AntiperiodicityUnattainable"
    assert (tmp_path / "branch_p1_q1.jsonl").exists()


def test_continue_spectrum_verify(tmp_path):
    assert main(["continue", "--builtin", "kepler:0.1", "--p", "1", "--out", str(tmp_path)]) == 0
    v = json.loads((tmp_path / "verify_p1_q1.json").read_text())
    assert v["report"]["passed"]
    zeta = v["zeta"]
    assert main(["verify", "--builtin", "kepler:0.1", "--p", "1", "--zeta", repr(zeta),
                 "--out", str(tmp_path / "v")]) == 0
    assert main(["verify", "--builtin", "kepler:0.1", "--p", "1", "--zeta", repr(zeta * 1.1),
                 "--out", str(tmp_path / "v2")]) == 1
    assert main(["spectrum", "--builtin", "kepler:0.5", "--lambdas", "1", "--p-max", "3",
                 "--out", str(tmp_path / "s")]) == 0
    rep = json.loads((tmp_path / "s" / "spectrum_q1_lam1.json").read_text())
    assert len(rep["report"]["etas"]) == 4 and len(rep["verdicts"]) == 4


def test_nbody(tmp_path):
    assert main(["nbody", "--builtin", "circular:3", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "nbody.json").read_text())
    assert rep["closure_residual"] < 1e-9
    ic = {"masses": [0.5, 0.5], "positions": [[0.3, 0], [-0.3, 0]], "velocities": [[0, 0], [0, 0]]}
    (tmp_path / "ic.json").write_text(json.dumps(ic))
    assert main(["nbody", "--ic", str(tmp_path / "ic.json"), "--out", str(tmp_path)]) == 1


@pytest.mark.skipif(shutil.which("sitnikov") is None, reason="console script not installed")
def test_console_script(tmp_path):
    res = subprocess.run(["sitnikov", "certify", "--builtin", "kepler:0.3", "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "certified" in res.stdout
    res = subprocess.run([sys.executable, "-m", "sitnikov.cli", "--version"], capture_output=True, text=True)
    assert res.stdout.strip() == __version__
