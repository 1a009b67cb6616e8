import json
import subprocess
import sys

import numpy as np
import pytest

from hardylab import __version__
from hardylab._io import read_csv
from hardylab.cli import main


def run(capsys, tmp_path, *argv, name="out"):
    out = tmp_path / name
    code = main([*argv, "--out", str(out)])
    text = capsys.readouterr().out
    return code, json.loads(text) if text.strip() else None, out


@pytest.mark.parametrize("weight, expect", [
    ("power:0.5", {"class": "Q", "admissible": "Admissible"}),
    ("exppow:-1,1", {"class": "P", "admissible": "NotAdmissible", "doubling": "NonDoubling"}),
    ("const:1", {"class": "Q", "doubling": "Doubling", "C": 1.0}),
])
def test_classify(capsys, tmp_path, weight, expect):
    code, doc, out = run(capsys, tmp_path, "classify", "--weight", weight)
    assert code == 0
    for k, v in expect.items():
        assert doc[k] == v
    assert json.loads((out / "classify.json").read_text()) == doc


def test_exit_codes(capsys, tmp_path):
    code, doc, _ = run(capsys, tmp_path, "classify", "--weight", "expr:1+sin(1/t)*t^2")
    assert code == 2 and "inconclusive" in doc
    code = main(["classify", "--weight", "power:x", "--out", str(tmp_path / "bad")])
    assert code == 1
    assert "error" in capsys.readouterr().err


def test_profile_power_two(capsys, tmp_path):
    code, doc, out = run(capsys, tmp_path, "profile", "--weight", "power:2", "--mu", "auto")
    assert code == 0 and doc["class"] == "P"
    header, rows = read_csv(out / "profile.csv")
    t, F = np.array(rows)[:, 0], np.array(rows)[:, header.index("F")]
    assert np.max(np.abs(F / t - 1)) < 1e-8


def test_profile_constant(capsys, tmp_path):
    code, doc, out = run(capsys, tmp_path, "profile", "--weight", "const:1")
    header, rows = read_csv(out / "profile.csv")
    a = np.array(rows)
    t, G = a[:, 0], a[:, header.index("G")]
    assert np.allclose(G, doc["mu"] + np.log(doc["eta"] / t), rtol=1e-10)


def test_profile_asymptotics(capsys, tmp_path):
    code, doc, _ = run(capsys, tmp_path, "profile", "--weight", "exppow:1,0.5", "--eta", "0.25")
    assert doc["asymptotics"]["exponent"] == pytest.approx(1.5, abs=0.05)


def test_minimize(capsys, tmp_path):
    code, doc, out = run(capsys, tmp_path, "minimize", "--weight", "const:1", "--p", "2",
                         "--lambda", "0", "--domain", "interval:1")
    assert code == 0
    assert 0.25 <= doc["result"]["J_estimate"] <= 0.35
    header, rows = read_csv(out / "minimizer.csv")
    assert header == ["x", "delta", "u"] and len(rows) == doc["n_cells"] + 1


def test_lambda_star(capsys, tmp_path):
    code, doc, out = run(capsys, tmp_path, "lambda-star", "--weight", "const:1", "--p", "2",
                         "--n", "100", "--levels", "2")
    rep = doc["report"]
    lo, hi = rep["bracket"]
    assert code == 0 and -10 < lo < hi < 50
    header, rows = read_csv(out / "J_curve.csv")
    rows.sort()
    for k in range(1, len(header)):
        col = [r[k] for r in rows]
        assert all(b <= a + 1e-9 for a, b in zip(col, col[1:]))


def test_ueps(capsys, tmp_path):
    code, doc, out = run(capsys, tmp_path, "ueps", "--weight", "const:1", "--p", "2",
                         "--eps", "0.01,0.001")
    q = [r["quotient"] for r in doc["table"]]
    assert 0.25 < q[1] < q[0] and q[1] - 0.25 < 0.005
    assert all(r["closed_vs_direct"] < 1e-8 for r in doc["table"])


def test_outputs_are_reproducible(capsys, tmp_path):
    argv = ["minimize", "--n", "64", "--seed", "3"]
    main([*argv, "--out", str(tmp_path / "a")])
    main([*argv, "--out", str(tmp_path / "b")])
    capsys.readouterr()
    for f in ("minimize.json", "minimizer.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_config_file_with_override(capsys, tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"weight": "power:0.5", "n": 64, "lambda": 2.0}))
    code, doc, out = run(capsys, tmp_path, "minimize", "--config", str(cfg), "--lambda", "1")
    c = doc["config"]
    assert c["weight"] == "power:0.5" and c["n"] == 64 and c["lam"] == 1.0
    lines = (out / "minimizer.csv").read_text().splitlines()
    assert lines[0] == f"# hardylab {__version__}"
    assert json.loads(lines[1][len("# config "):]) == c
    assert doc["version"] == __version__
    cfg.write_text(json.dumps({"wieght": "const:1"}))
    assert main(["minimize", "--config", str(cfg), "--out", str(tmp_path / "x")]) == 1


def test_csv_round_trips_exactly(capsys, tmp_path):
    _, doc, out = run(capsys, tmp_path, "ueps", "--eps", "0.01,0.001")
    header, rows = read_csv(out / "ueps.csv")
    for r, row in zip(doc["table"], rows):
        assert [r[k] for k in header] == row


def test_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "hardylab", "classify", "--weight", "const:1",
                        "--out", str(tmp_path)], capture_output=True, text=True)
    assert r.returncode == 0 and json.loads(r.stdout)["class"] == "Q"
