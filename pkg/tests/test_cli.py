import json
import subprocess
import sys

import pytest

from posmg import catalog
from posmg.cli import RunConfig, main
from posmg.model import model_to_dict


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_validate_exit_codes(m1, tmp_path, write_model, capsys):
    code, out, _ = run(["validate", write_model(m1)], capsys)
    assert code == 0
    assert json.loads(out)["ok"] is True

    data = model_to_dict(m1)
    data["kernel"][0]["p"] = 0.9
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(data))
    code, out, _ = run(["validate", str(bad)], capsys)
    assert code == 1
    assert "kernel-mass" in {i["code"] for i in json.loads(out)["issues"]}

    code, _, err = run(["validate", str(tmp_path / "nope.json")], capsys)
    assert code == 2 and "cannot read" in err


def test_solve_values(m1, write_model, capsys):
    code, out, _ = run(["solve", write_model(m1)], capsys)
    assert code == 0 and json.loads(out)["value"] == 0.5
    neg = catalog.random_model(3, goals=(-1,))
    code, out, _ = run(["solve", write_model(neg, "neg.json")], capsys)
    assert json.loads(out)["value"] == 0.0
    zero = catalog.random_model(3, rates=(0,), goals=(2,))
    code, out, _ = run(["solve", write_model(zero, "zero.json"), "--full-tables"], capsys)
    doc = json.loads(out)
    assert doc["value"] == 1.0 and "policies" in doc and "value_table" in doc


def test_solve_invalid_model_and_cap(m1, m2, tmp_path, write_model, capsys):
    data = model_to_dict(m1)
    data["reward_rate"][0]["rate"] = -1
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(data))
    code, _, err = run(["solve", str(bad)], capsys)
    assert code == 1
    code, _, err = run(["solve", write_model(m2), "--cap", "2"], capsys)
    assert code == 1 and "cap" in err


def test_evaluate_full_table_and_malformed(m1, tmp_path, write_model, capsys):
    path = write_model(m1)
    full = tmp_path / "full.json"
    assert main(["solve", path, "--full-tables", "--out", str(full)]) == 0
    code, out, _ = run(["evaluate", path, "--p1", str(full), "--p2", str(full)], capsys)
    assert code == 0 and json.loads(out)["value"] == 0.5
    junk = tmp_path / "junk.json"
    junk.write_text('{"policy": 3}')
    code, _, _ = run(["evaluate", path, "--p1", str(junk), "--p2", str(full)], capsys)
    assert code == 2


def test_simulate(m1, tmp_path, write_model, capsys):
    path = write_model(m1)
    full = tmp_path / "full.json"
    main(["solve", path, "--full-tables", "--out", str(full)])
    code, out, _ = run(["simulate", path, "--p1", str(full), "--p2", str(full),
                        "--n", "100000", "--seed", "2"], capsys)
    est = json.loads(out)
    assert code == 0 and abs(est["mean"] - 0.5) <= 3 * est["stderr"]
    code, out, _ = run(["simulate", path, "--p1", str(full), "--p2", str(full), "--n", "1"], capsys)
    assert json.loads(out)["mean"] in (0.0, 1.0)


def test_trace(m1, tmp_path, write_model, capsys):
    path = write_model(m1)
    hist = tmp_path / "h.json"
    hist.write_text("[]")
    code, out, _ = run(["trace", path, "--history", str(hist)], capsys)
    lines = out.strip().splitlines()
    assert code == 0 and len(lines) == 1
    assert json.loads(lines[0]) == [{"y": "y0", "lambda": "1/1", "w": 0.5},
                                    {"y": "y1", "lambda": "1/1", "w": 0.5}]

    hist.write_text(json.dumps([{"a": "a", "b": "b", "theta": 1, "x_next": "x0"}]))
    code, out, _ = run(["trace", path, "--history", str(hist)], capsys)
    lines = out.strip().splitlines()
    assert json.loads(lines[1]) == [{"y": "y0", "lambda": "1/1", "w": 0.5},
                                    {"y": "y1", "lambda": "-1/1", "w": 0.5}]

    hist.write_text(json.dumps({"x0": "x0", "steps": [["a", "b", 2, "x0"]]}))
    code, _, err = run(["trace", path, "--history", str(hist)], capsys)
    assert code == 1 and "impossible-observation" in err


def test_run_config_validation():
    with pytest.raises(ValueError):
        RunConfig("simulate", "m.json", n=0)
    with pytest.raises(ValueError):
        RunConfig("solve", "m.json", cap=0)
    with pytest.raises(SystemExit):
        main(["simulate", "m.json", "--p1", "a", "--p2", "b", "--n", "0"])


def test_console_entry_point(m1, write_model):
    proc = subprocess.run([sys.executable, "-m", "posmg.cli", "solve", write_model(m1)],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["value"] == 0.5
