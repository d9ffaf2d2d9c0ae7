import json
import math

import pytest

from delaywave import cli

FAST = ["--T", "80", "--h", "0.1"]


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_roots_table(capsys):
    code, out, _ = run(capsys, "roots", "--d", "2", "--beta", "3", "--c", "1")
    assert code == 0
    row = out.splitlines()[1].split()
    assert float(row[1]) == -1.0 and float(row[2]) == 1.5
    code, out, _ = run(capsys, "roots", "--d", "1", "--beta", "1", "--c", "2")
    row = out.splitlines()[1].split()
    assert row[1] == f"{2 - 2 * math.sqrt(2):.9g}"
    assert float(row[1]) == pytest.approx(2 - 2 * math.sqrt(2), rel=1e-7)
    assert float(row[2]) == pytest.approx(2 + 2 * math.sqrt(2), rel=1e-7)


def test_roots_invalid_c(capsys):
    code, out, err = run(capsys, "roots", "--d", "1", "--beta", "1", "--c", "0")
    assert code == 2 and "c" in err and out == ""


def test_roots_for_models_and_custom(capsys, tmp_path, monkeypatch):
    monkeypatch.syspath_prepend(str(__import__("pathlib").Path(__file__).parent))
    code, out, _ = run(capsys, "roots", "--model", "lv-mutualistic", "--out", str(tmp_path))
    assert code == 0 and len(out.splitlines()) == 3
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"model": "custom", "c": 2.0, "custom": {
        "reaction": "custom_reaction:logistic", "n": 1, "diffusion": [1.0], "delays": [0.0],
        "k_state": [1.0], "lipschitz": [1.0]}}))
    code, out, _ = run(capsys, "roots", "--config", str(cfg), "--json", "--out", str(tmp_path))
    assert code == 0
    assert json.loads((tmp_path / "roots.json").read_text())["components"][0]["lambda1"] == \
        pytest.approx(2 - 2 * math.sqrt(2))
    code, _, err = run(capsys, "verify", "--config", str(cfg), "--out", str(tmp_path))
    assert code == 2 and "roots" in err


@pytest.mark.parametrize("argv,code", [
    (["verify", "--c", "3"], 0),
    (["verify", "--c", "1.9"], 2),
    (["verify", "--model", "bz-literal", "--c", "3"], 1),
    (["verify", "--candidate", "published", "--c", "3"], 1),
    (["verify", "--model", "lv-mutualistic", "--param", "a2=3"], 2),
    (["verify", "--model", "bz-transformed", "--param", "r=1.2"], 2),
    (["verify", "--model", "unknown"], 2),
    (["verify", "--param", "zeta=1"], 2),
    (["solve", "--c", "3"], 0),
    (["solve", "--c", "3", "--max-iter", "2"], 1),
    (["speed-scan", "--c-start", "1.5", "--c-stop", "3", "--count", "2"], 0),
])
def test_exit_code_matrix(capsys, tmp_path, argv, code):
    got, _, _ = run(capsys, *argv, *FAST, "--out", str(tmp_path))
    assert got == code


def test_literal_verify_prints_residual_table(capsys, tmp_path):
    code, out, _ = run(capsys, "verify", "--model", "bz-literal", *FAST, "--out", str(tmp_path))
    assert code == 1 and "|f_i(K,K)|" in out
    rep = json.loads((tmp_path / "verify.json").read_text())
    assert rep["validation"]["residual_k"] == [0.5, 1.0]


def test_lv_positivity_message(capsys, tmp_path):
    code, _, err = run(capsys, "solve", "--model", "lv-mutualistic", "--param", "a2=3",
                       "--out", str(tmp_path))
    assert code == 2 and "(g2)" in err


def test_config_file_and_overrides(capsys, tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"c": 2.5, "grid": {"T": 80, "h": 0.1},
                               "output_dir": str(tmp_path / "a")}))
    code, _, _ = run(capsys, "verify", "--config", str(cfg), "--c", "3", "--report", "csv")
    assert code == 0
    rep = json.loads((tmp_path / "a" / "verify.json").read_text())
    assert rep["c"] == 3.0
    assert (tmp_path / "a" / "margins.csv").exists()
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"speed": 3}))
    assert run(capsys, "verify", "--config", str(bad))[0] == 2
    assert run(capsys, "verify", "--config", str(tmp_path / "missing.json"))[0] == 2
    bad.write_text("{not json")
    assert run(capsys, "verify", "--config", str(bad))[0] == 2


def test_env_output_dir(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_ENV, str(tmp_path / "env"))
    assert run(capsys, "solve", *FAST, "--out", str(tmp_path / "flag"))[0] == 0
    assert (tmp_path / "env" / "solve.json").exists()
    assert (tmp_path / "env" / "profile.csv").exists()
    assert not (tmp_path / "flag").exists()


def test_speed_scan_records_rejections(capsys, tmp_path):
    run(capsys, "speed-scan", "--c-start", "1.5", "--c-stop", "3", "--count", "2", *FAST,
        "--out", str(tmp_path))
    scan = json.loads((tmp_path / "speed_scan.json").read_text())
    assert scan["critical_speed"] == 2.0
    assert "rejected" in scan["scan"][0]
    assert scan["scan"][1]["verify_pass"] and scan["scan"][1]["converged"]


@pytest.mark.parametrize("argv", [["verify", "--report", "csv"], ["solve", "--report", "csv"]])
def test_repeat_runs_identical(capsys, tmp_path, argv):
    blobs = []
    for k in range(2):
        out = tmp_path / str(k)
        assert run(capsys, *argv, *FAST, "--out", str(out))[0] == 0
        blobs.append(sorted((p.name, p.read_bytes()) for p in out.iterdir()))
    assert blobs[0] == blobs[1]


def test_simulate_small_domain(capsys, tmp_path):
    code, out, _ = run(capsys, "simulate", *FAST, "--x-max", "200", "--nx", "2001",
                       "--t-end", "10", "--report", "csv", "--record-layout", "per-snapshot",
                       "--out", str(tmp_path))
    assert code == 0, out
    rep = json.loads((tmp_path / "crossvalidate.json").read_text())
    assert rep["speed_deviation"] <= 0.05
    assert (tmp_path / "record" / "times.csv").exists()


def test_simulate_domain_too_small(capsys, tmp_path):
    code, _, err = run(capsys, "simulate", *FAST, "--x-max", "20", "--nx", "201",
                       "--t-end", "20", "--out", str(tmp_path))
    assert code == 2 and "enlarge" in err
