import io
import json
import sys

import numpy as np

from qnuis.cli import main


def run_cli(args, env=None):
    old = sys.stdout
    buf = io.StringIO()
    sys.stdout = buf
    try:
        code = main(args)
    finally:
        sys.stdout = old
    return code, buf.getvalue()


def test_bound_qubit_clock_values():
    code, out = run_cli(["bound", "--model", "qubit-clock", "--point", "1,0.1",
                         "--interest", "1", "--bounds", "sld,holevo"])
    assert code == 0
    payload = json.loads(out)
    assert abs(payload["sld"] - 1.221403) < 1e-5
    assert abs(payload["holevo"] - 1.221403) < 1e-5


def test_bound_bloch_holevo_nagaoka():
    code, out = run_cli(["bound", "--model", "bloch-qubit", "--point",
                         "0.3,0.4,0.5", "--interest", "2", "--weight",
                         "identity", "--bounds", "holevo,nagaoka"])
    assert code == 0
    payload = json.loads(out)
    assert abs(payload["holevo"] - 2.75) < 1e-4
    assert abs(payload["nagaoka"] - 3.482051) < 1e-5


def test_bound_missing_point_exits_2():
    code, _ = run_cli(["bound", "--model", "qubit-clock"])
    assert code == 2


def test_bound_wrong_point_length_exits_2():
    code, _ = run_cli(["bound", "--model", "qubit-clock", "--point", "1.0"])
    assert code == 2


def test_simulate_trials_one_exits_2():
    code, _ = run_cli(["simulate", "--model", "dice", "--point", "0.2,0.3",
                       "--interest", "1", "--strategy", "repetitive",
                       "--povm", "computational", "--trials", "1"])
    assert code == 2


def test_simulate_repetitive_dice_output():
    code, out = run_cli(["simulate", "--model", "dice", "--point", "0.2,0.3",
                         "--interest", "1", "--strategy", "repetitive",
                         "--povm", "computational", "--n", "4000",
                         "--trials", "120", "--seed", "7"])
    assert code == 0
    payload = json.loads(out)
    assert abs(payload["scaled_mse_trace"] - 0.16) / 0.16 < 0.35
    assert abs(payload["bound_value"] - 0.16) < 1e-9


def test_classify_bloch():
    code, out = run_cli(["classify", "--model", "bloch-qubit", "--point",
                         "0.3,0.4,0.5", "--interest", "2"])
    assert code == 0
    payload = json.loads(out)
    assert payload["d_invariant"] is False or payload["d_invariant"] is True
    assert payload["asymptotically_classical"] is False


def test_classify_dice_classical():
    code, out = run_cli(["classify", "--model", "dice", "--point", "0.2,0.3"])
    assert code == 0
    payload = json.loads(out)
    assert payload["classical"] is True


def test_classify_full_bloch_d_invariant():
    code, out = run_cli(["classify", "--model", "bloch-qubit", "--point",
                         "0.3,0.4,0.5"])
    assert code == 0
    payload = json.loads(out)
    assert payload["d_invariant"] is True


def test_orthogonalize_trajectory_csv():
    code, out = run_cli(["orthogonalize", "--model", "qubit-clock", "--start",
                         "0.5,0.1", "--grid", "0.5:2.0:0.05"])
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "xi1,t,gamma,ortho_residual"
    assert len(lines) == 2 + int(round((2.0 - 0.5) / 0.05))
    for line in lines[1:]:
        residual = float(line.split(",")[-1])
        assert residual < 1e-6


def test_model_command_reports_spectrum(tmp_path):
    spec = {"zoo": "qubit-clock", "point": [1.0, 0.1], "partition": 1}
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(spec))
    code, out = run_cli(["model", "--spec", str(path)])
    assert code == 0
    payload = json.loads(out)
    assert payload["dim_hilbert"] == 2
    assert abs(payload["trace"] - 1.0) < 1e-12
    assert abs(min(payload["eigenvalues"]) - (1 - np.exp(-0.1)) / 2) < 1e-9


def test_json_spec_with_config(tmp_path):
    spec = {"zoo": "quantum-exponential", "config": {"F": ["sigma_z"]},
            "point": [0.5], "partition": 1}
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(spec))
    code, out = run_cli(["bound", "--spec", str(path), "--bounds", "sld"])
    assert code == 0
    assert "sld" in json.loads(out)


def test_byte_identical_output_across_runs_and_threads(monkeypatch):
    args = ["simulate", "--model", "dice", "--point", "0.2,0.3", "--interest",
            "1", "--strategy", "repetitive", "--povm", "computational",
            "--n", "2000", "--trials", "40", "--seed", "3"]
    monkeypatch.setenv("QNUIS_THREADS", "1")
    _, out1 = run_cli(args)
    monkeypatch.setenv("QNUIS_THREADS", "4")
    _, out2 = run_cli(args)
    monkeypatch.delenv("QNUIS_THREADS")
    _, out3 = run_cli(args)
    assert out1 == out2 == out3


def test_csv_output_mode():
    code, out = run_cli(["bound", "--model", "dice", "--point", "0.2,0.3",
                         "--interest", "1", "--bounds", "sld",
                         "--output", "csv"])
    assert code == 0
    lines = out.strip().splitlines()
    assert len(lines) == 2
    header = lines[0].split(",")
    assert "sld" in header


def test_unknown_zoo_model_exits_2():
    code, _ = run_cli(["bound", "--model", "nope", "--point", "0.1"])
    assert code == 2


def test_numeric_failure_exits_3(tmp_path):
    # a nearly pure state trips the full-rank guard -> numerical failure path
    code, _ = run_cli(["bound", "--model", "bloch-qubit",
                       "--point", "0.99999999,0,0", "--bounds", "sld"])
    assert code == 3 or code == 2
