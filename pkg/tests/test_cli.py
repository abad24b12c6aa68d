import csv
import io
import json
import subprocess
import sys

import pytest

from matprod.bernoulli import beta_cylinder_measure
from matprod.cli import CONFIG_SCHEMA, expand_word, main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    assert code == 0, err
    return json.loads(out)


def test_expand_word_groups():
    assert expand_word("(012)^2") == [0, 1, 2, 0, 1, 2]
    assert expand_word("1(0(12)^2)^2") == [1, 0, 1, 2, 1, 2, 0, 1, 2, 1, 2]
    assert len(expand_word("(012)^40")) == 120


@pytest.mark.parametrize("bad", ["(01", "01)", "(01)", "0a1"])
def test_expand_word_rejects(bad):
    from matprod.errors import InputError
    with pytest.raises(InputError):
        expand_word(bad)


def test_bernoulli_beta_case(capsys):
    out = run_json(capsys, "bernoulli", "--beta-case", "--word", "0121")
    assert out["measure"] == pytest.approx(float(beta_cylinder_measure([0, 1, 2, 1])))
    assert out["parameters"]["word"] == "0121"
    assert out["parameters"]["seed"] == 0


def test_bernoulli_representation(capsys):
    out = run_json(capsys, "bernoulli", "--k", "2", "--p", "1/4,1/2,1/4", "--word", "01")
    assert "representation" in out
    assert 0 < out["measure"] < 1


def test_counterexample_ce13(capsys):
    out = run_json(capsys, "counterexample", "ce13", "--k", "5")
    assert out["closed_form_match"] is True


def test_counterexample_ce22_default(capsys):
    out = run_json(capsys, "counterexample", "ce22")
    assert out["limit_11"] == pytest.approx([2 / 3, 1 / 3])


def test_simulate_csv(capsys):
    code, out, _ = run(capsys, "simulate", "--family", "thm23", "--word", "(012)^40", "--format", "csv")
    assert code == 0
    lines = out.splitlines()
    comments = [ln for ln in lines if ln.startswith("#")]
    assert any(ln.startswith("# family:") for ln in comments)
    rows = list(csv.reader(io.StringIO("\n".join(ln for ln in lines if not ln.startswith("#")))))
    assert rows[0][:3] == ["n", "log_norm", "det_normalized"]
    assert len(rows) == 1 + 120
    assert int(rows[-1][0]) == 120


def test_simulate_json_limit_image(capsys):
    out = run_json(capsys, "simulate", "--family", "thm23", "--period", "012", "--depth", "120")
    assert out["depth"] == 120
    assert abs(sum(out["final_image"]) - 1) < 1e-9


def test_curve_csv(capsys):
    code, out, _ = run(capsys, "curve", "--coeffs", "1/2,1,1/2", "--x", "1/4,1/2", "--format", "csv")
    assert code == 0
    body = [ln for ln in out.splitlines() if not ln.startswith("#")]
    rows = list(csv.reader(body))
    assert rows[0] == ["x", "psi1", "psi2", "gap"]
    assert float(rows[1][1]) == pytest.approx(0.25, abs=1e-8)
    assert float(rows[2][2]) == pytest.approx(0.5, abs=1e-8)


def test_factorize_word(capsys):
    out = run_json(capsys, "factorize", "--word", "2100")
    assert out["factorization"]


def test_triangular_classify(capsys):
    fac = json.dumps([[[0.5, 1, 0], [0, 1, 1], [0, 0, 1 / 3]]])
    out = run_json(capsys, "triangular", "classify", "--factors", fac, "--n", "200")
    assert out["case"] == 3


def test_gibbs_probe(capsys):
    out = run_json(capsys, "gibbs", "--mode", "probe", "--k", "3", "--p", "0.4,0.1,0.2,0.3", "--n-max", "20")
    assert out["limit_estimate"] == pytest.approx(1 / 3, abs=1e-6)


def test_same_seed_same_bytes(tmp_path):
    # the output path is recorded among the parameters, so both runs write to the same place
    target = tmp_path / "run.json"
    argv = ["simulate", "--family", "thm23", "--random", "--depth", "60", "--out", str(target)]
    runs = []
    for seed in ("5", "5", "6"):
        assert main(argv + ["--seed", seed]) == 0
        runs.append(target.read_bytes())
    assert runs[0] == runs[1]
    assert runs[2] != runs[0]


def test_env_seed(capsys, monkeypatch):
    monkeypatch.setenv("MATPROD_SEED", "17")
    out = run_json(capsys, "bernoulli", "--beta-case", "--word", "0")
    assert out["parameters"]["seed"] == 17
    monkeypatch.setenv("MATPROD_SEED", "x")
    code, _, err = run(capsys, "bernoulli", "--beta-case", "--word", "0")
    assert code == 2
    assert json.loads(err)["error"]


def test_input_errors_exit_2(capsys):
    code, out, err = run(capsys, "simulate", "--family", "thm23", "--word", "01x")
    assert code == 2 and out == ""
    assert json.loads(err)["error"] == "INVALID_INPUT"
    code, _, _ = run(capsys, "bernoulli", "--k", "2")
    assert code == 2
    code, _, _ = run(capsys, "nonsense")
    assert code == 2


def test_numerical_failure_exit_3(capsys):
    # identities after a positive stretch: the window maxima settle too late
    fac = json.dumps([[[1, 1, 1]] * 3] * 15 + [[[1, 0, 0], [0, 1, 0], [0, 0, 1]]] * 25)
    code, out, err = run(capsys, "triangular", "detect", "--factors", fac, "--horizon", "40")
    assert code == 3 and out == ""
    assert "error" in json.loads(err)


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"command": "bernoulli", "beta_case": True, "word": "0121"}))
    out = run_json(capsys, "--config", str(cfg))
    assert out["measure"] == pytest.approx(0.008203125)


def test_config_with_action_and_lists(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"command": "counterexample", "action": "ce22", "p": [0.25, 0.25, 0.25, 0.25]}))
    out = run_json(capsys, "--config", str(cfg))
    assert out["uniform"] is True


@pytest.mark.parametrize("cfg", [
    {"command": "bernoulli", "colour": "red"},
    {"command": "launch"},
    {"word": "01"},
    {"command": "simulate", "depth": 0},
    {"command": "triangular"},
])
def test_config_schema_violations(tmp_path, capsys, cfg):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    code, _, err = run(capsys, "--config", str(path))
    assert code == 2
    assert json.loads(err)["error"]


def test_schema_is_closed():
    assert CONFIG_SCHEMA["additionalProperties"] is False


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "matprod.cli", "bernoulli", "--beta-case", "--word", "2"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["measure"] > 0
