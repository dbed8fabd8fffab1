import csv
import io
import json
import subprocess
import sys

import pytest

from loschmidt import cli, planar, validation

N3_ZERO_TAU = 1.9158529851039108 / 3


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_dfe_example(capsys):
    code, out, err = run(capsys, "dfe", "--n", "10", "--boundary", "pbc", "--tau", "0:1:200")
    assert code == 0
    assert out.splitlines()[0] == "tau,t,log_echo,f,phase"
    data = rows(out)
    assert len(data) == 201
    assert float(data[0]["f"]) == 0 and float(data[-1]["tau"]) == 1.0
    assert "rows=201" in err and "wall=" in err


def test_critical_json(capsys):
    code, out, _ = run(capsys, "critical")
    assert code == 0
    doc = json.loads(out)
    assert doc["meta"]["artifact_version"] == "0.1.0"
    rec = doc["data"][0]
    assert abs(rec["tau_cr"] - 0.33137171) < 1e-6
    assert abs(rec["ell_star"] - 1.1997) < 1e-4 and abs(rec["z0_imag"] - 1.509) < 1e-3


def test_qsl_csv(capsys):
    code, out, _ = run(capsys, "qsl", "--kmax", "8")
    assert code == 0
    assert out.splitlines()[0] == "n,tau_qsl,t_zero"
    data = rows(out)
    assert [int(r["n"]) for r in data] == list(range(3, 18, 2))
    assert all(float(r["tau_qsl"]) > 0.3313 for r in data)


def test_infinite_free_energy_serialization(capsys):
    tau = repr(N3_ZERO_TAU)
    _, out, _ = run(capsys, "dfe", "--n", "3", "--tau", tau)
    assert rows(out)[0]["f"] == "inf"
    _, out, _ = run(capsys, "dfe", "--n", "3", "--tau", tau, "--format", "json")
    assert json.loads(out)["data"][0]["f"] == {"special": "inf"}


def test_output_identical_across_workers(tmp_path, capsys):
    paths = []
    for workers in ("1", "3"):
        p = tmp_path / f"out{workers}.csv"
        assert cli.main(["dfe", "--n", "6", "--ell", "3", "--tau", "0:0.6:24", "--workers", workers, "--out", str(p)]) == 0
        paths.append(p)
    assert paths[0].read_bytes() == paths[1].read_bytes()
    j = []
    for workers in ("1", "2"):
        p = tmp_path / f"out{workers}.json"
        cli.main(["thermal", "--n", "8", "--gamma", "0.1:1:6", "--workers", workers, "--format", "json", "--out", str(p)])
        j.append(p.read_bytes())
    assert j[0] == j[1]
    capsys.readouterr()


def test_output_has_unix_newlines(tmp_path, capsys):
    p = tmp_path / "c.csv"
    cli.main(["contour", "--tau", "0.1", "--points", "8", "--out", str(p)])
    raw = p.read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")
    assert raw.splitlines()[0] == b"tau,index,re,im,residual,status"
    capsys.readouterr()


@pytest.mark.parametrize(
    "argv,flag",
    [
        (["dfe", "--tau", "1:0:5"], "--tau"),
        (["dfe", "--tau", "0:1:0"], "--tau"),
        (["dfe", "--tau", "a:b"], "--tau"),
        (["dfe"], "--tau"),
        (["dfe", "--n", "4", "--ell", "5/3", "--tau", "0.1"], "--ell"),
        (["dfe", "--n", "0", "--tau", "0.1"], "--n"),
        (["errors", "--n", "4", "--tau", "0.1"], "--ell"),
        (["qsl", "--workers", "0"], "--workers"),
        (["impurity", "--n", "3", "--p", "5", "--tau", "0.1"], "--p"),
        (["dfe", "--boundary", "obc", "--tau", "0.1"], "--boundary"),
    ],
)
def test_usage_errors(capsys, argv, flag):
    code, _, err = run(capsys, *argv)
    assert code == 1
    assert flag in err


def test_missing_command(capsys):
    code, _, err = run(capsys)
    assert code == 1 and "command" in err


def test_domain_error_exit_code(capsys):
    code, _, err = run(capsys, "impurity", "--n", "1", "--p", "1", "--tau", "0.2")
    assert code == 3
    assert "in echo (InvalidSpecError)" in err and "--n 1" in err
    code, _, err = run(capsys, "contour", "--tau", "-0.1")
    assert code == 3
    assert "in planar (ValueError)" in err and "--tau -0.1" in err


def test_parse_range():
    assert cli.parse_range("0:1:4", "--tau") == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert cli.parse_range("0.3", "--tau") == [0.3]
    assert cli.parse_range("0.2:0.2:3", "--tau") == [0.2] * 4


def test_other_commands_run(capsys):
    for argv in (
        ["amplitude", "--n", "4", "--tau", "0:0.5:2", "--boundary", "abc"],
        ["amplitude", "--n", "4", "--time", "imaginary", "--gamma", "0.5"],
        ["errors", "--n", "4", "--ell", "3", "--tau", "0.1:0.3:2"],
        ["errors", "--n", "4", "--ell", "2", "--time", "imaginary", "--gamma", "0.2"],
        ["impurity", "--n", "24", "--tau", "0.2", "--p", "2"],
        ["contour", "--tau", "0.2:0.4:2", "--points", "16", "--boundary", "abc"],
    ):
        code, out, _ = run(capsys, *argv)
        assert code == 0, argv
        assert len(out.splitlines()) >= 2


def test_contour_pinched_row(capsys):
    _, out, _ = run(capsys, "contour", "--tau", "0.34", "--points", "16")
    assert rows(out)[0]["status"] == "pinched"


def test_impurity_rows_match_planar(capsys):
    _, out, _ = run(capsys, "impurity", "--n", "24", "--tau", "0.2", "--p", "2")
    data = rows(out)
    p2 = data[2]
    assert abs(float(p2["re"]) - float(p2["planar_re"])) < 0.1 * abs(float(p2["planar_re"]))


def test_validate_sensitivity(monkeypatch):
    true_value = planar.critical_time()
    monkeypatch.setattr(planar, "critical_time", lambda: true_value + 1e-3)
    result = validation.criterion_1()
    assert not result.passed
    assert "tau_cr" in result.line()


def test_validate_json_report(monkeypatch, tmp_path, capsys):
    # stub the checks so the report format is tested without the full run
    fake = validation.CheckResult("C1", "critical constant", True, 0.001, 0.01, {"tau_cr": 0.33})
    monkeypatch.setattr(validation, "run_validation", lambda: {"passed": True, "lines": [fake.line()], "checks": [vars(fake)]})
    p = tmp_path / "v.json"
    code = cli.main(["validate", "--out", str(p)])
    out = capsys.readouterr().out
    assert code == 0 and "[PASS] C1" in out and "tau_cr=0.33" in out
    doc = json.loads(p.read_text())
    assert doc["data"][0]["key"] == "C1" and "meta" in doc


def test_validate_exit_code_on_failure(monkeypatch, capsys):
    monkeypatch.setattr(validation, "run_validation", lambda: {"passed": False, "lines": ["[FAIL] C2"], "checks": []})
    assert cli.main(["validate"]) == 2
    capsys.readouterr()


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "loschmidt", "critical", "--format", "csv"], capture_output=True, text=True)
    assert out.returncode == 0
    assert out.stdout.splitlines()[0] == "tau_cr,ell_star,z0_imag,tau_cr_contour"
