import csv
import io
import json
import math
import subprocess
import sys

import jsonschema
import numpy as np
import pytest

from gibbsline.cli import REPORT_SCHEMA, main
from gibbsline.models import term_to_json, tfim


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def report(capsys, *argv):
    code, out, err = run_cli(capsys, *argv)
    assert code == 0, err
    data = json.loads(out)
    jsonschema.validate(data, REPORT_SCHEMA)
    return data


def test_estimate_free(capsys):
    r = report(capsys, "estimate", "--model", "free", "--beta", "1", "--eps", "1e-6")
    assert r["results"]["f_tilde"] == pytest.approx(-math.log(2), abs=1e-12)
    assert r["schema_version"] == 1


def test_estimate_ising_dense(capsys):
    r = report(capsys, "estimate", "--model", "ising", "--beta", "1", "--eps", "1e-6", "--backend", "dense")
    assert r["results"]["f_tilde"] == pytest.approx(-1.126928, abs=1e-6)
    assert any("clamped" in n for n in r["notes"])
    assert r["results"]["params"]["l_source"] == "clamped"


def test_estimate_trotter_is_flagged(capsys):
    r = report(capsys, "estimate", "--model", "tfim", "--eps", "1e-2", "--l-override", "3", "--backend", "trotter")
    assert r["results"]["backend_report"]["heuristic"] is True
    assert any("heuristic" in n for n in r["notes"])


def test_tfim_rescale_reported(capsys):
    r = report(capsys, "estimate", "--model", "tfim", "--eps", "1e-3", "--l-override", "2")
    assert r["model"]["scale"] == pytest.approx(1 / math.sqrt(2))
    assert any("rescaled" in n for n in r["notes"])


def test_coarse_eps_warning_lands_in_notes(capsys):
    r = report(capsys, "estimate", "--model", "ising", "--beta", "0.5", "--eps", "0.3")
    assert any("beta/2" in n for n in r["notes"])


def test_model_file(capsys, tmp_path):
    path = tmp_path / "h.json"
    path.write_text(json.dumps(term_to_json(tfim()[0])))
    a = report(capsys, "estimate", "--model-file", str(path), "--eps", "1e-3", "--l-override", "3")
    b = report(capsys, "estimate", "--model", "tfim", "--eps", "1e-3", "--l-override", "3")
    assert a["results"]["f_tilde"] == b["results"]["f_tilde"]
    assert a["model"]["source"] == "file"


def test_model_file_norm_error_exit_code(capsys, tmp_path):
    path = tmp_path / "big.json"
    m = 1.3 * np.kron(np.diag([1.0, -1.0]), np.diag([1.0, -1.0]))
    path.write_text(json.dumps({"d": 2, "matrix": [[[x, 0.0] for x in row] for row in m.tolist()]}))
    code, _, err = run_cli(capsys, "estimate", "--model-file", str(path))
    assert code == 2
    assert "1.3" in err


def test_infeasible_size_names_cap(capsys):
    code, _, err = run_cli(capsys, "estimate", "--model", "tfim", "--eps", "1e-3", "--l-override", "12")
    assert code == 2
    assert "512" in err


def test_unknown_flag_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["estimate", "--bogus"])
    assert exc.value.code == 2


def test_sweep_json_and_fit(capsys):
    r = report(capsys, "sweep", "--model", "tfim", "--l-min", "2", "--l-max", "8", "--method", "free-fermion")
    pts = r["results"]["points"]
    assert [p["l"] for p in pts] == list(range(2, 9))
    fit = r["results"]["fit"]
    assert fit["slope"] < 0 and fit["r_squared"] > 0.98


def test_sweep_ising_fit_skipped(capsys):
    r = report(capsys, "sweep", "--model", "ising", "--l-max", "5")
    assert r["results"]["fit"] is None
    assert any("skipped" in n for n in r["notes"])


def test_sweep_csv(capsys):
    code, out, _ = run_cli(capsys, "sweep", "--model", "heisenberg", "--l-max", "5", "--format", "csv")
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["l", "ratio", "delta"]
    assert [int(r[0]) for r in rows[1:]] == [1, 2, 3, 4, 5]


def test_verify_qbp(capsys):
    r = report(capsys, "verify-qbp", "--model", "ising", "--beta", "1", "--L", "4", "--steps", "1000", "--locality-steps", "0")
    assert r["results"]["abs_diff"] <= 1e-6
    assert r["results"]["lhs"] == pytest.approx(2 * math.cosh(1.0))


def test_verify_qbp_locality_table(capsys):
    r = report(capsys, "verify-qbp", "--model", "tfim", "--L", "4", "--steps", "50", "--locality-steps", "20")
    diffs = [row["norm_diff"] for row in r["results"]["eta_locality"]]
    assert len(diffs) == 3 and diffs[0] > diffs[1] > diffs[2]


def test_verify_lr(capsys):
    r = report(capsys, "verify-lr", "--model", "tfim", "--L", "5", "--t-grid", "0,0.01", "--D-grid", "0.5,1")
    assert r["results"]["all_dominated"]
    assert len(r["results"]["table"]) == 2 * 2 * 4


def test_oracle(capsys):
    r = report(capsys, "oracle", "--model", "ising", "--N", "5")
    assert [x["n"] for x in r["results"]["log_z"]] == [1, 2, 3, 4, 5]
    for row in r["results"]["f_estimates"]:
        assert row["f"] == pytest.approx(-math.log(2 * math.cosh(1.0)), abs=1e-12)


def test_reports_deterministic_apart_from_timings(capsys):
    argv = ["estimate", "--model", "heisenberg", "--eps", "1e-3", "--l-override", "3"]
    a, b = report(capsys, *argv), report(capsys, *argv)
    a.pop("timings"), b.pop("timings")
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


def test_out_file(capsys, tmp_path):
    path = tmp_path / "r.json"
    code, out, _ = run_cli(capsys, "oracle", "--model", "free", "--N", "3", "--out", str(path))
    assert code == 0 and out == ""
    jsonschema.validate(json.loads(path.read_text()), REPORT_SCHEMA)


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "gibbsline", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "gibbsline" in proc.stdout
