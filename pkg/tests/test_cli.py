import json
import subprocess
import sys
from pathlib import Path

import pytest

from conftest import data_path
from varfield.cli import main
from varfield.electrodynamics import build_em_system, data_text
from varfield.parser import parse_lagrangian
from varfield.symbolic import render, struct_equal

GOLDEN = Path(__file__).parent / "golden"


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_derive_em(capsys):
    code, out, _ = run(capsys, "derive", data_path("electrodynamics.lag"))
    assert code == 0
    lines = out.splitlines()
    assert len(lines) == 4
    em = build_em_system()
    phi_text = render(em.target_equations[0].lhs, em.lagrangian.scalars)
    assert lines[0] == f"phi: {phi_text} = 0"


def test_derive_wave_text_golden(capsys):
    code, out, _ = run(capsys, "derive", data_path("wave.lag"))
    assert code == 0
    assert out == (GOLDEN / "wave_derive.txt").read_text()


def test_derive_wave_json(capsys):
    code, out, _ = run(capsys, "derive", data_path("wave.lag"), "--format", "json")
    assert code == 0
    doc = json.loads(out)
    assert isinstance(doc, list) and len(doc) == 1
    golden = (GOLDEN / "wave_derive.txt").read_text()
    assert doc[0]["field"] == "psi" and doc[0]["comp"] == 1
    assert golden == f"psi: {doc[0]['lhs']} = 0\n"


def test_malformed_file_reports_position(capsys, tmp_path):
    bad = tmp_path / "bad.lag"
    bad.write_text("field psi[1]\nL = dt(psi)^2 +* 3\n")
    code, _, err = run(capsys, "derive", str(bad))
    assert code == 1
    assert "line 2, column 16" in err and str(bad) in err


def test_missing_input_is_io_error(capsys, tmp_path):
    code, _, err = run(capsys, "derive", str(tmp_path / "nope.lag"))
    assert code == 2 and "error" in err


def test_unwritable_output_is_io_error(capsys, tmp_path):
    code, _, _ = run(capsys, "derive", data_path("wave.lag"), "--out", str(tmp_path / "no" / "x.txt"))
    assert code == 2


def test_out_file(capsys, tmp_path):
    target = tmp_path / "eqs.json"
    code, out, _ = run(capsys, "derive", data_path("wave.lag"), "--format", "json", "--out", str(target))
    assert code == 0 and out == ""
    assert len(json.loads(target.read_text())) == 1


def test_transform_identity_round_trip(capsys):
    code, out, _ = run(capsys, "transform", data_path("coupled.lag"), data_path("identity.map"))
    assert code == 0
    again = parse_lagrangian(out)
    assert struct_equal(again.density, parse_lagrangian(data_text("coupled.lag")).density)


def test_transform_scaling_golden(capsys):
    code, out, _ = run(capsys, "transform", data_path("wave.lag"), data_path("scaling.map"))
    assert code == 0
    assert out == (GOLDEN / "scaling_wave.lag").read_text()


def test_transform_json(capsys):
    code, out, _ = run(capsys, "transform", data_path("wave.lag"), data_path("scaling.map"),
                       "--format", "json")
    doc = json.loads(out)
    assert code == 0 and doc["det"] == "8" and doc["det_sign"] == 1
    assert doc["det_sign_assumption"] == "positive"


def test_transform_with_equivalence_report(capsys):
    code, out, _ = run(capsys, "transform", data_path("wave.lag"), data_path("scaling.map"),
                       "--format", "json", "--solution", "psi=(3*x1 + 4*x2 - 5*t)^4",
                       "--trial", "psi=(x1 - 2*x2 + t)^3 + x3^4", "--nt", "5", "--nx", "5")
    assert code == 0
    rep = json.loads(out)["equivalence"]
    assert 1.7 <= rep["convergence_order_estimate"] <= 2.3
    assert 1.7 <= rep["action_order_estimate"] <= 2.3


def test_transform_singular(capsys, tmp_path):
    m = tmp_path / "sing.map"
    m.write_text("x1 = xb1\nx2 = xb1\nx3 = xb3\n")
    code, _, err = run(capsys, "transform", data_path("wave.lag"), str(m))
    assert code == 1 and "SingularMap" in err


def test_transform_unsupported(capsys, tmp_path):
    m = tmp_path / "cubic.map"
    m.write_text("x1 = xb1 + xb1^3\nx2 = xb2\nx3 = xb3\n")
    code, _, err = run(capsys, "transform", data_path("wave.lag"), str(m))
    assert code == 1 and "UnsupportedForm" in err


def test_check_grid_too_coarse(capsys):
    code, _, err = run(capsys, "check", data_path("wave.lag"), "--nt", "3")
    assert code == 1 and "GridTooCoarse" in err


def test_check_needs_three_levels(capsys):
    code, _, err = run(capsys, "check", data_path("wave.lag"), "--levels", "2")
    assert code == 1 and "3 refinement levels" in err


def test_check_small_run_csv_is_reproducible(capsys):
    argv = ["check", data_path("wave.lag"), "--nt", "5", "--nx", "5", "--variations", "4",
            "--seed", "99", "--format", "csv",
            "--solution", "psi=(3*x1 + 4*x2 - 5*t)^4"]
    code1, out1, _ = run(capsys, *argv)
    code2, out2, _ = run(capsys, *argv)
    assert code1 == code2 == 0
    assert out1 == out2
    lines = out1.splitlines()
    assert lines[0] == "# seed: 99"
    assert lines[1] == "study,h,value,error,estimated_order"
    studies = [ln.split(",")[0] for ln in lines[2:]]
    assert studies == ["ibp"] * 3 + ["residual"] * 3


def test_check_text_and_json_carry_seed(capsys):
    base = ["check", data_path("wave.lag"), "--nt", "5", "--nx", "5", "--variations", "2"]
    code, out, _ = run(capsys, *base)
    assert code == 0 and out.startswith("seed: 12345\n") and out.rstrip().endswith("PASS")
    code, out, _ = run(capsys, *base, "--format", "json")
    doc = json.loads(out)
    assert doc["seed"] == 12345 and doc["passed"] is True


def test_check_bad_binding(capsys):
    code, _, err = run(capsys, "check", data_path("wave.lag"), "--psi", "chi=x1")
    assert code == 1 and "chi" in err


def test_demo_em_text(capsys, monkeypatch):
    monkeypatch.setenv("VARFIELD_COLOR", "0")
    code, out, _ = run(capsys, "demo-em")
    assert code == 0
    assert out.count("match ") == 4 and "\033[" not in out
    assert "c^2*eps0" in out


def test_demo_em_color(capsys, monkeypatch):
    monkeypatch.setenv("VARFIELD_COLOR", "1")
    code, out, _ = run(capsys, "demo-em")
    assert code == 0 and "\033[32m" in out


def test_demo_em_json_schema(capsys):
    code, out, _ = run(capsys, "demo-em", "--format", "json")
    doc = json.loads(out)
    assert code == 0
    assert set(doc) == {"equations", "identities", "sources_algebraic", "all_matched"}
    assert len(doc["equations"]) == 4
    for eq in doc["equations"]:
        assert set(eq) == {"field", "comp", "matched", "factor", "derived", "target"}
        assert eq["matched"] is True
    assert [eq["factor"] for eq in doc["equations"]] == ["1", "c^2*eps0", "c^2*eps0", "c^2*eps0"]


def test_demo_em_perturbed_targets(capsys, tmp_path):
    doc = json.loads(data_text("em_targets.json"))
    doc["equations"][3]["lhs"] = doc["equations"][3]["lhs"].replace("curl(curl(A))[3]", "lap(A[3])")
    path = tmp_path / "targets.json"
    path.write_text(json.dumps(doc))
    code, out, _ = run(capsys, "demo-em", "--targets", str(path))
    assert code == 1 and "MISMATCH" in out


def test_demo_em_bad_targets_json(capsys, tmp_path):
    path = tmp_path / "targets.json"
    path.write_text("{not json")
    code, _, err = run(capsys, "demo-em", "--targets", str(path))
    assert code == 1 and "invalid JSON" in err


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "varfield", "derive", data_path("wave.lag")],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert proc.stdout == (GOLDEN / "wave_derive.txt").read_text()


def test_bad_subcommand_usage():
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 1


def test_demo_em_targets_missing_keys(capsys, tmp_path):
    path = tmp_path / "targets.json"
    path.write_text(json.dumps({"equations": [{"field": "phi"}]}))
    code, _, err = run(capsys, "demo-em", "--targets", str(path))
    assert code == 1 and "malformed targets" in err
