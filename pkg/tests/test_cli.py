import csv
import json
import math
import subprocess
import sys

import jsonschema
import numpy as np
import pytest

from morreylab import _parallel
from morreylab.cli import main
from morreylab.core import GridSpec
from morreylab.report import REPORT_SCHEMA, ExperimentReport, validate_report


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    report = json.loads(out) if out.strip() else None
    if report is not None and "experiment" in report:
        validate_report(report)
    return code, report


def value(report, name):
    return next(r["value"] for r in report["records"] if r["name"] == name)


def test_norm_box(capsys):
    code, rep = run(capsys, "norm", "box", "--sides", "1,4", "--n", "2", "--p", "1.5", "--q", "1")
    assert code == 0
    assert value(rep, "norm") == pytest.approx(1.587401, abs=1e-6)
    assert rep["records"][0]["kind"] == "exact"
    assert "duration_s" in rep


def test_norm_box_unit(capsys):
    code, rep = run(capsys, "norm", "box", "--sides", "1,1", "--n", "2", "--p", "2", "--q", "1")
    assert code == 0 and value(rep, "norm") == 1.0


def test_norm_slab(capsys):
    code, rep = run(capsys, "norm", "slab", "--t", "1", "--n", "2", "--p", "2", "--q", "1")
    assert code == 0 and value(rep, "norm") == 1.0


def test_norm_box_with_infinite_side(capsys):
    code, rep = run(capsys, "norm", "box", "--sides", "1,inf", "--p", "2", "--q", "1")
    assert code == 0 and value(rep, "norm") == 1.0


def test_unbounded_require_finite(capsys):
    code, rep = run(capsys, "norm", "slab", "--t", "1", "--n", "2", "--p", "1", "--q", "1", "--require-finite")
    assert code == 3
    assert rep["status"] == "unbounded" and value(rep, "norm") == "inf"
    code, _ = run(capsys, "norm", "slab", "--t", "1", "--n", "2", "--p", "1", "--q", "1")
    assert code == 0


def test_norm_grid(tmp_path, capsys):
    g = GridSpec((0.0, 0.0), 0.25, (4, 16))
    path = tmp_path / "f.csv"
    rows = "\n".join(",".join(["1"] * 16) for _ in range(4))
    path.write_text(json.dumps(g.to_json()) + "\n" + rows + "\n")
    code, rep = run(capsys, "norm", "grid", "--input", str(path), "--p", "1.5", "--q", "1")
    assert code == 0
    assert value(rep, "norm") == pytest.approx(4 ** (1 / 3), rel=1e-12)
    assert rep["records"][0]["kind"] == "lower"
    code, weak = run(capsys, "norm", "grid", "--input", str(path), "--p", "1.5", "--q", "1", "--weak")
    assert value(weak, "norm") == pytest.approx(value(rep, "norm"), rel=1e-12)


@pytest.mark.parametrize(
    "argv",
    [
        ["norm", "box", "--sides", "1,-4", "--p", "2", "--q", "1"],
        ["norm", "box", "--sides", "1,4", "--p", "1", "--q", "2"],
        ["norm", "box", "--sides", "1,4", "--n", "3", "--p", "2", "--q", "1"],
        ["norm", "box", "--p", "2"],
        ["norm", "grid", "--input", "/nonexistent.csv"],
        ["compose", "--map", "affine"],
        ["compose", "--map", "affine", "--matrix", "1,2,2,4"],
        ["certify", "--map", "identity", "--C", "1", "--domain", "1,0"],
        ["verify", "no-such-suite"],
    ],
)
def test_input_errors_exit_2(capsys, argv):
    assert main(argv) == 2
    assert "error" in capsys.readouterr().err


def test_argparse_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["compose", "--map", "nope"])
    assert exc.value.code == 2


def test_grid_csv_wrong_count(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text(json.dumps(GridSpec((0.0,), 1.0, (4,)).to_json()) + "\n1,2,3\n")
    assert main(["norm", "grid", "--input", str(path)]) == 2


def test_compose_diag(capsys):
    code, rep = run(capsys, "compose", "--map", "diag", "--entries", "1,4", "--p", "1.5", "--q", "1")
    assert code == 0
    assert value(rep, "morrey lower bound") >= 0.629961 - 1e-6
    assert value(rep, "morrey lower bound, diagonal witness boxes") == pytest.approx(4 ** (-1 / 3), rel=1e-9)
    assert value(rep, "morrey lower bound") <= value(rep, "morrey upper bound")


def test_compose_identity_all_one(capsys):
    code, rep = run(capsys, "compose", "--map", "identity")
    assert code == 0
    for rec in rep["records"]:
        assert rec["value"] == pytest.approx(1.0, rel=1e-12), rec["name"]


def test_compose_exp_intervals(capsys):
    code, rep = run(capsys, "compose", "--map", "exp1d", "--p", "2", "--q", "1", "--family", "intervals")
    assert code == 0
    assert value(rep, "set ratio sup |phi^-1 E| / |E|") <= 1 + 1e-6


def test_compose_profile(capsys):
    code, rep = run(capsys, "compose", "--map", "shear-cubic", "--profile", "--domain", "-2,2", "--points", "9")
    assert code == 0
    assert value(rep, "jacobian det_min") == pytest.approx(1.0, abs=1e-9)


def test_certify_exit_codes(capsys):
    code, rep = run(capsys, "certify", "--map", "affine", "--matrix", "2,0,0,3", "--C", "2")
    assert code == 0 and rep["status"] == "certified"
    assert value(rep, "inverse lipschitz bound") == pytest.approx(math.sqrt(2) / 2)
    code, rep = run(capsys, "certify", "--map", "identity", "--C", "1")
    assert code == 0 and rep["status"] == "certified"
    code, rep = run(capsys, "certify", "--map", "shear-cubic", "--domain", "-10,10", "--C", "0.1")
    assert code == 1 and rep["status"] == "failed"
    code, rep = run(capsys, "certify", "--map", "exp1d", "--domain", "0,5", "--C", "0.5", "--points", "5")
    assert code == 4 and rep["status"] == "inconclusive"


def test_verify_suite(capsys):
    code, rep = run(capsys, "verify", "shear-growth", "--p", "2", "--q", "1")
    assert code == 0 and rep["status"] == "PASS"
    notes = [r.get("note", "") for r in rep["records"]]
    assert any("harness choice" in n for n in notes)


def test_verify_fail_exit(capsys, monkeypatch):
    from morreylab import suites

    def broken(report, **_):
        report.check("always fails", 1.0, False, "exact", "test")

    monkeypatch.setitem(suites.SUITES, "broken", broken)
    code, rep = run(capsys, "verify", "broken")
    assert code == 1 and rep["status"] == "FAIL"


def test_no_timing_reproducible(capsys):
    argv = ["compose", "--map", "affine", "--matrix", "1,0.5,-0.3,2", "--seed", "3", "--no-timing"]
    main(argv)
    first = capsys.readouterr().out
    main(argv)
    assert capsys.readouterr().out == first
    assert "duration_s" not in json.loads(first)


def test_seed_changes_random_family(capsys):
    _, a = run(capsys, "compose", "--map", "affine", "--matrix", "1,0.5,-0.3,2", "--seed", "1")
    _, b = run(capsys, "compose", "--map", "affine", "--matrix", "1,0.5,-0.3,2", "--seed", "2")
    assert value(a, "morrey lower bound") != value(b, "morrey lower bound")


def test_csv_output(tmp_path, capsys):
    path = tmp_path / "out.csv"
    code, _ = run(capsys, "norm", "box", "--sides", "1,4", "--p", "1.5", "--q", "1", "--csv", str(path))
    assert code == 0
    rows = list(csv.DictReader(path.open()))
    assert rows[0]["name"] == "norm" and float(rows[0]["value"]) == pytest.approx(1.587401, abs=1e-6)


def test_bundle(tmp_path, capsys):
    cfg = tmp_path / "bundles.json"
    cfg.write_text(json.dumps({"bundles": {"unit-slab": ["norm", "slab", "--t", "1", "--n", "2", "--p", "2", "--q", "1"]}}))
    code, rep = run(capsys, "bundle", str(cfg), "unit-slab", "--no-timing")
    assert code == 0 and value(rep, "norm") == 1.0 and "duration_s" not in rep
    assert main(["bundle", str(cfg), "missing"]) == 2


def test_schema_command(capsys):
    assert main(["schema"]) == 0
    schema = json.loads(capsys.readouterr().out)
    assert schema == json.loads(json.dumps(REPORT_SCHEMA))
    jsonschema.Draft202012Validator.check_schema(schema)


def test_report_schema_rejects_missing_kind():
    rep = ExperimentReport("x")
    rep.add("a", 1.0, "exact", "op")
    obj = rep.to_json()
    del obj["records"][0]["kind"]
    with pytest.raises(jsonschema.ValidationError):
        validate_report(obj)
    with pytest.raises(ValueError):
        rep.add("b", 1.0, "guess", "op")


def test_report_cleans_special_values():
    rep = ExperimentReport("x")
    rep.add("inf", math.inf, "lower_bound", "op", witness={"a": np.float64(2.0), "b": [math.inf]})
    obj = rep.finish().to_json()
    validate_report(obj)
    assert obj["records"][0]["kind"] == "lower"
    assert obj["records"][0]["witness"] == {"a": 2.0, "b": ["inf"]}


def test_thread_count(monkeypatch):
    monkeypatch.setenv(_parallel.ENV_THREADS, "3")
    assert _parallel.thread_count(None) == 3
    assert _parallel.thread_count(8) == 3
    assert _parallel.thread_count(2) == 2
    monkeypatch.delenv(_parallel.ENV_THREADS)
    assert _parallel.thread_count(5) == 5
    assert _parallel.ordered_map(lambda x: x * x, range(20), 4) == [x * x for x in range(20)]


def test_console_script_entry_point():
    out = subprocess.run([sys.executable, "-m", "morreylab.cli", "norm", "box", "--sides", "1,1", "--p", "2",
                          "--q", "1", "--no-timing"], capture_output=True, text=True, check=True)
    assert json.loads(out.stdout)["records"][0]["value"] == 1.0
