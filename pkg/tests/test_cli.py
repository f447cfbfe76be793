import csv
import json

import numpy as np
import pytest

from fractalcz.cli import EXIT_BOUND, EXIT_CONFIG, EXIT_OK, main
from fractalcz.report import REPORT_SCHEMA, load_bundles


def test_build_writes_graph(tmp_path):
    assert main(["build", "--level", "3", "--out", str(tmp_path)]) == EXIT_OK
    data = json.loads((tmp_path / "graph_gasket_L3.json").read_text())
    assert data["n_vertices"] == 42 and len(data["edges"]) == 81


def test_spectrum_csv_has_one_row_per_vertex(tmp_path):
    assert main(["spectrum", "--level", "5", "--out", str(tmp_path), "--save-basis"]) == EXIT_OK
    rows = list(csv.reader(open(tmp_path / "eigenvalues_gasket_L5.csv")))
    assert len(rows) == 1 + 366
    assert (tmp_path / "basis_gasket_L5.fczb").exists()
    assert (tmp_path / "plots" / "eigenvalues_gasket_L5.dat").exists()


def test_kernel_both_routes_agree(tmp_path):
    code = main(["kernel", "--level", "4", "--family", "riesz", "--alpha", "1", "--route", "both", "--out", str(tmp_path)])
    assert code == EXIT_OK
    agree = json.loads((tmp_path / "kernel_riesz_a1.0_L4_agreement.json").read_text())
    assert agree["passed"] and agree["relative_frobenius"] < 1e-6
    s = np.load(tmp_path / "kernel_riesz_a1.0_L4_spectral.npy")
    q = np.load(tmp_path / "kernel_riesz_a1.0_L4_quadrature.npy")
    assert s.shape == (123, 123) and not np.array_equal(s, q)


def test_difference_route_only_for_imaginary_bessel(tmp_path):
    args = ["kernel", "--level", "3", "--alpha", "1", "--route", "difference", "--out", str(tmp_path)]
    assert main([*args, "--family", "riesz"]) == EXIT_CONFIG
    assert main([*args, "--family", "bessel_imaginary"]) == EXIT_OK


def test_config_errors_exit_2(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("this is not a config\n")
    out = str(tmp_path / "o")
    assert main(["verify", "--all", "--config", str(bad), "--out", out]) == EXIT_CONFIG
    assert main(["verify", "--out", out]) == EXIT_CONFIG
    assert main(["verify", "--estimate", "nonsense", "--out", out]) == EXIT_CONFIG
    assert main(["verify", "--estimate", "holder", "--c", "-3", "--out", out]) == EXIT_CONFIG
    assert main(["build", "--level", "40", "--out", out]) == EXIT_CONFIG


def test_report_on_missing_or_empty_dir(tmp_path, monkeypatch):
    assert main(["report", "--dir", str(tmp_path / "absent")]) == EXIT_CONFIG
    assert main(["report", "--dir", str(tmp_path)]) == EXIT_CONFIG
    monkeypatch.setenv("FRACTALCZ_OUT", str(tmp_path))
    assert main(["report"]) == EXIT_CONFIG


def test_verify_interval_and_report(tmp_path, capsys):
    assert main(["verify", "--model", "interval", "--all", "--out", str(tmp_path)]) == EXIT_OK
    [(path, bundle)] = load_bundles(tmp_path)
    assert bundle["schema"] == REPORT_SCHEMA and bundle["passed"]
    assert {e["kind"] for e in bundle["entries"]} <= {"bound", "check"}
    rows = list(csv.DictReader(open(tmp_path / "verify_interval_summary.csv")))
    assert len(rows) == bundle["counts"]["total"]
    assert main(["report", "--dir", str(tmp_path)]) == EXIT_OK
    assert "verify_interval.json" in capsys.readouterr().out


def test_report_flags_failures(tmp_path):
    bundle = {"schema": REPORT_SCHEMA, "command": "verify", "config": {}, "passed": False,
              "counts": {"total": 1, "passed": 0, "errors": 0},
              "entries": [{"label": "x", "kind": "check", "check_id": "x", "passed": False, "value": 1.0, "threshold": 0.1}]}
    (tmp_path / "r.json").write_text(json.dumps(bundle))
    assert main(["report", "--dir", str(tmp_path)]) == EXIT_BOUND


@pytest.mark.slow
def test_holder_constant_flag_is_honored(tmp_path):
    ini = tmp_path / "one.ini"
    ini.write_text("[operators]\nriesz = 1\n")
    out = tmp_path / "o"
    assert main(["verify", "--config", str(ini), "--estimate", "holder", "--c", "22", "--out", str(out)]) == EXIT_OK
    [(_, bundle)] = load_bundles(out)
    assert bundle["config"]["holder_c"] == 22.0
    assert bundle["entries"][0]["details"]["c"] == 22.0
