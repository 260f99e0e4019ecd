from __future__ import annotations

import csv
import json
import math
import subprocess
import sys

import pytest

from nedspec.cli import main

PAPER_2D = {"kind": "builtin", "name": "paper_2d", "params": [1.0, 0.1]}
DIAG = {"kind": "builtin", "name": "constant_diag", "params": [2.0, 0.5]}


def write_config(tmp_path, name="config.json", **fields):
    cfg = {"window": [-30, 30], "output_dir": str(tmp_path / "out")}
    cfg.update(fields)
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def read_report(tmp_path, name):
    return json.loads((tmp_path / "out" / name).read_text())


def test_verify_paper_constants(tmp_path):
    cert = {"projector": {"matrix": [[1, 0], [0, 0]], "reference_index": 0},
            "log_K": 0.9, "log_alpha": -0.9, "log_epsilon": 0.2, "flavor": "strong_NED"}
    cfg = write_config(tmp_path, system=PAPER_2D, certificate=cert)
    assert main(["verify", "--config", cfg]) == 0
    rep = read_report(tmp_path, "verify_report.json")
    assert rep["report"]["pass"] is True
    assert rep["config"]["window"] == [-30, 30]


def test_verify_uniform_claim_fails(tmp_path):
    cert = {"projector": {"matrix": [[1, 0], [0, 0]], "reference_index": 0},
            "log_K": 0.9, "log_alpha": -0.9, "epsilon": 1.0}
    (tmp_path / "cert.json").write_text(json.dumps(cert))
    cfg = write_config(tmp_path, system=PAPER_2D)
    assert main(["verify", "--config", cfg, "--certificate", str(tmp_path / "cert.json")]) == 1


def test_malformed_config(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["spectrum", "--config", str(bad)]) == 2
    assert main(["spectrum", "--config", str(tmp_path / "missing.json")]) == 2
    cfg = write_config(tmp_path, system={"kind": "builtin", "name": "nope"})
    assert main(["spectrum", "--config", cfg]) == 2
    cfg = write_config(tmp_path, system=DIAG, bisect_tol=-1.0)
    assert main(["spectrum", "--config", cfg]) == 2
    assert main(["frobnicate", "--config", cfg]) == 2


def test_empty_window(tmp_path):
    cfg = write_config(tmp_path, system=DIAG, window=[5, 4])
    assert main(["spectrum", "--config", cfg]) == 2


def test_spectrum_constant_diag(tmp_path):
    cfg = write_config(tmp_path, system=DIAG)
    assert main(["spectrum", "--config", cfg]) == 0
    rep = read_report(tmp_path, "spectrum_report.json")
    ivs = rep["spectrum"]["intervals"]
    assert len(ivs) == 2
    assert ivs[0][0] <= 0.5 <= ivs[0][1] and ivs[1][0] <= 2.0 <= ivs[1][1]
    with open(tmp_path / "out" / "spectrum_scan.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["gamma", "status", "stable_dim"]
    assert len(rows) - 1 == rep["spectrum"]["n_samples"]


def test_spectrum_paper_scalar_reports_discrepancy(tmp_path):
    cfg = write_config(tmp_path, system={"kind": "builtin", "name": "paper_scalar", "params": [1.0, 0.1]},
                       window=[-40, 40])
    assert main(["spectrum", "--config", cfg]) == 0
    rep = read_report(tmp_path, "spectrum_report.json")["spectrum"]
    assert len(rep["intervals"]) == 1
    assert rep["references"]["reference_conflict"] is True


def test_spectrum_bracket_not_resolvent(tmp_path, capsys):
    cfg = write_config(tmp_path, system=DIAG, gamma_bracket=[0.5, 3.0])
    assert main(["spectrum", "--config", cfg]) == 3
    assert "widen" in capsys.readouterr().err


def test_reduce_paper_2d(tmp_path):
    cfg = write_config(tmp_path, system=PAPER_2D)
    assert main(["reduce", "--config", cfg]) == 0
    rep = read_report(tmp_path, "reduce_report.json")
    assert rep["reduction"]["blocks"]["dims"] == [1, 1]
    assert rep["similarity"]["max_residual"] <= 1e-9
    with open(tmp_path / "out" / "transform_norms.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["k", "log_norm_S", "log_norm_S_inv"]
    assert len(rows) == 62
    assert all(float(r[1]) <= math.log(math.sqrt(2)) + 1e-9 for r in rows[1:])


def test_reduce_scalar_passthrough(tmp_path):
    cfg = write_config(tmp_path, system={"kind": "builtin", "name": "constant", "params": [0.4]})
    assert main(["reduce", "--config", cfg]) == 0
    assert read_report(tmp_path, "reduce_report.json")["reduction"]["blocks"]["dims"] == [1]


def test_reduce_without_cuts(tmp_path):
    cfg = write_config(tmp_path, system=DIAG, gamma_bracket=[0.6, 1.5])
    assert main(["reduce", "--config", cfg]) == 3


def test_bundles(tmp_path):
    cfg = write_config(tmp_path, system=DIAG)
    assert main(["bundles", "--config", cfg, "--gamma", "1.0"]) == 0
    rep = read_report(tmp_path, "bundles_report.json")
    assert (rep["stable"]["dim"], rep["unstable"]["dim"], rep["complementary"]) == (1, 1, True)
    assert main(["bundles", "--config", cfg, "--gamma", "100", "--fiber", "3"]) == 0
    rep = read_report(tmp_path, "bundles_report.json")
    assert rep["stable"]["dim"] == 2 and rep["fiber"] == 3
    assert main(["bundles", "--config", cfg, "--gamma", "2.0"]) == 4
    assert main(["bundles", "--config", cfg]) == 2


def test_table_system_and_csv_format(tmp_path):
    table = {"kind": "table", "dimension": 2, "k_min": -70,
             "matrices": [[2.0, 0.0, 0.0, 0.5]] * 141}
    cfg = write_config(tmp_path, system=table, report_format="csv")
    assert main(["spectrum", "--config", cfg]) == 0
    assert not (tmp_path / "out" / "spectrum_report.json").exists()
    assert (tmp_path / "out" / "spectrum_scan.csv").exists()


def test_reports_deterministic_modulo_timestamp(tmp_path):
    cfg = write_config(tmp_path, system=DIAG)
    outs = []
    for d in ("a", "b"):
        assert main(["spectrum", "--config", cfg, "--out", str(tmp_path / d)]) == 0
        rep = json.loads((tmp_path / d / "spectrum_report.json").read_text())
        rep.pop("generated_at")
        outs.append(json.dumps(rep, sort_keys=True))
        outs.append((tmp_path / d / "spectrum_scan.csv").read_bytes())
    assert outs[0] == outs[2] and outs[1] == outs[3]


@pytest.mark.parametrize("module", ["nedspec", "nedspec.cli"])
def test_version_entry_points(module):
    out = subprocess.run([sys.executable, "-m", module, "--version"], capture_output=True, text=True, check=True)
    assert "nedspec" in out.stdout
