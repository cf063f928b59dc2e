import csv
import json

import numpy as np
import pytest

from fkquasi import cli, io


def run(*argv):
    return cli.main(list(argv))


@pytest.fixture(scope="module")
def classic(tmp_path_factory):
    out = tmp_path_factory.mktemp("classic")
    assert run("solve", "--config", "fk-classic", "--out-dir", str(out)) == 0
    return out


def test_solve_outputs(classic):
    for suffix in ("report.csv", "trace.csv", "constants.json", "summary.json"):
        assert (classic / f"fk-classic_{suffix}").is_file()
    s = io.read_json(classic / "fk-classic_summary.json")
    assert s["verification"]["passed"]
    assert s["residual_sup"] < 1e-10
    c = io.read_json(classic / "fk-classic_constants.json")
    assert set(c) >= {"B", "R_V", "K_V", "lambda_star", "r_Z"}


def test_verify_roundtrip(classic):
    rep = str(classic / "fk-classic_report.csv")
    assert run("verify", rep, "--config", "fk-classic") == 0


def test_verify_detects_tampering(classic, tmp_path, capsys):
    src = classic / "fk-classic_report.csv"
    rows = list(csv.reader(open(src)))
    u = rows[0].index("u0")
    rows[50][u] = io.fmt(float(rows[50][u]) + 1e-3)
    bad = tmp_path / "bad_report.csv"
    with open(bad, "w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)
    (tmp_path / "bad_summary.json").write_text((classic / "fk-classic_summary.json").read_text())
    assert run("verify", str(bad), "--config", "fk-classic") == 3
    assert "residual" in capsys.readouterr().err


def test_deterministic(classic, tmp_path):
    assert run("solve", "--config", "fk-classic", "--out-dir", str(tmp_path)) == 0
    for suffix in ("report.csv", "summary.json"):
        assert (tmp_path / f"fk-classic_{suffix}").read_bytes() == (classic / f"fk-classic_{suffix}").read_bytes()


def test_report_values_parse_exactly(classic):
    idx, a, u, r = io.read_report_csv(classic / "fk-classic_report.csv")
    assert idx.shape == (201, 1)
    assert np.all(np.isfinite(u)) and np.all(r < 1e-10)


def test_generate_and_atlas(tmp_path):
    assert run("generate", "--config", "fibonacci-address", "--out-dir", str(tmp_path)) == 0
    pts = np.loadtxt(tmp_path / "fibonacci-address_points.csv", delimiter=",", skiprows=1, ndmin=2)
    gaps = np.unique(np.round(np.diff(np.sort(pts[:, 0])), 9))
    np.testing.assert_allclose(gaps, [1.0, (1 + 5**0.5) / 2], atol=1e-9)
    assert run("atlas", "--config", "fk-classic", "--out-dir", str(tmp_path)) == 0
    assert (tmp_path / "fk-classic_atlas.csv").is_file()


def test_generate_without_pointset(tmp_path):
    assert run("generate", "--config", "fk-classic", "--out-dir", str(tmp_path)) == 2


def test_export_plot_data(classic, tmp_path):
    rep = str(classic / "fk-classic_report.csv")
    assert run("export-plot-data", "--config", "fk-classic", "--report", rep, "--out-dir", str(tmp_path)) == 0
    rows = list(csv.reader(open(tmp_path / "fk-classic_plot.csv")))
    assert rows[0] == ["target0", "u0", "residual"]
    assert len(rows) == 202


def test_config_errors(tmp_path):
    assert run("solve", "--config", str(tmp_path / "missing.json")) == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({
        "potential": {"kind": "one_minus_cos"},
        "interaction": {"family": "nn_quadratic_1d", "window": {"lo": -5, "hi": 5}},
        "type": {"sigma": 1, "radius": 3.2},
        "mode": {"kind": "magnified"},
    }))
    assert run("solve", "--config", str(bad), "--out-dir", str(tmp_path)) == 2
    assert run("frobnicate") == 2


def test_solver_failure_exit(tmp_path):
    path = tmp_path / "weak.json"
    path.write_text(json.dumps({
        "potential": {"kind": "one_minus_cos"},
        "interaction": {"family": "nn_quadratic_1d", "window": {"lo": -20, "hi": 20}},
        "type": {"sigma": 5, "radius": 3.2},
        "mode": {"kind": "magnified", "lambda": 2.0},
        "output": {"prefix": "weak"},
    }))
    assert run("solve", "--config", str(path), "--out-dir", str(tmp_path)) == 4


@pytest.mark.parametrize("preset", ["fibonacci-scaled", "fibonacci-address", "fk-multidim"])
def test_presets_run(preset, tmp_path):
    assert run("run", "--config", preset, "--out-dir", str(tmp_path)) == 0
    s = io.read_json(tmp_path / f"{preset}_summary.json")
    assert s["verification"]["passed"]
    assert run("verify", str(tmp_path / f"{preset}_report.csv"), "--config", preset) == 0
