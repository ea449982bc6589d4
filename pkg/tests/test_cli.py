import json
from pathlib import Path

import pytest

from slsampling.cli import main, read_golden
from slsampling.config import ConfigError, parse_config

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
P0 = CONFIGS / "p0.ini"


def run(tmp_path, *args):
    return main(list(args) + ["--out", str(tmp_path)])


def data_rows(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# config_fingerprint=")
    assert "units=" in lines[0]
    return lines[1].split(","), [l.split(",") for l in lines[2:]]


def test_eigs_file(tmp_path):
    assert run(tmp_path, "eigs", "--config", str(P0)) == 0
    header, rows = data_rows(tmp_path / "spectrum.csv")
    assert header == ["n", "lambda_n", "s_n", "omega_prime", "residual", "nearest_lattice",
                      "lattice_family"]
    assert len(rows) == 30
    lams = [float(r[1]) for r in rows]
    assert all(b > a for a, b in zip(lams, lams[1:]))
    assert rows[0][2].endswith("j")
    raw = (tmp_path / "spectrum.csv").read_bytes()
    assert b"\r" not in raw


def test_eigs_deterministic_across_threads(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["eigs", "--config", str(P0), "--out", str(a)]) == 0
    assert main(["eigs", "--config", str(P0), "--out", str(b), "--threads", "3"]) == 0
    assert (a / "spectrum.csv").read_bytes() == (b / "spectrum.csv").read_bytes()


def test_constraint_violation_exit_code(tmp_path, capsys):
    cfg = tmp_path / "neg.ini"
    cfg.write_text(P0.read_text().replace("delta = 1\n", "delta = -1\n"))
    assert run(tmp_path, "eigs", "--config", str(cfg)) == 2
    assert "delta must be positive" in capsys.readouterr().err


def test_malformed_value_names_key(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text(P0.read_text().replace("gamma = 1\n", "gamma = one\n"))
    assert run(tmp_path, "eigs", "--config", str(cfg)) == 2
    assert "[transmission] gamma" in capsys.readouterr().err


def test_empty_config(tmp_path):
    cfg = tmp_path / "empty.ini"
    cfg.write_text("")
    assert run(tmp_path, "verify", "--config", str(cfg)) == 2


def test_omega_scan_brackets_lowest_eigenvalue(tmp_path):
    assert run(tmp_path, "omega", "--config", str(P0)) == 0
    _, rows = data_rows(tmp_path / "omega.csv")
    lam = [float(r[0]) for r in rows]
    w = [float(r[1]) for r in rows]
    i = next(k for k in range(len(lam) - 1) if lam[k] <= -4.936719732317599 <= lam[k + 1])
    assert w[i] * w[i + 1] < 0


def test_omega_matches_spectrum_residuals(tmp_path):
    assert run(tmp_path, "eigs", "--config", str(P0)) == 0
    _, rows = data_rows(tmp_path / "spectrum.csv")
    lams = [r[1] for r in rows[:3]]
    cfg = tmp_path / "grid.ini"
    text = P0.read_text().split("[omega]")[0] + "[omega]\ngrid = [" + ", ".join(lams) + "]\n"
    cfg.write_text(text)
    assert run(tmp_path, "omega", "--config", str(cfg)) == 0
    _, orows = data_rows(tmp_path / "omega.csv")
    for r, o in zip(rows, orows):
        assert abs(float(o[1])) == pytest.approx(float(r[4]), rel=1e-6, abs=1e-14)


def test_omega_empty_grid(tmp_path):
    cfg = tmp_path / "nogrid.ini"
    cfg.write_text(P0.read_text().split("[omega]")[0])
    assert run(tmp_path, "omega", "--config", str(cfg)) == 2


def test_transform_json(tmp_path):
    assert run(tmp_path, "transform", "--config", str(P0), "--format", "json") == 0
    doc = json.loads((tmp_path / "transform.json").read_text())
    assert doc["columns"] == ["lambda", "F"]
    assert len(doc["rows"]) == 4
    assert doc["config_fingerprint"]


def test_reconstruct_files(tmp_path):
    cfg = CONFIGS / "real.ini"
    assert run(tmp_path, "reconstruct", "--config", str(cfg)) == 0
    summary = json.loads((tmp_path / "reconstruct_summary.json").read_text())
    assert summary["trend_ok"]
    for N in (25, 50, 100):
        _, rows = data_rows(tmp_path / f"reconstruct_N{N}.csv")
        assert len(rows) == 4
        assert all(float(r[5]) <= 1e-10 for r in rows)


def test_verify_passes_on_reference(tmp_path):
    assert run(tmp_path, "verify", "--config", str(P0)) == 0
    _, rows = data_rows(tmp_path / "verify.csv")
    status = {r[0]: r[3] for r in rows}
    assert status["orthogonality_signed[computed]"] == "pass"
    assert status["orthogonality_positive_form[computed]"] == "info"


def test_verify_flags_corrupted_golden(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text(P0.read_text().replace("delta = 1\n", "delta = 1.5\n"))
    assert main(["eigs", "--config", str(bad), "--out", str(tmp_path / "g")]) == 0
    golden = tmp_path / "g" / "spectrum.csv"
    assert len(read_golden(golden)) == 30
    cfg = tmp_path / "golden.ini"
    cfg.write_text(P0.read_text() + f"\n[verify]\ngolden = {golden}\n")
    assert run(tmp_path, "verify", "--config", str(cfg)) == 1
    out = capsys.readouterr().out
    assert "FAIL orthogonality_signed" in out


def test_classical_report(tmp_path):
    assert run(tmp_path, "classical", "--config", str(P0)) == 0
    summary = json.loads((tmp_path / "classical_summary.json").read_text())
    assert summary["wks_node_error"] == 0.0
    assert summary["levinson_jittered_node_error"] == 0.0
    assert summary["bound_violation_rejected"] is True


def test_parse_config_table_potential(tmp_path):
    (tmp_path / "q1.txt").write_text("0 0\n0.5 1\n1 0\n")
    text = P0.read_text().replace("seg1 = poly:[0]", "seg1 = table:q1.txt")
    cfg = parse_config(text, tmp_path)
    assert cfg.problem.q.segments[0].values == (0.0, 1.0, 0.0)
    with pytest.raises(ConfigError, match="seg2"):
        parse_config(text.replace("seg2 = poly:[0]", "seg2 = spline:[0]"), tmp_path)
    with pytest.raises(ConfigError, match="cannot read table"):
        parse_config(text.replace("q1.txt", "missing.txt"), tmp_path)


def test_parse_config_rejects_bad_solver_values():
    text = P0.read_text()
    with pytest.raises(ConfigError, match="tol_ode"):
        parse_config(text.replace("tol_ode = 1e-10", "tol_ode = -1"))
    with pytest.raises(ConfigError, match="n_eigs"):
        parse_config(text.replace("n_eigs = 30", "n_eigs = 0"))
    with pytest.raises(ConfigError, match="missing key \\[interval\\] b"):
        parse_config(text.replace("b = 3\n", ""))
