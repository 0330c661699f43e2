import csv
import json

import pytest

from shockrefl.cli import (
    CURVES_HEADER,
    FIELDS_HEADER,
    SHOCK_HEADER,
    ArtifactError,
    RunConfig,
    local_report,
    main,
    read_fields,
    verify_artifact,
)


@pytest.fixture(scope="module")
def art89(tmp_path_factory):
    out = tmp_path_factory.mktemp("a89") / "run"
    assert main(["solve", "--theta-w-deg", "89", "--n-x", "24", "--n-y", "24", "--out", str(out)]) == 0
    return out


def test_local_worked_case(capsys):
    assert main(["local", "--rho1", "2", "--theta-w-deg", "85"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["euler_incident"]["p1"] == pytest.approx(2.75, abs=1e-12)
    assert doc["normal_reflection"]["rho2_over_rho1"] == pytest.approx(11 / 6, abs=1e-12)
    assert doc["normal_reflection"]["p2_over_p1"] == pytest.approx(2.4, abs=1e-12)
    assert doc["transition"]["theta_d"] == pytest.approx(48.9287, abs=1e-4)
    for key in ("u1", "xi0"):
        assert key in doc["potential_incident"]
    assert set(doc["state_two"]) == {"a", "b"}


def test_local_normal_reflection_has_zero_u2():
    rep = local_report(RunConfig(theta_w_deg=90).validate())
    assert rep["state_two"]["a"]["u2"] == 0.0


def test_local_rejects_equal_densities(capsys):
    assert main(["local", "--rho1", "1"]) == 2
    assert "rho1 > rho0" in capsys.readouterr().err


@pytest.mark.parametrize("flags,needle", [(["--gamma", "1.0"], "gamma > 1"),
                                         (["--theta-w-deg", "0"], "theta_w_deg"),
                                         (["--theta-w-deg", "91"], "theta_w_deg")])
def test_validation_names_inequality(capsys, flags, needle):
    assert main(["local"] + flags) == 2
    assert needle in capsys.readouterr().err


def test_config_file_overridden_by_flags(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"rho1": 3.0, "theta_w_deg": 80}))
    assert main(["local", "--config", str(cfg), "--rho1", "2"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["euler_incident"]["rho1"] == 2.0 and doc["theta_w"] == 80
    cfg.write_text(json.dumps({"bogus": 1}))
    assert main(["local", "--config", str(cfg)]) == 2


def test_curves_two_samples_match_local(tmp_path, capsys):
    path = tmp_path / "c.csv"
    assert main(["curves", "--sweep-start", "1.5", "--sweep-stop", "4.0", "--samples", "2", "--csv", str(path)]) == 0
    rows = list(csv.reader(path.open()))
    assert rows[0] == CURVES_HEADER
    assert len(rows) == 3
    for row in rows[1:]:
        doc = local_report(RunConfig(rho1=float(row[0])).validate())
        assert float(row[1]) == pytest.approx(doc["transition"]["theta_d"], abs=1e-12)
        assert float(row[2]) == pytest.approx(doc["transition"]["theta_s"], abs=1e-12)
        assert float(row[3]) == pytest.approx(float(row[2]) - float(row[1]), abs=1e-12)
        assert row[4] == "ok"


def test_curves_empty_range_rejected(tmp_path):
    assert main(["curves", "--sweep-start", "2", "--sweep-stop", "2", "--csv", str(tmp_path / "x.csv")]) == 2


def test_solve_normal_reflection_exact(tmp_path):
    out = tmp_path / "deep" / "nr"
    assert main(["solve", "--theta-w-deg", "90", "--n-x", "12", "--n-y", "12", "--out", str(out)]) == 0
    rows = list(csv.DictReader((out / "fields.csv").open()))
    assert max(abs(float(r["psi"])) for r in rows) == 0.0
    rep = json.loads((out / "report.json").read_text())
    assert rep["solve"]["outer_iterations"] == 0
    assert rep["diagnostics"]["w11_distance_to_normal"]["value"] == 0.0
    assert rep["diagnostics"]["drr_jump"]["verdict"] == "n/a"


def test_solve_artifact_layout(art89):
    assert sorted(p.name for p in art89.iterdir()) == ["config.json", "fields.csv", "report.json",
                                                       "shock.csv", "timing.json"]
    assert next(csv.reader((art89 / "fields.csv").open())) == FIELDS_HEADER
    assert next(csv.reader((art89 / "shock.csv").open())) == SHOCK_HEADER
    rep = json.loads((art89 / "report.json").read_text())
    assert rep["solve"]["converged"] and "determinism" in rep
    assert "wall_clock" not in json.dumps(rep)
    # full round-trip precision
    row = next(csv.DictReader((art89 / "fields.csv").open()))
    assert repr(float(row["phi"])) == repr(float(repr(float(row["phi"]))))


def test_verify_roundtrip_and_idempotent(art89, capsys):
    assert main(["verify", str(art89)]) == 0
    first = capsys.readouterr().out
    assert main(["verify", str(art89)]) == 0
    assert capsys.readouterr().out == first
    rep = json.loads((art89 / "report.json").read_text())
    block = verify_artifact(art89)
    assert block.to_dict() == rep["diagnostics"]


def test_corrupted_fields_fail_ordering(art89, tmp_path, capsys):
    bad = tmp_path / "bad"
    bad.mkdir()
    for name in ("config.json", "shock.csv", "report.json"):
        (bad / name).write_text((art89 / name).read_text())
    rows = list(csv.reader((art89 / "fields.csv").open()))
    k = len(rows) // 2
    rows[k][6] = repr(float(rows[k][6]) - 0.1)
    with (bad / "fields.csv").open("w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)
    assert main(["verify", str(bad)]) == 1
    assert "ordering" in capsys.readouterr().out


def test_malformed_fields_names_file_and_line(art89, tmp_path, capsys):
    bad = tmp_path / "bad2"
    bad.mkdir()
    (bad / "config.json").write_text((art89 / "config.json").read_text())
    lines = (art89 / "fields.csv").read_text().splitlines()
    lines[4] = lines[4].replace(",", ";", 1)
    (bad / "fields.csv").write_text("\n".join(lines) + "\n")
    with pytest.raises(ArtifactError, match=r"fields\.csv:5"):
        read_fields(bad / "fields.csv")
    assert main(["verify", str(bad)]) == 2
    assert "fields.csv:5" in capsys.readouterr().err


def test_regime_error_exit_code_and_report(tmp_path):
    out = tmp_path / "low"
    assert main(["solve", "--theta-w-deg", "45", "--out", str(out)]) == 2
    rep = json.loads((out / "report.json").read_text())
    assert "RegimeError" in rep["error"]


def test_nonconvergence_exit_code_and_report(tmp_path):
    out = tmp_path / "cap"
    code = main(["solve", "--n-x", "12", "--n-y", "12", "--outer-max-iter", "1", "--out", str(out)])
    assert code == 3
    rep = json.loads((out / "report.json").read_text())
    assert "NonconvergenceError" in rep["error"] and not rep["solve"]["converged"]
    assert (out / "fields.csv").exists()


def test_solve_is_deterministic(tmp_path):
    args = ["solve", "--theta-w-deg", "89", "--n-x", "16", "--n-y", "16"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    for name in ("fields.csv", "report.json", "shock.csv", "config.json"):
        a = (tmp_path / "a" / name).read_bytes()
        b = (tmp_path / "b" / name).read_bytes()
        if name in ("report.json", "config.json"):
            a = a.replace(str(tmp_path / "a").encode(), b"OUT")
            b = b.replace(str(tmp_path / "b").encode(), b"OUT")
        assert a == b, name
