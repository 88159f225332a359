"""
Tests for the command-line interface: exit codes, artifacts and manifests
"""
import json

import pytest

from cslnoise import __version__
from cslnoise.audit import AuditTrail
from cslnoise.cli import main
from cslnoise.manifest import RunManifest
from cslnoise.pipeline import spectrum_name


@pytest.fixture
def small_config(cfg, tmp_path):
    """Four temperatures, draw-mode ringdowns and a short exclusion grid."""
    cfg.campaign.temperatures_mk = [43.0, 84.0, 171.0, 351.0]
    cfg.exclusion.n_points = 3
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg.model_dump(mode="json"), indent=2))
    return path


@pytest.fixture
def pipeline_run(small_config, tmp_path):
    out = tmp_path / "run"
    assert main(["pipeline", "--config", str(small_config), "--seed", "11", "--out", str(out)]) == 0
    return out


def _stderr_payload(capsys):
    err = capsys.readouterr().err.strip().splitlines()[-1]
    return json.loads(err)


def test_nonpositive_force_noise_exits_2(capsys):
    assert main(["csl-exclude", "--s-f0", "0"]) == 2
    payload = _stderr_payload(capsys)
    assert payload["error"] == "PreconditionError"
    assert payload["exit_code"] == 2


def test_config_schema_violation_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"resonator": {"f0": 8174.0}}))
    assert main(["pipeline", "--config", str(bad)]) == 2
    payload = _stderr_payload(capsys)
    assert payload["message"] == "config schema violation"


def test_unparseable_and_missing_config(tmp_path):
    broken = tmp_path / "broken.yaml"
    broken.write_text("campaign: [unclosed\n")
    assert main(["pipeline", "--config", str(broken)]) == 2
    assert main(["pipeline", "--config", str(tmp_path / "nope.json")]) == 2


def test_pipeline_manifest_is_reproducible(small_config, pipeline_run, tmp_path):
    again = tmp_path / "again"
    assert main(["pipeline", "--config", str(small_config), "--seed", "11", "--out", str(again)]) == 0
    a, b = RunManifest.load(pipeline_run), RunManifest.load(again)
    assert a.outputs == b.outputs
    assert a.output_digest() == b.output_digest()
    assert a.seed == 11 and a.command == "pipeline"
    assert a.config_sha256 == b.config_sha256
    assert a.verify(pipeline_run) == {}
    assert "exclusion.csv" in a.outputs


def test_stagewise_commands(small_config, pipeline_run, tmp_path):
    cfg = ["--config", str(small_config)]
    spectrum = pipeline_run / "spectra" / f"{spectrum_name(0.043)}.csv"
    fit_out = tmp_path / "fit.json"
    assert main(["fit-spectrum", str(spectrum), *cfg, "--out", str(fit_out)]) == 0
    fit = json.loads(fit_out.read_text())
    assert fit["B"] > 0
    assert fit["temperature_k"] == pytest.approx(0.043, rel=0.05)

    held = tmp_path / "held.json"
    assert main(["fit-spectrum", str(spectrum), *cfg, "--hold", "A=1.23e-13", "--hold", "C=3.78e-13", "--out", str(held)]) == 0
    assert json.loads(held.read_text())["held"] == ["A", "C"]
    assert main(["fit-spectrum", str(spectrum), *cfg, "--hold", "Q=1"]) == 2

    q_out = tmp_path / "q.json"
    assert main(["estimate-q", str(pipeline_run / "ringdowns.csv"), "--out", str(q_out)]) == 0
    assert len(json.loads(q_out.read_text())) == 4

    reg_dir = tmp_path / "reg"
    assert main(
        ["regress-noise", *cfg, "--fits", str(pipeline_run / "fits.json"), "--q", str(pipeline_run / "q_estimates.json"), "--out", str(reg_dir)]
    ) == 0
    assert (reg_dir / "offset_scan.csv").exists()
    assert RunManifest.load(reg_dir).inputs

    bud_dir = tmp_path / "budget"
    assert main(["budget", str(reg_dir / "regression.json"), *cfg, "--out", str(bud_dir)]) == 0
    budget = json.loads((bud_dir / "budget.json").read_text())
    assert budget["coupling_fh"] == pytest.approx(116.0, rel=0.1)

    if budget["s_f0_an2_per_hz"] > 0:
        ex_dir = tmp_path / "excl"
        assert main(["csl-exclude", *cfg, "--budget", str(bud_dir / "budget.json"), "--n-points", "3", "--out", str(ex_dir)]) == 0
        assert len((ex_dir / "exclusion.csv").read_text().splitlines()) == 4


def test_estimate_q_rejects_short_sweep(tmp_path):
    table = tmp_path / "two.csv"
    table.write_text("gain,q_a,sigma_q_a\n1000,6e4,40\n2000,1.1e5,60\n")
    assert main(["estimate-q", str(table)]) == 2


def test_validate_reference_rows(tmp_path, capsys):
    assert main(["validate", "--config", str(tmp_path / "config.json")]) == 2
    assert main(["validate"]) == 0


def test_audit_records_every_command(tmp_path):
    main(["csl-exclude", "--s-f0", "-1"])
    assert main(["audit", "--last", "5"]) == 0
    entries = AuditTrail().entries()
    assert entries[-1]["operation"] == "csl-exclude"
    assert entries[-1]["status"] == "FAILED"


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert __version__ in capsys.readouterr().out
