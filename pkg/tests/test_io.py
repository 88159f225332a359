"""
Tests for artifact I/O, spectrum readers, run manifests and the audit trail
"""
import json

import numpy as np
import pandas as pd
import pytest

from cslnoise.audit import AuditTrail
from cslnoise.errors import PreconditionError
from cslnoise.io import (
    dumps,
    read_exclusion_csv,
    read_header,
    read_json,
    read_ringdown_table,
    read_spectrum_csv,
    read_timeseries,
    write_json,
    write_spectrum_csv,
    write_timeseries,
)
from cslnoise.manifest import MANIFEST_NAME, RunManifest
from cslnoise.readers import SpectrumCSVReader, TwoColumnReader, read_spectrum
from cslnoise.types import Spectrum, TimeSeries


def _spectrum():
    rng = np.random.default_rng(2)
    f = np.arange(100, 164) * (100_000.0 / 65536)
    valid = np.ones(f.size, bool)
    valid[0] = False
    return Spectrum(
        f=f,
        psd=rng.gamma(20.0, 1.0 / 20.0, f.size) * 1e-42,
        n_av=20,
        valid=valid,
        meta={"temperature_k": 0.043, "setpoint_k": 0.043, "gain": 2500.0},
    )


def test_spectrum_csv_round_trip_is_byte_stable(tmp_path):
    spec = _spectrum()
    a = write_spectrum_csv(spec, tmp_path / "a.csv")
    back = read_spectrum_csv(a)
    b = write_spectrum_csv(back, tmp_path / "b.csv")
    assert a.read_bytes() == b.read_bytes()
    assert np.array_equal(back.psd, spec.psd)
    assert np.array_equal(back.valid, spec.valid)
    assert back.meta == spec.meta
    assert back.n_av == 20


def test_spectrum_csv_header(tmp_path):
    path = write_spectrum_csv(_spectrum(), tmp_path / "s.csv")
    lines = path.read_text().splitlines()
    assert [l.split(":")[0] for l in lines[:5]] == ["# df_hz", "# kind", "# meta", "# n_av", "# unit"]
    assert lines[5] == "f_hz,psd,rel_err,valid"
    header = read_header(path)
    assert header["kind"] == "cslnoise-spectrum"
    assert header["unit"] == "Wb^2/Hz"


def test_timeseries_csv_and_npz(tmp_path):
    ts = TimeSeries(values=np.sin(np.arange(500) * 0.1) * 1e-12, fs=40_000.0, unit="m", meta={"q_a": 2e4})
    for name in ("r.csv", "r.npz"):
        back = read_timeseries(write_timeseries(ts, tmp_path / name))
        assert np.array_equal(back.values, ts.values)
        assert back.fs == ts.fs
        assert back.unit == "m"
        assert back.meta == {"q_a": 2e4}
    with pytest.raises(PreconditionError):
        write_timeseries(ts, tmp_path / "r.bin")


def test_json_format(tmp_path):
    path = write_json({"b": float("nan"), "a": (1, 2), "c": np.float64(0.5)}, tmp_path / "x.json")
    text = path.read_text()
    assert text.endswith("}\n")
    assert text == dumps({"a": [1, 2], "b": None, "c": 0.5})
    assert read_json(path) == {"a": [1, 2], "b": None, "c": 0.5}
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(PreconditionError):
        read_json(tmp_path / "bad.json")
    with pytest.raises(PreconditionError):
        read_json(tmp_path / "missing.json")


def test_read_spectrum_dispatch(tmp_path):
    own = write_spectrum_csv(_spectrum(), tmp_path / "own.csv")
    assert SpectrumCSVReader().can_read(own)
    assert read_spectrum(own).n_av == 20

    table = tmp_path / "scope.txt"
    table.write_text("freq psd\n8000.0 1.0e-13\n8000.5 1.1e-13\n8001.0 0.9e-13\n")
    spec = read_spectrum(table)
    assert spec.unit == "phi0^2/Hz"
    assert len(spec) == 3
    assert spec.df == pytest.approx(0.5)
    assert spec.meta["source"] == "scope.txt"

    averaged = TwoColumnReader(n_av=16).read(table)
    assert np.allclose(averaged.rel_err, 0.25)

    with pytest.raises(PreconditionError):
        read_spectrum(tmp_path / "nothing.csv")
    (tmp_path / "x.h5").write_bytes(b"\x00")
    with pytest.raises(PreconditionError):
        read_spectrum(tmp_path / "x.h5")


def test_ringdown_table_columns(tmp_path):
    path = tmp_path / "ring.csv"
    pd.DataFrame(
        {
            "temperature_k": [0.043] * 4,
            "gain": [1000.0, 1500.0, 2000.0, -2500.0],
            "q_a": [6.0e4, 8.5e4, 1.1e5, 1.3e5],
            "sigma_q_a": [40.0, 50.0, 60.0, 80.0],
            "in_sweep": [1, 1, 1, 0],
        }
    ).to_csv(path, index=False)
    df = read_ringdown_table(path)
    assert len(df) == 3
    assert df["inv_gain"].iloc[0] == pytest.approx(1e-3)
    assert df["sigma_inv_q_a"].iloc[0] == pytest.approx(40.0 / 6.0e4**2)

    bad = tmp_path / "bad.csv"
    pd.DataFrame({"q_a": [1.0, 2.0]}).to_csv(bad, index=False)
    with pytest.raises(PreconditionError):
        read_ringdown_table(bad)


def test_exclusion_csv_reads_pairs(tmp_path):
    path = tmp_path / "excl.csv"
    path.write_text("r_c_m,lambda_max_per_s\n1e-07,2.1e-08\n1e-06,3e-10\n")
    assert read_exclusion_csv(path) == [(1e-7, 2.1e-8), (1e-6, 3e-10)]


def test_manifest_verify(tmp_path):
    out = tmp_path / "run"
    write_json({"x": 1}, out / "a.json")
    write_json({"y": 2}, out / "sub" / "b.json")
    cfg = tmp_path / "config.json"
    cfg.write_text("{}")
    m = RunManifest.start("pipeline", argv=["pipeline"], config_path=cfg, seed=7)
    m.finish(out)
    assert (out / MANIFEST_NAME).exists()
    loaded = RunManifest.load(out)
    assert set(loaded.outputs) == {"a.json", "sub/b.json"}
    assert loaded.config_sha256 == m.config_sha256
    assert loaded.verify(out) == {}

    write_json({"x": 3}, out / "a.json")
    (out / "sub" / "b.json").unlink()
    write_json({}, out / "c.json")
    assert loaded.verify(out) == {"a.json": "modified", "sub/b.json": "deleted", "c.json": "new"}

    with pytest.raises(PreconditionError):
        m.add_input(tmp_path / "missing.csv")


def test_manifest_output_digest_ignores_timestamps(tmp_path):
    for name in ("one", "two"):
        write_json({"x": 1}, tmp_path / name / "a.json")
    a = RunManifest.start("budget")
    a.finish(tmp_path / "one")
    b = RunManifest.start("budget")
    b.finish(tmp_path / "two")
    assert a.output_digest() == b.output_digest()
    assert json.loads((tmp_path / "one" / MANIFEST_NAME).read_text())["command"] == "budget"


def test_audit_trail(tmp_path):
    trail = AuditTrail(tmp_path / "audit")
    trail.success("pipeline", "s_f0=1.9 aN^2/Hz", "seed=1")
    trail.failure("fit-spectrum", "band outside grid | bad")
    entries = trail.entries()
    assert [e["status"] for e in entries] == ["SUCCESS", "FAILED"]
    assert entries[0]["details"] == "seed=1"
    assert entries[1]["summary"] == "band outside grid   bad"
    summary = trail.summary()
    assert summary["total"] == 2
    assert summary["failed"] == 1
    assert summary["by_operation"] == {"pipeline": 1, "fit-spectrum": 1}
