"""
Artifact I/O
============
Readers and writers for every file the toolkit produces:

- spectrum CSV: ``# key: <json>`` header lines, then ``f_hz,psd,rel_err,valid``
- time series CSV (``t_s,value``) and NPZ, both carrying fs, unit and metadata
- JSON reports (sorted keys, two-space indent, trailing newline)
- exclusion CSV ``r_c_m,lambda_max_per_s`` and tidy tables

Floats are written with ``%.17g`` so that write -> read -> write reproduces
the same bytes.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any, Dict, List, Mapping, Tuple

import numpy as np
import pandas as pd

from cslnoise.csl.exclusion import ExclusionCurve
from cslnoise.errors import PreconditionError, require
from cslnoise.types import Spectrum, TimeSeries

FLOAT_FORMAT = "%.17g"
SPECTRUM_KIND = "cslnoise-spectrum"
TIMESERIES_KIND = "cslnoise-timeseries"
SPECTRUM_COLUMNS = ["f_hz", "psd", "rel_err", "valid"]


def _json_default(o: Any) -> Any:
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def _clean(o: Any) -> Any:
    """Non-finite floats become None; JSON has no NaN."""
    if isinstance(o, float) and not math.isfinite(o):
        return None
    if isinstance(o, dict):
        return {k: _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    return o


def dumps(obj: Any) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True, default=_json_default) + "\n"


def write_json(obj: Any, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj), encoding="utf-8")
    return path


def read_json(path: str | Path) -> Any:
    path = Path(path)
    if not path.exists():
        raise PreconditionError("file not found", details={"path": str(path)})
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise PreconditionError("malformed JSON", details={"path": str(path), "reason": str(e)}) from e


def _header_lines(header: Mapping[str, Any]) -> str:
    return "".join(
        f"# {k}: {json.dumps(_clean(v), sort_keys=True, default=_json_default)}\n" for k, v in sorted(header.items())
    )


def read_header(path: str | Path) -> Dict[str, Any]:
    """Parse the leading ``# key: <json>`` lines of a CSV artifact."""
    header: Dict[str, Any] = {}
    with Path(path).open("r", encoding="utf-8") as f:
        for line in f:
            if not line.startswith("#"):
                break
            key, sep, value = line[1:].strip().partition(":")
            if not sep:
                continue
            try:
                header[key.strip()] = json.loads(value)
            except json.JSONDecodeError:
                header[key.strip()] = value.strip()
    return header


def _write_csv(path: Path, header: Mapping[str, Any], df: pd.DataFrame) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as f:
        f.write(_header_lines(header))
        df.to_csv(f, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def write_spectrum_csv(spec: Spectrum, path: str | Path) -> Path:
    header = {"kind": SPECTRUM_KIND, "n_av": spec.n_av, "df_hz": spec.df, "unit": spec.unit, "meta": spec.meta}
    df = pd.DataFrame(
        {"f_hz": spec.f, "psd": spec.psd, "rel_err": spec.rel_err, "valid": spec.valid.astype(int)},
        columns=SPECTRUM_COLUMNS,
    )
    return _write_csv(Path(path), header, df)


def read_spectrum_csv(path: str | Path) -> Spectrum:
    path = Path(path)
    header = read_header(path)
    require(header.get("kind") == SPECTRUM_KIND, "not a spectrum CSV", path=str(path))
    df = pd.read_csv(path, comment="#", dtype=float)
    missing = [c for c in SPECTRUM_COLUMNS[:3] if c not in df.columns]
    require(not missing, "spectrum CSV lacks columns", missing=missing, path=str(path))
    valid = df["valid"].to_numpy() != 0 if "valid" in df.columns else None
    return Spectrum(
        f=df["f_hz"].to_numpy(),
        psd=df["psd"].to_numpy(),
        n_av=int(header["n_av"]),
        rel_err=df["rel_err"].to_numpy(),
        unit=header.get("unit", "Wb^2/Hz"),
        df=header.get("df_hz"),
        valid=valid,
        meta=header.get("meta") or {},
    )


def write_timeseries(series: TimeSeries, path: str | Path) -> Path:
    """CSV or NPZ by suffix."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {"kind": TIMESERIES_KIND, "fs_hz": series.fs, "t0_s": series.t0, "unit": series.unit, "meta": series.meta}
    if path.suffix.lower() == ".npz":
        with path.open("wb") as f:
            np.savez(f, values=series.values, header=np.array(dumps(header)))
        return path
    require(path.suffix.lower() == ".csv", "time series must be written as .csv or .npz", path=str(path))
    df = pd.DataFrame({"t_s": series.t, "value": series.values}, columns=["t_s", "value"])
    return _write_csv(path, header, df)


def read_timeseries(path: str | Path) -> TimeSeries:
    path = Path(path)
    if path.suffix.lower() == ".npz":
        with np.load(path, allow_pickle=False) as z:
            header = json.loads(str(z["header"]))
            values = z["values"]
    else:
        header = read_header(path)
        values = pd.read_csv(path, comment="#", dtype=float)["value"].to_numpy()
    require(header.get("kind") == TIMESERIES_KIND, "not a time series file", path=str(path))
    return TimeSeries(
        values=values,
        fs=header["fs_hz"],
        unit=header.get("unit", "Wb"),
        t0=header.get("t0_s", 0.0),
        meta=header.get("meta") or {},
    )


def write_table_csv(df: pd.DataFrame, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as f:
        df.to_csv(f, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def write_exclusion_csv(curve: ExclusionCurve, path: str | Path) -> Path:
    """Flagged r_C points keep their row with an empty lambda."""
    df = pd.DataFrame({"r_c_m": curve.r_c, "lambda_max_per_s": curve.lambda_max}, columns=["r_c_m", "lambda_max_per_s"])
    return write_table_csv(df, path)


def read_exclusion_csv(path: str | Path) -> List[Tuple[float, float]]:
    df = pd.read_csv(path)
    return list(zip(df["r_c_m"].tolist(), df["lambda_max_per_s"].tolist()))


def read_ringdown_table(path: str | Path) -> pd.DataFrame:
    """
    Load a Q_a-vs-gain table.

    Accepted columns: ``gain`` or ``inv_gain``, ``q_a`` with ``sigma_q_a``
    (or ``inv_q_a`` with ``sigma_inv_q_a``), optional ``temperature_k``.
    Returns a frame with ``inv_gain, inv_q_a, sigma_inv_q_a`` added.
    """
    path = Path(path)
    if not path.exists():
        raise PreconditionError("file not found", details={"path": str(path)})
    df = pd.read_csv(path, comment="#")
    if "inv_gain" not in df.columns:
        require("gain" in df.columns, "ringdown table needs a gain or inv_gain column", columns=list(df.columns))
        require(bool((df["gain"].abs() > 0).all()), "gains must be non-zero")
        df["inv_gain"] = 1.0 / df["gain"].abs()
    if "inv_q_a" not in df.columns:
        require({"q_a", "sigma_q_a"} <= set(df.columns), "ringdown table needs q_a and sigma_q_a", columns=list(df.columns))
        require(bool((df["q_a"] > 0).all()), "Q_a values must be positive")
        df["inv_q_a"] = 1.0 / df["q_a"]
        df["sigma_inv_q_a"] = df["sigma_q_a"] / df["q_a"] ** 2
    require("sigma_inv_q_a" in df.columns, "ringdown table needs sigma_inv_q_a", columns=list(df.columns))
    if "in_sweep" in df.columns:
        df = df[df["in_sweep"].astype(bool)].reset_index(drop=True)
    return df
