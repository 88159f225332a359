from __future__ import annotations
import math
from pathlib import Path
import pandas as pd
from cslnoise.errors import PreconditionError
from cslnoise.types import Spectrum
from .base import SpectrumReader

class TwoColumnReader(SpectrumReader):
    """
    Bare frequency / PSD tables from other acquisition software.

    Comma or whitespace separated; the first two numeric columns are taken
    as f (Hz) and PSD. Without error information every bin gets the
    1/sqrt(n_av) error of an n_av-frame average.
    """

    exts = {".csv", ".txt", ".dat", ".tsv"}

    def __init__(self, n_av: int = 1, unit: str = "phi0^2/Hz"):
        self.n_av = n_av
        self.unit = unit

    def can_read(self, path: Path) -> bool:
        return path.suffix.lower() in self.exts

    def read(self, path: Path) -> Spectrum:
        try:
            df = pd.read_csv(path, sep=None, engine="python", comment="#", header=None)
            df = df.apply(pd.to_numeric, errors="coerce").dropna(how="any")
        except (ValueError, pd.errors.ParserError) as e:
            raise PreconditionError("unreadable spectrum table", details={"path": str(path), "reason": str(e)}) from e
        if df.shape[1] < 2 or df.shape[0] < 2:
            raise PreconditionError("spectrum table needs two numeric columns", details={"path": str(path)})
        f = df.iloc[:, 0].to_numpy(dtype=float)
        psd = df.iloc[:, 1].to_numpy(dtype=float)
        return Spectrum(
            f=f,
            psd=psd,
            n_av=self.n_av,
            rel_err=[1.0 / math.sqrt(self.n_av)] * f.size,
            unit=self.unit,
            meta={"source": path.name},
        )
