from __future__ import annotations
from pathlib import Path
from cslnoise.io import SPECTRUM_KIND, read_header, read_spectrum_csv
from cslnoise.types import Spectrum
from .base import SpectrumReader

class SpectrumCSVReader(SpectrumReader):
    """Spectra written by ``cslnoise.io.write_spectrum_csv``."""

    def can_read(self, path: Path) -> bool:
        if path.suffix.lower() != ".csv":
            return False
        return read_header(path).get("kind") == SPECTRUM_KIND

    def read(self, path: Path) -> Spectrum:
        return read_spectrum_csv(path)
