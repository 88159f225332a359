from pathlib import Path
from typing import Optional, Sequence

from cslnoise.errors import PreconditionError
from cslnoise.types import Spectrum

from .base import SpectrumReader
from .csv_reader import SpectrumCSVReader
from .two_column import TwoColumnReader

DEFAULT_READERS = [
    SpectrumCSVReader(),
    TwoColumnReader(),
]


def read_spectrum(path, readers: Optional[Sequence[SpectrumReader]] = None) -> Spectrum:
    """Read ``path`` with the first reader that accepts it."""
    path = Path(path)
    if not path.exists():
        raise PreconditionError("file not found", details={"path": str(path)})
    for reader in readers or DEFAULT_READERS:
        if reader.can_read(path):
            return reader.read(path)
    raise PreconditionError("no reader for this file", details={"path": str(path), "suffix": path.suffix})


__all__ = ["SpectrumReader", "SpectrumCSVReader", "TwoColumnReader", "DEFAULT_READERS", "read_spectrum"]
