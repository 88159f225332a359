from __future__ import annotations
from abc import ABC, abstractmethod
from pathlib import Path
from cslnoise.types import Spectrum

class SpectrumReader(ABC):
    @abstractmethod
    def can_read(self, path: Path) -> bool:
        ...

    @abstractmethod
    def read(self, path: Path) -> Spectrum:
        ...
