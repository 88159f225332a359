"""Averaged periodograms with the plain-FFT protocol.

Non-overlapping rectangular frames, one-sided density scaling. With this
normalisation sum(psd) * df equals the (frame-detrended) signal variance.
"""

from __future__ import annotations

import logging
import math
from typing import Literal, Optional, Tuple

import numpy as np
from scipy import signal

from cslnoise.constants import canonical_unit, convert_units
from cslnoise.errors import PreconditionError, require
from cslnoise.types import Spectrum, TimeSeries

logger = logging.getLogger(__name__)


def averaged_periodogram(
    series: TimeSeries,
    frame_len: int,
    n_av: int,
    detrend: Literal["none", "mean"] = "mean",
    band: Optional[Tuple[float, float]] = None,
) -> Spectrum:
    """Average ``n_av`` consecutive frames of ``frame_len`` samples.

    DC and Nyquist bins are kept on the grid but marked invalid. ``band``
    crops the returned grid (handy for long frames).
    """
    require(frame_len > 1 and (frame_len & (frame_len - 1)) == 0, "frame_len must be a power of two", frame_len=frame_len)
    require(n_av >= 1, "n_av must be >= 1", n_av=n_av)
    require(detrend in ("none", "mean"), "detrend must be 'none' or 'mean'", detrend=detrend)
    needed = frame_len * n_av
    if len(series) < needed:
        raise PreconditionError(
            "time series too short for the requested averaging",
            details={"required_samples": needed, "available_samples": len(series)},
        )
    if len(series) > needed:
        logger.debug("Using the first %d of %d samples", needed, len(series))

    f, psd = signal.welch(
        series.values[:needed],
        fs=series.fs,
        window="boxcar",
        nperseg=frame_len,
        noverlap=0,
        detrend="constant" if detrend == "mean" else False,
        return_onesided=True,
        scaling="density",
        average="mean",
    )
    valid = np.ones(f.size, bool)
    valid[0] = valid[-1] = False

    if band is not None:
        lo, hi = band
        keep = (f >= lo) & (f <= hi)
        require(bool(keep.any()), "band does not overlap the periodogram grid", band=list(band))
        f, psd, valid = f[keep], psd[keep], valid[keep]

    unit = series.unit + "^2/Hz"
    return Spectrum(
        f=f,
        psd=psd,
        n_av=n_av,
        rel_err=np.full(f.size, 1.0 / math.sqrt(n_av)),
        unit=unit,
        df=series.fs / frame_len,
        valid=valid,
        meta={**series.meta, "kind": "periodogram", "frame_len": frame_len, "fs_hz": series.fs, "detrend": detrend},
    )


def convert_spectrum(spec: Spectrum, unit: str) -> Spectrum:
    """Rescale the PSD to another tag of the same quantity (e.g. phi0^2/Hz -> Wb^2/Hz)."""
    factor = convert_units(1.0, spec.unit, unit)
    if factor == 1.0 and canonical_unit(unit) == spec.unit:
        return spec
    return spec.with_psd(spec.psd * factor, unit=unit)
