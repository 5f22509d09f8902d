"""Per-period event metrics and fixed-length feature vectors.

Six metrics are computed over mains periods of N = fs/F0 samples: RMS current,
its period-to-period difference, admittance, spectral flatness, the cumulative
sum of deviations from the window mean, and the difference of that cumulative
sum. Difference-based kinds lose one period and are padded with a trailing
zero so every kind yields the same dimensionality for a given window.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from nilmevents.errors import DataError
from nilmevents.io import WaveformSegment

SPF_EPS = 1e-30           # guards log of near-zero spectrum bins
DEFAULT_U_FLOOR = 1.0     # volts; RMS voltage below this signals a dead channel


class FeatureKind(str, Enum):
    CURRENT = "current"
    DELTA_CURRENT = "delta-current"
    ADMITTANCE = "admittance"
    SPF = "spf"
    CUSUM = "cusum"
    DELTA_CUSUM = "delta-cusum"


@dataclass(frozen=True)
class FeatureVector:
    kind: FeatureKind
    values: np.ndarray


def periodize(seg: WaveformSegment, channel: str = "current") -> np.ndarray:
    """Split a channel into contiguous non-overlapping periods, shape (n_periods, N)."""
    if channel == "current":
        samples = seg.current
    elif channel == "voltage":
        samples = seg.voltage
    else:
        raise DataError(f"unknown channel {channel!r}")
    n = seg.samples_per_period
    if len(samples) % n != 0:
        raise DataError(f"segment length {len(samples)} not divisible by period length {n}")
    return samples.astype(np.float64, copy=False).reshape(-1, n)


def rms_per_period(periods: np.ndarray) -> np.ndarray:
    """Root-mean-square of each period."""
    if len(periods) == 0:
        raise DataError("rms_per_period needs at least one period")
    return np.sqrt(np.mean(periods * periods, axis=1))


def delta(series: np.ndarray) -> np.ndarray:
    """Neighbor difference out[k] = in[k] - in[k+1]; length shrinks by one."""
    if len(series) < 2:
        raise DataError("delta needs at least two periods")
    return series[:-1] - series[1:]


def admittance(i_rms: np.ndarray, u_rms: np.ndarray, u_floor: float = DEFAULT_U_FLOOR) -> np.ndarray:
    """Element-wise I_rms/U_rms; removes mains-voltage fluctuation from the signal."""
    if i_rms.shape != u_rms.shape:
        raise DataError(f"length mismatch: i_rms {i_rms.shape} vs u_rms {u_rms.shape}")
    if np.any(u_rms <= u_floor):
        raise DataError(f"RMS voltage at or below {u_floor} V; channel looks dead")
    return i_rms / u_rms


def spectral_flatness_of_spectrum(energy: np.ndarray) -> float:
    """Geometric over arithmetic mean of an energy spectrum; 1 for flat, 0 for tonal.

    A spectrum containing an exact zero has geometric mean zero; the all-zero
    spectrum (silent period) is defined as 0 as well.
    """
    if np.any(energy == 0.0):
        return 0.0
    arith = float(np.mean(energy))
    geo = float(np.exp(np.mean(np.log(energy + SPF_EPS))))
    return min(max(geo / arith, 0.0), 1.0)


def spectral_flatness(periods: np.ndarray) -> np.ndarray:
    """Per-period spectral flatness of the magnitude-squared spectrum.

    One period per transform, no taper; the DC bin is excluded so it cannot
    dominate the arithmetic mean.
    """
    if periods.shape[1] < 4:
        raise DataError("spectral flatness needs at least 4 samples per period")
    spectrum = np.fft.rfft(periods, axis=1)
    energy = (spectrum.real**2 + spectrum.imag**2)[:, 1:]  # DC excluded, up to Nyquist
    return np.array([spectral_flatness_of_spectrum(row) for row in energy])


def cusum(series: np.ndarray) -> np.ndarray:
    """Running sum of deviations from the window mean; ends at zero by construction."""
    if len(series) == 0:
        raise DataError("cusum needs a non-empty series")
    return np.cumsum(series - np.mean(series))


def delta_cusum(series: np.ndarray) -> np.ndarray:
    """delta(cusum(series)); keeps values in a lower magnitude than the raw CUSUM."""
    if len(series) < 2:
        raise DataError("delta_cusum needs at least two periods")
    return delta(cusum(series))


def feature_values(seg: WaveformSegment, kind: FeatureKind) -> np.ndarray:
    """Raw numeric pipeline for one segment; difference kinds get one trailing zero pad."""
    i_rms = rms_per_period(periodize(seg, "current"))
    if kind is FeatureKind.CURRENT:
        return i_rms
    if kind is FeatureKind.DELTA_CURRENT:
        return np.append(delta(i_rms), 0.0)
    if kind is FeatureKind.ADMITTANCE:
        u_rms = rms_per_period(periodize(seg, "voltage"))
        return admittance(i_rms, u_rms)
    if kind is FeatureKind.SPF:
        return spectral_flatness(periodize(seg, "current"))
    if kind is FeatureKind.CUSUM:
        return cusum(i_rms)
    if kind is FeatureKind.DELTA_CUSUM:
        return np.append(delta_cusum(i_rms), 0.0)
    raise DataError(f"unknown feature kind {kind!r}")


def extract_feature(seg: WaveformSegment, kind: FeatureKind) -> FeatureVector:
    """Compute the fixed-length feature vector of the requested kind."""
    values = feature_values(seg, FeatureKind(kind))
    if not np.all(np.isfinite(values)):
        raise DataError(f"non-finite values in {kind} feature")
    return FeatureVector(kind=FeatureKind(kind), values=values)
