"""Frequency-domain condition-monitoring features over impedance series.

The impedance trace is split into its four real channels (Re, Im, |Z|,
arg Z); per channel a windowed power spectrum is computed and reduced to
the spectral centroid, a single frequency-position number whose drift over
operating hours separates run-in, normal operation and failure.  The DC
bin is excluded so the slow run-in trend does not swamp the feature.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .demod import ImpedanceSeries

_TAPERS = ("rectangular", "hann")


@dataclass(frozen=True)
class FeatureWindow:
    """Analysis window: power-of-two length, hop, and taper."""

    length: int = 256
    hop: int = 128
    taper: str = "hann"

    def __post_init__(self):
        if self.length < 2 or self.length & (self.length - 1):
            raise ValueError("window length must be a power of two")
        if not 0 < self.hop <= self.length:
            raise ValueError("hop must be in (0, length]")
        if self.taper not in _TAPERS:
            raise ValueError(f"taper must be one of {_TAPERS}")

    def weights(self) -> np.ndarray:
        if self.taper == "hann":
            return np.hanning(self.length)
        return np.ones(self.length)


@dataclass
class FeatureSeries:
    """One feature tracked over time for one channel.

    timestamps are in hours (condition monitoring scale); values of
    spectral-position features are in hertz.
    """

    timestamps: np.ndarray
    channel: str
    values: np.ndarray
    feature_id: str = "F2"
    flags: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.flags is None:
            self.flags = np.zeros(len(self.values), dtype=np.int32)
        if not (len(self.timestamps) == len(self.values) == len(self.flags)):
            raise ValueError("timestamps/values/flags lengths differ")


@dataclass(frozen=True)
class SegmenterConfig:
    """Rolling robust z-score change detection parameters."""

    window: int = 16
    threshold: float = 5.0

    def __post_init__(self):
        if self.window < 3:
            raise ValueError("window must be >= 3")
        if self.threshold <= 0:
            raise ValueError("threshold must be positive")


CHANNELS = ("re", "im", "abs", "arg")


def channel_split(series: ImpedanceSeries) -> dict[str, np.ndarray]:
    """Re, Im, magnitude and phase (radians) of the impedance trace."""
    if len(series) == 0:
        raise ValueError("empty impedance series")
    z = series.z_dut
    return {
        "re": z.real.copy(),
        "im": z.imag.copy(),
        "abs": np.abs(z),
        "arg": np.angle(z),
    }


def central_frequency(
    x: np.ndarray,
    window: FeatureWindow,
    f_rate: float,
    t0: float = 0.0,
    channel: str = "",
) -> FeatureSeries:
    """Spectral centroid per window: sum(f*P)/sum(P) over the non-DC bins.

    An all-zero window yields 0 by convention, with its flag set.
    """
    x = np.asarray(x, dtype=np.float64)
    if f_rate <= 0:
        raise ValueError("f_rate must be positive")
    if len(x) < window.length:
        raise ValueError(
            f"channel has {len(x)} samples, window needs {window.length}"
        )
    w = window.weights()
    freqs = np.fft.rfftfreq(window.length, 1.0 / f_rate)[1:]
    starts = range(0, len(x) - window.length + 1, window.hop)
    values = np.empty(len(starts))
    flags = np.zeros(len(starts), dtype=np.int32)
    times = np.empty(len(starts))
    for k, s in enumerate(starts):
        seg = x[s:s + window.length] * w
        power = np.abs(np.fft.rfft(seg)[1:]) ** 2
        total = power.sum()
        if total == 0:
            values[k] = 0.0
            flags[k] = 1
        else:
            values[k] = float(power @ freqs) / total
        times[k] = (t0 + (s + window.length / 2.0) / f_rate) / 3600.0
    return FeatureSeries(timestamps=times, channel=channel, values=values, flags=flags)


def feature_trend(series: FeatureSeries, config: SegmenterConfig = SegmenterConfig()) -> list[int]:
    """Candidate change points where the rolling robust z-score spikes.

    For each sample the median and MAD of the preceding window form the
    score; exceedances are debounced by one window.  Advisory output only.
    """
    x = np.asarray(series.values, dtype=np.float64)
    if len(x) < 10:
        raise ValueError("need at least 10 feature samples")
    w = config.window
    boundaries: list[int] = []
    i = w
    while i < len(x):
        past = x[i - w:i]
        med = float(np.median(past))
        mad = float(np.median(np.abs(past - med)))
        scale = 1.4826 * mad
        if scale == 0:
            scale = 1e-12 * max(1.0, abs(med))
        if abs(x[i] - med) / scale > config.threshold:
            boundaries.append(i)
            i += w
        else:
            i += 1
    return boundaries
