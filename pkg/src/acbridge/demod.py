"""Two-channel quadrature demodulation into an impedance time series.

The generator channel and its quarter-period-delayed copy are correlated
against the bridge channel over a moving window spanning whole carrier
periods, giving the in-phase and quadrature parts of the complex ratio
v_m/v_gen per sample.  The delayed reference measures the lagging
quadrature component, so its correlation is negated on output: the emitted
ratio then follows the same e^{+jwt} convention as the bridge algebra
(capacitive reactance negative), and feeding it to the closed-form bridge
inverse recovers the DUT impedance directly.

The moving sums are exact (see _exactsum), so the streaming update is
bit-identical to recomputing each window from scratch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from ._exactsum import moving_sum_exact
from .circuit import BridgeConfig, CorrectionPair, inversion_coefficients
from .errors import GeneratorAbsent, QuadratureGridMismatch

# per-sample flags in ImpedanceSeries
FLAG_OK = 0
FLAG_NON_INVERTIBLE = 1
FLAG_CORRECTION_SINGULAR = 2
FLAG_IMPLAUSIBLE = 4
FLAG_INDUCTIVE = 8
FLAG_ZERO_IMPEDANCE = 16

_FRAC_TAPS = 33  # windowed-sinc length for the fractional-delay mode


@dataclass
class WaveformRecord:
    """Two synchronised sampled voltage channels."""

    f_s: float
    bit_depth: int | None
    v_gen: np.ndarray
    v_m: np.ndarray
    t0: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.v_gen = np.asarray(self.v_gen, dtype=np.float64)
        self.v_m = np.asarray(self.v_m, dtype=np.float64)
        if self.v_gen.shape != self.v_m.shape or self.v_gen.ndim != 1:
            raise ValueError("v_gen and v_m must be equal-length 1-d channels")
        if self.f_s <= 0:
            raise ValueError("f_s must be positive")

    def __len__(self):
        return self.v_gen.shape[0]

    def times(self) -> np.ndarray:
        return self.t0 + np.arange(len(self)) / self.f_s


@dataclass(frozen=True)
class DemodConfig:
    """Demodulation parameters.

    n_window=None picks the shortest even window spanning whole carrier
    periods (one period on an integer sample grid).  lp_cutoff=None means
    the default f_gen/2; math.inf disables the low-pass.  v_hat=None
    estimates the generator amplitude per window from the RMS of v_gen;
    a float uses that fixed amplitude.
    """

    f_gen: float
    n_window: int | None = None
    quadrature_mode: str = "sample-shift"
    lp_cutoff: float | None = None
    v_hat: float | None = None
    generator_floor: float = 1e-3

    def __post_init__(self):
        if self.f_gen <= 0:
            raise ValueError("f_gen must be positive")
        if self.quadrature_mode not in ("sample-shift", "fractional-delay"):
            raise ValueError(f"unknown quadrature mode {self.quadrature_mode!r}")
        if self.n_window is not None and self.n_window % 2:
            raise ValueError("n_window must be even")
        if self.lp_cutoff is not None and not self.lp_cutoff > 0:
            raise ValueError("lp_cutoff must be positive (math.inf disables)")
        if self.v_hat is not None and self.v_hat <= 0:
            raise ValueError("fixed v_hat must be positive")

    def resolve_n_window(self, f_s: float) -> int:
        """Window length in samples; validates the whole-period constraint."""
        if self.n_window is not None:
            periods = self.n_window * self.f_gen / f_s
            if abs(periods - round(periods)) > 1e-9 or round(periods) < 1:
                raise ValueError(
                    f"n_window={self.n_window} does not span a whole number of "
                    f"carrier periods at f_s={f_s:g}"
                )
            return self.n_window
        # smallest even sample count covering whole periods
        for k in range(1, 4097):
            n = k * f_s / self.f_gen
            if abs(n - round(n)) < 1e-9 and round(n) % 2 == 0:
                return int(round(n))
        raise ValueError(
            "f_s/f_gen is not rational enough for an automatic window; "
            "set n_window explicitly"
        )

    def resolved_lp_cutoff(self) -> float:
        return self.f_gen / 2.0 if self.lp_cutoff is None else self.lp_cutoff


@dataclass
class RatioSeries:
    """Per-sample complex ratio v_m/v_gen.

    values has the same length as the source record; entries outside
    [valid_from, valid_to) lack a full window and are NaN.
    """

    f_s: float
    values: np.ndarray
    valid_from: int
    valid_to: int
    t0: float = 0.0
    demod: DemodConfig | None = None

    @property
    def valid_values(self) -> np.ndarray:
        return self.values[self.valid_from:self.valid_to]

    def valid_times(self) -> np.ndarray:
        return self.t0 + np.arange(self.valid_from, self.valid_to) / self.f_s


@dataclass
class ImpedanceSeries:
    """Corrected DUT impedances with RC equivalents and per-sample flags."""

    timestamps: np.ndarray
    z_dut: np.ndarray
    c_dut: np.ndarray
    r_dut: np.ndarray
    flags: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.timestamps)
        for name in ("z_dut", "c_dut", "r_dut", "flags"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} length differs from timestamps")
        if n > 1 and not np.all(np.diff(self.timestamps) > 0):
            raise ValueError("timestamps must be strictly increasing")

    def __len__(self):
        return len(self.timestamps)


def quadrature_delay_samples(cfg: DemodConfig, f_s: float) -> float:
    """Quarter carrier period expressed in samples."""
    d = f_s / (4.0 * cfg.f_gen)
    if d < 1.0:
        raise ValueError("f_s must be at least 4*f_gen for a quadrature reference")
    return d


def quadrature_margins(cfg: DemodConfig, f_s: float) -> tuple[int, int]:
    """(leading, trailing) sample counts of the reference that are invalid."""
    d = quadrature_delay_samples(cfg, f_s)
    if cfg.quadrature_mode == "sample-shift":
        s = round(d)
        if abs(d - s) > 1e-9:
            raise QuadratureGridMismatch(
                f"f_s/(4*f_gen) = {d:g} is not an integer; use fractional-delay mode"
            )
        return s, 0
    shift = math.floor(d) - (_FRAC_TAPS - 1) // 2
    lead = max(0, shift + _FRAC_TAPS - 1)
    trail = max(0, -shift)
    return lead, trail


def quadrature_reference(v_gen: np.ndarray, cfg: DemodConfig, f_s: float) -> np.ndarray:
    """Generator channel delayed by a quarter carrier period.

    Output has the input's length; samples without enough history (and, in
    fractional-delay mode, the trailing samples that would need future
    input) are zero-filled and excluded from the valid range downstream.
    """
    v_gen = np.asarray(v_gen, dtype=np.float64)
    d = quadrature_delay_samples(cfg, f_s)
    out = np.zeros_like(v_gen)
    if cfg.quadrature_mode == "sample-shift":
        s, _ = quadrature_margins(cfg, f_s)
        out[s:] = v_gen[:len(v_gen) - s]
        return out
    # fractional delay: windowed-sinc interpolator around the integer part
    mid = (_FRAC_TAPS - 1) // 2
    frac = d - math.floor(d)
    m = np.arange(_FRAC_TAPS)
    h = np.sinc(m - mid - frac) * np.blackman(_FRAC_TAPS)
    h /= h.sum()
    shift = math.floor(d) - mid
    conv = np.convolve(v_gen, h)  # conv[k] = sum h[m] v[k-m]
    lead, trail = quadrature_margins(cfg, f_s)
    idx_hi = len(v_gen) - trail
    out[lead:idx_hi] = conv[lead - shift:idx_hi - shift]
    return out


def lowpass_first_order(x: np.ndarray, f_cut: float, f_s: float) -> np.ndarray:
    """Single-pole IIR low-pass, y0 initialised to x0 (unit DC gain)."""
    if not 0 < f_cut < f_s / 2:
        raise ValueError("need 0 < f_cut < f_s/2")
    x = np.asarray(x, dtype=np.float64)
    if len(x) == 0:
        return x.copy()
    alpha = 1.0 - math.exp(-2.0 * math.pi * f_cut / f_s)
    y, _ = lfilter([alpha], [1.0, -(1.0 - alpha)], x, zi=[(1.0 - alpha) * x[0]])
    return y


def demodulate(rec: WaveformRecord, cfg: DemodConfig) -> RatioSeries:
    """Moving-sum quadrature demodulation of a two-channel record."""
    f_s = rec.f_s
    if f_s <= 2.0 * cfg.f_gen:
        raise ValueError("f_s must exceed 2*f_gen to resolve the carrier")
    n = cfg.resolve_n_window(f_s)
    if len(rec) < 2 * n:
        raise ValueError(f"record too short: need at least {2 * n} samples")

    vstar = quadrature_reference(rec.v_gen, cfg, f_s)
    lead, trail = quadrature_margins(cfg, f_s)

    sums_re = moving_sum_exact(rec.v_m * rec.v_gen, n)
    sums_im = moving_sum_exact(rec.v_m * vstar, n)

    half = n // 2
    nlen = len(rec)
    valid_from = lead + half
    valid_to = nlen - trail - half
    if valid_to <= valid_from:
        raise ValueError("no samples with a complete window")

    # window starting at i is centred on sample i + n/2
    w_from = valid_from - half
    w_to = valid_to - half

    if cfg.v_hat is not None:
        vhat2 = cfg.v_hat**2
        if cfg.v_hat < cfg.generator_floor:
            raise GeneratorAbsent("fixed generator amplitude below the noise floor")
    else:
        vhat2 = (2.0 / n) * moving_sum_exact(rec.v_gen * rec.v_gen, n)[w_from:w_to]
        if math.sqrt(max(vhat2.min(), 0.0)) < cfg.generator_floor:
            raise GeneratorAbsent(
                "estimated generator amplitude below the noise floor"
            )

    re = (2.0 / n) * sums_re[w_from:w_to] / vhat2
    # the delayed reference picks out the lagging component; negate to get
    # the standard sign (capacitive reactance < 0 after inversion)
    im = -(2.0 / n) * sums_im[w_from:w_to] / vhat2

    f_cut = cfg.resolved_lp_cutoff()
    if math.isfinite(f_cut):
        re = lowpass_first_order(re, f_cut, f_s)
        im = lowpass_first_order(im, f_cut, f_s)

    values = np.full(nlen, np.nan + 1j * np.nan, dtype=np.complex128)
    values[valid_from:valid_to] = re + 1j * im
    return RatioSeries(
        f_s=f_s,
        values=values,
        valid_from=valid_from,
        valid_to=valid_to,
        t0=rec.t0,
        demod=cfg,
    )


def ratio_to_impedance(
    ratios: RatioSeries,
    bridge: BridgeConfig,
    corr: CorrectionPair = CorrectionPair(),
    plausibility_bound: float = 1e9,
) -> ImpedanceSeries:
    """Invert, de-embed and RC-convert a ratio series sample by sample.

    Error states never abort the series; affected samples carry flags and
    NaN values where no number is meaningful.
    """
    rho = ratios.valid_values
    flags = np.zeros(len(rho), dtype=np.int32)

    a, b, c, d = inversion_coefficients(bridge)
    den = d + c * rho
    scale = np.maximum(abs(d), np.abs(c * rho))
    bad = np.abs(den) <= 1e-14 * scale
    flags[bad] |= FLAG_NON_INVERTIBLE
    with np.errstate(divide="ignore", invalid="ignore"):
        z = (a * rho + b) / np.where(bad, np.nan, den)

    implausible = np.abs(z) > plausibility_bound
    flags[implausible & ~bad] |= FLAG_IMPLAUSIBLE

    dz = z - corr.z_short.z
    if corr.z_open.is_open:
        denom = np.ones_like(dz)
    else:
        denom = 1.0 - dz / (corr.z_open.z - corr.z_short.z)
    singular = np.abs(denom) <= 1e-12
    flags[singular & ~bad] |= FLAG_CORRECTION_SINGULAR
    with np.errstate(divide="ignore", invalid="ignore"):
        zc = dz / np.where(singular, np.nan, denom)

    re, im = zc.real, zc.imag
    mag2 = re * re + im * im
    zero = (mag2 == 0) & ~np.isnan(mag2)
    flags[zero] |= FLAG_ZERO_IMPEDANCE
    omega = bridge.omega
    with np.errstate(divide="ignore", invalid="ignore"):
        c_dut = -im / (omega * np.where(zero, np.nan, mag2))
        r_dut = np.where(re == 0, np.inf, re + im * im / np.where(re == 0, 1.0, re))
    flags[(c_dut < 0)] |= FLAG_INDUCTIVE

    return ImpedanceSeries(
        timestamps=ratios.valid_times(),
        z_dut=zc,
        c_dut=c_dut,
        r_dut=r_dut,
        flags=flags,
        metadata={"bridge": bridge, "correction": corr, "demod": ratios.demod},
    )
