"""Time-domain simulation of the bridge with a time-varying RC device.

Every branch (the three reference arms, the probe, and the DUT) is a
parallel RC; the DUT capacitance may vary in time, either sinusoidally or
following a sampled profile.  The two midpoint node voltages obey a 2x2
linear ODE which is integrated with the trapezoidal rule on the nodal
charge balance, so the i = d(C(t)*v)/dt term of the varying capacitor is
treated exactly rather than as C*v'.

The sampled channels are then degraded the way the acquisition hardware
would: white Gaussian noise on the bridge channel, then a mid-tread
quantizer over +/-full_scale on both channels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba as nb
import numpy as np

from .circuit import BridgeConfig, Impedance, rc_from_impedance
from .demod import WaveformRecord
from .errors import IntegrationDiverged


@dataclass(frozen=True)
class DUTModel:
    """Parallel RC device with sinusoidally varying capacitance.

    c(t) = c0 + c_amp*sin(2*pi*f_c*t + phase0); r may be math.inf for a
    lossless contact.
    """

    r: float
    c0: float
    c_amp: float = 0.0
    f_c: float = 0.0
    phase0: float = 0.0

    def __post_init__(self):
        if self.c0 - abs(self.c_amp) <= 0:
            raise ValueError("capacitance must stay positive (c0 - |c_amp| > 0)")
        if self.f_c < 0:
            raise ValueError("f_c must be non-negative")


@dataclass(frozen=True)
class CapacitanceProfile:
    """Sampled C(t) lookup with linear interpolation.

    times must start at 0 and increase strictly; with periodic=True the
    profile repeats with period times[-1] (values[0] should match
    values[-1] for a continuous waveform).
    """

    times: np.ndarray
    values: np.ndarray
    periodic: bool = True

    def __post_init__(self):
        t = np.ascontiguousarray(self.times, dtype=np.float64)
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)
        if t.ndim != 1 or t.shape != v.shape or len(t) < 2:
            raise ValueError("need matching 1-d times/values with >= 2 points")
        if t[0] != 0 or np.any(np.diff(t) <= 0):
            raise ValueError("times must start at 0 and increase strictly")
        if np.any(v <= 0):
            raise ValueError("capacitance profile must stay positive")


def load_zone_profile(
    f_cage: float,
    c_floor: float = 18e-12,
    c_peak: float = 120e-12,
    zone_fraction: float = 0.25,
    n: int = 512,
) -> CapacitanceProfile:
    """One cage revolution: flat floor with a raised-cosine load-zone bump."""
    if f_cage <= 0:
        raise ValueError("f_cage must be positive")
    if not 0 < zone_fraction <= 1:
        raise ValueError("zone_fraction must be in (0, 1]")
    phase = np.arange(n + 1) / n  # include the wrap point
    c = np.full(n + 1, c_floor)
    inside = np.abs(phase - 0.5) < zone_fraction / 2
    c[inside] += (c_peak - c_floor) * 0.5 * (
        1.0 + np.cos(2.0 * np.pi * (phase[inside] - 0.5) / zone_fraction)
    )
    return CapacitanceProfile(times=phase / f_cage, values=c, periodic=True)


@dataclass(frozen=True)
class SimConfig:
    """Simulation setup: bridge, DUT, acquisition and integration control."""

    bridge: BridgeConfig
    dut: DUTModel
    f_s: float
    duration: float
    bit_depth: int | None = 12
    full_scale: float = 10.0
    noise_sigma: float = 0.0
    integration_substeps: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.integration_substeps < 1:
            raise ValueError("integration_substeps must be >= 1")
        if self.duration * self.f_s < 2:
            raise ValueError("duration*f_s must be >= 2 samples")
        if self.f_s <= 0:
            raise ValueError("f_s must be positive")
        if self.full_scale <= 0:
            raise ValueError("full_scale must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        if self.bit_depth is not None and not 1 <= self.bit_depth <= 32:
            raise ValueError("bit_depth must be in [1, 32] or None")

    @property
    def n_samples(self) -> int:
        return int(round(self.duration * self.f_s))


def quantize(x: np.ndarray, bit_depth: int | None, full_scale: float) -> np.ndarray:
    """Mid-tread uniform quantizer over +/-full_scale; None passes through."""
    if bit_depth is None:
        return np.asarray(x, dtype=np.float64).copy()
    levels = 2**bit_depth
    q = 2.0 * full_scale / levels
    half = levels // 2
    codes = np.clip(np.round(np.asarray(x, dtype=np.float64) / q), -half, half - 1)
    return codes * q


@nb.njit(cache=True)
def _integrate(
    n_samples, substeps, h, v_hat, omega,
    c1, g1, c2, g2, c3, g3, cm, gm, gx,
    sinusoid, cx0, cx_amp, w_c, phase0,
    prof_t, prof_c, prof_period,
    out_vm,
):
    """Trapezoidal stepping of the charge-balance ODE; fills out_vm.

    Returns -1 on success or the sample index at which the state diverged.
    """
    v2 = 0.0
    v3 = 0.0
    hh = 0.5 * h
    gsum2 = g1 + gx + gm
    gsum3 = g2 + g3 + gm
    a12 = -cm - hh * gm
    b12 = -cm + hh * gm
    a22 = (c2 + c3 + cm) + hh * gsum3
    b22 = (c2 + c3 + cm) - hh * gsum3

    def _cx(t):
        if sinusoid:
            return cx0 + cx_amp * math.sin(w_c * t + phase0)
        tt = t % prof_period if prof_period > 0.0 else t
        if tt <= prof_t[0]:
            return prof_c[0]
        if tt >= prof_t[-1]:
            return prof_c[-1]
        lo = 0
        hi = prof_t.shape[0] - 1
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if prof_t[mid] <= tt:
                lo = mid
            else:
                hi = mid
        f = (tt - prof_t[lo]) / (prof_t[hi] - prof_t[lo])
        return prof_c[lo] + f * (prof_c[hi] - prof_c[lo])

    v1_n = 0.0
    cx_n = _cx(0.0)
    out_vm[0] = v2 - v3
    step = 0
    for k in range(1, n_samples):
        for _ in range(substeps):
            step += 1
            t_next = step * h
            v1_next = v_hat * math.sin(omega * t_next)
            cx_next = _cx(t_next)
            a11 = (c1 + cm + cx_next) + hh * gsum2
            b11 = (c1 + cm + cx_n) - hh * gsum2
            dv1 = v1_next - v1_n
            sv1 = v1_next + v1_n
            rhs1 = b11 * v2 + b12 * v3 + c1 * dv1 + hh * g1 * sv1
            rhs2 = b12 * v2 + b22 * v3 + c2 * dv1 + hh * g2 * sv1
            det = a11 * a22 - a12 * a12
            v2 = (rhs1 * a22 - rhs2 * a12) / det
            v3 = (a11 * rhs2 - a12 * rhs1) / det
            v1_n = v1_next
            cx_n = cx_next
        out_vm[k] = v2 - v3
        if not (abs(v2) + abs(v3) < 1e12):
            return k
    return -1


def _branch_rc(z: Impedance, f_gen: float, name: str) -> tuple[float, float]:
    """(C, G) of a bridge branch; OPEN maps to (0, 0)."""
    if z.is_open:
        return 0.0, 0.0
    rc = rc_from_impedance(z, f_gen)
    if rc.is_inductive:
        raise ValueError(f"bridge arm {name} is inductive at f_gen; not supported")
    g = 0.0 if math.isinf(rc.r) else 1.0 / rc.r
    return rc.c, g


def simulate(cfg: SimConfig, profile: CapacitanceProfile | None = None) -> WaveformRecord:
    """Run the bridge simulation and return the quantised two-channel record.

    With a profile the DUT capacitance follows it (cfg.dut.r still sets the
    DUT resistance); otherwise the sinusoid from cfg.dut is used.
    """
    br = cfg.bridge
    c1, g1 = _branch_rc(br.z1, br.f_gen, "z1")
    c2, g2 = _branch_rc(br.z2, br.f_gen, "z2")
    c3, g3 = _branch_rc(br.z3, br.f_gen, "z3")
    cm, gm = _branch_rc(br.zm, br.f_gen, "zm")
    gx = 0.0 if math.isinf(cfg.dut.r) else 1.0 / cfg.dut.r

    n = cfg.n_samples
    h = 1.0 / (cfg.integration_substeps * cfg.f_s)
    vm = np.empty(n, dtype=np.float64)
    if profile is None:
        diverged = _integrate(
            n, cfg.integration_substeps, h, br.v_hat, br.omega,
            c1, g1, c2, g2, c3, g3, cm, gm, gx,
            True, cfg.dut.c0, cfg.dut.c_amp, 2.0 * math.pi * cfg.dut.f_c,
            cfg.dut.phase0,
            np.zeros(2), np.zeros(2), 0.0,
            vm,
        )
    else:
        period = profile.times[-1] if profile.periodic else 0.0
        diverged = _integrate(
            n, cfg.integration_substeps, h, br.v_hat, br.omega,
            c1, g1, c2, g2, c3, g3, cm, gm, gx,
            False, 0.0, 0.0, 0.0, 0.0,
            profile.times, profile.values, period,
            vm,
        )
    if diverged >= 0:
        raise IntegrationDiverged(
            f"state diverged at sample {diverged} (t = {diverged / cfg.f_s:g} s)"
        )

    t = np.arange(n) / cfg.f_s
    v_gen = br.v_hat * np.sin(br.omega * t)
    if cfg.noise_sigma > 0:
        rng = np.random.default_rng(cfg.seed)
        vm = vm + rng.normal(0.0, cfg.noise_sigma, n)
    return WaveformRecord(
        f_s=cfg.f_s,
        bit_depth=cfg.bit_depth,
        v_gen=quantize(v_gen, cfg.bit_depth, cfg.full_scale),
        v_m=quantize(vm, cfg.bit_depth, cfg.full_scale),
        t0=0.0,
        meta={"seed": cfg.seed, "f_gen": br.f_gen, "duration": cfg.duration},
    )


def scenario_single_contact(profile: CapacitanceProfile, cfg: SimConfig) -> WaveformRecord:
    """Simulate a single rolling contact whose capacitance follows a profile."""
    return simulate(cfg, profile=profile)
