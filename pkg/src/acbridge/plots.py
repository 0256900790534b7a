"""Report figures rendered next to the CSV outputs.

Headless by construction (Agg backend): every function takes the data
object and a target path and writes a PNG.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .demod import ImpedanceSeries, WaveformRecord
from .features import FeatureSeries

_DPI = 120


def waveform_figure(rec: WaveformRecord, path: str) -> None:
    """Full record plus a zoom on the first few carrier periods."""
    t = rec.times()
    f_gen = rec.meta.get("f_gen")
    zoom = min(len(rec), int(round(5 * rec.f_s / f_gen)) if f_gen else 360)
    fig, (ax_full, ax_zoom) = plt.subplots(2, 1, figsize=(9, 6))
    step = max(1, len(rec) // 20000)
    ax_full.plot(t[::step] * 1e3, rec.v_gen[::step], lw=0.5, label="v_gen")
    ax_full.plot(t[::step] * 1e3, rec.v_m[::step], lw=0.5, label="v_m")
    ax_full.set_xlabel("time in ms")
    ax_full.set_ylabel("voltage in V")
    ax_full.legend(loc="upper right")
    ax_zoom.plot(t[:zoom] * 1e3, rec.v_gen[:zoom], label="v_gen")
    ax_zoom.plot(t[:zoom] * 1e3, rec.v_m[:zoom], label="v_m")
    ax_zoom.set_xlabel("time in ms (zoom)")
    ax_zoom.set_ylabel("voltage in V")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def impedance_figure(series: ImpedanceSeries, path: str) -> None:
    """Capacitance trace and the complex impedance components."""
    t = series.timestamps
    ok = series.flags == 0
    fig, (ax_c, ax_z) = plt.subplots(2, 1, figsize=(9, 6), sharex=True)
    ax_c.plot(t[ok] * 1e3, series.c_dut[ok] * 1e12, lw=0.7, color="tab:blue")
    ax_c.set_ylabel("C_DUT in pF")
    ax_z.plot(t[ok] * 1e3, series.z_dut[ok].real, lw=0.7, label="Re{Z}")
    ax_z.plot(t[ok] * 1e3, series.z_dut[ok].imag, lw=0.7, label="Im{Z}")
    ax_z.set_ylabel("impedance in ohm")
    ax_z.set_xlabel("time in ms")
    ax_z.legend(loc="upper right")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def features_figure(features: dict[str, FeatureSeries], path: str) -> None:
    """Four stacked panels, one per impedance channel."""
    labels = {
        "re": "F2(Re{Z}) in Hz",
        "im": "F2(Im{Z}) in Hz",
        "abs": "F2(|Z|) in Hz",
        "arg": "F2(arg Z) in Hz",
    }
    fig, axes = plt.subplots(4, 1, figsize=(9, 10), sharex=True)
    for ax, key in zip(axes, ("re", "im", "abs", "arg")):
        fs = features[key]
        ax.plot(fs.timestamps, fs.values, lw=0.8)
        ax.set_ylabel(labels[key])
    axes[-1].set_xlabel("time in h")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def sweep_figure(f_c: np.ndarray, c_min: np.ndarray, c_max: np.ndarray,
                 c_true_min: float, c_true_max: float, path: str) -> None:
    """Measured capacitance peaks against the true extremes over f_C."""
    fig, ax = plt.subplots(figsize=(8, 5))
    ax.semilogx(f_c, np.asarray(c_min) * 1e12, "v", label="measured minimum")
    ax.semilogx(f_c, np.asarray(c_max) * 1e12, "^", label="measured maximum")
    ax.axhline(c_true_min * 1e12, color="k", lw=0.8)
    ax.axhline(c_true_max * 1e12, color="k", lw=0.8)
    ax.set_xlabel("capacitance change frequency in Hz")
    ax.set_ylabel("measured capacitance peak in pF")
    ax.legend(loc="center left")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
