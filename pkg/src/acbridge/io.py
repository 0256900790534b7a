"""File formats and configuration.

All interchange files are RFC-4180 CSV with a mandatory header row and
floats written with 9 significant digits (which round-trips losslessly
through write-read-write).  Complex quantities always serialise as two
real columns.  The run configuration is flat ``section.key = value`` text
with SI-unit suffixes baked into the key names.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .calibration import ALL_PAIRS, NetworkEdges, SolverReport, canonical_pair
from .circuit import BridgeConfig, CorrectionPair, Impedance
from .demod import DemodConfig, ImpedanceSeries, WaveformRecord
from .features import FeatureSeries, FeatureWindow
from .simulator import DUTModel, SimConfig

WAVEFORM_HEADER = ["time_s", "v_gen_V", "v_m_V"]
IMPEDANCE_HEADER = ["time_s", "re_ohm", "im_ohm", "c_F", "r_ohm", "flag"]
EDGES_HEADER = ["pair", "re_ohm", "im_ohm"]
REPORT_HEADER = ["iterations", "residual_norm", "converged", "condition_estimate"]
FEATURE_HEADER = ["time_h", "f2_re_hz", "f2_im_hz", "f2_abs_hz", "f2_arg_hz"]

ENV_CONFIG_DIR = "ACBRIDGE_CONFIG_DIR"
DEFAULT_CONFIG_NAME = "acbridge.cfg"


class CsvFormatError(ValueError):
    """Malformed interchange file; message carries file and row number."""

    def __init__(self, path, row, message):
        super().__init__(f"{path}: row {row}: {message}")
        self.path = path
        self.row = row


class ConfigError(ValueError):
    """Bad run configuration (unknown key, unparsable or inconsistent value)."""


def _fmt(x: float) -> str:
    return format(float(x), ".9g")


def _parse_float(path, row, text):
    try:
        return float(text)
    except ValueError:
        raise CsvFormatError(path, row, f"not a number: {text!r}") from None


def _read_rows(path, header):
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise CsvFormatError(path, 0, str(exc)) from exc
    with fh:
        reader = csv.reader(fh)
        try:
            got = next(reader)
        except StopIteration:
            raise CsvFormatError(path, 1, "empty file") from None
        if got != header:
            raise CsvFormatError(path, 1, f"expected header {header}, got {got}")
        rows = []
        for n, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise CsvFormatError(path, n, f"expected {len(header)} fields, got {len(row)}")
            rows.append((n, row))
    return rows


# --------------------------------------------------------------- waveform csv

def write_waveform_csv(path, rec: WaveformRecord) -> None:
    t = rec.times()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(WAVEFORM_HEADER)
        for k in range(len(rec)):
            w.writerow([_fmt(t[k]), _fmt(rec.v_gen[k]), _fmt(rec.v_m[k])])


def read_waveform_csv(path) -> WaveformRecord:
    rows = _read_rows(path, WAVEFORM_HEADER)
    if len(rows) < 2:
        raise CsvFormatError(path, len(rows) + 1, "need at least 2 samples")
    t = np.empty(len(rows))
    vg = np.empty(len(rows))
    vm = np.empty(len(rows))
    for k, (n, row) in enumerate(rows):
        t[k] = _parse_float(path, n, row[0])
        vg[k] = _parse_float(path, n, row[1])
        vm[k] = _parse_float(path, n, row[2])
    dt = (t[-1] - t[0]) / (len(t) - 1)
    if dt <= 0 or np.max(np.abs(np.diff(t) - dt)) > 1e-6 * dt:
        raise CsvFormatError(path, 2, "time column is not uniformly spaced")
    return WaveformRecord(f_s=1.0 / dt, bit_depth=None, v_gen=vg, v_m=vm, t0=float(t[0]))


# -------------------------------------------------------------- impedance csv

def write_impedance_csv(path, series: ImpedanceSeries) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(IMPEDANCE_HEADER)
        for k in range(len(series)):
            w.writerow([
                _fmt(series.timestamps[k]),
                _fmt(series.z_dut[k].real),
                _fmt(series.z_dut[k].imag),
                _fmt(series.c_dut[k]),
                _fmt(series.r_dut[k]),
                str(int(series.flags[k])),
            ])


def read_impedance_csv(path) -> ImpedanceSeries:
    rows = _read_rows(path, IMPEDANCE_HEADER)
    if not rows:
        raise CsvFormatError(path, 2, "no data rows")
    n = len(rows)
    t = np.empty(n)
    z = np.empty(n, dtype=np.complex128)
    c = np.empty(n)
    r = np.empty(n)
    flags = np.empty(n, dtype=np.int32)
    for k, (rn, row) in enumerate(rows):
        t[k] = _parse_float(path, rn, row[0])
        z[k] = complex(_parse_float(path, rn, row[1]), _parse_float(path, rn, row[2]))
        c[k] = _parse_float(path, rn, row[3])
        r[k] = _parse_float(path, rn, row[4])
        try:
            flags[k] = int(row[5])
        except ValueError:
            raise CsvFormatError(path, rn, f"bad flag {row[5]!r}") from None
    return ImpedanceSeries(timestamps=t, z_dut=z, c_dut=c, r_dut=r, flags=flags)


# ------------------------------------------------------- calibration csv trio

def write_measurements_csv(path, pairs: dict[tuple[int, int], Impedance]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(EDGES_HEADER)
        for p in sorted(canonical_pair(*q) for q in pairs):
            z = pairs[p] if p in pairs else pairs[(p[1], p[0])]
            w.writerow([f"{p[0]}{p[1]}", _fmt(z.re), _fmt(z.im)])


def read_measurements_csv(path) -> dict[tuple[int, int], Impedance]:
    rows = _read_rows(path, EDGES_HEADER)
    out = {}
    for rn, row in rows:
        tag = row[0].strip()
        if len(tag) != 2 or not tag.isdigit():
            raise CsvFormatError(path, rn, f"bad pair tag {tag!r}")
        pair = canonical_pair(int(tag[0]), int(tag[1]))
        out[pair] = Impedance(_parse_float(path, rn, row[1]), _parse_float(path, rn, row[2]))
    return out


def write_edges_csv(path, edges: NetworkEdges) -> None:
    write_measurements_csv(path, edges.z)


def read_edges_csv(path) -> NetworkEdges:
    return NetworkEdges(read_measurements_csv(path))


def write_report_csv(path, report: SolverReport) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(REPORT_HEADER)
        w.writerow([
            str(report.iterations),
            _fmt(report.residual_norm),
            "1" if report.converged else "0",
            _fmt(report.condition_estimate),
        ])


# ----------------------------------------------------------------- feature csv

def write_feature_csv(path, features: dict[str, FeatureSeries]) -> None:
    keys = ("re", "im", "abs", "arg")
    base = features[keys[0]].timestamps
    for k in keys:
        if len(features[k].timestamps) != len(base):
            raise ValueError("feature series are not aligned")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(FEATURE_HEADER)
        for i in range(len(base)):
            w.writerow([_fmt(base[i])] + [_fmt(features[k].values[i]) for k in keys])


def read_feature_csv(path) -> dict[str, FeatureSeries]:
    rows = _read_rows(path, FEATURE_HEADER)
    if not rows:
        raise CsvFormatError(path, 2, "no data rows")
    t = np.array([_parse_float(path, rn, row[0]) for rn, row in rows])
    out = {}
    for col, key in enumerate(("re", "im", "abs", "arg"), start=1):
        vals = np.array([_parse_float(path, rn, row[col]) for rn, row in rows])
        out[key] = FeatureSeries(timestamps=t, channel=key, values=vals)
    return out


# -------------------------------------------------------------- configuration

@dataclass
class RunConfig:
    """Everything a CLI run needs, assembled from defaults plus overrides."""

    bridge: BridgeConfig
    demod: DemodConfig
    correction: CorrectionPair
    sim: SimConfig
    features: FeatureWindow
    seed: int = 0
    calibration_f: float = 20e3


def default_config_text() -> str:
    """The built-in defaults in config-file syntax (also serves as a template)."""
    return """\
# acbridge run configuration (defaults)
seed = 0

bridge.f_gen_hz = 20e3
bridge.v_hat_v = 6.0
bridge.z1_c_f = 990.56e-12
bridge.z1_r_ohm = 15805e3
bridge.z2_c_f = 989.29e-12
bridge.z2_r_ohm = 11594e3
bridge.z3_c_f = 1059.54e-12
bridge.z3_r_ohm = 890e3
bridge.zm_c_f = 4.22e-12
bridge.zm_r_ohm = 28236e3

demod.n_window = auto
demod.quadrature_mode = sample-shift
demod.lp_cutoff_hz = auto
demod.v_hat_mode = estimate
demod.generator_floor_v = 1e-3

correction.z_open = open
correction.z_short_re_ohm = 0
correction.z_short_im_ohm = 0

sim.f_s_hz = 720e3
sim.duration_s = 10e-3
sim.bit_depth = 12
sim.full_scale_v = 10
sim.noise_sigma_v = 0
sim.substeps = 20
sim.dut_r_ohm = 1e6
sim.dut_c0_f = 500e-12
sim.dut_c_amp_f = 0
sim.dut_f_c_hz = 0
sim.dut_phase0_rad = 0

features.window = 256
features.hop = 128
features.taper = hann

calibration.f_hz = 20e3
"""


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    out = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}: line {ln}: expected 'key = value'")
        key, value = line.split("=", 1)
        out[key.strip().lower()] = value.strip()
    return out


def _get_float(cfg, key, default=None):
    if key not in cfg:
        if default is None:
            raise ConfigError(f"missing required key {key}")
        return default
    try:
        return float(cfg[key])
    except ValueError:
        raise ConfigError(f"key {key}: not a number: {cfg[key]!r}") from None


def _get_int(cfg, key, default):
    if key not in cfg:
        return default
    try:
        return int(cfg[key])
    except ValueError:
        raise ConfigError(f"key {key}: not an integer: {cfg[key]!r}") from None


_KNOWN_KEYS = set(parse_config_text(default_config_text()))
_KNOWN_KEYS |= {
    f"bridge.z{a}_{c}_ohm" for a in ("1", "2", "3", "m") for c in ("re", "im")
}
_KNOWN_KEYS.add("bridge.zm_open")
_KNOWN_KEYS.add("correction.z_open_re_ohm")
_KNOWN_KEYS.add("correction.z_open_im_ohm")


def _bridge_arm(cfg, name, f_gen):
    """One bridge arm from either re/im keys or parallel-RC keys."""
    re_key = f"bridge.z{name}_re_ohm"
    if re_key in cfg:
        return Impedance(_get_float(cfg, re_key), _get_float(cfg, f"bridge.z{name}_im_ohm", 0.0))
    if name == "m" and cfg.get("bridge.zm_open", "").lower() in ("true", "1", "yes"):
        return Impedance.OPEN
    c = _get_float(cfg, f"bridge.z{name}_c_f")
    r = _get_float(cfg, f"bridge.z{name}_r_ohm", math.inf)
    return Impedance.from_parallel_rc(r, c, f_gen)


def build_run_config(raw: dict[str, str]) -> RunConfig:
    """Typed RunConfig from a flat key-value dict; validates cross-field rules."""
    unknown = set(raw) - _KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    merged = parse_config_text(default_config_text())
    merged.update(raw)
    cfg = merged

    f_gen = _get_float(cfg, "bridge.f_gen_hz")
    v_hat = _get_float(cfg, "bridge.v_hat_v")
    try:
        bridge = BridgeConfig(
            z1=_bridge_arm(cfg, "1", f_gen),
            z2=_bridge_arm(cfg, "2", f_gen),
            z3=_bridge_arm(cfg, "3", f_gen),
            zm=_bridge_arm(cfg, "m", f_gen),
            v_hat=v_hat,
            f_gen=f_gen,
        )

        n_window = None
        if cfg["demod.n_window"] not in ("auto", ""):
            n_window = _get_int(cfg, "demod.n_window", None)
        lp = None
        lp_raw = cfg["demod.lp_cutoff_hz"]
        if lp_raw == "none":
            lp = math.inf
        elif lp_raw not in ("auto", ""):
            lp = _get_float(cfg, "demod.lp_cutoff_hz")
        mode = cfg["demod.v_hat_mode"]
        if mode not in ("estimate", "fixed"):
            raise ConfigError(f"demod.v_hat_mode must be estimate|fixed, got {mode!r}")
        demod = DemodConfig(
            f_gen=f_gen,
            n_window=n_window,
            quadrature_mode=cfg["demod.quadrature_mode"],
            lp_cutoff=lp,
            v_hat=v_hat if mode == "fixed" else None,
            generator_floor=_get_float(cfg, "demod.generator_floor_v"),
        )

        if cfg.get("correction.z_open", "") == "open" and "correction.z_open_re_ohm" not in cfg:
            z_open = Impedance.OPEN
        else:
            z_open = Impedance(
                _get_float(cfg, "correction.z_open_re_ohm"),
                _get_float(cfg, "correction.z_open_im_ohm", 0.0),
            )
        correction = CorrectionPair(
            z_open=z_open,
            z_short=Impedance(
                _get_float(cfg, "correction.z_short_re_ohm"),
                _get_float(cfg, "correction.z_short_im_ohm"),
            ),
        )

        bits_raw = cfg["sim.bit_depth"]
        bit_depth = None if bits_raw == "none" else _get_int(cfg, "sim.bit_depth", 12)
        dut_r_raw = cfg["sim.dut_r_ohm"]
        dut_r = math.inf if dut_r_raw in ("inf", "open") else _get_float(cfg, "sim.dut_r_ohm")
        sim = SimConfig(
            bridge=bridge,
            dut=DUTModel(
                r=dut_r,
                c0=_get_float(cfg, "sim.dut_c0_f"),
                c_amp=_get_float(cfg, "sim.dut_c_amp_f"),
                f_c=_get_float(cfg, "sim.dut_f_c_hz"),
                phase0=_get_float(cfg, "sim.dut_phase0_rad"),
            ),
            f_s=_get_float(cfg, "sim.f_s_hz"),
            duration=_get_float(cfg, "sim.duration_s"),
            bit_depth=bit_depth,
            full_scale=_get_float(cfg, "sim.full_scale_v"),
            noise_sigma=_get_float(cfg, "sim.noise_sigma_v"),
            integration_substeps=_get_int(cfg, "sim.substeps", 20),
            seed=_get_int(cfg, "seed", 0),
        )

        features = FeatureWindow(
            length=_get_int(cfg, "features.window", 256),
            hop=_get_int(cfg, "features.hop", 128),
            taper=cfg["features.taper"],
        )
    except (ValueError, ZeroDivisionError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc

    return RunConfig(
        bridge=bridge,
        demod=demod,
        correction=correction,
        sim=sim,
        features=features,
        seed=_get_int(cfg, "seed", 0),
        calibration_f=_get_float(cfg, "calibration.f_hz"),
    )


def load_run_config(path: str | None, overrides: dict[str, str] | None = None) -> RunConfig:
    """Config from file (or env-var default directory, or built-ins) plus overrides."""
    raw: dict[str, str] = {}
    if path is None:
        env_dir = os.environ.get(ENV_CONFIG_DIR)
        if env_dir:
            candidate = os.path.join(env_dir, DEFAULT_CONFIG_NAME)
            if os.path.exists(candidate):
                path = candidate
    if path is not None:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        raw = parse_config_text(text, source=str(path))
    if overrides:
        normalized = {k.strip().lower(): v for k, v in overrides.items()}
        raw.update(normalized)
    return build_run_config(raw)
