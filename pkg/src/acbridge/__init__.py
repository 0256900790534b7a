"""Unbalanced AC Wheatstone bridge impedance measurement toolkit."""

from .circuit import (
    PLAUSIBILITY_BOUND,
    SHORT,
    BridgeConfig,
    CorrectionPair,
    Impedance,
    RCEquivalent,
    bridge_ratio,
    capacitance_error_bound,
    hertzian_capacitance,
    invert_bridge_ratio,
    inversion_coefficients,
    limit_frequency,
    open_short_correct,
    rc_from_impedance,
    voltage_divider_impedance,
)
from .calibration import (
    ALL_PAIRS,
    CalibrationMeasurements,
    NetworkEdges,
    SolverReport,
    bridge_config_from_edges,
    default_initial_edges,
    pairwise_measured,
    pairwise_measured_closed_form,
    solve_network,
)
from .demod import (
    DemodConfig,
    ImpedanceSeries,
    RatioSeries,
    WaveformRecord,
    demodulate,
    lowpass_first_order,
    quadrature_reference,
    ratio_to_impedance,
)
from .features import (
    CHANNELS,
    FeatureSeries,
    FeatureWindow,
    SegmenterConfig,
    central_frequency,
    channel_split,
    feature_trend,
)
from .simulator import (
    CapacitanceProfile,
    DUTModel,
    SimConfig,
    load_zone_profile,
    quantize,
    scenario_single_contact,
    simulate,
)
from . import errors

__version__ = "0.1.0"

__all__ = [
    "ALL_PAIRS",
    "BridgeConfig",
    "CHANNELS",
    "CalibrationMeasurements",
    "CapacitanceProfile",
    "CorrectionPair",
    "DUTModel",
    "DemodConfig",
    "FeatureSeries",
    "FeatureWindow",
    "Impedance",
    "ImpedanceSeries",
    "NetworkEdges",
    "PLAUSIBILITY_BOUND",
    "RCEquivalent",
    "RatioSeries",
    "SHORT",
    "SegmenterConfig",
    "SimConfig",
    "SolverReport",
    "WaveformRecord",
    "bridge_config_from_edges",
    "bridge_ratio",
    "capacitance_error_bound",
    "central_frequency",
    "channel_split",
    "default_initial_edges",
    "demodulate",
    "errors",
    "feature_trend",
    "hertzian_capacitance",
    "invert_bridge_ratio",
    "inversion_coefficients",
    "limit_frequency",
    "load_zone_profile",
    "lowpass_first_order",
    "open_short_correct",
    "pairwise_measured",
    "pairwise_measured_closed_form",
    "quadrature_reference",
    "quantize",
    "rc_from_impedance",
    "ratio_to_impedance",
    "scenario_single_contact",
    "simulate",
    "solve_network",
    "voltage_divider_impedance",
]
