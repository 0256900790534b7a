"""Complex algebra of the unbalanced AC bridge.

The bridge is a five-element network: two divider arms (z1 feeding the
device under test zx, z2 feeding z3) driven by a common generator, with the
differential probe impedance zm across the two midpoints.  Everything here
is phasor arithmetic at a single carrier frequency; the engineering
convention is used throughout (time factor e^{+jwt}, so capacitive
reactance has a negative imaginary part).

Infinite impedance is a real state of the fixture (removed DUT, ideal
probe) and is represented by the distinguished ``Impedance.OPEN`` value
rather than floating infinities, so it can never leak NaNs into the
transform algebra.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass
from typing import ClassVar

from scipy.constants import epsilon_0

from .errors import (
    CorrectionSingular,
    ImplausibleImpedanceWarning,
    InvalidGeometry,
    NonInvertibleRatio,
    SingularNetwork,
    ZeroImpedance,
)

#: default upper bound on a reconstructed |Z| before it is flagged implausible
PLAUSIBILITY_BOUND = 1e9

# relative threshold below which a denominator counts as vanished
_SINGULAR_RTOL = 1e-14


@dataclass(frozen=True)
class Impedance:
    """Complex impedance in ohms, or the distinguished OPEN state."""

    re: float = 0.0
    im: float = 0.0

    #: the open-circuit (infinite impedance) singleton, set after the class body
    OPEN: ClassVar["Impedance"]

    def __post_init__(self):
        if not (math.isfinite(self.re) and math.isfinite(self.im)):
            raise ValueError(
                "non-finite impedance components; use Impedance.OPEN for an open circuit"
            )

    @property
    def is_open(self) -> bool:
        return self is Impedance.OPEN

    @property
    def z(self) -> complex:
        """Value as a python complex. Raises on OPEN."""
        if self.is_open:
            raise ValueError("OPEN impedance has no finite complex value")
        return complex(self.re, self.im)

    @property
    def y(self) -> complex:
        """Admittance; 0 for OPEN."""
        if self.is_open:
            return 0j
        return 1.0 / self.z

    def __complex__(self) -> complex:
        return self.z

    def __abs__(self) -> float:
        if self.is_open:
            return math.inf
        return abs(self.z)

    @classmethod
    def from_complex(cls, z: complex) -> "Impedance":
        return cls(float(z.real), float(z.imag))

    @classmethod
    def from_parallel_rc(cls, r: float, c: float, f: float) -> "Impedance":
        """Impedance of r parallel c at frequency f. r may be math.inf."""
        if f <= 0:
            raise ValueError("frequency must be positive")
        y = 2j * math.pi * f * c
        if math.isfinite(r):
            if r == 0:
                return cls(0.0, 0.0)
            y += 1.0 / r
        if y == 0:
            return cls.OPEN
        return cls.from_complex(1.0 / y)

    def series(self, other: "Impedance") -> "Impedance":
        if self.is_open or other.is_open:
            return Impedance.OPEN
        return Impedance.from_complex(self.z + other.z)

    def parallel(self, other: "Impedance") -> "Impedance":
        y = self.y + other.y
        if y == 0:
            return Impedance.OPEN
        return Impedance.from_complex(1.0 / y)

    def __repr__(self):
        if self.is_open:
            return "Impedance.OPEN"
        return f"Impedance({self.re:g}, {self.im:g})"


# build the OPEN singleton without running validation
_open = object.__new__(Impedance)
object.__setattr__(_open, "re", math.inf)
object.__setattr__(_open, "im", math.inf)
Impedance.OPEN = _open
del _open

#: short circuit, for convenience
SHORT = Impedance(0.0, 0.0)


@dataclass(frozen=True)
class BridgeConfig:
    """The four known bridge impedances plus generator amplitude and frequency.

    z1 feeds the DUT arm, z2 feeds the reference divider z3, zm is the
    probe between the midpoints (OPEN models an ideal probe).
    """

    z1: Impedance
    z2: Impedance
    z3: Impedance
    zm: Impedance = Impedance.OPEN
    v_hat: float = 1.0
    f_gen: float = 20e3

    def __post_init__(self):
        if self.f_gen <= 0:
            raise ValueError("f_gen must be positive")
        if self.v_hat <= 0:
            raise ValueError("v_hat must be positive")
        for name in ("z1", "z2", "z3"):
            if getattr(self, name).is_open:
                raise ValueError(f"{name} must be finite (only zm may be OPEN)")

    @property
    def omega(self) -> float:
        return 2.0 * math.pi * self.f_gen


@dataclass(frozen=True)
class RCEquivalent:
    """Parallel RC equivalent of an impedance, valid at frequency f.

    r is math.inf for a lossless (purely reactive) value.  A negative c
    means the source impedance was inductive at f; it is reported, not
    rejected, and shows up via ``is_inductive``.
    """

    c: float
    r: float
    f: float

    @property
    def is_inductive(self) -> bool:
        return self.c < 0

    def impedance(self) -> Impedance:
        return Impedance.from_parallel_rc(self.r, self.c, self.f)


@dataclass(frozen=True)
class CorrectionPair:
    """Open/short fixture measurements used for de-embedding.

    The default instance (z_short = 0, z_open = OPEN) is the identity
    correction.
    """

    z_open: Impedance = Impedance.OPEN
    z_short: Impedance = SHORT

    def __post_init__(self):
        if not self.z_open.is_open and abs(self.z_short) >= abs(self.z_open):
            raise ValueError("|z_short| must be smaller than |z_open|")


def _ratio_num_den(cfg: BridgeConfig, zx: Impedance) -> tuple[complex, complex, float]:
    """Numerator/denominator of the bridge transfer v_m/v_gen plus a scale
    for singularity detection.  Polynomial in the impedances, so zero-valued
    elements are handled without admittance infinities; OPEN zx/zm are
    handled as exact limits.
    """
    z1, z2, z3 = cfg.z1.z, cfg.z2.z, cfg.z3.z
    if cfg.zm.is_open:
        if zx.is_open:
            num = z2
            terms = (z2, z3)
        else:
            num = zx.z * z2 - z1 * z3
            terms = ((z1 + zx.z) * z2, (z1 + zx.z) * z3)
        den = sum(terms)
    else:
        zm = cfg.zm.z
        if zx.is_open:
            num = zm * z2
            terms = ((zm + z1) * (z2 + z3), z2 * z3)
        else:
            num = zm * (z2 * zx.z - z1 * z3)
            terms = (
                zm * (z1 + zx.z) * (z2 + z3),
                z2 * z3 * (z1 + zx.z),
                z1 * zx.z * (z2 + z3),
            )
        den = sum(terms)
    scale = max(abs(t) for t in terms)
    return num, den, scale


def bridge_ratio(cfg: BridgeConfig, zx: Impedance) -> complex:
    """Complex voltage ratio v_m/v_gen of the five-element bridge.

    Zero at balance (zx*z2 == z1*z3); reduces to the textbook four-element
    expression when zm is OPEN.
    """
    num, den, scale = _ratio_num_den(cfg, zx)
    if scale == 0 or abs(den) <= _SINGULAR_RTOL * scale:
        raise SingularNetwork("bridge network has no unique nodal solution")
    return num / den


def inversion_coefficients(cfg: BridgeConfig) -> tuple[complex, complex, complex, complex]:
    """Coefficients (a, b, c, d) of the inverse transform Zx = (a*r + b)/(d + c*r).

    The forward map ratio(zx) is a Moebius transform, so its inverse is one
    too; these coefficients are shared by the scalar inverse and the
    vectorised per-sample pipeline.
    """
    z1, z2, z3 = cfg.z1.z, cfg.z2.z, cfg.z3.z
    if cfg.zm.is_open:
        a = z1 * (z2 + z3)
        b = z1 * z3
        c = -(z2 + z3)
        d = z2
    else:
        zm = cfg.zm.z
        p = (z2 + z3) * zm + z2 * z3
        a = z1 * p
        b = z1 * zm * z3
        c = -(p + z1 * (z2 + z3))
        d = zm * z2
    return a, b, c, d


def invert_bridge_ratio(
    cfg: BridgeConfig,
    ratio: complex,
    plausibility_bound: float = PLAUSIBILITY_BOUND,
) -> Impedance:
    """Recover the DUT-arm impedance from a measured voltage ratio.

    Exact closed-form inverse of :func:`bridge_ratio`.  A ratio at the pole
    of the transform (the open-DUT condition) raises NonInvertibleRatio; a
    reconstruction above ``plausibility_bound`` is returned but flagged via
    ImplausibleImpedanceWarning.
    """
    a, b, c, d = inversion_coefficients(cfg)
    den = d + c * ratio
    scale = max(abs(d), abs(c * ratio))
    if scale == 0 or abs(den) <= _SINGULAR_RTOL * scale:
        raise NonInvertibleRatio("ratio at the pole of the bridge transform")
    zx = (a * ratio + b) / den
    if abs(zx) > plausibility_bound:
        warnings.warn(
            f"reconstructed |Zx| = {abs(zx):.3g} ohm exceeds plausibility bound",
            ImplausibleImpedanceWarning,
            stacklevel=2,
        )
    return Impedance.from_complex(zx)


def voltage_divider_impedance(v_gen: float, v_ref: complex, z_ref: Impedance) -> Impedance:
    """Unknown impedance of a two-element divider from the reference-arm voltage."""
    if v_ref == 0:
        raise ZeroDivisionError("reference voltage is zero")
    return Impedance.from_complex((v_gen / v_ref - 1.0) * z_ref.z)


def open_short_correct(zx: Impedance, corr: CorrectionPair) -> Impedance:
    """De-embed series (short) and parallel (open) fixture parasitics.

    Exact inverse of the series-then-parallel parasitic model: with
    z_short the series part and z_open the series+parallel total, the
    returned value is the bare DUT impedance.
    """
    d = zx.z - corr.z_short.z
    if corr.z_open.is_open:
        denom = 1.0 + 0j
    else:
        span = corr.z_open.z - corr.z_short.z
        denom = 1.0 - d / span
    if abs(denom) <= 1e-12:
        raise CorrectionSingular("measured value coincides with the open condition")
    return Impedance.from_complex(d / denom)


def rc_from_impedance(z: Impedance, f: float) -> RCEquivalent:
    """Parallel RC equivalent of z at frequency f.

    r is OPEN (math.inf) for a pure reactance.  A negative c (inductive
    behaviour, e.g. cable inductance dominating) is returned as-is.
    """
    if f <= 0:
        raise ValueError("frequency must be positive")
    if z.is_open:
        return RCEquivalent(c=0.0, r=math.inf, f=f)
    if z.z == 0:
        raise ZeroImpedance("cannot form RC equivalent of a short")
    omega = 2.0 * math.pi * f
    mag2 = z.re * z.re + z.im * z.im
    c = -z.im / (omega * mag2)
    r = math.inf if z.re == 0 else z.re + z.im * z.im / z.re
    return RCEquivalent(c=c, r=r, f=f)


def hertzian_capacitance(area: float, film_thickness: float, eps_r: float) -> float:
    """Plate-capacitor value of a lubricated contact patch."""
    if area <= 0 or film_thickness <= 0 or eps_r < 1:
        raise InvalidGeometry(
            f"need area > 0, film_thickness > 0, eps_r >= 1; "
            f"got {area}, {film_thickness}, {eps_r}"
        )
    return epsilon_0 * eps_r * area / film_thickness


def capacitance_error_bound(f_c: float, f_gen: float) -> float:
    """Relative peak error of a capacitance varying at f_c measured with carrier f_gen."""
    if f_gen <= 0:
        raise ValueError("f_gen must be positive")
    if f_c < 0:
        raise ValueError("f_c must be non-negative")
    return 1000.0 * (f_c / f_gen) ** 2


def limit_frequency(max_error: float, f_gen: float) -> float:
    """Highest capacitance-change frequency measurable within max_error."""
    if max_error <= 0:
        raise ValueError("max_error must be positive")
    if f_gen <= 0:
        raise ValueError("f_gen must be positive")
    return f_gen * math.sqrt(max_error / 1000.0)


def arg_deg(z: complex) -> float:
    """Phase angle in degrees, convenience for reports."""
    return math.degrees(cmath.phase(z))
