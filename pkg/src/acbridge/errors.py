"""Exception hierarchy for the measurement chain.

Numeric failures (singular networks, diverged integrations, solver
non-convergence) are kept distinct from plain validation errors so the CLI
can map them to separate exit codes.
"""


class BridgeError(Exception):
    """Base class for all acbridge-specific errors."""


class SingularNetwork(BridgeError):
    """The bridge network has no unique nodal solution."""


class NonInvertibleRatio(BridgeError):
    """Voltage ratio sits at the pole of the bridge transform."""


class CorrectionSingular(BridgeError):
    """Open-short correction denominator vanished (measurement equals the open condition)."""


class ZeroImpedance(BridgeError):
    """Zero impedance where a finite nonzero value is required."""


class InvalidGeometry(BridgeError):
    """Non-physical contact geometry (non-positive area/thickness, eps_r < 1)."""


class QuadratureGridMismatch(BridgeError):
    """Sample-shift quadrature requires f_s/(4*f_gen) to be an integer."""


class GeneratorAbsent(BridgeError):
    """Estimated generator amplitude below the noise floor."""


class SingularJacobian(BridgeError):
    """Network solver Jacobian is rank deficient and no step can be made."""


class NotConverged(BridgeError):
    """Network solver ran out of iterations.

    Carries the best iterate so callers can still inspect/persist it.
    """

    def __init__(self, message, edges=None, report=None):
        super().__init__(message)
        self.edges = edges
        self.report = report


class IntegrationDiverged(BridgeError):
    """Time-domain simulation state grew without bound."""


class ImplausibleImpedanceWarning(UserWarning):
    """Reconstructed |Z| above the plausibility bound; value kept, flagged."""
