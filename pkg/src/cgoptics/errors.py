"""Exception hierarchy.

Each family carries the process exit code used by the command line tool.
"""


class CGOError(Exception):
    exit_code = 1


# configuration (exit 1)

class ConfigError(CGOError):
    exit_code = 1


class ExprSyntaxError(ConfigError):
    def __init__(self, message, pos=None, line=None, column=None):
        self.pos = pos
        self.line = line
        self.column = column
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        elif pos is not None:
            where.append(f"position {pos}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(message + suffix)


class UnknownKey(ConfigError):
    pass


class TypeMismatch(ConfigError):
    pass


# system validation (exit 2)

class ValidationError(CGOError):
    exit_code = 2


class NonHermitian(ValidationError):
    pass


class EigenvalueCollision(ValidationError):
    pass


class BackgroundNotSolution(ValidationError):
    pass


class OutsideDomain(ValidationError):
    pass


class PolarizationViolated(ValidationError):
    pass


class RectificationDetected(ValidationError):
    pass


class ShapeMismatch(CGOError):
    exit_code = 2


# phase construction (exit 3)

class PhaseError(CGOError):
    exit_code = 3


class RayEscapesLaterally(PhaseError):
    pass


class RayCollision(PhaseError):
    pass


class ImaginaryPartCollapse(PhaseError):
    pass


class FloorViolated(PhaseError):
    pass


class OrderTooLow(PhaseError):
    pass


class SmallDivisor(PhaseError):
    pass


class AliasingDetected(PhaseError):
    pass


# transport (exit 4)

class TransportError(CGOError):
    exit_code = 4


class EnergyBlowup(TransportError):
    pass


class NoContraction(TransportError):
    pass


class BoundaryStencil(TransportError):
    pass


class CFLViolation(TransportError):
    pass


class SelfConvergenceFailed(TransportError):
    pass


# sweeps (exit 5)

class SweepError(CGOError):
    exit_code = 5


class SlopeBelowThreshold(SweepError):
    pass


class NoisyFit(SweepError):
    pass
