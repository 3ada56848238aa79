"""Exception hierarchy shared by all catsim modules."""


class CatsimError(Exception):
    """Base class for all catsim errors."""


class ConfigError(CatsimError):
    """Invalid run configuration; carries a machine-readable error code."""

    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


class DimensionMismatch(CatsimError):
    pass


class NotDiagonalizable(CatsimError):
    """Eigenvector matrix numerically singular (condition number above ceiling)."""


class NoConvergence(CatsimError):
    pass


class GridTooCoarse(CatsimError):
    pass


class StepTooLarge(CatsimError):
    pass


class GridTooShort(CatsimError):
    pass


class DenominatorUnderflow(CatsimError):
    pass


class PacketTooWide(CatsimError):
    pass


class DegenerateImaginaryParts(CatsimError):
    pass


class RegimeViolation(CatsimError):
    pass


class NoRootInInterval(CatsimError):
    pass


class OutOfDomain(CatsimError):
    pass


class TieUnresolved(CatsimError):
    pass
