"""Exception types shared across the package."""


class PairexError(Exception):
    """Base class for all package errors."""


class DiscretizationError(PairexError, ValueError):
    """Invalid grid or potential parameters."""


class GridMismatchError(PairexError, ValueError):
    """Arrays that live on different grids were combined."""


class SymmetryError(PairexError, ValueError):
    """A kernel violates the symmetry it is declared to have."""


class ChartError(PairexError, ArithmeticError):
    """The pair kernel left the domain where the zeta chart is valid."""


class BlowUpError(PairexError, ArithmeticError):
    """A field norm exceeded the blow-up threshold."""


class IntegrationError(PairexError):
    """A time step failed. Carries the time at which it happened."""

    def __init__(self, message: str, time: float, trajectory=None):
        super().__init__(f"{message} (t = {time:.6g})")
        self.time = time
        self.trajectory = trajectory


class FockDimensionError(PairexError, ValueError):
    """The truncated Fock space would be too large to build."""


class ConvergenceError(PairexError, ArithmeticError):
    """An iterative method failed to converge."""


class ConfigError(PairexError, ValueError):
    """A configuration file or value is invalid."""

    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        where = []
        if key is not None:
            where.append(f"key '{key}'")
        if line is not None:
            where.append(f"line {line}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.key = key
        self.line = line


class TruncationWarning(UserWarning):
    """Significant probability mass sits near the Fock truncation edge."""
