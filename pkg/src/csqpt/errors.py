"""Exception types shared across the package."""


class CsqptError(Exception):
    """Base class for all csqpt-specific errors."""


class DimensionMismatch(CsqptError, ValueError):
    """Operands live in Fock spaces of different truncation dimension."""


class TruncationError(CsqptError, ValueError):
    """A state does not fit inside the requested truncation dimension."""


class EdgeOrderError(CsqptError, ValueError):
    """Quadrature bin edges are not strictly increasing."""


class InsufficientProbes(CsqptError, ValueError):
    """Process tomography needs at least two distinct probe amplitudes."""


class EmptyMap(CsqptError, ValueError):
    """No tensor element in the requested block exceeds the magnitude floor."""


class DegenerateBlock(CsqptError, ValueError):
    """The diagonal block is too small to constrain a transmissivity fit."""


class ConfigError(CsqptError, ValueError):
    """Malformed line or unknown key in a configuration file."""


class FileFormatError(CsqptError, ValueError):
    """A data file does not follow its documented layout."""


class ConvergenceWarning(UserWarning):
    """Iterative reconstruction hit max_iter before the tolerance was met."""
