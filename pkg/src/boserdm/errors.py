"""Exception types shared across the package.

The CLI maps these onto exit codes: validation problems exit 2, cap
violations exit 3 and numerical failures exit 4.
"""


class BoserdmError(Exception):
    exit_code = 1


class ConfigError(BoserdmError, ValueError):
    exit_code = 2


class SectorMismatchError(BoserdmError, ValueError):
    exit_code = 2


class DimensionOverflowError(BoserdmError, ValueError):
    exit_code = 3


class NumericalError(BoserdmError, ArithmeticError):
    exit_code = 4


class InvalidStateError(NumericalError):
    """A density matrix failed a Hermiticity, trace or positivity check."""


class NonHermitianError(NumericalError, ValueError):
    exit_code = 2
