"""Exception hierarchy.

The CLI maps each family onto an exit code: configuration problems exit 1,
data problems exit 2, numerical failures exit 3.
"""


class SparseFSError(Exception):
    exit_code = 1


class ValidationError(SparseFSError, ValueError):
    """Invalid parameter or configuration value."""

    exit_code = 1


class DegenerateCostsError(ValidationError):
    """The cost matrix does not induce a three-way split (beta >= alpha)."""


class DataError(SparseFSError, ValueError):
    """Input data is malformed or unusable."""

    exit_code = 2


class ParseError(DataError):
    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class NumericError(SparseFSError, ArithmeticError):
    exit_code = 3


class DivergenceError(NumericError):
    def __init__(self, epoch, rmse):
        super().__init__(f"SGD diverged at epoch {epoch} (rmse={rmse!r})")
        self.epoch = epoch
        self.rmse = rmse


class SingularityError(NumericError):
    pass


class InsufficientSamplesError(NumericError):
    pass
