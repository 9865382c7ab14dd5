"""Exception hierarchy.

Every error carries an ``error_class`` slug and a CLI exit code so batch runs
can report failures in machine-readable form.
"""


class OpsynthError(Exception):
    error_class = "error"
    exit_code = 3


class ValidationError(OpsynthError, ValueError):
    error_class = "validation"
    exit_code = 2


class CutoffError(OpsynthError, ValueError):
    """Requested levels or events do not fit inside the Fock cutoff."""

    error_class = "cutoff"
    exit_code = 3


class UnmeasurableElementError(OpsynthError, ArithmeticError):
    """The normalisation constant of an element is below the usable floor."""

    error_class = "unmeasurable-element"
    exit_code = 3


class ConditioningError(OpsynthError, ArithmeticError):
    error_class = "conditioning"
    exit_code = 3


class NumericalFault(OpsynthError, ArithmeticError):
    error_class = "numerical"
    exit_code = 3


class ToleranceBreach(OpsynthError):
    error_class = "tolerance"
    exit_code = 4


class TruncationWarning(UserWarning):
    """Fock truncation discarded more weight than the configured epsilon."""
