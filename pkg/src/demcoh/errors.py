"""Exception types shared across the package."""


class DemcohError(Exception):
    """Base class for every error this package raises on purpose."""


class SchemaError(DemcohError):
    """A feature reference does not match the dataset schema."""


class OddDatasetError(DemcohError):
    """The audit needs an even record count to split into exact halves."""


class EmptySupportError(DemcohError):
    """An empirical distribution needs at least one prediction."""


class OracleScopeError(DemcohError):
    """A test-only oracle was invoked outside its supported problem size."""


class HypothesisError(DemcohError):
    """A stated precondition of a bound is violated.

    The message names the failing condition so an auditor can see which
    hypothesis blocked the calculation.
    """


class InfeasibleTargetError(DemcohError):
    """No privacy budget can reach the requested subgroup-size target."""

    def __init__(self, message: str, blocking_term: str | None = None):
        super().__init__(message)
        self.blocking_term = blocking_term


class LearnerIncompatibilityError(DemcohError):
    """The report payload does not carry what the learner needs."""


class EncodingError(DemcohError):
    """A feature value is outside the encoding a mechanism requires."""


class ConfigError(DemcohError):
    """Invalid run configuration or parameter."""


class IngestionError(DemcohError):
    """Problem reading an input file."""


class EmptyFileError(IngestionError):
    """The input file has no header row."""


class DuplicateHeaderError(IngestionError):
    """Two columns in the header share a name."""


class RaggedRowError(IngestionError):
    """A data row's cell count disagrees with the header."""

    def __init__(self, line_number: int, expected: int, got: int):
        super().__init__(
            f"row at line {line_number} has {got} cells, header declares {expected}"
        )
        self.line_number = line_number


class TrialExecutionError(DemcohError):
    """A trial's curator or learner failed; carries completed results."""

    def __init__(self, trial_index: int, cause: BaseException, partial: tuple):
        super().__init__(f"trial {trial_index} failed: {cause!r}")
        self.trial_index = trial_index
        self.cause = cause
        self.partial = partial
