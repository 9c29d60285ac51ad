"""Exception hierarchy shared by the library and the CLI.

Each category maps to a distinct process exit code so scripted callers can
tell bad input apart from internal failures.
"""


class PipelineError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1
    category = "error"


class InputDataError(PipelineError):
    """Malformed or inconsistent user-supplied data (files, ids, shapes)."""

    exit_code = 2
    category = "input"


class ConfigError(PipelineError):
    """Invalid, unknown, or missing configuration keys."""

    exit_code = 3
    category = "config"


class ContractViolation(PipelineError):
    """An internal API was used outside its contract (caller bug)."""

    exit_code = 4
    category = "contract"


class NumericError(PipelineError):
    """A numeric invariant broke (NaN/inf) during computation."""

    exit_code = 5
    category = "numeric"
