"""Exception hierarchy shared across the package.

Every error the library raises deliberately carries a CLI error class and
exit code so the command front-end can report failures on one parsable line.
"""


class LightTSError(Exception):
    exit_code = 1
    cli_class = "error"


class ConfigError(LightTSError):
    """Invalid configuration: bad hyperparameters, divisibility, ablation conflicts."""

    exit_code = 2
    cli_class = "config"


class ShapeError(ConfigError):
    """Array dimensions do not conform (kernel ops, checkpoint/config mismatch)."""


class DataError(LightTSError):
    """Problems with input data: parse failures, non-finite values, too few rows."""

    exit_code = 3
    cli_class = "data"


class NumericError(LightTSError):
    """Non-finite loss or gradient encountered during computation."""

    exit_code = 4
    cli_class = "numeric"
