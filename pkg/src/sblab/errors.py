"""Error types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DependencyError -> 3,
NumericError -> 4. Everything else is a plain ValueError with a message that
names the offending shapes/paths.
"""


class ConfigError(Exception):
    """Invalid or inconsistent configuration (bad widths, bad lr, bad counts)."""


class DependencyError(Exception):
    """A required artifact (checkpoint, dataset dir) is missing."""


class NumericError(Exception):
    """A computation produced non-finite values where finite ones are required."""
