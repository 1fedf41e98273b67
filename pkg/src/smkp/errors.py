"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: InputError -> 2, SizeLimitError and
ConfigurationBudgetError -> 3, anything else -> 1.
"""


class SmkpError(Exception):
    pass


class InputError(SmkpError, ValueError):
    """Malformed or inconsistent caller input."""


class SizeLimitError(SmkpError):
    """Instance exceeds a hard size limit of an exhaustive routine."""


class ConfigurationBudgetError(SmkpError):
    """Configuration enumeration would exceed the configured cap."""
