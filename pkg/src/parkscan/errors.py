"""Exception types shared across the package."""


class ValidationError(ValueError):
    """A value violates a declared invariant. ``field`` names the offending field."""

    def __init__(self, field: str, message: str):
        super().__init__(message)
        self.field = field


class ConfigError(ValueError):
    """A configuration document is missing, malformed, or inconsistent."""
