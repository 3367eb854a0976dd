class ValidationError(ValueError):
    """An input violates a documented invariant.

    ``field`` names the offending field (dotted path for config files).
    """

    def __init__(self, field: str, message: str):
        self.field = field
        self.message = message
        super().__init__(f"{field}: {message}")

    def prefixed(self, prefix: str) -> "ValidationError":
        return ValidationError(f"{prefix}.{self.field}" if prefix else self.field, self.message)


class SolverError(RuntimeError):
    """A numerical routine failed (singular system, non-convergence, overflow)."""
