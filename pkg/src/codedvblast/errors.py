"""Exception and warning types shared across the package."""


class AllocationError(ValueError):
    """A closed-form allocation cannot be formed (e.g. a negative power)."""


class SolverError(RuntimeError):
    """A numerical solver failed to bracket or converge."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


class InfeasibleError(ValueError):
    """An outage target cannot be met by any allocation in the search range."""

    def __init__(self, message, infimum=None):
        super().__init__(message)
        self.infimum = infimum


class ConfigError(ValueError):
    """Invalid sweep configuration; carries the offending line and field."""

    def __init__(self, message, line=None, field=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)
        self.line = line
        self.field = field


class ValidityWarning(UserWarning):
    """Inputs lie outside the regime in which a closed-form result holds."""


class DegenerateWarning(UserWarning):
    """A dual problem collapsed to a degenerate (near-zero budget) solution."""


class FormulaWarning(UserWarning):
    """A printed closed-form expression disagrees with its direct evaluation."""
