"""Exception types raised across the package."""


class DimensionError(ValueError):
    """Index extents or sizes do not line up."""


class ValidationError(ValueError):
    """An input violates a documented precondition (e.g. a non-unitary gate)."""


class CapacityError(ValueError):
    """A request exceeds a hard size cap."""


class NumericError(RuntimeError):
    """A factorization failed to converge."""

    def __init__(self, message: str, shape: tuple[int, ...]):
        super().__init__(f"{message} (input shape {shape})")
        self.shape = shape


class ConfigError(ValueError):
    """Experiment configuration could not be parsed or validated."""

    def __init__(self, message: str, *, field: str | None = None, line: int | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)
        self.field = field
        self.line = line
