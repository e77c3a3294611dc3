"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Operand shapes do not line up."""


class ContractError(ValueError):
    """A precondition of an operation was violated."""


class LoadError(ValueError):
    """An input file is missing or malformed. Message names file and line."""

    def __init__(self, path, line, message):
        self.path = str(path)
        self.line = line
        where = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{where}: {message}")


class ValidationError(ValueError):
    """Parameters or configuration fail validation."""
