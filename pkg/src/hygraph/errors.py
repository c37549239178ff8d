"""Exception types shared across the package."""


class HygraphError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(HygraphError, ValueError):
    """Operand shapes are incompatible with the requested operation."""


class ContractError(HygraphError, ValueError):
    """A documented precondition of an operation was violated."""


class BoundaryError(HygraphError, ArithmeticError):
    """A manifold quantity degenerated at the boundary of its domain."""


class ParseError(HygraphError, ValueError):
    """A dataset file could not be parsed."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        loc = ""
        if path is not None:
            loc += f" [{path}"
            loc += f":{line}]" if line is not None else "]"
        super().__init__(message + loc)
        self.path = path
        self.line = line


class SchemaError(HygraphError, ValueError):
    """A structured dataset violated its schema."""


class GradientError(HygraphError, ArithmeticError):
    """A non-finite gradient was encountered during an optimizer step."""

    def __init__(self, name: str):
        super().__init__(f"non-finite gradient for parameter {name!r}; step aborted")
        self.name = name


class DivergenceError(HygraphError, ArithmeticError):
    """Training produced a non-finite loss."""
