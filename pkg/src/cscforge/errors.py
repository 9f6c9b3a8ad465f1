"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operands have incompatible shapes."""


class GeometryError(ValueError):
    """A dictionary geometry is invalid for the requested operation."""


class CascadeGeometryError(GeometryError):
    """Consecutive cascade layers do not chain; carries the offending layer."""

    def __init__(self, layer: int, message: str):
        super().__init__(f"layer {layer}: {message}")
        self.layer = layer


class DomainError(ValueError):
    """A parameter is outside its allowed domain."""


class DivergenceError(ArithmeticError):
    """An iterative solver produced a non-finite objective.

    Carries the failing iteration (1-based) and whatever partial trace the
    solver had accumulated when it blew up.
    """

    def __init__(self, iteration: int, message: str, trace=None):
        super().__init__(f"iteration {iteration}: {message}")
        self.iteration = iteration
        self.trace = trace


class ContainerFormatError(ValueError):
    """A binary container failed to parse; carries the byte offset."""

    def __init__(self, offset: int, message: str):
        super().__init__(f"byte {offset}: {message}")
        self.offset = offset
