"""Exception types shared across the package."""


class ContractViolation(ValueError):
    """Bad input: wrong dimension, out-of-range parameter, malformed object."""


class InfiniteAngle(ArithmeticError):
    """Two planes whose direction spaces meet orthogonally."""


class DegenerateRatio(ArithmeticError):
    """A graph sample pair with zero horizontal part but nonzero vertical part."""


class ConvergenceError(RuntimeError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class CoverageError(KeyError):
    """A coefficient field lacks a value for a cube that a sum needs."""


class RegionTooLarge(ContractViolation):
    pass


class ProjectionCollision(RuntimeError):
    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair
