"""Exception hierarchy shared by all modules."""


class ModelError(Exception):
    """Base class for physics / numerics errors raised by the package."""


class DomainError(ModelError, ValueError):
    """Argument outside the domain where a formula is defined."""


class CoincidentEmittersError(ModelError, ValueError):
    def __init__(self, i: int, j: int, separation: float):
        self.pair = (i, j)
        self.separation = separation
        super().__init__(
            f"emitters {i} and {j} are {separation:.3e} lambda_e apart "
            "(minimum separation 1e-6 lambda_e)"
        )


class DecoupledStateError(ModelError):
    """G^T M^-1 G vanishes: the cavity does not see the emitters."""


class AmbiguityError(ModelError):
    """Two candidates tie within tolerance where a unique choice is required."""


class BracketError(ModelError):
    def __init__(self, lo: float, hi: float, f_lo: float, f_hi: float):
        self.lo, self.hi, self.f_lo, self.f_hi = lo, hi, f_lo, f_hi
        super().__init__(
            f"no sign change in bracket: f({lo:.6g}) = {f_lo:.6g}, "
            f"f({hi:.6g}) = {f_hi:.6g}"
        )


class ConvergenceError(ModelError):
    def __init__(self, message: str, last=None, residual: float | None = None):
        self.last = last
        self.residual = residual
        super().__init__(message)


class DimensionCapError(ModelError, ValueError):
    """Requested master-equation problem exceeds the supported size."""


class ConfigError(ValueError):
    """Run configuration failed schema validation."""
