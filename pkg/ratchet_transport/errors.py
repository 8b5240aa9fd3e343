"""Exception hierarchy shared by all modules."""


class TransportError(Exception):
    """Base class for every error raised by ratchet_transport."""


class InvalidInputError(TransportError, ValueError):
    """A stated precondition of an operation does not hold."""


class OverflowRiskError(TransportError, OverflowError):
    """The unscaled exponential path would overflow double precision."""

    def __init__(self, ratio: float, limit: float = 700.0):
        self.ratio = ratio
        self.limit = limit
        super().__init__(
            f"exponent bound (|V| + 2*sum|coeffs|)/sigma = {ratio:.6g} exceeds {limit:g}; "
            "call again with scaled=True"
        )


class NumericalFailureError(TransportError, ArithmeticError):
    """A linear solve failed or produced non-finite values."""


class InternalConsistencyError(TransportError, RuntimeError):
    """An assembled quantity violates an invariant that should hold by construction."""


class IllConditionedFitError(InvalidInputError):
    """The series fit is too poorly conditioned; widen the sigma range."""

    def __init__(self, condition: float):
        self.condition = condition
        super().__init__(
            f"series fit condition estimate {condition:.3e} exceeds 1e12; "
            "widen the sigma range or lower K"
        )


class StepRejectedError(TransportError, ValueError):
    """An orbit step would cross more than a quarter period."""

    def __init__(self, step_index: int, displacement: float):
        self.step_index = step_index
        self.displacement = displacement
        super().__init__(
            f"step {step_index} rejected: |v|*dt = {displacement:.4g} > 0.25, reduce dt"
        )


class DegenerateDensityError(TransportError, ValueError):
    """The interpolated density vanished where a velocity was requested."""


class AntisymmetryError(InvalidInputError):
    """Moment recovery requires an antisymmetric potential."""
