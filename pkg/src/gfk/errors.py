"""Exception types shared across the toolkit."""


class DegenerateBandError(ValueError):
    """Volatility band has sigma_lo = 0 where uniform ellipticity is required."""


class StabilityError(ValueError):
    """Explicit time step violates the stability bound."""


class UnderResolvedGridError(ValueError):
    """Numerical output violates a monotonicity tolerance, indicating a too-coarse grid."""


class RandomStreamExhausted(ValueError):
    """A uniform stream ran out before the simulation finished."""


class NonFiniteStateError(FloatingPointError):
    """State blew up during an Euler step."""

    def __init__(self, step_index: int):
        self.step_index = step_index
        super().__init__(f"non-finite state at step {step_index}")


class ValidRegionError(ValueError):
    """A query fell outside the trustworthy region of a PDE solution."""


class CutoffError(ValueError):
    """Regularized coefficient construction failed a certification check."""
