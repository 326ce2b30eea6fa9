"""Exception types shared across the toolkit."""


class SpecshapeError(Exception):
    """Base class for all toolkit errors."""


class NonFiniteError(SpecshapeError):
    """Input or result contains NaN or Inf."""


class NoConvergenceError(SpecshapeError):
    """An iterative factorization failed to converge."""


class NotSymmetricError(SpecshapeError):
    """Matrix expected to be symmetric is not."""


class RankDeficientError(SpecshapeError):
    """Negative spectral power requested on a rank-deficient matrix."""


class ZeroMatrixError(SpecshapeError):
    """Operation undefined for the all-zero matrix."""


class StepOutOfRangeError(SpecshapeError):
    """Step index outside the schedule horizon."""


class ShapeMismatchError(SpecshapeError):
    """Operand shapes are inconsistent."""


class KTooLargeError(SpecshapeError):
    """Requested more modes than min(rows, cols)."""


class EpsilonTooSmallError(SpecshapeError):
    """Finite-difference probe dominated by round-off."""


class TooFewBatchesError(SpecshapeError):
    """Variance estimation needs at least two mini-batches."""


class CurvatureBelowFloorError(SpecshapeError):
    """Curvature estimate too small to divide by."""


class NonPositiveInputError(SpecshapeError):
    """Logarithmic metric requested on non-positive values."""


class TooFewModesError(SpecshapeError):
    """Not enough modes to fill both curvature buckets."""


class DegenerateFitError(SpecshapeError):
    """Power-law fit impossible: no variation in the regressor."""


class LabelOutOfRangeError(SpecshapeError):
    """Class label outside the model's output range."""


class InvalidParamsError(SpecshapeError):
    """Generator parameters are invalid."""


class SeedRequiredError(SpecshapeError):
    """Monte Carlo simulation requires an explicit seed."""


class ValidationError(SpecshapeError):
    """Configuration failed cross-field validation."""


class ParseError(SpecshapeError):
    """A config or matrix file failed to parse; carries the line number."""

    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class DivergedError(SpecshapeError):
    """Training or simulation diverged; carries the offending step."""

    def __init__(self, step: int, message: str = "diverged"):
        super().__init__(f"{message} at step {step}")
        self.step = step


class MalformedMetricsError(SpecshapeError):
    """Metrics file does not match the documented schema."""
