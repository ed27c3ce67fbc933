"""Exception hierarchy shared across the package."""


class LatticeError(Exception):
    """Base class for all latbrackets errors."""


class ValidationError(LatticeError):
    """Malformed or inconsistent input (non-hermitian matrix, bad config ...).

    Carries an optional machine-readable ``code`` so the CLI can emit
    distinct diagnostics for distinct failure modes.
    """

    def __init__(self, message, code=None):
        super().__init__(message)
        self.code = code


class DomainError(LatticeError):
    """State lies outside the saturation-function domain."""


class DerivativeDomainError(DomainError):
    """Gradient requested at a non-differentiable point (e.g. |psi|^2 = 1
    with the square-root saturation)."""


class AccuracyError(LatticeError):
    """A numerical procedure could not reach its accuracy target
    (finite-difference step trouble, integrator failure)."""


class StepSizeError(AccuracyError):
    """Adaptive integrator step size underflowed."""


class NoRootError(LatticeError):
    """Root bracketing failed (no sign change on the searched interval)."""


class SamplingError(LatticeError):
    """A rejection sampler could not produce the requested states
    (empty or nearly empty admissible region)."""


class BoundaryEvent(LatticeError):
    """The reduced flow reached the boundary of the saturation domain.

    Raised by ``flow_derivative`` and converted by the integrators into a
    flagged, truncated trajectory rather than a hard failure.
    """

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time
