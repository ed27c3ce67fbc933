"""Classical limits of quadratic lattice Hamiltonians and their
integrability diagnostics: Poisson-bracket scans, a three-site reduction to
canonical coordinates, trajectory integration, Poincare sections and
largest-Lyapunov estimates."""

from .errors import (
    AccuracyError,
    BoundaryEvent,
    DerivativeDomainError,
    DomainError,
    LatticeError,
    NoRootError,
    SamplingError,
    StepSizeError,
    ValidationError,
)
from .brackets import (
    BracketConvention,
    BracketReport,
    DEFAULT_CONVENTION,
    DEFAULT_PROBE_STEP,
    ProbeRecord,
    StateSampler,
    VANISH_TOLERANCE,
    VIOLATION_THRESHOLD,
    bracket_scan,
    bracket_values,
    phase_derivative,
    phase_probe,
    poisson_bracket,
)
from .hamiltonians import (
    ClassicalObservable,
    FieldState,
    HoppingMatrix,
    Saturation,
    SaturationKind,
    SpectralData,
    Statistics,
    candidate_constants,
    diagonalize,
    hamiltonian_observable,
    total_number,
)
from .transforms import (
    ActionAngleState,
    ReducedAngleState,
    ReducedState,
    TrimerParams,
    action_angle_to_fields,
    action_angle_to_reduced,
    cartesian_to_reduced,
    fields_to_action_angle,
    reduced_hamiltonian,
    reduced_to_action_angle,
    reduced_to_cartesian,
)
from .dynamics import (
    IntegratorConfig,
    LyapunovEstimate,
    Trajectory,
    flow_derivative,
    integrate,
    lyapunov_max,
)
from .poincare import (
    SectionRecord,
    SectionResult,
    SectionSpec,
    ShellSlice,
    ShellSliceSpec,
    classify_section,
    correlation_dimension,
    sample_on_shell,
    section,
    shell_project,
    shell_slice,
)

__version__ = "0.1.0"

__all__ = [
    "AccuracyError",
    "ActionAngleState",
    "BoundaryEvent",
    "BracketConvention",
    "BracketReport",
    "ClassicalObservable",
    "DEFAULT_CONVENTION",
    "DEFAULT_PROBE_STEP",
    "DerivativeDomainError",
    "DomainError",
    "FieldState",
    "HoppingMatrix",
    "IntegratorConfig",
    "LatticeError",
    "LyapunovEstimate",
    "NoRootError",
    "ProbeRecord",
    "ReducedAngleState",
    "ReducedState",
    "SamplingError",
    "Saturation",
    "SaturationKind",
    "SectionRecord",
    "SectionResult",
    "SectionSpec",
    "ShellSlice",
    "ShellSliceSpec",
    "SpectralData",
    "StateSampler",
    "Statistics",
    "StepSizeError",
    "Trajectory",
    "TrimerParams",
    "VANISH_TOLERANCE",
    "VIOLATION_THRESHOLD",
    "ValidationError",
    "action_angle_to_fields",
    "action_angle_to_reduced",
    "bracket_scan",
    "bracket_values",
    "candidate_constants",
    "cartesian_to_reduced",
    "classify_section",
    "correlation_dimension",
    "diagonalize",
    "fields_to_action_angle",
    "flow_derivative",
    "hamiltonian_observable",
    "integrate",
    "lyapunov_max",
    "phase_derivative",
    "phase_probe",
    "poisson_bracket",
    "reduced_hamiltonian",
    "reduced_to_action_angle",
    "reduced_to_cartesian",
    "sample_on_shell",
    "section",
    "shell_project",
    "shell_slice",
    "total_number",
]
