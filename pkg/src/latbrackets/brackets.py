"""Poisson brackets of classical observables, phase-space scans, and the
three-phase finite-difference probe that isolates charged hopping terms.

The bracket convention is

    {F, G} = kappa * sum_k (dF/dpsi_k dG/dpsi_k* - dF/dpsi_k* dG/dpsi_k)

with ``kappa = -1j`` by default, chosen so that ``psi_dot = {psi, H}``
reproduces ``-i dH/dpsi*``.  Whether a bracket vanishes does not depend on
kappa; only the overall scale does.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import AccuracyError, SamplingError, StepSizeError, ValidationError
from .hamiltonians import ClassicalObservable, FieldState, Statistics

__all__ = [
    "BracketConvention",
    "BracketReport",
    "DEFAULT_CONVENTION",
    "DEFAULT_PROBE_STEP",
    "ProbeRecord",
    "StateSampler",
    "VANISH_TOLERANCE",
    "VIOLATION_THRESHOLD",
    "bracket_scan",
    "bracket_values",
    "phase_derivative",
    "phase_probe",
    "poisson_bracket",
]

#: |bracket| below this counts as "vanishes" (units where |J|, eps = O(1)).
VANISH_TOLERANCE = 1e-9
#: |bracket| above this counts as a genuine violation, not numerical noise.
VIOLATION_THRESHOLD = 1e-3

DEFAULT_PROBE_STEP = 0.1


@dataclass(frozen=True)
class BracketConvention:
    """Fixed constant kappa multiplying the Wirtinger bracket sum."""

    scale: complex = -1j


DEFAULT_CONVENTION = BracketConvention()


def poisson_bracket(f, g, state: FieldState, conv: BracketConvention = DEFAULT_CONVENTION) -> complex:
    """{f, g} at ``state`` via Wirtinger gradients.

    ``f`` and ``g`` may be any objects exposing ``wirtinger_gradient(state)``;
    derivative-domain errors from the gradients propagate unchanged.
    """
    gf_psi, gf_psb = f.wirtinger_gradient(state)
    gg_psi, gg_psb = g.wirtinger_gradient(state)
    return complex(conv.scale * np.sum(gf_psi * gg_psb - gf_psb * gg_psi))


def bracket_values(
    observables,
    state: FieldState,
    conv: BracketConvention = DEFAULT_CONVENTION,
) -> np.ndarray:
    """Antisymmetric matrix of {O_i, O_j}, one gradient evaluation per entry.

    Cheaper than K*(K-1) calls to :func:`poisson_bracket` when several
    observables are compared at the same state.
    """
    grads = [obs.wirtinger_gradient(state) for obs in observables]
    k = len(grads)
    out = np.zeros((k, k), dtype=complex)
    for i in range(k):
        gi, gib = grads[i]
        for j in range(i + 1, k):
            gj, gjb = grads[j]
            out[i, j] = conv.scale * np.sum(gi * gjb - gib * gj)
            out[j, i] = -out[i, j]
    return out


def phase_derivative(obs, state: FieldState) -> np.ndarray:
    """Per-site derivative of ``obs`` with respect to the phase of psi_i.

    Uses the identity dO/dPhi_i = i (psi_i dO/dpsi_i - psi_i* dO/dpsi_i*),
    which is real for real-valued observables.
    """
    gpsi, gpsb = obs.wirtinger_gradient(state)
    amps = state.amplitudes
    return np.real(1j * (amps * gpsi - np.conj(amps) * gpsb))


# ---------------------------------------------------------------------------
# sampling and scanning
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StateSampler:
    """Seeded sampler of field states uniform in a product of per-site discs.

    With ``max_occupation`` set (square-root saturation), each site is drawn
    with ``|psi_i|^2 <= max_occupation - margin`` so every sample sits strictly
    inside the saturation domain.  Unbounded saturations draw from unit discs.
    """

    dim: int
    max_occupation: float | None = None
    margin: float = 0.02

    def __post_init__(self):
        if self.dim < 1:
            raise ValidationError("sampler needs at least one site", code="E_SHAPE")
        if self.max_occupation is not None and self.max_occupation - self.margin <= 0:
            raise SamplingError(
                "no admissible states: margin %g exhausts the occupation bound %g"
                % (self.margin, self.max_occupation)
            )

    @classmethod
    def for_observables(cls, *observables, margin: float = 0.02) -> "StateSampler":
        """Sampler whose domain fits every given observable's saturation."""
        dim = observables[0].coeffs.shape[0]
        bound = None
        for obs in observables:
            sat = obs.saturation
            if sat is not None and sat.domain_max is not None:
                bound = sat.domain_max if bound is None else min(bound, sat.domain_max)
        return cls(dim=dim, max_occupation=bound, margin=margin)

    def sample(self, count: int, seed: int) -> np.ndarray:
        """Deterministic (count, dim) complex array of sampled amplitudes."""
        rng = np.random.default_rng(seed)
        cap = 1.0 if self.max_occupation is None else self.max_occupation - self.margin
        occ = cap * rng.uniform(size=(count, self.dim))
        phases = rng.uniform(-np.pi, np.pi, size=(count, self.dim))
        return np.sqrt(occ) * np.exp(1j * phases)


@dataclass(frozen=True)
class BracketReport:
    """Result of scanning |{F, G}| over sampled states."""

    labels: tuple[str, str]
    sample_count: int
    max_abs: float
    argmax_state: FieldState
    values: np.ndarray
    seed: int

    def verdict(
        self,
        vanish_tol: float = VANISH_TOLERANCE,
        violation_tol: float = VIOLATION_THRESHOLD,
    ) -> str:
        if self.max_abs < vanish_tol:
            return "vanish"
        if self.max_abs > violation_tol:
            return "violation"
        return "inconclusive"


def _chunk_values(f, g, block: np.ndarray, scale: complex) -> np.ndarray:
    out = np.empty(len(block), dtype=complex)
    for i, amps in enumerate(block):
        state = FieldState(amps)
        gf_psi, gf_psb = f.wirtinger_gradient(state)
        gg_psi, gg_psb = g.wirtinger_gradient(state)
        out[i] = scale * np.sum(gf_psi * gg_psb - gf_psb * gg_psi)
    return out


def bracket_scan(
    f,
    g,
    sampler: StateSampler,
    n_points: int,
    conv: BracketConvention = DEFAULT_CONVENTION,
    seed: int = 0,
    workers: int = 1,
) -> BracketReport:
    """Evaluate {f, g} at ``n_points`` seeded sample states.

    The sample list is generated up front, so results are identical for any
    worker count; workers only split the evaluation of a fixed list.
    """
    if n_points < 1:
        raise ValidationError("scan needs at least one sample point", code="E_SCAN_EMPTY")
    states = sampler.sample(n_points, seed)
    if workers <= 1 or n_points < 4:
        values = _chunk_values(f, g, states, conv.scale)
    else:
        blocks = np.array_split(states, min(workers, n_points))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_chunk_values, *zip(*[(f, g, b, conv.scale) for b in blocks])))
        values = np.concatenate(parts)
    values.setflags(write=False)
    idx = int(np.argmax(np.abs(values)))
    label_f = getattr(f, "label", "F")
    label_g = getattr(g, "label", "G")
    return BracketReport(
        labels=(label_f, label_g),
        sample_count=n_points,
        max_abs=float(np.abs(values[idx])),
        argmax_state=FieldState(states[idx]),
        values=values,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# three-phase probe
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProbeRecord:
    """Charged hopping terms extracted from phase derivatives of a bracket.

    ``term1`` multiplies exp(i(-2 Phi_1 + Phi_2 + Phi_3)) in the bracket's
    phase expansion, ``term2`` the exp(i(Phi_1 + Phi_2 - 2 Phi_3)) partner;
    ``derivatives`` stores the four mixed central differences that fed the
    solve, and ``consistency`` the relative step/half-step disagreement.
    """

    term1: complex
    term2: complex
    derivatives: tuple[float, float, float, float]
    step: float
    consistency: float


def _probe_stencils(hamiltonian, constant, state, step, conv):
    """The four mixed phase derivatives of {H, N} at ``state``.

    Orders: d^3/dPhi1 dPhi3 dPhi2, d^4/dPhi1 dPhi3 dPhi2^2,
    d^4/dPhi1^2 dPhi3 dPhi2, d^5/dPhi1^2 dPhi3 dPhi2^2.  Built from one
    3 x 3 x 2 grid of bracket evaluations at phase-rotated states.
    """
    amps = state.amplitudes
    grid = np.empty((3, 3, 2))
    for i1, o1 in enumerate((-1.0, 0.0, 1.0)):
        for i2, o2 in enumerate((-1.0, 0.0, 1.0)):
            for i3, o3 in enumerate((-1.0, 1.0)):
                rot = amps * np.exp(1j * step * np.array([o1, o2, o3]))
                grid[i1, i2, i3] = poisson_bracket(
                    hamiltonian, constant, FieldState(rot), conv
                ).real
    d1 = np.array([-1.0, 0.0, 1.0]) / (2 * step)
    d2 = np.array([1.0, -2.0, 1.0]) / step**2
    d1_pair = np.array([-1.0, 1.0]) / (2 * step)
    combos = ((d1, d1), (d1, d2), (d2, d1), (d2, d2))
    return tuple(
        float(np.einsum("i,j,k,ijk->", wa, wb, d1_pair, grid)) for wa, wb in combos
    )


def _solve_charged_terms(v, step, scale):
    """Invert the stencil responses for the two charged amplitudes.

    A term A exp(i q . Phi) + c.c. responds to the first-difference stencil
    in direction j with a factor i sin(q_j h)/h and to the second-difference
    stencil with -(2 - 2 cos(q_j h))/h^2, so the system below is exact in h
    for the charge vectors (-2, 1, 1) and (1, 1, -2); there is no truncation
    error to extrapolate away, only floating-point cancellation.
    """
    h = step
    s1 = np.sin(h) / h
    s2 = np.sin(2 * h) / h
    w1 = (2 - 2 * np.cos(h)) / h**2
    w2 = (2 - 2 * np.cos(2 * h)) / h**2
    denom = w2 * s1 + w1 * s2
    if min(abs(s1), abs(s2), abs(w1), abs(denom)) < 1e-9:
        raise StepSizeError(
            "probe step %g makes the phase stencils degenerate" % step
        )
    v1, v2, v3, v4 = v
    im_sum = -v1 / (2 * s1 * s1 * s2)
    re_sum = -v2 / (2 * s1 * s2 * w1)
    im_a1 = (2 * w1 * w1 * s2 * im_sum - v4) / (2 * w1 * denom)
    re_a1 = (v3 + 2 * w1 * s1 * s2 * re_sum) / (2 * s1 * denom)
    a1 = re_a1 + 1j * im_a1
    a2 = (re_sum - re_a1) + 1j * (im_sum - im_a1)
    return a1 / (-2 * scale), a2 / (-2 * scale)


def _validate_probe(hamiltonian, constant, state):
    for obs, name in ((hamiltonian, "hamiltonian"), (constant, "constant")):
        if not isinstance(obs, ClassicalObservable):
            raise ValidationError(f"{name} must be a ClassicalObservable", code="E_PROBE_TYPE")
        if obs.coeffs.shape != (3, 3):
            raise ValidationError(f"{name} must act on three sites", code="E_PROBE_DIM")
        if obs.statistics is not Statistics.FERMIONIC:
            raise ValidationError(
                f"{name} must use the fermionic replacement", code="E_PROBE_STATISTICS"
            )
    if hamiltonian.saturation != constant.saturation:
        raise ValidationError(
            "hamiltonian and constant must share a saturation function",
            code="E_PROBE_SATURATION",
        )
    if hamiltonian.coeffs[0, 2] != 0 or hamiltonian.coeffs[2, 0] != 0:
        # With a direct 1-3 bond, extra charge-(-2,1,1) content from that bond
        # mixes into the solve and the two-term model no longer holds.
        raise ValidationError(
            "probe requires an open chain: no direct hopping between the end sites",
            code="E_PROBE_TOPOLOGY",
        )
    amps = state.amplitudes
    if np.min(np.abs(amps)) < 1e-12:
        raise ValidationError(
            "probe needs nonzero amplitude on every site", code="E_PROBE_ZERO_SITE"
        )
    sat = hamiltonian.saturation
    fvals = np.abs(sat(np.abs(amps) ** 2))
    if np.min(fvals) < 1e-12:
        raise ValidationError(
            "saturation factor vanishes at the probe state", code="E_PROBE_BOUNDARY"
        )


def phase_probe(
    hamiltonian: ClassicalObservable,
    constant: ClassicalObservable,
    state: FieldState,
    step: float = DEFAULT_PROBE_STEP,
    conv: BracketConvention = DEFAULT_CONVENTION,
    rtol: float = 1e-5,
    atol: float = 1e-8,
) -> ProbeRecord:
    """Extract the charged hopping terms of {H, N_k} from phase derivatives.

    Four mixed central differences of the bracket over the three site phases
    are solved (exactly in the step size) for the complex amplitudes of the
    exp(i(-2 Phi_1 + Phi_2 + Phi_3)) and exp(i(Phi_1 + Phi_2 - 2 Phi_3))
    terms.  A half-step recomputation guards against resonant or noisy step
    choices; disagreement raises :class:`AccuracyError`.
    """
    if not (step > 0) or not np.isfinite(step):
        raise ValidationError("probe step must be positive and finite", code="E_PROBE_STEP")
    _validate_probe(hamiltonian, constant, state)
    v_step = _probe_stencils(hamiltonian, constant, state, step, conv)
    t1, t2 = _solve_charged_terms(v_step, step, conv.scale)
    v_half = _probe_stencils(hamiltonian, constant, state, step / 2, conv)
    t1_half, t2_half = _solve_charged_terms(v_half, step / 2, conv.scale)
    consistency = 0.0
    for coarse, fine in ((t1, t1_half), (t2, t2_half)):
        scale = max(abs(coarse), abs(fine))
        consistency = max(consistency, abs(coarse - fine) / max(scale, atol / rtol))
    if not (consistency <= rtol):
        raise AccuracyError(
            "probe extractions at step %g and %g disagree (relative %.3g); "
            "the step is too small, too large, or resonant" % (step, step / 2, consistency)
        )
    return ProbeRecord(
        term1=t1,
        term2=t2,
        derivatives=v_step,
        step=step,
        consistency=float(consistency),
    )
