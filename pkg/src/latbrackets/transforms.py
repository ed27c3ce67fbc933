"""Coordinate chain for the three-site system.

Complex fields -> occupation/phase pairs -> total-number-reduced coordinates
-> cartesian coordinates, with exact inverses.  The final cartesian map is
not canonical; it scales every Hamilton equation by a constant 1/2, which is
absorbed into the time variable (all reported times are the rescaled ones).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import DomainError, ValidationError
from .hamiltonians import (
    ClassicalObservable,
    FieldState,
    HoppingMatrix,
    Saturation,
    Statistics,
    hamiltonian_observable,
)

__all__ = [
    "ActionAngleState",
    "ReducedAngleState",
    "ReducedState",
    "TrimerParams",
    "action_angle_to_fields",
    "action_angle_to_reduced",
    "cartesian_to_reduced",
    "fields_to_action_angle",
    "reduced_hamiltonian",
    "reduced_to_action_angle",
    "reduced_to_cartesian",
]

_OCC_ATOL = 1e-9


def _wrap_angle(theta):
    """Map angles to the representative range [-pi, pi)."""
    return (np.asarray(theta) + np.pi) % (2 * np.pi) - np.pi


@dataclass(frozen=True)
class ActionAngleState:
    """Per-site occupations n_i = |psi_i|^2 and phases theta_i in [-pi, pi)."""

    n: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        n = np.atleast_1d(np.asarray(self.n, dtype=float))
        theta = np.atleast_1d(np.asarray(self.theta, dtype=float))
        if n.shape != (3,) or theta.shape != (3,):
            raise ValidationError("three occupation/phase pairs required", code="E_SHAPE")
        if not (np.all(np.isfinite(n)) and np.all(np.isfinite(theta))):
            raise ValidationError("occupations and angles must be finite", code="E_FINITE")
        if np.any(n < -_OCC_ATOL):
            raise ValidationError("occupations must be nonnegative", code="E_OCCUPATION")
        n = np.maximum(n, 0.0)
        n.setflags(write=False)
        theta.setflags(write=False)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "theta", theta)


@dataclass(frozen=True)
class ReducedAngleState:
    """Coordinates (n, alpha), (m, beta), (N, Theta) after the total-number
    reduction: n and m are the occupations of the outer sites, N the total,
    and N - n - m the middle-site occupation."""

    n: float
    alpha: float
    m: float
    beta: float
    N: float
    Theta: float

    def __post_init__(self):
        vals = (self.n, self.alpha, self.m, self.beta, self.N, self.Theta)
        if not all(np.isfinite(v) for v in vals):
            raise ValidationError("reduced coordinates must be finite", code="E_FINITE")
        if self.n < -_OCC_ATOL or self.m < -_OCC_ATOL:
            raise ValidationError("occupations must be nonnegative", code="E_OCCUPATION")
        if self.N - self.n - self.m < -_OCC_ATOL:
            raise ValidationError(
                "middle-site occupation N - n - m must be nonnegative",
                code="E_OCCUPATION",
            )

    @property
    def middle_occupation(self) -> float:
        return self.N - self.n - self.m


@dataclass(frozen=True)
class ReducedState:
    """Cartesian reduced coordinates with x1^2+x2^2 = n, y1^2+y2^2 = m.

    N rides along as a parameter; the overall phase Theta is dropped (the
    Hamiltonian does not depend on it).
    """

    x1: float
    x2: float
    y1: float
    y2: float
    N: float

    def __post_init__(self):
        vals = (self.x1, self.x2, self.y1, self.y2, self.N)
        if not all(np.isfinite(v) for v in vals):
            raise ValidationError("coordinates must be finite", code="E_FINITE")
        if self.n + self.m > self.N + _OCC_ATOL:
            raise ValidationError(
                "x1^2+x2^2+y1^2+y2^2 exceeds the total occupation N",
                code="E_OCCUPATION",
            )

    @property
    def n(self) -> float:
        return self.x1**2 + self.x2**2

    @property
    def m(self) -> float:
        return self.y1**2 + self.y2**2

    @property
    def middle_occupation(self) -> float:
        return self.N - self.n - self.m

    def as_array(self) -> np.ndarray:
        return np.array([self.x1, self.x2, self.y1, self.y2])


@dataclass(frozen=True)
class TrimerParams:
    """On-site energies, hopping strength, saturation and bond topology of
    the three-site system behind the reduced Hamiltonian."""

    eps: tuple[float, float, float]
    coupling: complex
    saturation: Saturation
    topology: Literal["cyclic", "linear"] = "cyclic"

    def __post_init__(self):
        if len(self.eps) != 3 or not all(np.isfinite(e) for e in self.eps):
            raise ValidationError("three finite on-site energies required", code="E_SHAPE")
        if not np.isfinite(self.coupling):
            raise ValidationError("coupling must be finite", code="E_FINITE")
        if self.topology not in ("cyclic", "linear"):
            raise ValidationError(
                f"unknown topology {self.topology!r}", code="E_TOPOLOGY"
            )
        object.__setattr__(self, "eps", tuple(float(e) for e in self.eps))
        object.__setattr__(self, "coupling", complex(self.coupling))

    def hopping_matrix(self) -> HoppingMatrix:
        if self.topology == "cyclic":
            return HoppingMatrix.cyclic_chain(self.eps, self.coupling)
        return HoppingMatrix.linear_chain(self.eps, self.coupling)

    def observable(self) -> ClassicalObservable:
        """The equivalent field-space Hamiltonian (fermionic replacement)."""
        return hamiltonian_observable(
            self.hopping_matrix(), Statistics.FERMIONIC, self.saturation
        )


# ---------------------------------------------------------------------------
# the chain of maps
# ---------------------------------------------------------------------------


def fields_to_action_angle(state: FieldState) -> ActionAngleState:
    """n_i = |psi_i|^2, theta_i = arg psi_i; theta_i = 0 where psi_i = 0."""
    amps = state.amplitudes
    if amps.shape != (3,):
        raise ValidationError("three-site states only", code="E_SHAPE")
    return ActionAngleState(n=np.abs(amps) ** 2, theta=_wrap_angle(np.angle(amps)))


def action_angle_to_fields(aa: ActionAngleState) -> FieldState:
    return FieldState(np.sqrt(aa.n) * np.exp(1j * aa.theta))


def action_angle_to_reduced(aa: ActionAngleState) -> ReducedAngleState:
    return ReducedAngleState(
        n=float(aa.n[0]),
        alpha=float(_wrap_angle(aa.theta[0] - aa.theta[1])),
        m=float(aa.n[2]),
        beta=float(_wrap_angle(aa.theta[2] - aa.theta[1])),
        N=float(np.sum(aa.n)),
        Theta=float(aa.theta[1]),
    )


def reduced_to_action_angle(red: ReducedAngleState) -> ActionAngleState:
    return ActionAngleState(
        n=np.array([red.n, red.middle_occupation, red.m]),
        theta=_wrap_angle(
            np.array([red.alpha + red.Theta, red.Theta, red.beta + red.Theta])
        ),
    )


def reduced_to_cartesian(red: ReducedAngleState) -> ReducedState:
    if red.n < 0 or red.m < 0:
        raise DomainError("occupations must be nonnegative")
    rn, rm = np.sqrt(red.n), np.sqrt(red.m)
    return ReducedState(
        x1=float(rn * np.cos(red.alpha)),
        x2=float(rn * np.sin(red.alpha)),
        y1=float(rm * np.cos(red.beta)),
        y2=float(rm * np.sin(red.beta)),
        N=red.N,
    )


def cartesian_to_reduced(cart: ReducedState, Theta: float = 0.0) -> ReducedAngleState:
    """Inverse of :func:`reduced_to_cartesian`; the dropped overall phase must
    be supplied (defaults to zero).  Angles at zero radius are zero."""
    alpha = np.arctan2(cart.x2, cart.x1) if cart.n > 0 else 0.0
    beta = np.arctan2(cart.y2, cart.y1) if cart.m > 0 else 0.0
    return ReducedAngleState(
        n=cart.n, alpha=float(alpha), m=cart.m, beta=float(beta), N=cart.N, Theta=Theta
    )


# ---------------------------------------------------------------------------
# the reduced Hamiltonian
# ---------------------------------------------------------------------------


def reduced_hamiltonian(r: ReducedState, params: TrimerParams) -> float:
    """Energy of the reduced system at cartesian coordinates ``r``.

    Matches ``params.observable().evaluate`` composed with the inverse
    coordinate chain; the cross-module agreement is pinned to 1e-12 in the
    test suite.  The middle-site string factor (1 - 2 (N-n-m)) multiplies the
    outer-site coupling term, which is present only for the cyclic topology.
    """
    n, m = r.n, r.m
    s = r.N - n - m
    if s < -_OCC_ATOL:
        raise DomainError("N - n - m is negative")
    s = max(s, 0.0)
    sat = params.saturation
    bound = sat.domain_max
    if bound is not None and max(n, m, s) > bound + 1e-12:
        raise DomainError(
            "occupation %g exceeds the saturation domain bound %g"
            % (max(n, m, s), bound)
        )
    e1, e2, e3 = params.eps
    J = params.coupling
    fn, fm, fs = sat(n), sat(m), sat(s)
    a = 2.0 * (J.real * r.x1 + J.imag * r.x2)
    b = 2.0 * (J.real * r.y1 - J.imag * r.y2)
    value = n * (e1 - e2) + m * (e3 - e2) + r.N * e2
    value += (a * fn + b * fm) * np.sqrt(s) * fs
    if params.topology == "cyclic":
        c = 2.0 * (
            J.real * (r.x1 * r.y1 + r.x2 * r.y2)
            - J.imag * (r.x1 * r.y2 - r.x2 * r.y1)
        )
        value += c * (1.0 - 2.0 * s) * fn * fm
    return float(value)
