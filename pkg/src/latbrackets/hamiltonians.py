"""Classical phase-space observables for quadratic lattice Hamiltonians.

A quadratic Hamiltonian on ``L`` lattice sites is defined by a hermitian
hopping matrix ``h``.  Its classical limit is a function of complex field
amplitudes ``psi_1 .. psi_L``.  Bosonic statistics replace the ladder
operators one-to-one, giving the bilinear form ``sum_ij h_ij psi_i* psi_j``.
The fermionic replacement keeps diagonal terms bilinear but multiplies each
hopping term ``i != j`` by saturation factors ``f(|psi_i|^2) f(|psi_j|^2)``
and by an exchange string of ``(1 - 2 |psi_k|^2)`` factors over the sites
strictly between ``i`` and ``j`` in fixed basis order (a classical Jordan-
Wigner remnant).

Applying the same replacement to the occupation of eigenmode ``k`` of ``h``
yields a family of candidate constants of motion with rank-one hermitian
coefficient matrices ``C^(k) = u_k u_k^H``.  Whether these Poisson-commute
with the Hamiltonian is what the rest of the package investigates.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    AccuracyError,
    DerivativeDomainError,
    DomainError,
    ValidationError,
)

#: absolute tolerance used when validating hermiticity of input matrices
HERMITICITY_ATOL = 1e-12

_DIAG_ATOL = 1e-10  # unitarity / diagonalization self-check


class Statistics(str, Enum):
    """Exchange statistics selecting the classicalization rule."""

    BOSONIC = "bosonic"
    FERMIONIC = "fermionic"


class SaturationKind(str, Enum):
    EXPONENTIAL = "exp"
    SQUARE_ROOT = "sqrt"
    CUSTOM = "custom"


# -- forward-mode dual numbers -------------------------------------------------
#
# Used only as a fallback to differentiate user-supplied saturation functions
# that did not declare an explicit derivative.  Supports the arithmetic and
# the numpy scalar ufuncs (np.exp(dual) dispatches to Dual.exp, etc.).


class _Dual:
    __slots__ = ("v", "d")

    def __init__(self, v, d=0.0):
        self.v = float(v)
        self.d = float(d)

    def __add__(self, o):
        o = o if isinstance(o, _Dual) else _Dual(o)
        return _Dual(self.v + o.v, self.d + o.d)

    __radd__ = __add__

    def __neg__(self):
        return _Dual(-self.v, -self.d)

    def __sub__(self, o):
        return self + (-o if isinstance(o, _Dual) else _Dual(-o))

    def __rsub__(self, o):
        return _Dual(o) + (-self)

    def __mul__(self, o):
        o = o if isinstance(o, _Dual) else _Dual(o)
        return _Dual(self.v * o.v, self.d * o.v + self.v * o.d)

    __rmul__ = __mul__

    def __truediv__(self, o):
        o = o if isinstance(o, _Dual) else _Dual(o)
        return _Dual(self.v / o.v, (self.d * o.v - self.v * o.d) / (o.v * o.v))

    def __rtruediv__(self, o):
        return _Dual(o) / self

    def __pow__(self, p):
        return _Dual(self.v**p, p * self.v ** (p - 1) * self.d)

    def exp(self):
        e = np.exp(self.v)
        return _Dual(e, e * self.d)

    def log(self):
        return _Dual(np.log(self.v), self.d / self.v)

    def sqrt(self):
        r = np.sqrt(self.v)
        return _Dual(r, 0.5 * self.d / r)

    def sin(self):
        return _Dual(np.sin(self.v), np.cos(self.v) * self.d)

    def cos(self):
        return _Dual(np.cos(self.v), -np.sin(self.v) * self.d)

    def tanh(self):
        t = np.tanh(self.v)
        return _Dual(t, (1.0 - t * t) * self.d)


# module-level so Saturation instances stay picklable


def _f_exp(x):
    return np.exp(-x)


def _df_exp(x):
    return -np.exp(-x)


def _f_sqrt(x):
    # clip float dust at the boundary so f(1) == 0 exactly
    return np.sqrt(np.maximum(1.0 - x, 0.0))


def _df_sqrt(x):
    return -0.5 / np.sqrt(1.0 - x)


@dataclass(frozen=True)
class Saturation:
    """Saturation function ``f`` entering the fermionic hopping terms.

    Attributes
    ----------
    kind : SaturationKind
    fn : callable
        ``x -> f(x)`` on occupations ``x = |psi|^2 >= 0``.
    dfn : callable or None
        Derivative ``x -> f'(x)``; if ``None`` a forward-mode dual-number
        evaluation of ``fn`` is attempted.
    domain_max : float or None
        Upper occupation bound of the domain (``1`` for the square-root
        variant, ``None`` if unbounded).
    """

    kind: SaturationKind
    fn: Callable[[float], float]
    dfn: Optional[Callable[[float], float]] = None
    domain_max: Optional[float] = None

    @classmethod
    def exponential(cls) -> "Saturation":
        """f(x) = exp(-x), defined on all occupations."""
        return cls(SaturationKind.EXPONENTIAL, _f_exp, _df_exp, None)

    @classmethod
    def square_root(cls) -> "Saturation":
        """f(x) = sqrt(1 - x), defined for x <= 1."""
        return cls(SaturationKind.SQUARE_ROOT, _f_sqrt, _df_sqrt, 1.0)

    @classmethod
    def custom(cls, fn, dfn=None, domain_max=None) -> "Saturation":
        """Wrap a user-supplied saturation function with its declared domain."""
        return cls(SaturationKind.CUSTOM, fn, dfn, domain_max)

    def __call__(self, x):
        return self.fn(x)

    def derivative(self, x):
        """Evaluate ``f'(x)``, falling back to dual numbers for custom ``fn``."""
        if self.dfn is not None:
            return self.dfn(x)
        try:
            xs = np.atleast_1d(np.asarray(x, dtype=float))
            out = np.array([self.fn(_Dual(v, 1.0)).d for v in xs])
        except (TypeError, AttributeError) as exc:
            raise ValidationError(
                "custom saturation function does not support dual-number "
                "differentiation; pass an explicit derivative",
                code="E_SATURATION_DERIV",
            ) from exc
        return out if np.ndim(x) else float(out[0])

    def admits(self, occupations, atol=1e-12) -> bool:
        """True if all occupations lie inside the (closed) domain."""
        if self.domain_max is None:
            return True
        return bool(np.all(np.asarray(occupations) <= self.domain_max + atol))


def _as_hermitian(entries, atol=HERMITICITY_ATOL, code="E_HERMITIAN"):
    a = np.array(entries, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError("hopping matrix must be square", code="E_SHAPE")
    if not np.all(np.isfinite(a.view(float))):
        raise ValidationError("hopping matrix has non-finite entries", code="E_FINITE")
    if np.max(np.abs(a - a.conj().T)) > atol:
        raise ValidationError(
            f"matrix is not hermitian within {atol:g}", code=code
        )
    return a


@dataclass(frozen=True)
class HoppingMatrix:
    """Hermitian single-particle hopping matrix defining the system."""

    entries: np.ndarray

    def __post_init__(self):
        a = _as_hermitian(self.entries)
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def linear_chain(cls, eps: Sequence[float], coupling: complex) -> "HoppingMatrix":
        """Open chain: on-site energies ``eps``, nearest-neighbour coupling."""
        eps = np.asarray(eps, dtype=float)
        L = eps.size
        h = np.diag(eps.astype(complex))
        for i in range(L - 1):
            h[i, i + 1] = coupling
            h[i + 1, i] = np.conj(coupling)
        return cls(h)

    @classmethod
    def cyclic_chain(cls, eps: Sequence[float], coupling: complex) -> "HoppingMatrix":
        """Closed ring: like :meth:`linear_chain` plus the wrap-around bond
        between the first and last site (upper-triangle entry ``coupling``)."""
        eps = np.asarray(eps, dtype=float)
        L = eps.size
        if L < 3:
            raise ValidationError("cyclic chain needs at least 3 sites", code="E_SHAPE")
        h = cls.linear_chain(eps, coupling).entries.copy()
        h[0, L - 1] = coupling
        h[L - 1, 0] = np.conj(coupling)
        return cls(h)


@dataclass(frozen=True)
class SpectralData:
    """Eigendecomposition ``h = U diag(w) U^H`` with deterministic phases.

    ``unitary[:, k]`` is the eigenvector of eigenvalue ``eigenvalues[k]``;
    eigenvalues are ascending and each column's largest-magnitude entry is
    made real positive (ties resolved to the lowest index).
    """

    unitary: np.ndarray
    eigenvalues: np.ndarray

    @property
    def dim(self) -> int:
        return self.eigenvalues.size

    def mode(self, k: int) -> np.ndarray:
        return self.unitary[:, k]


def diagonalize(h: HoppingMatrix) -> SpectralData:
    """Diagonalize a hermitian hopping matrix.

    Returns
    -------
    SpectralData
        Ascending eigenvalues and a phase-fixed orthonormal eigenbasis.

    Raises
    ------
    AccuracyError
        If the decomposition fails its unitarity / reconstruction self-check
        (tolerance 1e-10).
    """
    w, u = np.linalg.eigh(h.entries)
    u = np.array(u, dtype=complex)
    for k in range(w.size):
        idx = int(np.argmax(np.abs(u[:, k])))
        pivot = u[idx, k]
        mag = abs(pivot)
        if mag > 0:
            u[:, k] *= np.conj(pivot) / mag
    scale = max(1.0, float(np.max(np.abs(h.entries))))
    if np.max(np.abs(u.conj().T @ u - np.eye(w.size))) > _DIAG_ATOL:
        raise AccuracyError("eigenbasis failed unitarity check")
    if np.max(np.abs(u.conj().T @ h.entries @ u - np.diag(w))) > _DIAG_ATOL * scale:
        raise AccuracyError("eigendecomposition failed reconstruction check")
    w = np.array(w, dtype=float)
    w.setflags(write=False)
    u.setflags(write=False)
    return SpectralData(unitary=u, eigenvalues=w)


@dataclass(frozen=True)
class FieldState:
    """Complex field amplitudes ``psi_1 .. psi_L`` (one per site)."""

    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if a.size == 0:
            raise ValidationError("empty field state", code="E_SHAPE")
        if not np.all(np.isfinite(a.view(float))):
            raise ValidationError("field state has non-finite entries", code="E_FINITE")
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def occupations(self) -> np.ndarray:
        """Per-site occupations ``|psi_i|^2``."""
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True)
class ClassicalObservable:
    """Classical limit of a quadratic operator ``sum_ij C_ij a_i^dag a_j``.

    For bosonic statistics the value is the bilinear form ``psi^H C psi``.
    For fermionic statistics diagonal terms contribute ``C_ii |psi_i|^2``
    while each off-diagonal term carries the saturation factors and the
    exchange string over strictly intermediate sites:

        C_ij psi_i* psi_j f(n_i) f(n_j) prod_{min(i,j)<k<max(i,j)} (1-2 n_k)

    ``saturation`` is required for fermionic observables and ignored for
    bosonic ones.
    """

    coeffs: np.ndarray
    statistics: Statistics
    saturation: Optional[Saturation] = None
    label: str = "obs"

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValidationError("coefficient matrix must be square", code="E_SHAPE")
        if not np.all(np.isfinite(c.view(float))):
            raise ValidationError("coefficients not finite", code="E_FINITE")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        if self.statistics == Statistics.FERMIONIC and self.saturation is None:
            raise ValidationError(
                "fermionic observables need a saturation function",
                code="E_SATURATION",
            )

    @property
    def dim(self) -> int:
        return self.coeffs.shape[0]

    # -- helpers ---------------------------------------------------------

    def _check_state(self, state: FieldState) -> np.ndarray:
        psi = state.amplitudes
        if psi.size != self.dim:
            raise ValidationError(
                f"state dimension {psi.size} != observable dimension {self.dim}",
                code="E_SHAPE",
            )
        if self.statistics == Statistics.FERMIONIC:
            sat = self.saturation
            if sat.domain_max is not None:
                occ = np.abs(psi) ** 2
                if np.any(occ > sat.domain_max + 1e-12):
                    raise DomainError(
                        f"occupation {occ.max():.6g} exceeds saturation domain "
                        f"bound {sat.domain_max:g}"
                    )
        return psi

    # -- evaluation ------------------------------------------------------

    def evaluate_complex(self, state: FieldState) -> complex:
        """Like :meth:`evaluate` but without the real-value projection
        (useful for non-hermitian coefficient matrices)."""
        psi = self._check_state(state)
        C = self.coeffs
        if self.statistics == Statistics.BOSONIC:
            return complex(psi.conj() @ C @ psi)
        n = np.abs(psi) ** 2
        f = self.saturation(n)
        g = 1.0 - 2.0 * n
        val = complex(np.sum(np.diag(C).real * n) + 1j * np.sum(np.diag(C).imag * n))
        L = self.dim
        for i in range(L):
            for j in range(i + 1, L):
                cij, cji = C[i, j], C[j, i]
                if cij == 0 and cji == 0:
                    continue
                string = float(np.prod(g[i + 1 : j])) if j > i + 1 else 1.0
                weight = f[i] * f[j] * string
                val += (cij * np.conj(psi[i]) * psi[j] + cji * np.conj(psi[j]) * psi[i]) * weight
        return val

    def evaluate(self, state: FieldState) -> float:
        """Evaluate the observable at a field state.

        Returns a real number; hermitian coefficient matrices give real
        values by construction and a residual imaginary part above
        ``1e-10 * max(1, |value|)`` raises :class:`ValidationError`.
        """
        val = self.evaluate_complex(state)
        if abs(val.imag) > 1e-10 * max(1.0, abs(val.real)):
            raise ValidationError(
                "observable value has a non-negligible imaginary part "
                "(non-hermitian coefficients?); use evaluate_complex",
                code="E_NONREAL",
            )
        return float(val.real)

    # -- differentiation --------------------------------------------------

    def wirtinger_gradient(self, state: FieldState):
        """Wirtinger gradients ``(d/d psi_i, d/d psi_i*)`` of the observable.

        ``psi`` and ``psi*`` are treated as independent variables; for
        hermitian coefficients the two gradients are complex conjugates.

        Returns
        -------
        (numpy.ndarray, numpy.ndarray)
            ``grad_psi`` and ``grad_psistar``, each of length ``L``.

        Raises
        ------
        DerivativeDomainError
            At non-differentiable points of the saturation function (e.g.
            ``|psi_i|^2 = 1`` for the square-root variant) when site ``i``
            participates in a hopping term.
        """
        psi = self._check_state(state)
        C = self.coeffs
        L = self.dim
        if self.statistics == Statistics.BOSONIC:
            gpsi = C.T @ psi.conj()
            gpsb = C @ psi
            return gpsi, gpsb

        sat = self.saturation
        n = np.abs(psi) ** 2
        f = np.asarray(sat(n), dtype=float)
        g = 1.0 - 2.0 * n
        gpsi = np.diag(C) * psi.conj()
        gpsb = np.diag(C) * psi

        # sites needing f' = every endpoint of a nonzero hopping term
        pairs = [
            (i, j)
            for i in range(L)
            for j in range(i + 1, L)
            if C[i, j] != 0 or C[j, i] != 0
        ]
        if not pairs:
            return gpsi, gpsb
        endpoint = set()
        for i, j in pairs:
            endpoint.add(i)
            endpoint.add(j)
        if sat.domain_max is not None:
            for i in sorted(endpoint):
                if sat.domain_max - n[i] <= 0.0:
                    raise DerivativeDomainError(
                        f"saturation derivative undefined at site {i} "
                        f"(occupation {n[i]:.6g} at domain bound)"
                    )
        df = np.zeros(L)
        idx = sorted(endpoint)
        df[idx] = np.asarray(sat.derivative(n[idx]), dtype=float)

        for i, j in pairs:
            cij, cji = C[i, j], C[j, i]
            inner = np.arange(i + 1, j)
            string = float(np.prod(g[inner])) if inner.size else 1.0
            weight = f[i] * f[j] * string
            # d/d(psi) and d/d(psi*) acting on the explicit psi factors
            gpsi[j] += cij * psi[i].conj() * weight
            gpsi[i] += cji * psi[j].conj() * weight
            gpsb[i] += cij * psi[j] * weight
            gpsb[j] += cji * psi[i] * weight
            # occupation channel: dF/dn_m with F = f_i f_j * string
            w_pair = cij * psi[i].conj() * psi[j] + cji * psi[j].conj() * psi[i]
            if w_pair == 0:
                continue
            dF_i = df[i] * f[j] * string
            dF_j = f[i] * df[j] * string
            gpsi[i] += w_pair * dF_i * psi[i].conj()
            gpsb[i] += w_pair * dF_i * psi[i]
            gpsi[j] += w_pair * dF_j * psi[j].conj()
            gpsb[j] += w_pair * dF_j * psi[j]
            for m in inner:
                rest = np.prod(g[inner[inner != m]]) if inner.size > 1 else 1.0
                dF_m = f[i] * f[j] * (-2.0) * float(rest)
                gpsi[m] += w_pair * dF_m * psi[m].conj()
                gpsb[m] += w_pair * dF_m * psi[m]
        return gpsi, gpsb


def hamiltonian_observable(
    h: HoppingMatrix,
    statistics: Statistics,
    saturation: Optional[Saturation] = None,
    label: str = "H",
) -> ClassicalObservable:
    """Classical limit of the Hamiltonian defined by hopping matrix ``h``."""
    return ClassicalObservable(h.entries, statistics, saturation, label)


def candidate_constants(
    spectral: SpectralData,
    statistics: Statistics,
    saturation: Optional[Saturation] = None,
) -> list[ClassicalObservable]:
    """Classical limits of the eigenmode occupations.

    Mode ``k`` gets the rank-one coefficient matrix ``C^(k) = u_k u_k^H``
    (hermitian, trace one); the ``C^(k)`` sum to the identity.  Labels are
    ``N1 .. NL`` in ascending-eigenvalue order.
    """
    out = []
    for k in range(spectral.dim):
        uk = spectral.mode(k)
        out.append(
            ClassicalObservable(
                np.outer(uk, uk.conj()), statistics, saturation, label=f"N{k + 1}"
            )
        )
    return out


def total_number(
    dim: int,
    statistics: Statistics,
    saturation: Optional[Saturation] = None,
) -> ClassicalObservable:
    """Total occupation ``sum_i |psi_i|^2`` (identity coefficients)."""
    return ClassicalObservable(np.eye(dim), statistics, saturation, label="Ntot")
