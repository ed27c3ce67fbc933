"""Hamiltonian flow of the reduced three-site system.

The equations of motion are ``x1_dot = dH/dx2``, ``x2_dot = -dH/dx1`` (same
for y): the canonical flow of the reduced Hamiltonian, with the constant
factor 1/2 from the non-canonical cartesian map absorbed into the time
variable.  All reported times are the rescaled ones; the physical evolution
is twice as slow.

Two integrators are provided: an adaptive 8th-order Runge–Kutta scheme with
dense output (for accurate event times) and a fixed-step implicit-midpoint
scheme (symplectic; for long-time structure studies).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import DOP853

from .errors import AccuracyError, BoundaryEvent, StepSizeError, ValidationError
from .hamiltonians import SaturationKind
from .transforms import ReducedState, TrimerParams

__all__ = [
    "IntegratorConfig",
    "LyapunovEstimate",
    "Trajectory",
    "flow_derivative",
    "integrate",
    "lyapunov_max",
    "make_domain_margin",
    "make_energy",
    "make_vector_field",
]

_RADICAND_FLOOR = 1e-30


@dataclass(frozen=True)
class IntegratorConfig:
    """Integration method and accuracy settings.

    ``method`` is "adaptive_rk" (embedded 8th-order error control, default)
    or "implicit_midpoint" (fixed step ``step``, symplectic).  ``t_end`` is a
    duration in rescaled time units.
    """

    t_end: float = 100.0
    method: str = "adaptive_rk"
    rel_tol: float = 1e-10
    abs_tol: float = 1e-10
    max_step: float = 0.25
    step: float = 0.01

    def __post_init__(self):
        if self.method not in ("adaptive_rk", "implicit_midpoint"):
            raise ValidationError(f"unknown method {self.method!r}", code="E_METHOD")
        for name in ("t_end", "rel_tol", "abs_tol", "max_step", "step"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValidationError(f"{name} must be positive", code="E_TOL")


# ---------------------------------------------------------------------------
# vector field closures
# ---------------------------------------------------------------------------


def _saturation_pair(params: TrimerParams):
    """Scalar (f(v), f'(v)) evaluator with clamped radicands, for stepping."""
    kind = params.saturation.kind
    if kind is SaturationKind.EXPONENTIAL:

        def pair(v):
            f = math.exp(-v)
            return f, -f

    elif kind is SaturationKind.SQUARE_ROOT:

        def pair(v):
            f = math.sqrt(max(1.0 - v, _RADICAND_FLOOR))
            return f, -0.5 / f

    else:
        sat = params.saturation

        def pair(v):
            return float(sat(v)), float(sat.derivative(v))

    return pair


def make_vector_field(params: TrimerParams, N: float, direction: int = 1):
    """Fast ``f(t, z) -> zdot`` closure over z = (x1, x2, y1, y2).

    Radicands are floored at a tiny positive value so trial evaluations
    slightly past the domain boundary stay finite (the stepper's error
    control then shrinks the step); genuine boundary crossings are detected
    by the caller through :func:`make_domain_margin`.
    """
    e1, e2, e3 = params.eps
    d1, d3 = e1 - e2, e3 - e2
    jr, ji = params.coupling.real, params.coupling.imag
    cyclic = params.topology == "cyclic"
    pair = _saturation_pair(params)
    sign = float(direction)

    def rhs(t, z):
        x1, x2, y1, y2 = z
        n = x1 * x1 + x2 * x2
        m = y1 * y1 + y2 * y2
        s = N - n - m
        sc = max(s, _RADICAND_FLOOR)
        r = math.sqrt(sc)
        fn, dfn = pair(n)
        fm, dfm = pair(m)
        fs, dfs = pair(sc)
        a = 2.0 * (jr * x1 + ji * x2)
        b = 2.0 * (jr * y1 - ji * y2)
        ab = a * fn + b * fm
        rfs = r * fs
        edge = -fs / r - 2.0 * r * dfs  # multiplies ab * coordinate
        gx1 = 2.0 * x1 * d1 + (2.0 * jr * fn + 2.0 * x1 * a * dfn) * rfs + ab * x1 * edge
        gx2 = 2.0 * x2 * d1 + (2.0 * ji * fn + 2.0 * x2 * a * dfn) * rfs + ab * x2 * edge
        gy1 = 2.0 * y1 * d3 + (2.0 * jr * fm + 2.0 * y1 * b * dfm) * rfs + ab * y1 * edge
        gy2 = 2.0 * y2 * d3 + (-2.0 * ji * fm + 2.0 * y2 * b * dfm) * rfs + ab * y2 * edge
        if cyclic:
            c = 2.0 * (jr * (x1 * y1 + x2 * y2) - ji * (x1 * y2 - x2 * y1))
            bp = 2.0 * (jr * y2 + ji * y1)
            ap = 2.0 * (jr * x2 - ji * x1)
            g2 = 1.0 - 2.0 * s
            fnfm = fn * fm
            cg2 = c * g2
            gx1 += b * g2 * fnfm + 4.0 * x1 * c * fnfm + 2.0 * x1 * cg2 * dfn * fm
            gx2 += bp * g2 * fnfm + 4.0 * x2 * c * fnfm + 2.0 * x2 * cg2 * dfn * fm
            gy1 += a * g2 * fnfm + 4.0 * y1 * c * fnfm + 2.0 * y1 * cg2 * fn * dfm
            gy2 += ap * g2 * fnfm + 4.0 * y2 * c * fnfm + 2.0 * y2 * cg2 * fn * dfm
        return np.array((sign * gx2, -sign * gx1, sign * gy2, -sign * gy1))

    return rhs


def make_energy(params: TrimerParams, N: float):
    """Fast scalar H(z) closure matching :func:`~.transforms.reduced_hamiltonian`."""
    e1, e2, e3 = params.eps
    d1, d3 = e1 - e2, e3 - e2
    jr, ji = params.coupling.real, params.coupling.imag
    cyclic = params.topology == "cyclic"
    pair = _saturation_pair(params)
    base = N * e2

    def energy(z):
        x1, x2, y1, y2 = z
        n = x1 * x1 + x2 * x2
        m = y1 * y1 + y2 * y2
        s = max(N - n - m, 0.0)
        fn = pair(n)[0]
        fm = pair(m)[0]
        fs = pair(s)[0]
        a = 2.0 * (jr * x1 + ji * x2)
        b = 2.0 * (jr * y1 - ji * y2)
        value = n * d1 + m * d3 + base + (a * fn + b * fm) * math.sqrt(s) * fs
        if cyclic:
            c = 2.0 * (jr * (x1 * y1 + x2 * y2) - ji * (x1 * y2 - x2 * y1))
            value += c * (1.0 - 2.0 * s) * fn * fm
        return value

    return energy


def make_domain_margin(params: TrimerParams, N: float):
    """Smallest radicand of the flow at z; nonpositive means out of domain.

    For the exponential saturation the only radicand is the middle-site
    occupation s = N - n - m; the square-root saturation adds 1 - n, 1 - m
    and 1 - s.
    """
    bound = params.saturation.domain_max
    bound = None if bound is None else float(bound)

    def margin(z):
        x1, x2, y1, y2 = z
        n = x1 * x1 + x2 * x2
        m = y1 * y1 + y2 * y2
        s = N - n - m
        if bound is None:
            return s
        return min(s, bound - n, bound - m, bound - s)

    return margin


# ---------------------------------------------------------------------------
# the public vector field (exact, with boundary signalling)
# ---------------------------------------------------------------------------


def _mul(prefactor, divergent):
    """prefactor * divergent, with an exactly-zero prefactor short-circuiting
    a divergent factor (the physical frozen-boundary limit)."""
    if prefactor == 0.0:
        return 0.0
    return prefactor * divergent


def _div(numerator, denominator):
    if numerator == 0.0:
        return 0.0
    if denominator == 0.0:
        return math.copysign(math.inf, numerator)
    return numerator / denominator


def flow_derivative(state: ReducedState, params: TrimerParams, direction: int = 1) -> np.ndarray:
    """Time derivative (x1_dot, x2_dot, y1_dot, y2_dot) at ``state``.

    Unlike the stepping closure this evaluates the saturation factors
    exactly: divergent f' factors are kept unless multiplied by an exactly
    vanishing partner (so the frozen corner of the square-root system maps
    to a finite field), and a singular result raises :class:`BoundaryEvent`.
    """
    e1, e2, e3 = params.eps
    d1, d3 = e1 - e2, e3 - e2
    jr, ji = params.coupling.real, params.coupling.imag
    sat = params.saturation
    x1, x2, y1, y2 = state.x1, state.x2, state.y1, state.y2
    n, m = state.n, state.m
    s = max(state.N - n - m, 0.0)
    r = math.sqrt(s)
    with np.errstate(divide="ignore", invalid="ignore"):
        fn, dfn = float(sat(n)), float(sat.derivative(n))
        fm, dfm = float(sat(m)), float(sat.derivative(m))
        fs, dfs = float(sat(s)), float(sat.derivative(s))
    a = 2.0 * (jr * x1 + ji * x2)
    b = 2.0 * (jr * y1 - ji * y2)
    ab = a * fn + b * fm
    rfs = r * fs

    # Each dH/dcoord splits into: the on-site term, the sqrt(s)-weighted
    # hopping slope (divergent df short-circuited by a zero prefactor), the
    # 1/r chain term, and the f'(s) chain term.
    gx1 = 2.0 * x1 * d1 + _mul(rfs, 2.0 * jr * fn + _mul(2.0 * x1 * a, dfn))
    gx1 += -_div(ab * x1 * fs, r) + _mul(-2.0 * ab * x1 * r, dfs)
    gx2 = 2.0 * x2 * d1 + _mul(rfs, 2.0 * ji * fn + _mul(2.0 * x2 * a, dfn))
    gx2 += -_div(ab * x2 * fs, r) + _mul(-2.0 * ab * x2 * r, dfs)
    gy1 = 2.0 * y1 * d3 + _mul(rfs, 2.0 * jr * fm + _mul(2.0 * y1 * b, dfm))
    gy1 += -_div(ab * y1 * fs, r) + _mul(-2.0 * ab * y1 * r, dfs)
    gy2 = 2.0 * y2 * d3 + _mul(rfs, -2.0 * ji * fm + _mul(2.0 * y2 * b, dfm))
    gy2 += -_div(ab * y2 * fs, r) + _mul(-2.0 * ab * y2 * r, dfs)
    if params.topology == "cyclic":
        c = 2.0 * (jr * (x1 * y1 + x2 * y2) - ji * (x1 * y2 - x2 * y1))
        bp = 2.0 * (jr * y2 + ji * y1)
        ap = 2.0 * (jr * x2 - ji * x1)
        g2 = 1.0 - 2.0 * s
        fnfm = fn * fm
        gx1 += b * g2 * fnfm + 4.0 * x1 * c * fnfm + _mul(2.0 * x1 * c * g2 * fm, dfn)
        gx2 += bp * g2 * fnfm + 4.0 * x2 * c * fnfm + _mul(2.0 * x2 * c * g2 * fm, dfn)
        gy1 += a * g2 * fnfm + 4.0 * y1 * c * fnfm + _mul(2.0 * y1 * c * g2 * fn, dfm)
        gy2 += ap * g2 * fnfm + 4.0 * y2 * c * fnfm + _mul(2.0 * y2 * c * g2 * fn, dfm)
    sign = float(direction)
    velocity = np.array((sign * gx2, -sign * gx1, sign * gy2, -sign * gy1))
    if not np.all(np.isfinite(velocity)):
        raise BoundaryEvent("vector field is singular at the saturation boundary")
    return velocity


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Trajectory:
    """Time-ordered samples of one integration run.

    ``energy_drift`` is the max over samples of |H(t) - H(0)| / max(1, |H(0)|);
    ``number_drift`` the same for the total occupation n + m + s, which is
    conserved identically in these coordinates (recorded as a cross-check).
    A non-None ``boundary`` marks a run stopped at the saturation-domain
    boundary; its time is the last sample time.
    """

    times: np.ndarray
    states: np.ndarray
    energies: np.ndarray
    N: float
    energy_drift: float
    number_drift: float
    method: str
    boundary: BoundaryEvent | None = None

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        states = np.asarray(self.states, dtype=float)
        energies = np.asarray(self.energies, dtype=float)
        if times.ndim != 1 or states.shape != (times.size, 4) or energies.shape != times.shape:
            raise ValidationError("inconsistent trajectory arrays", code="E_SHAPE")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise ValidationError("sample times must increase strictly", code="E_TIME_ORDER")
        for arr in (times, states, energies):
            arr.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "energies", energies)

    def __len__(self) -> int:
        return self.times.size

    def state_at(self, index: int) -> ReducedState:
        x1, x2, y1, y2 = self.states[index]
        return ReducedState(x1=x1, x2=x2, y1=y1, y2=y2, N=self.N)

    @property
    def final_state(self) -> ReducedState:
        return self.state_at(-1)

    @property
    def samples(self):
        """List of (time, ReducedState) pairs."""
        return [(float(t), self.state_at(i)) for i, t in enumerate(self.times)]


def _drifts(energies, states, N):
    e0 = energies[0]
    energy_drift = float(np.max(np.abs(energies - e0)) / max(1.0, abs(e0)))
    # total occupation as a field state would report it: n + m + (N - n - m)
    visible = np.sum(states**2, axis=1)
    totals = visible + (N - visible)
    number_drift = float(np.max(np.abs(totals - N)) / max(1.0, N))
    return energy_drift, number_drift


def _bisect_boundary(margin, dense, t_lo, t_hi):
    """Last in-domain time of a dense segment whose end lies outside."""
    for _ in range(80):
        t_mid = 0.5 * (t_lo + t_hi)
        if t_hi - t_lo < 1e-12 * max(1.0, abs(t_hi)):
            break
        if margin(dense(t_mid)) > 0.0:
            t_lo = t_mid
        else:
            t_hi = t_mid
    return t_lo


def _integrate_adaptive(z0, cfg, rhs, margin, energy):
    solver = DOP853(
        rhs, 0.0, z0, cfg.t_end, max_step=cfg.max_step, rtol=cfg.rel_tol, atol=cfg.abs_tol
    )
    times = [0.0]
    states = [np.array(z0, dtype=float)]
    energies = [energy(z0)]
    boundary = None
    while solver.status == "running":
        message = solver.step()
        if solver.status == "failed":
            if margin(solver.y) < 1e-9:
                boundary = BoundaryEvent(
                    "integration stalled at the domain boundary", time=float(solver.t)
                )
                break
            raise StepSizeError(f"adaptive step failed: {message}")
        if margin(solver.y) <= 0.0:
            dense = solver.dense_output()
            t_stop = _bisect_boundary(margin, dense, solver.t_old, solver.t)
            z_stop = dense(t_stop)
            if t_stop > times[-1]:
                times.append(float(t_stop))
                states.append(np.array(z_stop, dtype=float))
                energies.append(energy(z_stop))
            boundary = BoundaryEvent(
                "trajectory reached the saturation-domain boundary", time=float(t_stop)
            )
            break
        times.append(float(solver.t))
        states.append(solver.y.copy())
        energies.append(energy(solver.y))
    return times, states, energies, boundary


def _newton_matrix(rhs, mid, h, jacobian_step=1e-7):
    jac = np.empty((4, 4))
    f_mid = rhs(0.0, mid)
    for j in range(4):
        bumped = mid.copy()
        bumped[j] += jacobian_step
        jac[:, j] = (rhs(0.0, bumped) - f_mid) / jacobian_step
    return np.eye(4) - 0.5 * h * jac


def _midpoint_step(rhs, z, h, max_iter=50):
    f0 = rhs(0.0, z)
    w = z + h * f0  # explicit predictor
    matrix = _newton_matrix(rhs, z + 0.5 * h * f0, h)
    scale = 1.0 + float(np.max(np.abs(z)))
    for iteration in range(max_iter):
        residual = w - z - h * rhs(0.0, 0.5 * (z + w))
        if float(np.max(np.abs(residual))) < 1e-12 * scale:
            return w
        if iteration and iteration % 10 == 0:
            # slow convergence: the frozen Jacobian is stale, rebuild it at
            # the current midpoint iterate
            matrix = _newton_matrix(rhs, 0.5 * (z + w), h)
        w = w - np.linalg.solve(matrix, residual)
    raise AccuracyError(
        "implicit midpoint failed to converge; reduce the step size"
    )


def _integrate_midpoint(z0, cfg, rhs, margin, energy):
    n_steps = max(1, int(round(cfg.t_end / cfg.step)))
    h = cfg.t_end / n_steps
    times = [0.0]
    states = [np.array(z0, dtype=float)]
    energies = [energy(z0)]
    boundary = None
    z = np.array(z0, dtype=float)
    for k in range(1, n_steps + 1):
        z = _midpoint_step(rhs, z, h)
        if margin(z) <= 0.0:
            boundary = BoundaryEvent(
                "trajectory reached the saturation-domain boundary",
                time=float(times[-1]),
            )
            break
        times.append(k * h)
        states.append(z.copy())
        energies.append(energy(z))
    return times, states, energies, boundary


def integrate(
    initial: ReducedState,
    cfg: IntegratorConfig,
    params: TrimerParams,
    direction: int = 1,
) -> Trajectory:
    """Integrate the reduced flow from ``initial`` for ``cfg.t_end`` time units.

    ``direction=-1`` integrates the time-reversed field (for reversibility
    checks).  A domain-boundary crossing stops the run early and is recorded
    on the returned :class:`Trajectory` rather than raised.
    """
    if direction not in (1, -1):
        raise ValidationError("direction must be +1 or -1", code="E_DIRECTION")
    N = initial.N
    rhs = make_vector_field(params, N, direction)
    margin = make_domain_margin(params, N)
    energy = make_energy(params, N)
    z0 = initial.as_array()
    if margin(z0) < 0.0:
        raise BoundaryEvent("initial state outside the saturation domain")
    if cfg.method == "adaptive_rk":
        times, states, energies, boundary = _integrate_adaptive(z0, cfg, rhs, margin, energy)
    else:
        times, states, energies, boundary = _integrate_midpoint(z0, cfg, rhs, margin, energy)
    states_arr = np.vstack(states)
    energies_arr = np.asarray(energies)
    energy_drift, number_drift = _drifts(energies_arr, states_arr, N)
    return Trajectory(
        times=np.asarray(times),
        states=states_arr,
        energies=energies_arr,
        N=N,
        energy_drift=energy_drift,
        number_drift=number_drift,
        method=cfg.method,
        boundary=boundary,
    )


# ---------------------------------------------------------------------------
# largest Lyapunov exponent
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LyapunovEstimate:
    """Benettin two-trajectory estimate of the largest Lyapunov exponent.

    ``series`` holds the running estimate after each kept renormalization
    interval (the convergence record); ``boundary`` flags a partial estimate
    from a trajectory that left the domain early.
    """

    value: float
    series: np.ndarray
    t_total: float
    renorm_interval: float
    boundary: BoundaryEvent | None = None


def _advance(rhs, z, duration, cfg):
    solver = DOP853(
        rhs, 0.0, z, duration, max_step=cfg.max_step, rtol=cfg.rel_tol, atol=cfg.abs_tol
    )
    while solver.status == "running":
        message = solver.step()
        if solver.status == "failed":
            raise StepSizeError(f"adaptive step failed: {message}")
    return solver.y


def lyapunov_max(
    initial: ReducedState,
    params: TrimerParams,
    t_total: float = 2000.0,
    renorm_interval: float = 1.0,
    perturbation: float = 1e-8,
    discard_fraction: float = 0.1,
    cfg: IntegratorConfig | None = None,
    seed: int = 0,
) -> LyapunovEstimate:
    """Largest Lyapunov exponent by two-trajectory renormalization.

    A companion trajectory offset by ``perturbation`` (random direction,
    seeded) is renormalized back to that distance every ``renorm_interval``;
    the estimate averages the log growth factors after discarding the first
    ``discard_fraction`` of intervals as transient.
    """
    if cfg is None:
        cfg = IntegratorConfig(t_end=t_total)
    N = initial.N
    rhs = make_vector_field(params, N)
    margin = make_domain_margin(params, N)
    n_intervals = max(2, int(round(t_total / renorm_interval)))
    n_discard = int(discard_fraction * n_intervals)
    rng = np.random.default_rng(seed)
    offset = rng.normal(size=4)
    offset *= perturbation / float(np.linalg.norm(offset))
    z_ref = initial.as_array()
    if margin(z_ref) <= 0.0:
        raise BoundaryEvent("initial state outside the saturation domain")
    z_pert = z_ref + offset
    logs = []
    boundary = None
    for k in range(n_intervals):
        z_ref = _advance(rhs, z_ref, renorm_interval, cfg)
        z_pert = _advance(rhs, z_pert, renorm_interval, cfg)
        if margin(z_ref) <= 0.0 or margin(z_pert) <= 0.0:
            boundary = BoundaryEvent(
                "trajectory left the domain during the estimate",
                time=(k + 1) * renorm_interval,
            )
            break
        distance = float(np.linalg.norm(z_pert - z_ref))
        logs.append(math.log(distance / perturbation))
        z_pert = z_ref + (perturbation / distance) * (z_pert - z_ref)
    kept = np.asarray(logs[n_discard:]) if len(logs) > n_discard else np.asarray(logs)
    if kept.size == 0:
        raise BoundaryEvent("trajectory left the domain before any estimate")
    running = np.cumsum(kept) / (np.arange(1, kept.size + 1) * renorm_interval)
    return LyapunovEstimate(
        value=float(running[-1]),
        series=running,
        t_total=t_total,
        renorm_interval=renorm_interval,
        boundary=boundary,
    )
