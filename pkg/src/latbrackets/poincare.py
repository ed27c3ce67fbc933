"""Poincare surfaces of section, energy-shell utilities, and a
correlation-dimension classifier for the reduced three-site flow.

A section is the set of crossings of one cartesian coordinate through a
level, restricted to an energy shell; each trajectory's crossings are tagged
so downstream plotting can color them individually.  Whether a record set
is "curve-like" (suggesting a second constant of motion) or "area-like"
(chaotic) is quantified by a Grassberger-Procaccia correlation dimension of
the projected points.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial

import numpy as np
from scipy.integrate import DOP853
from scipy.optimize import brentq

from .dynamics import (
    IntegratorConfig,
    make_domain_margin,
    make_energy,
    make_vector_field,
)
from .errors import (
    AccuracyError,
    BoundaryEvent,
    NoRootError,
    SamplingError,
    StepSizeError,
    ValidationError,
)
from .hamiltonians import SaturationKind
from .transforms import ReducedState, TrimerParams

__all__ = [
    "CROSSING_TOLERANCE",
    "SHELL_TOLERANCE",
    "SectionRecord",
    "SectionResult",
    "SectionSpec",
    "ShellSlice",
    "ShellSliceSpec",
    "classify_section",
    "correlation_dimension",
    "sample_on_shell",
    "section",
    "shell_project",
    "shell_slice",
]

_COORDS = ("x1", "x2", "y1", "y2")
CROSSING_TOLERANCE = 1e-10
SHELL_TOLERANCE = 1e-9
_SUBSTEPS = 8  # dense-output samples per accepted step when hunting crossings


@dataclass(frozen=True)
class SectionSpec:
    """Which hyperplane to section on and what to record.

    ``direction`` selects the sign of the crossing velocity: "+" keeps
    upward crossings, "-" downward, "both" keeps all.  ``projection`` names
    the two coordinates stored as the plotted pair.
    """

    coordinate: str = "x2"
    level: float = 0.0
    direction: str = "+"
    projection: tuple[str, str] = ("y1", "y2")

    def __post_init__(self):
        if self.coordinate not in _COORDS:
            raise ValidationError(f"unknown coordinate {self.coordinate!r}", code="E_COORD")
        if self.direction not in ("+", "-", "both"):
            raise ValidationError("direction must be '+', '-' or 'both'", code="E_DIRECTION")
        proj = tuple(self.projection)
        if len(proj) != 2 or len(set(proj)) != 2:
            raise ValidationError("projection must be two distinct coordinates", code="E_PROJ")
        for name in proj:
            if name not in _COORDS or name == self.coordinate:
                raise ValidationError(
                    "projection coordinates must differ from the section coordinate",
                    code="E_PROJ",
                )
        object.__setattr__(self, "projection", proj)
        if not np.isfinite(self.level):
            raise ValidationError("level must be finite", code="E_LEVEL")

    @property
    def coordinate_index(self) -> int:
        return _COORDS.index(self.coordinate)

    @property
    def projection_indices(self) -> tuple[int, int]:
        return _COORDS.index(self.projection[0]), _COORDS.index(self.projection[1])


@dataclass(frozen=True)
class SectionRecord:
    """One plane crossing of one trajectory."""

    trajectory_id: int
    crossing_time: float
    projected: tuple[float, float]
    state: tuple[float, float, float, float]
    energy: float


@dataclass(frozen=True)
class SectionResult:
    """Crossing records plus per-trajectory boundary flags.

    Iterating yields the records, sorted by (trajectory_id, crossing_time).
    ``boundaries`` maps trajectory ids that left the saturation domain to the
    exit time (their record lists are partial).
    """

    records: tuple[SectionRecord, ...]
    boundaries: dict[int, float] = field(default_factory=dict)

    def __iter__(self):
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)

    def trajectory_ids(self) -> tuple[int, ...]:
        return tuple(sorted({r.trajectory_id for r in self.records}))

    def projected_points(self, trajectory_id: int) -> np.ndarray:
        """(k, 2) array of the projected pair for one trajectory."""
        pts = [r.projected for r in self.records if r.trajectory_id == trajectory_id]
        return np.asarray(pts, dtype=float).reshape(len(pts), 2)


def _crossing_times(dense, t_lo, t_hi, index, level, last_time):
    """Sign-change scan of one dense-output segment."""
    ts = np.linspace(t_lo, t_hi, _SUBSTEPS + 1)
    values = dense(ts)[index] - level
    hits = []
    for i in range(_SUBSTEPS):
        a, b = values[i], values[i + 1]
        if a == 0.0:
            t_star = ts[i]
        elif a * b < 0.0:
            t_star = brentq(
                lambda t: dense(t)[index] - level, ts[i], ts[i + 1], xtol=1e-13
            )
        elif b == 0.0 and i == _SUBSTEPS - 1:
            t_star = ts[i + 1]
        else:
            continue
        if t_star - last_time > 1e-9:
            hits.append(t_star)
            last_time = t_star
    return hits, last_time


def _trajectory_records(trajectory_id, z0, N, spec, E, params, cfg, max_records):
    rhs = make_vector_field(params, N)
    margin = make_domain_margin(params, N)
    energy = make_energy(params, N)
    index = spec.coordinate_index
    p_idx, q_idx = spec.projection_indices
    solver = DOP853(
        rhs, 0.0, z0, cfg.t_end, max_step=cfg.max_step, rtol=cfg.rel_tol, atol=cfg.abs_tol
    )
    records = []
    boundary_time = None
    last_time = -math.inf
    while solver.status == "running":
        message = solver.step()
        if solver.status == "failed":
            if margin(solver.y) < 1e-9:
                boundary_time = float(solver.t)
                break
            raise StepSizeError(f"adaptive step failed: {message}")
        if margin(solver.y) <= 0.0:
            boundary_time = float(solver.t)
            break
        dense = solver.dense_output()
        hits, last_time = _crossing_times(
            dense, solver.t_old, solver.t, index, spec.level, last_time
        )
        for t_star in hits:
            state = dense(t_star)
            velocity = rhs(t_star, state)[index]
            if spec.direction == "+" and velocity <= 0.0:
                continue
            if spec.direction == "-" and velocity >= 0.0:
                continue
            offset = state[index] - spec.level
            if abs(offset) > CROSSING_TOLERANCE:
                raise AccuracyError(
                    f"crossing refinement left offset {offset:.2e}"
                )
            records.append(
                SectionRecord(
                    trajectory_id=trajectory_id,
                    crossing_time=float(t_star),
                    projected=(float(state[p_idx]), float(state[q_idx])),
                    state=tuple(float(v) for v in state),
                    energy=float(energy(state)),
                )
            )
            if max_records is not None and len(records) >= max_records:
                return records, boundary_time
    return records, boundary_time


def _section_task(task, spec, E, params, cfg, max_records):
    trajectory_id, z0, N = task
    return _trajectory_records(trajectory_id, np.asarray(z0), N, spec, E, params, cfg, max_records)


def section(
    initials: list[ReducedState],
    spec: SectionSpec,
    E: float,
    params: TrimerParams,
    cfg: IntegratorConfig,
    workers: int = 1,
    max_records: int | None = None,
) -> SectionResult:
    """Plane-crossing records for each initial state, on the shell H = E.

    Every initial must already lie on the shell to ``SHELL_TOLERANCE`` (use
    :func:`shell_project`).  Trajectories are independent, so ``workers > 1``
    distributes them across processes; the merged records are sorted by
    (trajectory_id, crossing_time) either way.  A trajectory that reaches the
    saturation-domain boundary contributes the records found so far and is
    flagged in ``boundaries``.
    """
    tasks = []
    for tid, state in enumerate(initials):
        value = make_energy(params, state.N)(state.as_array())
        if abs(value - E) > SHELL_TOLERANCE:
            raise ValidationError(
                f"initial state {tid} is off the shell: |H - E| = {abs(value - E):.2e}",
                code="E_SHELL",
            )
        tasks.append((tid, tuple(state.as_array()), state.N))
    worker = partial(
        _section_task, spec=spec, E=E, params=params, cfg=cfg, max_records=max_records
    )
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(worker, tasks))
    else:
        outcomes = [worker(task) for task in tasks]
    records = []
    boundaries = {}
    for (tid, _, _), (recs, boundary_time) in zip(tasks, outcomes):
        records.extend(recs)
        if boundary_time is not None:
            boundaries[tid] = boundary_time
    records.sort(key=lambda r: (r.trajectory_id, r.crossing_time))
    return SectionResult(records=tuple(records), boundaries=boundaries)


# ---------------------------------------------------------------------------
# energy-shell utilities
# ---------------------------------------------------------------------------


def _free_interval(state: ReducedState, params: TrimerParams, index: int):
    """Admissible values of one cartesian coordinate, all others fixed."""
    z = state.as_array()
    others = np.delete(z, index)
    partner = {0: 1, 1: 0, 2: 3, 3: 2}[index]
    fixed_partner = z[partner] ** 2
    other_pair = sum(np.delete(z, [index, partner]) ** 2)
    hi2 = state.N - fixed_partner - other_pair  # from s >= 0
    if params.saturation.domain_max is not None:
        bound = float(params.saturation.domain_max)
        if other_pair > bound + 1e-12:
            return None  # the untouched occupation already exceeds the bound
        hi2 = min(hi2, bound - fixed_partner)  # own occupation <= bound
        lo2 = state.N - bound - fixed_partner - other_pair  # from s <= bound
    else:
        lo2 = 0.0
    lo2 = max(lo2, 0.0)
    if hi2 <= lo2:
        return None
    return math.sqrt(lo2), math.sqrt(hi2)


def shell_project(
    state: ReducedState,
    E: float,
    params: TrimerParams,
    free_coordinate: str = "x1",
) -> ReducedState:
    """Move one coordinate so the state lands on the shell H = E.

    The root of H - E nearest the current coordinate value (scanning both
    signs of the coordinate) is located by bracketing and refined until
    |H - E| < 1e-11.  Raises :class:`NoRootError` when the shell does not
    intersect the scanned segment.
    """
    if free_coordinate not in _COORDS:
        raise ValidationError(f"unknown coordinate {free_coordinate!r}", code="E_COORD")
    index = _COORDS.index(free_coordinate)
    energy = make_energy(params, state.N)
    z0 = state.as_array()
    if abs(energy(z0) - E) < 1e-12:
        return state

    interval = _free_interval(state, params, index)
    if interval is None:
        raise NoRootError("no admissible values for the free coordinate")
    lo, hi = interval
    span = hi - lo
    pad = 1e-9 * max(1.0, span)

    def offset(v):
        z = z0.copy()
        z[index] = v
        return energy(z) - E

    candidates = []
    for sign in (1.0, -1.0):
        grid = sign * np.linspace(lo + pad, hi - pad, 257)
        values = np.array([offset(v) for v in grid])
        for i in range(256):
            va, vb = values[i], values[i + 1]
            if va == 0.0:
                candidates.append(grid[i])
            elif va * vb < 0.0:
                left, right = sorted((grid[i], grid[i + 1]))
                candidates.append(brentq(offset, left, right, xtol=1e-15, rtol=8.9e-16))
    if not candidates:
        raise NoRootError("the shell does not intersect the scanned coordinate segment")
    root = min(candidates, key=lambda v: abs(v - z0[index]))
    z = z0.copy()
    z[index] = root
    if abs(energy(z) - E) > 1e-11:
        raise AccuracyError("root refinement did not reach the shell tolerance")
    return ReducedState(x1=z[0], x2=z[1], y1=z[2], y2=z[3], N=state.N)


def sample_on_shell(
    count: int,
    E: float,
    N: float,
    params: TrimerParams,
    seed: int = 0,
    margin: float = 1e-4,
) -> list[ReducedState]:
    """Deterministically seeded sample of states on the shell H = E.

    Draws (x2, y2) and a ray direction in the (x1, y1) plane, then solves
    H = E along the ray; draws that miss the shell are discarded.  States
    closer than ``margin`` to the saturation-domain boundary are rejected so
    downstream integrations start strictly interior.
    """
    if count <= 0:
        raise ValidationError("count must be positive", code="E_COUNT")
    rng = np.random.default_rng(seed)
    energy = make_energy(params, N)
    domain_margin = make_domain_margin(params, N)
    bound = params.saturation.domain_max
    out: list[ReducedState] = []
    attempts = 0
    limit = 2000 * count
    amp = math.sqrt(min(N, bound) if bound is not None else N)
    while len(out) < count and attempts < limit:
        attempts += 1
        x2, y2 = rng.uniform(-0.95 * amp, 0.95 * amp, size=2)
        phi = rng.uniform(0.0, 2.0 * math.pi)
        c, s = math.cos(phi), math.sin(phi)
        hi2 = N - x2 * x2 - y2 * y2
        lo2 = 0.0
        if bound is not None:
            b = float(bound)
            if abs(c) > 1e-12:
                hi2 = min(hi2, (b - x2 * x2) / (c * c))
            if abs(s) > 1e-12:
                hi2 = min(hi2, (b - y2 * y2) / (s * s))
            lo2 = max(lo2, N - b - x2 * x2 - y2 * y2)
        if hi2 <= lo2 or hi2 <= 0.0:
            continue
        t_lo, t_hi = math.sqrt(max(lo2, 0.0)), math.sqrt(hi2)

        def offset(t):
            return energy(np.array([t * c, x2, t * s, y2])) - E

        grid = np.linspace(t_lo + 1e-9, t_hi - 1e-9, 48)
        values = [offset(t) for t in grid]
        root = None
        for i in range(47):
            if values[i] * values[i + 1] < 0.0:
                root = brentq(offset, grid[i], grid[i + 1], xtol=1e-15, rtol=8.9e-16)
                break
        if root is None:
            continue
        z = np.array([root * c, x2, root * s, y2])
        if domain_margin(z) < margin:
            continue
        if abs(energy(z) - E) > SHELL_TOLERANCE:
            continue
        out.append(ReducedState(x1=z[0], x2=z[1], y1=z[2], y2=z[3], N=N))
    if len(out) < count:
        raise SamplingError(
            f"found only {len(out)} of {count} on-shell states after {attempts} draws"
        )
    return out


# ---------------------------------------------------------------------------
# energy-shell slices
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ShellSliceSpec:
    """A 3-D grid slice of the shell: one coordinate pinned, the others
    gridded; points with |H - E| < half_width form the cloud."""

    fixed_coordinate: str
    fixed_value: float
    ranges: dict
    resolutions: dict
    energy: float
    half_width: float
    N: float

    def __post_init__(self):
        if self.fixed_coordinate not in _COORDS:
            raise ValidationError(
                f"unknown coordinate {self.fixed_coordinate!r}", code="E_COORD"
            )
        free = [c for c in _COORDS if c != self.fixed_coordinate]
        if sorted(self.ranges) != sorted(free) or sorted(self.resolutions) != sorted(free):
            raise ValidationError(
                "ranges and resolutions must cover exactly the three free coordinates",
                code="E_GRID",
            )
        for name in free:
            lo, hi = self.ranges[name]
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise ValidationError(f"bad range for {name}", code="E_GRID")
            if int(self.resolutions[name]) < 2:
                raise ValidationError("resolutions must be at least 2", code="E_GRID")
        if not self.half_width > 0:
            raise ValidationError("half_width must be positive", code="E_TOL")
        if not self.N > 0:
            raise ValidationError("N must be positive", code="E_DOMAIN_N")

    @property
    def free_coordinates(self) -> tuple[str, str, str]:
        return tuple(c for c in _COORDS if c != self.fixed_coordinate)


@dataclass(frozen=True)
class ShellSlice:
    """Point cloud of one shell slice.

    ``band_points`` are the free-coordinate triples with |H - E| < delta;
    ``crossing_points`` are grid points where H - E changes sign toward a
    neighbor along any axis (implicit-surface cells); masks and the raw H
    grid are kept for rendering.
    """

    spec: ShellSliceSpec
    grids: tuple[np.ndarray, np.ndarray, np.ndarray]
    values: np.ndarray
    band_mask: np.ndarray
    crossing_mask: np.ndarray

    @property
    def band_points(self) -> np.ndarray:
        return self._points(self.band_mask)

    @property
    def crossing_points(self) -> np.ndarray:
        return self._points(self.crossing_mask)

    def _points(self, mask) -> np.ndarray:
        idx = np.argwhere(mask)
        if idx.size == 0:
            return np.empty((0, 3))
        return np.column_stack([self.grids[k][idx[:, k]] for k in range(3)])


def shell_slice(spec: ShellSliceSpec, params: TrimerParams) -> ShellSlice:
    """Evaluate H on the slice grid and extract the shell band.

    Grid points outside the saturation domain are marked invalid (NaN
    energy) and belong to neither the band nor the crossing set.
    """
    free = spec.free_coordinates
    grids = tuple(
        np.linspace(*spec.ranges[name], int(spec.resolutions[name])) for name in free
    )
    mesh = dict(zip(free, np.meshgrid(*grids, indexing="ij")))
    mesh[spec.fixed_coordinate] = np.full_like(
        next(iter(mesh.values())), spec.fixed_value
    )
    x1, x2, y1, y2 = (mesh[c] for c in _COORDS)
    n = x1**2 + x2**2
    m = y1**2 + y2**2
    s = spec.N - n - m
    valid = s >= 0.0
    kind = params.saturation.kind
    if kind is SaturationKind.EXPONENTIAL:
        fn, fm, fs = np.exp(-n), np.exp(-m), np.exp(-np.maximum(s, 0.0))
    elif kind is SaturationKind.SQUARE_ROOT:
        valid &= (n <= 1.0) & (m <= 1.0) & (s <= 1.0)
        fn = np.sqrt(np.clip(1.0 - n, 0.0, None))
        fm = np.sqrt(np.clip(1.0 - m, 0.0, None))
        fs = np.sqrt(np.clip(1.0 - s, 0.0, 1.0))
    else:
        bound = params.saturation.domain_max
        if bound is not None:
            valid &= (n <= bound) & (m <= bound) & (s <= bound)
        sat = np.vectorize(params.saturation, otypes=[float])
        fn, fm, fs = sat(n), sat(m), sat(np.maximum(s, 0.0))
    e1, e2, e3 = params.eps
    jr, ji = params.coupling.real, params.coupling.imag
    a = 2.0 * (jr * x1 + ji * x2)
    b = 2.0 * (jr * y1 - ji * y2)
    H = n * (e1 - e2) + m * (e3 - e2) + spec.N * e2
    H = H + (a * fn + b * fm) * np.sqrt(np.maximum(s, 0.0)) * fs
    if params.topology == "cyclic":
        c = 2.0 * (jr * (x1 * y1 + x2 * y2) - ji * (x1 * y2 - x2 * y1))
        H = H + c * (1.0 - 2.0 * s) * fn * fm
    H = np.where(valid, H, np.nan)
    offset = H - spec.energy
    band = np.abs(offset) < spec.half_width
    band &= valid
    crossing = np.zeros_like(band)
    sign = np.sign(offset)
    for axis in range(3):
        a_side = [slice(None)] * 3
        b_side = [slice(None)] * 3
        a_side[axis] = slice(None, -1)
        b_side[axis] = slice(1, None)
        flip = (
            (sign[tuple(a_side)] * sign[tuple(b_side)] < 0)
            & valid[tuple(a_side)]
            & valid[tuple(b_side)]
        )
        crossing[tuple(a_side)] |= flip
        crossing[tuple(b_side)] |= flip
    return ShellSlice(
        spec=spec, grids=grids, values=H, band_mask=band, crossing_mask=crossing
    )


# ---------------------------------------------------------------------------
# curve-vs-area classification
# ---------------------------------------------------------------------------


def correlation_dimension(
    points: np.ndarray,
    n_radii: int = 12,
    quantiles: tuple[float, float] = (0.02, 0.2),
    max_points: int = 2000,
) -> float:
    """Grassberger-Procaccia correlation dimension of a 2-D point set.

    The correlation sum C(r) is fit as a power law over radii log-spaced
    between the given quantiles of the pairwise-distance distribution; the
    fitted exponent is returned.  Deterministic: oversized inputs are
    thinned by stride, not at random.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 10:
        raise ValidationError(
            "need at least 10 points for a dimension estimate", code="E_POINTS"
        )
    if pts.shape[0] > max_points:
        stride = int(np.ceil(pts.shape[0] / max_points))
        pts = pts[::stride]
    deltas = pts[:, None, :] - pts[None, :, :]
    distances = np.sqrt(np.sum(deltas**2, axis=-1))
    iu = np.triu_indices(pts.shape[0], k=1)
    pair = distances[iu]
    pair = pair[pair > 0.0]
    if pair.size < 30:
        raise ValidationError("too few distinct pairs", code="E_POINTS")
    r_lo, r_hi = np.quantile(pair, quantiles)
    if not (r_lo > 0.0 and r_hi > r_lo):
        raise ValidationError("degenerate distance distribution", code="E_POINTS")
    radii = np.geomspace(r_lo, r_hi, n_radii)
    counts = np.searchsorted(np.sort(pair), radii)
    frac = counts / pair.size
    keep = frac > 0
    log_r = np.log(radii[keep])
    log_c = np.log(frac[keep])
    slope, _ = np.polyfit(log_r, log_c, 1)
    return float(slope)


def classify_section(dimension: float) -> str:
    """Map a correlation dimension to the qualitative section verdict."""
    if dimension < 1.3:
        return "curve-like"
    if dimension > 1.7:
        return "area-like"
    return "ambiguous"
