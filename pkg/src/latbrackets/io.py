"""Text formats for systems, trajectories, section records, shell clouds
and bracket reports.

Every float is written with ``repr`` — the shortest decimal string that
round-trips to the same binary value — so parsing an emitted file recovers
bit-identical numbers, and identical runs produce byte-identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .brackets import BracketReport
from .dynamics import Trajectory
from .errors import ValidationError
from .hamiltonians import FieldState, HoppingMatrix, Saturation, SaturationKind, Statistics
from .poincare import SectionRecord, SectionResult, ShellSlice

__all__ = [
    "SystemDescription",
    "format_bracket_report",
    "format_system_file",
    "parse_bracket_report",
    "parse_section_csv",
    "parse_section_jsonl",
    "parse_system_file",
    "parse_trajectory_csv",
    "section_to_csv",
    "section_to_jsonl",
    "shell_slice_to_csv",
    "shell_slice_to_jsonl",
    "trajectory_to_csv",
]

TRAJECTORY_COLUMNS = ("t", "x1", "x2", "y1", "y2", "H", "N")
SECTION_COLUMNS = ("trajectory_id", "t", "p", "q", "energy")


def _fmt(value: float) -> str:
    return repr(float(value))


# ---------------------------------------------------------------------------
# system description files
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SystemDescription:
    """A hopping matrix plus the statistics/saturation needed to classicize it."""

    matrix: HoppingMatrix
    statistics: Statistics
    saturation: Optional[Saturation] = None

    def __post_init__(self):
        if self.statistics is Statistics.FERMIONIC and self.saturation is None:
            raise ValidationError(
                "fermionic systems need a saturation function", code="E_SYSTEM_SATURATION"
            )


_SATURATION_BY_NAME = {
    "exp": Saturation.exponential,
    "sqrt": Saturation.square_root,
}


def format_system_file(system: SystemDescription) -> str:
    """Serialize a system to the line-oriented file grammar.

    Layout: one ``key value`` pair per line (``L``, ``statistics``, and for
    fermionic systems ``saturation``), then a line reading ``h`` followed by
    L rows of 2L floats — each complex entry as the pair ``re im``,
    row-major.  ``#`` starts a comment; blank lines are ignored.
    """
    lines = [f"L {system.matrix.dim}", f"statistics {system.statistics.value}"]
    if system.saturation is not None:
        if system.saturation.kind is SaturationKind.CUSTOM:
            raise ValidationError(
                "custom saturation functions cannot be serialized",
                code="E_SYSTEM_SATURATION",
            )
        lines.append(f"saturation {system.saturation.kind.value}")
    lines.append("h")
    for row in system.matrix.entries:
        lines.append("  ".join(f"{_fmt(v.real)} {_fmt(v.imag)}" for v in row))
    return "\n".join(lines) + "\n"


def parse_system_file(text: str) -> SystemDescription:
    """Parse the grammar emitted by :func:`format_system_file`.

    Rejects unknown keys, shape mismatches and non-hermitian matrices, each
    with its own diagnostic code.
    """
    L = None
    statistics = None
    saturation = None
    rows: list[list[float]] = []
    in_matrix = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if in_matrix:
            try:
                rows.append([float(tok) for tok in line.split()])
            except ValueError as exc:
                raise ValidationError(
                    f"line {lineno}: matrix entries must be numbers", code="E_SYSTEM_SHAPE"
                ) from exc
            continue
        key, _, value = line.partition(" ")
        value = value.strip()
        if key == "L":
            try:
                L = int(value)
            except ValueError as exc:
                raise ValidationError(
                    f"line {lineno}: L must be an integer", code="E_SYSTEM_SHAPE"
                ) from exc
        elif key == "statistics":
            try:
                statistics = Statistics(value)
            except ValueError as exc:
                raise ValidationError(
                    f"line {lineno}: unknown statistics {value!r}", code="E_STATISTICS"
                ) from exc
        elif key == "saturation":
            if value not in _SATURATION_BY_NAME:
                raise ValidationError(
                    f"line {lineno}: unknown saturation {value!r}", code="E_SATURATION"
                )
            saturation = _SATURATION_BY_NAME[value]()
        elif key == "h" and not value:
            in_matrix = True
        else:
            raise ValidationError(
                f"line {lineno}: unknown key {key!r}", code="E_SYSTEM_KEY"
            )
    if L is None or statistics is None or not in_matrix:
        raise ValidationError(
            "system file needs 'L', 'statistics' and an 'h' block", code="E_SYSTEM_KEY"
        )
    if len(rows) != L or any(len(r) != 2 * L for r in rows):
        raise ValidationError(
            f"h block must be {L} rows of {2 * L} numbers", code="E_SYSTEM_SHAPE"
        )
    flat = np.asarray(rows, dtype=float)
    entries = flat[:, 0::2] + 1j * flat[:, 1::2]
    return SystemDescription(
        matrix=HoppingMatrix(entries), statistics=statistics, saturation=saturation
    )


# ---------------------------------------------------------------------------
# trajectory tables
# ---------------------------------------------------------------------------


def trajectory_to_csv(traj: Trajectory) -> str:
    """CSV with columns (t, x1, x2, y1, y2, H, N), one sample per row."""
    lines = [",".join(TRAJECTORY_COLUMNS)]
    for t, state, H in zip(traj.times, traj.states, traj.energies):
        fields = [_fmt(t), *(_fmt(v) for v in state), _fmt(H), _fmt(traj.N)]
        lines.append(",".join(fields))
    return "\n".join(lines) + "\n"


def parse_trajectory_csv(text: str) -> dict:
    """Parse :func:`trajectory_to_csv` output into column arrays."""
    lines = [l for l in text.splitlines() if l]
    if not lines or tuple(lines[0].split(",")) != TRAJECTORY_COLUMNS:
        raise ValidationError("bad trajectory header", code="E_TABLE_HEADER")
    data = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    if data.size == 0:
        data = data.reshape(0, len(TRAJECTORY_COLUMNS))
    if data.shape[1] != len(TRAJECTORY_COLUMNS):
        raise ValidationError("bad trajectory row width", code="E_TABLE_SHAPE")
    return {name: data[:, k] for k, name in enumerate(TRAJECTORY_COLUMNS)}


# ---------------------------------------------------------------------------
# section tables
# ---------------------------------------------------------------------------


def section_to_csv(result: SectionResult) -> str:
    """CSV with columns (trajectory_id, t, p, q, energy), sorted by
    (trajectory_id, t)."""
    lines = [",".join(SECTION_COLUMNS)]
    for rec in result:
        lines.append(
            ",".join(
                [
                    str(rec.trajectory_id),
                    _fmt(rec.crossing_time),
                    _fmt(rec.projected[0]),
                    _fmt(rec.projected[1]),
                    _fmt(rec.energy),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def parse_section_csv(text: str) -> list[dict]:
    lines = [l for l in text.splitlines() if l]
    if not lines or tuple(lines[0].split(",")) != SECTION_COLUMNS:
        raise ValidationError("bad section header", code="E_TABLE_HEADER")
    out = []
    for line in lines[1:]:
        tokens = line.split(",")
        if len(tokens) != len(SECTION_COLUMNS):
            raise ValidationError("bad section row width", code="E_TABLE_SHAPE")
        out.append(
            {
                "trajectory_id": int(tokens[0]),
                "t": float(tokens[1]),
                "p": float(tokens[2]),
                "q": float(tokens[3]),
                "energy": float(tokens[4]),
            }
        )
    return out


def section_to_jsonl(result: SectionResult) -> str:
    """JSON-lines: one record per line with sorted keys; the full state is
    included so records can be reconstructed exactly."""
    lines = []
    for rec in result:
        lines.append(
            json.dumps(
                {
                    "energy": rec.energy,
                    "p": rec.projected[0],
                    "q": rec.projected[1],
                    "state": list(rec.state),
                    "t": rec.crossing_time,
                    "trajectory_id": rec.trajectory_id,
                },
                sort_keys=True,
            )
        )
    return "\n".join(lines) + ("\n" if lines else "")


def parse_section_jsonl(text: str) -> list[SectionRecord]:
    out = []
    for lineno, line in enumerate(filter(None, text.splitlines()), start=1):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"line {lineno}: invalid JSON", code="E_JSONL") from exc
        try:
            out.append(
                SectionRecord(
                    trajectory_id=int(obj["trajectory_id"]),
                    crossing_time=float(obj["t"]),
                    projected=(float(obj["p"]), float(obj["q"])),
                    state=tuple(float(v) for v in obj["state"]),
                    energy=float(obj["energy"]),
                )
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"line {lineno}: missing field", code="E_JSONL") from exc
    return out


# ---------------------------------------------------------------------------
# shell-slice tables
# ---------------------------------------------------------------------------


def shell_slice_to_csv(cloud: ShellSlice) -> str:
    """Band points as CSV: the three free coordinates plus the energy."""
    free = cloud.spec.free_coordinates
    header = ",".join([*free, "H"])
    lines = [header]
    idx = np.argwhere(cloud.band_mask)
    for ijk in idx:
        coords = [cloud.grids[a][ijk[a]] for a in range(3)]
        H = cloud.values[tuple(ijk)]
        lines.append(",".join([_fmt(c) for c in coords] + [_fmt(H)]))
    return "\n".join(lines) + "\n"


def shell_slice_to_jsonl(cloud: ShellSlice) -> str:
    free = cloud.spec.free_coordinates
    lines = []
    idx = np.argwhere(cloud.band_mask)
    for ijk in idx:
        obj = {free[a]: float(cloud.grids[a][ijk[a]]) for a in range(3)}
        obj["H"] = float(cloud.values[tuple(ijk)])
        lines.append(json.dumps(obj, sort_keys=True))
    return "\n".join(lines) + ("\n" if lines else "")


# ---------------------------------------------------------------------------
# bracket reports
# ---------------------------------------------------------------------------


def format_bracket_report(report: BracketReport) -> str:
    """Line-oriented record: scalar fields first, then the sampled state at
    the maximum (re im pairs) and one bracket value per line."""
    lines = [
        f"pair {report.labels[0]} {report.labels[1]}",
        f"samples {report.sample_count}",
        f"seed {report.seed}",
        f"max_abs {_fmt(report.max_abs)}",
        f"verdict {report.verdict()}",
        "argmax_state "
        + "  ".join(f"{_fmt(a.real)} {_fmt(a.imag)}" for a in report.argmax_state.amplitudes),
        "values",
    ]
    for v in report.values:
        lines.append(f"{_fmt(v.real)} {_fmt(v.imag)}")
    return "\n".join(lines) + "\n"


def parse_bracket_report(text: str) -> BracketReport:
    fields: dict = {}
    values = []
    in_values = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if in_values:
            re_s, im_s = line.split()
            values.append(complex(float(re_s), float(im_s)))
            continue
        key, _, rest = line.partition(" ")
        if key == "values":
            in_values = True
        elif key in ("pair", "samples", "seed", "max_abs", "verdict", "argmax_state"):
            fields[key] = rest.strip()
        else:
            raise ValidationError(f"line {lineno}: unknown key {key!r}", code="E_REPORT_KEY")
    try:
        labels = tuple(fields["pair"].split())
        amps_flat = [float(tok) for tok in fields["argmax_state"].split()]
        report = BracketReport(
            labels=labels,
            sample_count=int(fields["samples"]),
            max_abs=float(fields["max_abs"]),
            argmax_state=FieldState(
                np.array(amps_flat[0::2]) + 1j * np.array(amps_flat[1::2])
            ),
            values=np.array(values, dtype=complex),
            seed=int(fields["seed"]),
        )
    except (KeyError, ValueError, IndexError) as exc:
        raise ValidationError("incomplete bracket report", code="E_REPORT_KEY") from exc
    if len(labels) != 2:
        raise ValidationError("pair line needs two labels", code="E_REPORT_KEY")
    return report
