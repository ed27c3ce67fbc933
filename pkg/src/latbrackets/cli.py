"""Command-line front end.

Subcommands orchestrate the library: ``bracket-check`` (Poisson-bracket
scans over observable pairs), ``integrate`` (one reduced trajectory),
``poincare`` (surfaces of section with curve/area classification),
``lyapunov`` (largest-exponent estimates) and ``shell`` (energy-shell
slices).  Workers only ever compute; all file writes go through the single
:func:`_emit` funnel in the main process, and every output is deterministic
for a fixed config and seed.

Exit codes: 0 success, 2 configuration/validation error, 3 runtime or
domain error, 4 bracket-check found a violation although ``--expect-vanish``
was set.
"""

from __future__ import annotations

import argparse
import json
import sys
from itertools import combinations
from pathlib import Path

from . import io as formats
from .brackets import StateSampler, bracket_scan
from .config import ExperimentConfig, load_config
from .dynamics import IntegratorConfig, integrate, lyapunov_max
from .errors import LatticeError, ValidationError
from .hamiltonians import (
    candidate_constants,
    diagonalize,
    hamiltonian_observable,
    total_number,
)
from .poincare import (
    SectionSpec,
    ShellSliceSpec,
    classify_section,
    correlation_dimension,
    sample_on_shell,
    section,
    shell_project,
    shell_slice,
)
from .transforms import ReducedState

__all__ = ["main"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_VIOLATION = 4

_MIN_CLASSIFY_RECORDS = 30


def _emit(path: Path, text: str) -> None:
    """Single write funnel: every output file passes through here."""
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    print(f"wrote {path}")


def _emit_report(out_dir: Path, payload: dict) -> None:
    _emit(out_dir / "report.json", json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _require(run: dict, key: str, code: str):
    if key not in run:
        raise ValidationError(f"run block needs {key!r}", code=code)
    return run[key]


def _integrator_config(run: dict, default_t=100.0) -> IntegratorConfig:
    defaults = dict(
        t_end=float(run.get("t_end", default_t)),
        method=run.get("method", "adaptive_rk"),
        rel_tol=float(run.get("rel_tol", 1e-10)),
        abs_tol=float(run.get("abs_tol", 1e-10)),
        max_step=float(run.get("max_step", 0.25)),
        step=float(run.get("step", 0.01)),
    )
    return IntegratorConfig(**defaults)


def _reduced_state(values, N: float) -> ReducedState:
    if not (isinstance(values, (list, tuple)) and len(values) == 4):
        raise ValidationError(
            "each initial state is four numbers [x1, x2, y1, y2]", code="E_RUN_INITIAL"
        )
    x1, x2, y1, y2 = (float(v) for v in values)
    return ReducedState(x1=x1, x2=x2, y1=y1, y2=y2, N=N)


def _initial_states(cfg: ExperimentConfig, params, E: float, N: float):
    """Explicit `initials` (optionally shell-projected) or a seeded scan."""
    run = cfg.run
    if "initials" in run:
        states = []
        for values in run["initials"]:
            state = _reduced_state(values, N)
            if run.get("project", False):
                state = shell_project(
                    state, E, params, free_coordinate=run.get("free_coordinate", "x1")
                )
            states.append(state)
        return states
    count = int(run.get("count", 0))
    if count < 1:
        raise ValidationError(
            "run block needs 'initials' or a positive 'count'", code="E_RUN_INITIAL"
        )
    return sample_on_shell(count, E, N, params, seed=cfg.seed)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_bracket_check(cfg: ExperimentConfig, args) -> int:
    system = cfg.system
    spectral = diagonalize(system.matrix)
    H = hamiltonian_observable(system.matrix, system.statistics, system.saturation)
    constants = candidate_constants(spectral, system.statistics, system.saturation)
    ntot = total_number(system.matrix.dim, system.statistics, system.saturation)
    pairs = [(H, c) for c in constants]
    pairs.append((H, ntot))
    if cfg.run.get("pairs", "all") == "all":
        pairs.extend(combinations(constants, 2))
    sampler = StateSampler.for_observables(H, *constants)
    n_points = int(cfg.run.get("samples", 100))

    rows = []
    overall = 0.0
    argmax_pair = None
    for f, g in pairs:
        report = bracket_scan(
            f, g, sampler, n_points, seed=cfg.seed, workers=cfg.workers
        )
        name = f"bracket_{report.labels[0]}_{report.labels[1]}.txt"
        _emit(cfg.out_dir / name, formats.format_bracket_report(report))
        rows.append(
            {
                "labels": list(report.labels),
                "max_abs": report.max_abs,
                "verdict": report.verdict(),
            }
        )
        if report.max_abs >= overall:
            overall = report.max_abs
            argmax_pair = report
    verdicts = {row["verdict"] for row in rows}
    overall_verdict = (
        "violation"
        if "violation" in verdicts
        else ("vanish" if verdicts == {"vanish"} else "inconclusive")
    )
    _emit_report(
        cfg.out_dir,
        {
            "command": "bracket-check",
            "max_abs": overall,
            "argmax_pair": list(argmax_pair.labels),
            "argmax_state": [
                [a.real, a.imag] for a in argmax_pair.argmax_state.amplitudes
            ],
            "pairs": rows,
            "samples": n_points,
            "seed": cfg.seed,
            "verdict": overall_verdict,
        },
    )
    for row in rows:
        print(f"{{{row['labels'][0]}, {row['labels'][1]}}}: max {row['max_abs']:.3e} ({row['verdict']})")
    print(
        f"verdict: {overall_verdict} "
        f"(max {overall:.3e} at {{{argmax_pair.labels[0]}, {argmax_pair.labels[1]}}})"
    )
    if args.expect_vanish and overall_verdict != "vanish":
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_integrate(cfg: ExperimentConfig, args) -> int:
    params = cfg.trimer_params()
    run = cfg.run
    N = float(_require(run, "N", "E_RUN_N"))
    state = _reduced_state(_require(run, "initial", "E_RUN_INITIAL"), N)
    icfg = _integrator_config(run)
    traj = integrate(state, icfg, params, direction=int(run.get("direction", 1)))

    occupations = traj.states**2
    n_series = occupations[:, 0] + occupations[:, 1]
    m_series = occupations[:, 2] + occupations[:, 3]
    if "csv" in cfg.formats:
        _emit(cfg.out_dir / "trajectory.csv", formats.trajectory_to_csv(traj))
    _warn_unsupported(cfg.formats, {"csv"}, "integrate")
    _emit_report(
        cfg.out_dir,
        {
            "command": "integrate",
            "boundary_time": traj.boundary.time if traj.boundary else None,
            "energy_drift": traj.energy_drift,
            "number_drift": traj.number_drift,
            "n_drift": float(abs(n_series - n_series[0]).max()),
            "m_drift": float(abs(m_series - m_series[0]).max()),
            "method": traj.method,
            "samples": len(traj),
            "t_end": float(traj.times[-1]),
        },
    )
    print(
        f"integrated to t = {traj.times[-1]:g} ({len(traj)} samples), "
        f"energy drift {traj.energy_drift:.3e}"
    )
    return EXIT_OK


def cmd_poincare(cfg: ExperimentConfig, args) -> int:
    params = cfg.trimer_params()
    run = cfg.run
    E = float(_require(run, "E", "E_RUN_E"))
    N = float(_require(run, "N", "E_RUN_N"))
    spec = SectionSpec(
        coordinate=run.get("coordinate", "x2"),
        level=float(run.get("level", 0.0)),
        direction=run.get("direction", "+"),
        projection=tuple(run.get("projection", ("y1", "y2"))),
    )
    initials = _initial_states(cfg, params, E, N)
    icfg = _integrator_config(run, default_t=400.0)
    max_records = run.get("max_records")
    result = section(
        initials,
        spec,
        E,
        params,
        icfg,
        workers=cfg.workers,
        max_records=None if max_records is None else int(max_records),
    )

    classifications = []
    counts = {"curve-like": 0, "area-like": 0, "ambiguous": 0, "insufficient-data": 0}
    for tid in range(len(initials)):
        pts = result.projected_points(tid)
        if len(pts) >= _MIN_CLASSIFY_RECORDS:
            dim = correlation_dimension(pts)
            label = classify_section(dim)
        else:
            dim, label = None, "insufficient-data"
        counts[label] += 1
        classifications.append(
            {
                "trajectory_id": tid,
                "records": int(len(pts)),
                "dimension": dim,
                "label": label,
                "boundary_time": result.boundaries.get(tid),
            }
        )

    if "csv" in cfg.formats:
        _emit(cfg.out_dir / "section.csv", formats.section_to_csv(result))
    if "jsonl" in cfg.formats:
        _emit(cfg.out_dir / "section.jsonl", formats.section_to_jsonl(result))
    if "svg" in cfg.formats:
        from .plotting import save_svg, section_figure

        fig = section_figure(result, spec)
        (cfg.out_dir).mkdir(parents=True, exist_ok=True)
        save_svg(fig, cfg.out_dir / "section.svg")
        print(f"wrote {cfg.out_dir / 'section.svg'}")
    _emit_report(
        cfg.out_dir,
        {
            "command": "poincare",
            "E": E,
            "N": N,
            "counts": counts,
            "records": len(result),
            "section": {
                "coordinate": spec.coordinate,
                "level": spec.level,
                "direction": spec.direction,
                "projection": list(spec.projection),
            },
            "seed": cfg.seed,
            "trajectories": classifications,
        },
    )
    for row in classifications:
        dim = "-" if row["dimension"] is None else f"{row['dimension']:.3f}"
        print(f"trajectory {row['trajectory_id']}: {row['records']} records, dim {dim}, {row['label']}")
    return EXIT_OK


def cmd_lyapunov(cfg: ExperimentConfig, args) -> int:
    params = cfg.trimer_params()
    run = cfg.run
    N = float(_require(run, "N", "E_RUN_N"))
    if "initials" in run:
        states = [_reduced_state(v, N) for v in run["initials"]]
    else:
        E = float(_require(run, "E", "E_RUN_E"))
        states = _initial_states(cfg, params, E, N)
    t_total = float(run.get("t_total", 300.0))
    estimates = []
    for tid, state in enumerate(states):
        est = lyapunov_max(
            state,
            params,
            t_total=t_total,
            renorm_interval=float(run.get("renorm_interval", 1.0)),
            perturbation=float(run.get("perturbation", 1e-8)),
            discard_fraction=float(run.get("discard_fraction", 0.1)),
            seed=cfg.seed,
        )
        estimates.append(est)
        print(f"trajectory {tid}: lambda_max = {est.value:.6f}")

    lines = ["trajectory_id,lambda,t_total,renorm_interval,boundary_time"]
    for tid, est in enumerate(estimates):
        boundary = "" if est.boundary is None else repr(float(est.boundary.time))
        lines.append(
            f"{tid},{est.value!r},{est.t_total!r},{est.renorm_interval!r},{boundary}"
        )
    if "csv" in cfg.formats:
        _emit(cfg.out_dir / "lyapunov.csv", "\n".join(lines) + "\n")
    _warn_unsupported(cfg.formats, {"csv"}, "lyapunov")
    _emit_report(
        cfg.out_dir,
        {
            "command": "lyapunov",
            "estimates": [
                {
                    "trajectory_id": tid,
                    "lambda": est.value,
                    "boundary_time": None if est.boundary is None else est.boundary.time,
                }
                for tid, est in enumerate(estimates)
            ],
            "max_lambda": max(est.value for est in estimates),
            "seed": cfg.seed,
            "t_total": t_total,
        },
    )
    return EXIT_OK


def cmd_shell(cfg: ExperimentConfig, args) -> int:
    params = cfg.trimer_params()
    run = cfg.run
    E = float(_require(run, "E", "E_RUN_E"))
    N = float(_require(run, "N", "E_RUN_N"))
    default_amp = float(N) ** 0.5
    fixed = run.get("fixed_coordinate", "y1")
    free = [c for c in ("x1", "x2", "y1", "y2") if c != fixed]
    ranges = {
        name: tuple(run.get("ranges", {}).get(name, (-default_amp, default_amp)))
        for name in free
    }
    resolutions = {
        name: int(run.get("resolutions", {}).get(name, 40)) for name in free
    }
    spec = ShellSliceSpec(
        fixed_coordinate=fixed,
        fixed_value=float(run.get("fixed_value", 0.0)),
        ranges=ranges,
        resolutions=resolutions,
        energy=E,
        half_width=float(run.get("half_width", 0.05)),
        N=N,
    )
    cloud = shell_slice(spec, params)
    n_points = len(cloud.band_points)
    if n_points == 0:
        print("warning: shell band is empty on this grid", file=sys.stderr)
    if "csv" in cfg.formats:
        _emit(cfg.out_dir / "shell.csv", formats.shell_slice_to_csv(cloud))
    if "jsonl" in cfg.formats:
        _emit(cfg.out_dir / "shell.jsonl", formats.shell_slice_to_jsonl(cloud))
    if "svg" in cfg.formats:
        from .plotting import save_svg, shell_figure

        (cfg.out_dir).mkdir(parents=True, exist_ok=True)
        save_svg(shell_figure(cloud), cfg.out_dir / "shell.svg")
        print(f"wrote {cfg.out_dir / 'shell.svg'}")
    _emit_report(
        cfg.out_dir,
        {
            "command": "shell",
            "E": E,
            "N": N,
            "band_points": n_points,
            "crossing_points": int(len(cloud.crossing_points)),
            "fixed_coordinate": fixed,
            "fixed_value": spec.fixed_value,
            "half_width": spec.half_width,
        },
    )
    print(f"shell band: {n_points} grid points")
    return EXIT_OK


def _warn_unsupported(requested, supported, command):
    for fmt in requested:
        if fmt not in supported:
            print(f"warning: format {fmt!r} not supported by {command}", file=sys.stderr)


_COMMANDS = {
    "bracket-check": cmd_bracket_check,
    "integrate": cmd_integrate,
    "poincare": cmd_poincare,
    "lyapunov": cmd_lyapunov,
    "shell": cmd_shell,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="latbrackets",
        description="Integrability diagnostics and reduced dynamics for "
        "classical limits of quadratic lattice Hamiltonians.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("bracket-check", "scan Poisson brackets of H and the mode occupations"),
        ("integrate", "integrate one reduced trajectory"),
        ("poincare", "compute a surface of section and classify trajectories"),
        ("lyapunov", "estimate largest Lyapunov exponents"),
        ("shell", "sample an energy-shell slice on a grid"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to the JSON config")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--workers", type=int, default=None, help="override worker count")
        p.add_argument("--out-dir", default=None, help="override the output directory")
        p.add_argument(
            "--format",
            action="append",
            choices=("csv", "jsonl", "svg"),
            default=None,
            help="output format (repeatable); overrides the config",
        )
        if name == "bracket-check":
            p.add_argument(
                "--expect-vanish",
                action="store_true",
                help="exit 4 unless every scanned bracket vanishes",
            )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(
            args.config,
            seed=args.seed,
            workers=args.workers,
            out_dir=args.out_dir,
            formats=args.format,
        )
        return _COMMANDS[args.command](cfg, args)
    except ValidationError as exc:
        code = f" [{exc.code}]" if exc.code else ""
        print(f"error: {exc}{code}", file=sys.stderr)
        return EXIT_CONFIG
    except LatticeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
