"""Experiment configuration: a versioned JSON file validated up front.

A config has four blocks — ``system`` (what to simulate), ``run``
(command-specific parameters), ``output`` (where and how to write) — plus a
``seed``, ``workers`` and the ``schema`` version marker.  Command-line flags
override file values.  All validation happens before any computation, each
failure with a distinct diagnostic code carried on the ValidationError.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ValidationError
from .hamiltonians import HoppingMatrix, Saturation, Statistics
from .io import SystemDescription, parse_system_file
from .transforms import TrimerParams

__all__ = ["SCHEMA_VERSION", "ExperimentConfig", "load_config", "parse_config"]

SCHEMA_VERSION = 1
_FORMATS = ("csv", "jsonl", "svg")


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated configuration, ready for a command handler."""

    system: SystemDescription
    topology: str
    shorthand: Optional[tuple[tuple[float, ...], complex]]  # (eps, J) when given
    run: dict
    out_dir: Path
    formats: tuple[str, ...]
    seed: int
    workers: int

    def trimer_params(self) -> TrimerParams:
        """The reduced-flow parameters; only defined for the fermionic
        three-site chain given in (eps, J) shorthand."""
        if self.shorthand is None or self.system.matrix.dim != 3:
            raise ValidationError(
                "this command needs the three-site (eps, J) shorthand system",
                code="E_RUN_TRIMER",
            )
        if self.system.statistics is not Statistics.FERMIONIC:
            raise ValidationError(
                "the reduced flow is defined for fermionic statistics",
                code="E_RUN_STATISTICS",
            )
        eps, J = self.shorthand
        return TrimerParams(
            eps=eps,
            coupling=J,
            saturation=self.system.saturation,
            topology=self.topology,
        )


def _fail(message, code):
    raise ValidationError(message, code=code)


def _as_complex(value, code):
    if isinstance(value, (int, float)):
        return complex(value)
    if (
        isinstance(value, (list, tuple))
        and len(value) == 2
        and all(isinstance(v, (int, float)) for v in value)
    ):
        return complex(value[0], value[1])
    _fail("coupling must be a number or an [re, im] pair", code)


def _parse_system(block, base_dir: Path):
    if not isinstance(block, dict):
        _fail("'system' must be an object", "E_SYSTEM")
    topology = block.get("topology", "cyclic")
    if topology not in ("linear", "cyclic"):
        _fail(f"unknown topology {topology!r}", "E_TOPOLOGY")
    statistics = block.get("statistics")
    if statistics not in ("bosonic", "fermionic"):
        _fail("statistics must be 'bosonic' or 'fermionic'", "E_STATISTICS")
    statistics = Statistics(statistics)
    saturation = None
    if "saturation" in block:
        name = block["saturation"]
        if name == "exp":
            saturation = Saturation.exponential()
        elif name == "sqrt":
            saturation = Saturation.square_root()
        else:
            _fail(f"unknown saturation {name!r}", "E_SATURATION")

    shorthand = None
    if "h" in block:
        if "eps" in block or "J" in block:
            _fail("give either 'h' or the (eps, J) shorthand, not both", "E_SYSTEM_H")
        rows = block["h"]
        try:
            flat = np.asarray(rows, dtype=float)
            entries = flat[:, 0::2] + 1j * flat[:, 1::2]
        except (ValueError, IndexError):
            _fail("'h' must be rows of [re, im, re, im, ...] numbers", "E_SYSTEM_SHAPE")
        matrix = HoppingMatrix(entries)
    elif "eps" in block:
        eps = block["eps"]
        if "J" not in block:
            _fail("the shorthand needs both 'eps' and 'J'", "E_SYSTEM_H")
        if not isinstance(eps, list) or not all(isinstance(v, (int, float)) for v in eps):
            _fail("'eps' must be a list of numbers", "E_SYSTEM_SHAPE")
        J = _as_complex(block["J"], "E_SYSTEM_SHAPE")
        if topology == "cyclic":
            matrix = HoppingMatrix.cyclic_chain(eps, J)
        else:
            matrix = HoppingMatrix.linear_chain(eps, J)
        shorthand = (tuple(float(v) for v in eps), J)
    elif "h_file" in block:
        path = base_dir / block["h_file"]
        if not path.is_file():
            _fail(f"system file not found: {path}", "E_SYSTEM_FILE")
        parsed = parse_system_file(path.read_text())
        matrix = parsed.matrix
        statistics = parsed.statistics
        saturation = parsed.saturation if parsed.saturation is not None else saturation
    else:
        _fail("'system' needs 'h', 'h_file' or the (eps, J) shorthand", "E_SYSTEM_H")

    if "L" in block and int(block["L"]) != matrix.dim:
        _fail(f"'L' = {block['L']} does not match the {matrix.dim}-site matrix", "E_SYSTEM_L")
    if statistics is Statistics.FERMIONIC and saturation is None:
        _fail("fermionic systems need a 'saturation' entry", "E_SYSTEM_SATURATION")
    system = SystemDescription(matrix=matrix, statistics=statistics, saturation=saturation)
    return system, topology, shorthand


def _validate_run(run, system: SystemDescription):
    if not isinstance(run, dict):
        _fail("'run' must be an object", "E_RUN")
    for key in ("rel_tol", "abs_tol", "max_step", "step", "t_end", "t_total", "half_width"):
        if key in run and not (isinstance(run[key], (int, float)) and run[key] > 0):
            _fail(f"run.{key} must be a positive number", "E_TOL")
    N = run.get("N")
    if N is not None:
        if not (isinstance(N, (int, float)) and N > 0):
            _fail("run.N must be a positive number", "E_DOMAIN_N")
        sat = system.saturation
        if sat is not None and sat.domain_max is not None:
            if N > sat.domain_max * system.matrix.dim:
                _fail(
                    f"total occupation N = {N} exceeds the saturation domain "
                    f"({system.matrix.dim} sites, bound {sat.domain_max:g})",
                    "E_DOMAIN_N",
                )


def parse_config(
    text: str,
    base_dir: Path = Path("."),
    seed: Optional[int] = None,
    workers: Optional[int] = None,
    out_dir: Optional[str] = None,
    formats: Optional[list[str]] = None,
) -> ExperimentConfig:
    """Parse and validate config JSON; keyword arguments override file values."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config is not valid JSON: {exc}", code="E_JSON") from exc
    if not isinstance(raw, dict):
        _fail("config must be a JSON object", "E_JSON")
    if raw.get("schema") != SCHEMA_VERSION:
        _fail(f"config schema must be {SCHEMA_VERSION}", "E_SCHEMA")
    if "system" not in raw:
        _fail("config needs a 'system' block", "E_SYSTEM")
    system, topology, shorthand = _parse_system(raw["system"], base_dir)
    run = raw.get("run", {})
    _validate_run(run, system)

    output = raw.get("output", {})
    if not isinstance(output, dict):
        _fail("'output' must be an object", "E_OUTPUT")
    chosen_dir = out_dir if out_dir is not None else output.get("out_dir", "runs")
    chosen_formats = formats if formats is not None else output.get("formats", ["csv"])
    if isinstance(chosen_formats, str):
        chosen_formats = [chosen_formats]
    bad = [f for f in chosen_formats if f not in _FORMATS]
    if bad or not chosen_formats:
        _fail(f"formats must be drawn from {_FORMATS}", "E_FORMAT")

    chosen_seed = seed if seed is not None else raw.get("seed", 0)
    if not isinstance(chosen_seed, int) or chosen_seed < 0:
        _fail("seed must be a non-negative integer", "E_SEED")
    chosen_workers = workers if workers is not None else raw.get("workers", 1)
    if not isinstance(chosen_workers, int) or chosen_workers < 1:
        _fail("workers must be a positive integer", "E_WORKERS")

    return ExperimentConfig(
        system=system,
        topology=topology,
        shorthand=shorthand,
        run=run,
        out_dir=Path(chosen_dir),
        formats=tuple(dict.fromkeys(chosen_formats)),
        seed=chosen_seed,
        workers=chosen_workers,
    )


def load_config(path, **overrides) -> ExperimentConfig:
    """Read a config file; see :func:`parse_config` for the overrides."""
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"config file not found: {p}", code="E_CONFIG_PATH")
    return parse_config(p.read_text(), base_dir=p.parent, **overrides)
