"""End-to-end command tests: exit codes, emitted files, determinism.

Commands run in-process through ``main(argv)`` so coverage and speed stay
reasonable; two subprocess tests check the module entry point and the
installed console script.
"""

import json
import subprocess
import sys

import numpy as np
import pytest

from latbrackets.cli import main
from latbrackets.io import (
    parse_bracket_report,
    parse_section_csv,
    parse_section_jsonl,
    parse_trajectory_csv,
)

# eps with d3/d1 at the golden ratio: section records of the decoupled flow
# fill their circle as uniformly as possible, keeping the dimension estimate
# well below the curve/area threshold even for ~90 records.
GOLDEN_EPS = [1.0, 0.7, 0.2145898]

CHAOTIC = [-1.060171, 0.227034, 0.395809, -0.641481]
REGULAR = [-0.241284, 0.622602, 0.624149, 0.158187]


def ring_system(**patch):
    system = {
        "statistics": "fermionic",
        "saturation": "exp",
        "topology": "cyclic",
        "eps": [1.0, 1.0, 1.0],
        "J": 0.6,
    }
    system.update(patch)
    return system


def write_config(tmp_path, *, system=None, run=None, name="cfg.json", **top):
    payload = {
        "schema": 1,
        "seed": 11,
        "system": system if system is not None else ring_system(),
        "run": run or {},
        "output": {"out_dir": str(tmp_path / "out"), "formats": ["csv"]},
    }
    payload.update(top)
    path = tmp_path / name
    path.write_text(json.dumps(payload, indent=1))
    return path


def run_cli(*argv):
    return main(list(argv))


class TestExitCodes:
    def test_missing_config_file(self, tmp_path, capsys):
        rc = run_cli("integrate", "--config", str(tmp_path / "absent.json"))
        assert rc == 2
        assert "E_CONFIG_PATH" in capsys.readouterr().err

    def test_invalid_config(self, tmp_path, capsys):
        path = write_config(tmp_path, schema=42)
        assert run_cli("shell", "--config", str(path)) == 2
        assert "E_SCHEMA" in capsys.readouterr().err

    def test_off_shell_initial_is_a_validation_error(self, tmp_path, capsys):
        path = write_config(
            tmp_path,
            run={"E": 99.0, "N": 3.0, "initials": [CHAOTIC], "t_end": 10.0},
        )
        assert run_cli("poincare", "--config", str(path)) == 2
        assert "shell" in capsys.readouterr().err

    def test_unreachable_energy_is_a_runtime_error(self, tmp_path, capsys):
        path = write_config(
            tmp_path,
            run={
                "E": 99.0,
                "N": 3.0,
                "initials": [CHAOTIC],
                "project": True,
                "t_end": 10.0,
            },
        )
        assert run_cli("poincare", "--config", str(path)) == 3
        assert "error" in capsys.readouterr().err

    def test_impossible_scan_is_a_runtime_error(self, tmp_path, capsys):
        path = write_config(
            tmp_path, run={"E": 99.0, "N": 3.0, "count": 2, "t_total": 10.0}
        )
        assert run_cli("lyapunov", "--config", str(path)) == 3
        capsys.readouterr()


class TestBracketCheck:
    def test_bosonic_random_matrix_vanishes(self, tmp_path, rng):
        a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        h = (a + a.conj().T) / 2
        rows = [
            [x for v in row for x in (v.real, v.imag)] for row in h
        ]
        path = write_config(
            tmp_path,
            system={"statistics": "bosonic", "h": rows},
            run={"samples": 40},
        )
        rc = run_cli("bracket-check", "--config", str(path), "--expect-vanish")
        assert rc == 0
        report = json.loads((tmp_path / "out" / "report.json").read_text())
        assert report["verdict"] == "vanish"
        # 4 constants against H, the total number, and all distinct pairs
        assert len(report["pairs"]) == 4 + 1 + 6
        assert report["max_abs"] < 1e-9

    def test_two_site_fermionic_chain_vanishes(self, tmp_path):
        path = write_config(
            tmp_path,
            system={
                "statistics": "fermionic",
                "saturation": "sqrt",
                "topology": "linear",
                "eps": [1.0, 0.4],
                "J": 0.25,
            },
            run={"samples": 40},
        )
        rc = run_cli("bracket-check", "--config", str(path), "--expect-vanish")
        assert rc == 0
        report = json.loads((tmp_path / "out" / "report.json").read_text())
        assert report["verdict"] == "vanish"

    def test_ring_violation_sets_exit_code_only_when_asked(self, tmp_path, capsys):
        path = write_config(tmp_path, run={"samples": 60})
        assert run_cli("bracket-check", "--config", str(path)) == 0
        assert run_cli("bracket-check", "--config", str(path), "--expect-vanish") == 4
        out = capsys.readouterr().out
        assert "violation" in out

        report = json.loads((tmp_path / "out" / "report.json").read_text())
        assert report["verdict"] == "violation"
        by_pair = {tuple(row["labels"]): row for row in report["pairs"]}
        # the resonant mode commutes with H on the equilateral ring; the
        # non-degenerate ones do not
        assert by_pair[("H", "N3")]["verdict"] == "vanish"
        assert by_pair[("H", "Ntot")]["verdict"] == "vanish"
        assert by_pair[("H", "N1")]["verdict"] == "violation"

    def test_emitted_report_files_reparse(self, tmp_path):
        path = write_config(tmp_path, run={"samples": 30})
        run_cli("bracket-check", "--config", str(path))
        report = json.loads((tmp_path / "out" / "report.json").read_text())
        for row in report["pairs"]:
            f, g = row["labels"]
            text = (tmp_path / "out" / f"bracket_{f}_{g}.txt").read_text()
            parsed = parse_bracket_report(text)
            assert parsed.max_abs == row["max_abs"]
            assert parsed.verdict() == row["verdict"]

    def test_hamiltonian_only_pair_selection(self, tmp_path):
        path = write_config(
            tmp_path, run={"samples": 30, "pairs": "hamiltonian"}
        )
        run_cli("bracket-check", "--config", str(path))
        report = json.loads((tmp_path / "out" / "report.json").read_text())
        assert len(report["pairs"]) == 3 + 1
        assert all(row["labels"][0] == "H" for row in report["pairs"])


class TestIntegrate:
    def decoupled_config(self, tmp_path, **run_patch):
        run = {
            "N": 2.0,
            "initial": [0.5, 0.3, 0.4, -0.6],
            "t_end": 30.0,
        }
        run.update(run_patch)
        return write_config(
            tmp_path, system=ring_system(eps=GOLDEN_EPS, J=0.0), run=run
        )

    def test_decoupled_flow_keeps_pair_occupations(self, tmp_path):
        path = self.decoupled_config(tmp_path)
        assert run_cli("integrate", "--config", str(path)) == 0
        report = json.loads((tmp_path / "out" / "report.json").read_text())
        assert report["n_drift"] < 1e-9
        assert report["m_drift"] < 1e-9
        assert abs(report["energy_drift"]) < 1e-8
        columns = parse_trajectory_csv(
            (tmp_path / "out" / "trajectory.csv").read_text()
        )
        assert columns["t"][-1] == pytest.approx(30.0)
        assert np.all(columns["N"] == 2.0)

    def test_missing_occupation_is_rejected(self, tmp_path, capsys):
        path = write_config(tmp_path, run={"initial": CHAOTIC})
        assert run_cli("integrate", "--config", str(path)) == 2
        assert "E_RUN_N" in capsys.readouterr().err

    def test_unsupported_format_warns_and_skips(self, tmp_path, capsys):
        path = self.decoupled_config(tmp_path)
        raw = json.loads(path.read_text())
        raw["output"]["formats"] = ["svg"]
        path.write_text(json.dumps(raw))
        assert run_cli("integrate", "--config", str(path)) == 0
        assert "not supported" in capsys.readouterr().err
        assert not (tmp_path / "out" / "trajectory.csv").exists()
        assert (tmp_path / "out" / "report.json").exists()

    def test_repeat_runs_are_byte_identical(self, tmp_path):
        path_a = self.decoupled_config(tmp_path)
        run_cli("integrate", "--config", str(path_a))
        first = (tmp_path / "out" / "trajectory.csv").read_bytes()
        run_cli(
            "integrate",
            "--config",
            str(path_a),
            "--out-dir",
            str(tmp_path / "out2"),
        )
        second = (tmp_path / "out2" / "trajectory.csv").read_bytes()
        assert first == second


class TestPoincare:
    def golden_config(self, tmp_path, formats=("csv", "jsonl", "svg"), **run_patch):
        run = {
            "E": 1.3,
            "N": 2.0,
            "initials": [[0.5, 0.3, 0.4, -0.6], [0.5, -0.3, 0.4, 0.6]],
            "project": True,
            "t_end": 900.0,
        }
        run.update(run_patch)
        path = write_config(
            tmp_path, system=ring_system(eps=GOLDEN_EPS, J=0.0), run=run
        )
        raw = json.loads(path.read_text())
        raw["output"]["formats"] = list(formats)
        path.write_text(json.dumps(raw))
        return path

    def test_decoupled_sections_classify_as_curves(self, tmp_path):
        path = self.golden_config(tmp_path)
        assert run_cli("poincare", "--config", str(path)) == 0
        out = tmp_path / "out"
        report = json.loads((out / "report.json").read_text())
        assert report["counts"]["curve-like"] == 2
        assert report["counts"]["area-like"] == 0
        for row in report["trajectories"]:
            assert row["dimension"] < 1.3
            assert row["label"] == "curve-like"
            assert row["boundary_time"] is None

        rows = parse_section_csv((out / "section.csv").read_text())
        records = parse_section_jsonl((out / "section.jsonl").read_text())
        assert len(rows) == len(records) == report["records"]
        svg = (out / "section.svg").read_text()
        assert svg.lstrip().startswith("<?xml")

    def test_repeat_runs_are_byte_identical(self, tmp_path):
        path = self.golden_config(tmp_path, t_end=200.0)
        run_cli("poincare", "--config", str(path))
        run_cli(
            "poincare", "--config", str(path), "--out-dir", str(tmp_path / "out2")
        )
        for name in ("section.csv", "section.jsonl", "section.svg", "report.json"):
            a = (tmp_path / "out" / name).read_bytes()
            b = (tmp_path / "out2" / name).read_bytes()
            assert a == b, name

    def test_short_runs_report_insufficient_data(self, tmp_path):
        path = self.golden_config(tmp_path, formats=("csv",), t_end=60.0)
        assert run_cli("poincare", "--config", str(path)) == 0
        report = json.loads((tmp_path / "out" / "report.json").read_text())
        assert report["counts"]["insufficient-data"] == 2
        assert all(row["dimension"] is None for row in report["trajectories"])

    def test_record_cap_is_honored(self, tmp_path):
        path = self.golden_config(tmp_path, formats=("csv",), max_records=5)
        assert run_cli("poincare", "--config", str(path)) == 0
        report = json.loads((tmp_path / "out" / "report.json").read_text())
        assert [row["records"] for row in report["trajectories"]] == [5, 5]

    def test_worker_pool_matches_serial_output(self, tmp_path):
        path = self.golden_config(tmp_path, formats=("csv",), t_end=150.0)
        run_cli("poincare", "--config", str(path))
        run_cli(
            "poincare",
            "--config",
            str(path),
            "--workers",
            "2",
            "--out-dir",
            str(tmp_path / "out2"),
        )
        a = (tmp_path / "out" / "section.csv").read_bytes()
        b = (tmp_path / "out2" / "section.csv").read_bytes()
        assert a == b


class TestLyapunov:
    def test_chaotic_and_regular_estimates_split(self, tmp_path):
        path = write_config(
            tmp_path,
            run={"N": 3.0, "initials": [CHAOTIC, REGULAR], "t_total": 80.0},
        )
        assert run_cli("lyapunov", "--config", str(path)) == 0
        report = json.loads((tmp_path / "out" / "report.json").read_text())
        estimates = {row["trajectory_id"]: row["lambda"] for row in report["estimates"]}
        assert estimates[0] > 0.05
        assert estimates[1] < 0.05
        assert report["max_lambda"] == estimates[0]

        lines = (tmp_path / "out" / "lyapunov.csv").read_text().splitlines()
        assert lines[0] == "trajectory_id,lambda,t_total,renorm_interval,boundary_time"
        assert len(lines) == 3

    def test_repeat_runs_are_byte_identical(self, tmp_path):
        path = write_config(
            tmp_path, run={"N": 3.0, "initials": [CHAOTIC], "t_total": 40.0}
        )
        run_cli("lyapunov", "--config", str(path))
        run_cli(
            "lyapunov", "--config", str(path), "--out-dir", str(tmp_path / "out2")
        )
        a = (tmp_path / "out" / "lyapunov.csv").read_bytes()
        b = (tmp_path / "out2" / "lyapunov.csv").read_bytes()
        assert a == b


class TestShell:
    def test_band_on_the_ring_shell(self, tmp_path):
        path = write_config(
            tmp_path,
            run={
                "E": 3.14,
                "N": 3.0,
                "resolutions": {"x1": 16, "x2": 16, "y2": 16},
            },
        )
        raw = json.loads(path.read_text())
        raw["output"]["formats"] = ["csv", "jsonl", "svg"]
        path.write_text(json.dumps(raw))
        assert run_cli("shell", "--config", str(path)) == 0
        out = tmp_path / "out"
        report = json.loads((out / "report.json").read_text())
        assert report["band_points"] > 0
        csv_rows = (out / "shell.csv").read_text().splitlines()
        assert len(csv_rows) - 1 == report["band_points"]
        assert (out / "shell.jsonl").exists()
        assert (out / "shell.svg").exists()

    def test_empty_band_warns_but_succeeds(self, tmp_path, capsys):
        path = write_config(tmp_path, run={"E": -50.0, "N": 3.0})
        assert run_cli("shell", "--config", str(path)) == 0
        assert "empty" in capsys.readouterr().err
        report = json.loads((tmp_path / "out" / "report.json").read_text())
        assert report["band_points"] == 0
        assert (tmp_path / "out" / "shell.csv").read_text().count("\n") == 1


class TestOverrides:
    def test_seed_flag_beats_config(self, tmp_path):
        path = write_config(tmp_path, run={"samples": 20})
        run_cli("bracket-check", "--config", str(path), "--seed", "5")
        report = json.loads((tmp_path / "out" / "report.json").read_text())
        assert report["seed"] == 5

    def test_format_flag_limits_outputs(self, tmp_path):
        path = write_config(
            tmp_path,
            system=ring_system(eps=GOLDEN_EPS, J=0.0),
            run={
                "E": 1.3,
                "N": 2.0,
                "initials": [[0.5, 0.3, 0.4, -0.6]],
                "project": True,
                "t_end": 60.0,
            },
        )
        assert (
            run_cli("poincare", "--config", str(path), "--format", "jsonl") == 0
        )
        out = tmp_path / "out"
        assert (out / "section.jsonl").exists()
        assert not (out / "section.csv").exists()
        assert not (out / "section.svg").exists()


class TestEntryPoints:
    def test_module_invocation(self):
        proc = subprocess.run(
            [sys.executable, "-m", "latbrackets.cli", "--help"],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0
        assert "bracket-check" in proc.stdout

    def test_console_script(self):
        proc = subprocess.run(
            ["latbrackets", "shell", "--help"], capture_output=True, text=True
        )
        assert proc.returncode == 0
        assert "--config" in proc.stdout
