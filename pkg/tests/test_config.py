"""Config parsing: shorthand expansion, overrides and diagnostic codes."""

import json

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from latbrackets.config import SCHEMA_VERSION, load_config, parse_config
from latbrackets.errors import ValidationError
from latbrackets.hamiltonians import HoppingMatrix, Saturation, Statistics
from latbrackets.io import SystemDescription, format_system_file


def make_config(**overrides):
    """A valid three-site fermionic ring config; overrides merge shallowly."""
    base = {
        "schema": SCHEMA_VERSION,
        "seed": 7,
        "workers": 2,
        "system": {
            "statistics": "fermionic",
            "saturation": "exp",
            "topology": "cyclic",
            "eps": [1.0, 1.0, 1.0],
            "J": 0.6,
        },
        "run": {"N": 3.0},
        "output": {"out_dir": "runs/demo", "formats": ["csv", "jsonl"]},
    }
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            base[key] = {**base[key], **value}
        else:
            base[key] = value
    return json.dumps(base)


def code_of(text, **kwargs):
    with pytest.raises(ValidationError) as err:
        parse_config(text, **kwargs)
    return err.value.code


class TestSystemBlock:
    def test_cyclic_shorthand_matches_constructor(self):
        cfg = parse_config(make_config())
        expected = HoppingMatrix.cyclic_chain([1.0, 1.0, 1.0], 0.6)
        assert_array_equal(cfg.system.matrix.entries, expected.entries)
        assert cfg.topology == "cyclic"
        assert cfg.shorthand == ((1.0, 1.0, 1.0), 0.6 + 0j)

    def test_linear_shorthand_matches_constructor(self):
        raw = json.loads(make_config())
        raw["system"] = {
            "statistics": "bosonic",
            "topology": "linear",
            "eps": [0.5, 1.5, 2.5, 3.5],
            "J": [0.2, -0.1],
        }
        cfg = parse_config(json.dumps(raw))
        expected = HoppingMatrix.linear_chain([0.5, 1.5, 2.5, 3.5], 0.2 - 0.1j)
        assert_array_equal(cfg.system.matrix.entries, expected.entries)
        assert cfg.system.statistics is Statistics.BOSONIC
        assert cfg.system.saturation is None

    def test_explicit_matrix_rows(self):
        rows = [[1.0, 0.0, 0.5, 0.25], [0.5, -0.25, 2.0, 0.0]]
        text = make_config(system={"statistics": "bosonic", "h": rows})
        # the shorthand keys from the base config must go away
        raw = json.loads(text)
        for key in ("eps", "J", "saturation"):
            raw["system"].pop(key, None)
        cfg = parse_config(json.dumps(raw))
        assert cfg.system.matrix.dim == 2
        assert cfg.system.matrix.entries[0, 1] == 0.5 + 0.25j
        assert cfg.shorthand is None

    def test_matrix_from_referenced_file(self, tmp_path, rng):
        a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        matrix = HoppingMatrix((a + a.conj().T) / 2)
        system = SystemDescription(matrix=matrix, statistics=Statistics.BOSONIC)
        (tmp_path / "sys.txt").write_text(format_system_file(system))
        raw = json.loads(make_config())
        raw["system"] = {"statistics": "bosonic", "h_file": "sys.txt"}
        cfg = parse_config(json.dumps(raw), base_dir=tmp_path)
        assert_array_equal(cfg.system.matrix.entries, matrix.entries)

    def test_system_file_keeps_its_own_statistics(self, tmp_path, rng):
        a = rng.normal(size=(2, 2))
        matrix = HoppingMatrix((a + a.T) / 2)
        system = SystemDescription(
            matrix=matrix,
            statistics=Statistics.FERMIONIC,
            saturation=Saturation.square_root(),
        )
        (tmp_path / "sys.txt").write_text(format_system_file(system))
        raw = json.loads(make_config())
        raw["system"] = {"statistics": "bosonic", "h_file": "sys.txt"}
        raw["run"] = {}  # the base N is too large for a two-site bounded domain
        cfg = parse_config(json.dumps(raw), base_dir=tmp_path)
        assert cfg.system.statistics is Statistics.FERMIONIC
        assert cfg.system.saturation.kind.value == "sqrt"

    def test_missing_file_is_rejected(self, tmp_path):
        raw = json.loads(make_config())
        raw["system"] = {"statistics": "bosonic", "h_file": "nope.txt"}
        assert code_of(json.dumps(raw), base_dir=tmp_path) == "E_SYSTEM_FILE"

    def test_h_and_shorthand_are_mutually_exclusive(self):
        text = make_config(system={"h": [[1.0, 0.0]]})
        assert code_of(text) == "E_SYSTEM_H"

    def test_eps_without_coupling_is_rejected(self):
        raw = json.loads(make_config())
        del raw["system"]["J"]
        assert code_of(json.dumps(raw)) == "E_SYSTEM_H"

    def test_system_without_any_matrix_source_is_rejected(self):
        raw = json.loads(make_config())
        raw["system"] = {"statistics": "bosonic"}
        assert code_of(json.dumps(raw)) == "E_SYSTEM_H"

    def test_non_hermitian_matrix_is_rejected(self):
        raw = json.loads(make_config())
        raw["system"] = {
            "statistics": "bosonic",
            "h": [[1.0, 0.0, 0.5, 0.0], [0.9, 0.0, 2.0, 0.0]],
        }
        assert code_of(json.dumps(raw)) == "E_HERMITIAN"

    def test_declared_size_must_match(self):
        text = make_config(system={"L": 4})
        assert code_of(text) == "E_SYSTEM_L"

    def test_fermionic_needs_saturation(self):
        raw = json.loads(make_config())
        del raw["system"]["saturation"]
        assert code_of(json.dumps(raw)) == "E_SYSTEM_SATURATION"

    @pytest.mark.parametrize(
        "patch,code",
        [
            ({"statistics": "anyonic"}, "E_STATISTICS"),
            ({"topology": "ladder"}, "E_TOPOLOGY"),
            ({"saturation": "tanh"}, "E_SATURATION"),
        ],
    )
    def test_enum_codes(self, patch, code):
        assert code_of(make_config(system=patch)) == code


class TestRunBlock:
    def test_square_root_occupation_above_domain_is_rejected(self):
        text = make_config(
            system={"saturation": "sqrt"}, run={"N": 3.5}
        )
        assert code_of(text) == "E_DOMAIN_N"

    def test_square_root_occupation_at_domain_is_accepted(self):
        text = make_config(system={"saturation": "sqrt"}, run={"N": 3.0})
        assert parse_config(text).run["N"] == 3.0

    def test_unbounded_saturation_allows_large_occupation(self):
        assert parse_config(make_config(run={"N": 50.0})).run["N"] == 50.0

    @pytest.mark.parametrize("key", ["rel_tol", "abs_tol", "t_end", "half_width"])
    def test_nonpositive_tolerances_are_rejected(self, key):
        assert code_of(make_config(run={key: -1e-9})) == "E_TOL"
        assert code_of(make_config(run={key: 0})) == "E_TOL"

    def test_negative_occupation_is_rejected(self):
        assert code_of(make_config(run={"N": -2.0})) == "E_DOMAIN_N"


class TestTopLevel:
    def test_rejects_non_json(self):
        assert code_of("schema: 1") == "E_JSON"

    def test_rejects_non_object(self):
        assert code_of("[1, 2]") == "E_JSON"

    def test_rejects_wrong_schema(self):
        assert code_of(make_config(schema=99)) == "E_SCHEMA"
        raw = json.loads(make_config())
        del raw["schema"]
        assert code_of(json.dumps(raw)) == "E_SCHEMA"

    def test_rejects_missing_system(self):
        raw = json.loads(make_config())
        del raw["system"]
        assert code_of(json.dumps(raw)) == "E_SYSTEM"

    @pytest.mark.parametrize(
        "patch,code",
        [
            ({"seed": -1}, "E_SEED"),
            ({"seed": 1.5}, "E_SEED"),
            ({"workers": 0}, "E_WORKERS"),
        ],
    )
    def test_seed_and_worker_codes(self, patch, code):
        assert code_of(make_config(**patch)) == code

    def test_rejects_unknown_format(self):
        assert code_of(make_config(output={"formats": ["csv", "pdf"]})) == "E_FORMAT"
        assert code_of(make_config(output={"formats": []})) == "E_FORMAT"

    def test_formats_are_deduplicated_in_order(self):
        cfg = parse_config(make_config(output={"formats": ["svg", "csv", "svg"]}))
        assert cfg.formats == ("svg", "csv")

    def test_defaults(self):
        raw = json.loads(make_config())
        del raw["seed"], raw["workers"], raw["output"]
        cfg = parse_config(json.dumps(raw))
        assert (cfg.seed, cfg.workers) == (0, 1)
        assert str(cfg.out_dir) == "runs"
        assert cfg.formats == ("csv",)

    def test_keyword_overrides_beat_file_values(self):
        cfg = parse_config(
            make_config(),
            seed=99,
            workers=5,
            out_dir="elsewhere",
            formats=["svg"],
        )
        assert cfg.seed == 99
        assert cfg.workers == 5
        assert str(cfg.out_dir) == "elsewhere"
        assert cfg.formats == ("svg",)

    def test_load_config_reads_relative_to_file(self, tmp_path, rng):
        a = rng.normal(size=(2, 2))
        matrix = HoppingMatrix((a + a.T) / 2)
        (tmp_path / "sys.txt").write_text(
            format_system_file(
                SystemDescription(matrix=matrix, statistics=Statistics.BOSONIC)
            )
        )
        raw = json.loads(make_config())
        raw["system"] = {"statistics": "bosonic", "h_file": "sys.txt"}
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(raw))
        cfg = load_config(cfg_path)
        assert_array_equal(cfg.system.matrix.entries, matrix.entries)

    def test_load_config_missing_path(self, tmp_path):
        with pytest.raises(ValidationError) as err:
            load_config(tmp_path / "absent.json")
        assert err.value.code == "E_CONFIG_PATH"


class TestTrimerParams:
    def test_shorthand_ring_produces_parameters(self):
        params = parse_config(make_config()).trimer_params()
        assert params.eps == (1.0, 1.0, 1.0)
        assert params.coupling == 0.6 + 0j
        assert params.topology == "cyclic"
        assert params.saturation.kind.value == "exp"

    def test_bosonic_system_has_no_reduced_flow(self):
        text = make_config(system={"statistics": "bosonic", "saturation": "exp"})
        with pytest.raises(ValidationError) as err:
            parse_config(text).trimer_params()
        assert err.value.code == "E_RUN_STATISTICS"

    def test_explicit_matrix_has_no_reduced_flow(self):
        raw = json.loads(make_config())
        raw["system"] = {
            "statistics": "fermionic",
            "saturation": "exp",
            "h": [
                [1.0, 0.0, 0.6, 0.0, 0.6, 0.0],
                [0.6, 0.0, 1.0, 0.0, 0.6, 0.0],
                [0.6, 0.0, 0.6, 0.0, 1.0, 0.0],
            ],
        }
        with pytest.raises(ValidationError) as err:
            parse_config(json.dumps(raw)).trimer_params()
        assert err.value.code == "E_RUN_TRIMER"

    def test_four_site_shorthand_has_no_reduced_flow(self):
        text = make_config(
            system={"eps": [1.0, 1.0, 1.0, 1.0]}
        )
        with pytest.raises(ValidationError) as err:
            parse_config(text).trimer_params()
        assert err.value.code == "E_RUN_TRIMER"
