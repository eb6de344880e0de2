"""Configuration parsing, validation, canonical output, and the published schema."""

import json
from pathlib import Path

import jsonschema
import pytest

from pnpflow.config import (
    GRID_KEYS,
    INITIAL_KEYS,
    PRESET_NAMES,
    SCHEME_KEYS,
    STUDY_KEYS,
    TOP_LEVEL_KEYS,
    VARIANT_KEYS_H1,
    VARIANT_KEYS_L2,
    ConfigError,
    apply_overrides,
    config_to_document,
    parse_config,
    serialize,
)
from pnpflow.projection import H1Projection, L2Projection

SCHEMA_PATH = Path(__file__).resolve().parent.parent / "schema" / "config.schema.json"


def parse_doc(doc):
    return parse_config(json.dumps(doc))


def violations_of(doc):
    with pytest.raises(ConfigError) as err:
        parse_doc(doc)
    return err.value.violations


CUSTOM_FULL = {
    "preset": "custom",
    "grid": {"lower": [0.0, 0.0], "upper": [1.0, 1.0], "n": [8, 8], "bc": "periodic"},
    "scheme": {"tau": 0.1, "t_final": 1.0},
    "initial": {"p_constant": 1.0, "n_constant": 2.0},
}


def test_minimal_preset_documents_parse():
    cfg = parse_doc({"preset": "example1_cnfdp"})
    assert cfg.grid.lower == (0.0, 0.0)
    assert cfg.grid.upper == (1.0, 1.0)
    assert cfg.grid.n == (128, 128)
    assert cfg.grid.bc == "periodic"
    assert cfg.tau == 5.0 / 300.0
    assert cfg.t_final == 5.0
    assert isinstance(cfg.variant, L2Projection)
    assert cfg.variant.root_method == "newton"
    assert cfg.overrides == ()
    assert cfg.output_dir == "out"
    assert cfg.snapshot_times == ()

    cfg2 = parse_doc({"preset": "example1_cnfdp2"})
    assert isinstance(cfg2.variant, H1Projection)
    assert cfg2.variant.max_newton == 30
    assert cfg2.grid.n == (128, 128)

    cfg3 = parse_doc({"preset": "example2_neumann"})
    assert cfg3.grid.bc == "neumann"
    assert cfg3.grid.lower == (-2.0, -2.0)
    assert cfg3.tau == 4.0 / 200.0
    assert cfg3.t_final == 1.0
    assert cfg3.snapshot_times == (0.0, 0.04, 0.2, 1.0)

    cfg4 = parse_doc({"preset": "example3_fixed_charge_3d"})
    assert cfg4.grid.n == (64, 64, 64)
    assert cfg4.grid.bc == "periodic"
    assert cfg4.tau == 2.0 / 100.0
    assert cfg4.t_final == 2.0


def test_custom_preset_full_document():
    cfg = parse_doc(CUSTOM_FULL)
    assert cfg.initial_p_constant == 1.0
    assert cfg.initial_n_constant == 2.0
    assert cfg.grid.n == (8, 8)
    assert cfg.study is None


def test_custom_one_dimensional_grid():
    doc = dict(CUSTOM_FULL)
    doc["grid"] = {"lower": [0.0], "upper": [1.0], "n": [16], "bc": "periodic"}
    cfg = parse_doc(doc)
    assert cfg.grid.n == (16,)


def test_custom_preset_missing_sections():
    bag = violations_of({"preset": "custom"})
    assert "grid: required for the custom preset" in bag
    assert "initial: required for the custom preset" in bag
    assert "scheme.tau: required value is missing" in bag
    assert "scheme.t_final: required value is missing" in bag


def test_missing_and_unknown_preset():
    bag = violations_of({})
    assert bag == ["preset: required value is missing"]
    bag = violations_of({"preset": "example9"})
    assert len(bag) == 1
    assert bag[0].startswith("preset: unknown preset 'example9'")
    # the message lists the choices
    assert "example3_fixed_charge_3d" in bag[0]


def test_invalid_json_and_non_object():
    with pytest.raises(ConfigError) as err:
        parse_config("{not json")
    assert err.value.violations[0].startswith("invalid JSON:")
    with pytest.raises(ConfigError) as err:
        parse_config("[1, 2]")
    assert err.value.violations == ["top level: expected a JSON object"]


def test_all_violations_collected_and_sorted():
    # one bad document, every problem reported at once, messages sorted
    bag = violations_of({
        "preset": "example1_cnfdp",
        "extra": 1,
        "grid": {"bc": "mirror"},
        "scheme": {"tau": -1.0},
        "snapshot_times": [-1.0],
    })
    assert bag == sorted(bag)
    assert "extra: unknown key" in bag
    assert "grid.bc: expected 'periodic' or 'neumann', got 'mirror'" in bag
    assert "scheme.tau: must be positive, got -1.0" in bag
    assert "snapshot_times: bad time -1.0" in bag


def test_unknown_section_keys():
    bag = violations_of({
        "preset": "example1_cnfdp",
        "grid": {"ghost": 1},
        "scheme": {"theta": 0.5, "variant": {"kind": "l2", "tol": 1e-3}},
    })
    assert "grid.ghost: unknown key" in bag
    assert "scheme.theta: unknown key" in bag
    assert "scheme.variant.tol: unknown key" in bag


def test_grid_validation():
    bag = violations_of({
        "preset": "custom",
        "grid": {"lower": [0.0, 0.0], "upper": [1.0, 1.0], "n": [8, 8, 8],
                 "bc": "periodic"},
        "scheme": {"tau": 0.1, "t_final": 1.0},
        "initial": {"p_constant": 1.0, "n_constant": 1.0},
    })
    assert "grid: lower/upper/n lengths differ (2, 2, 3)" in bag

    doc = dict(CUSTOM_FULL)
    doc["grid"] = {"lower": [0.0, 2.0], "upper": [1.0, 1.0], "n": [8, 8],
                   "bc": "periodic"}
    assert any(v.startswith("grid: upper") for v in violations_of(doc))

    doc["grid"] = {"lower": [0.0, 0.0], "upper": [1.0, 1.0], "n": [8, 1],
                   "bc": "periodic"}
    assert "grid.n: bad entry 1" in violations_of(doc)

    doc["grid"] = {"lower": [0.0, 0.0], "upper": [1.0, 1.0], "n": [8, 8.5],
                   "bc": "periodic"}
    assert "grid.n: bad entry 8.5" in violations_of(doc)

    doc["grid"] = {"lower": [0.0] * 4, "upper": [1.0] * 4, "n": [8] * 4,
                   "bc": "periodic"}
    assert any("expected a list of 1 to 3 values" in v for v in violations_of(doc))


def test_neumann_requires_two_dimensions():
    for dim in (1, 3):
        doc = dict(CUSTOM_FULL)
        doc["grid"] = {"lower": [0.0] * dim, "upper": [1.0] * dim,
                       "n": [8] * dim, "bc": "neumann"}
        assert "grid.bc: neumann boundaries require a 2D grid" in violations_of(doc)


def test_scheme_validation():
    bag = violations_of({"preset": "example1_cnfdp", "scheme": {"tau": True}})
    assert "scheme.tau: expected a number, got True" in bag
    bag = violations_of({"preset": "example1_cnfdp", "scheme": {"tau": 0}})
    assert "scheme.tau: must be positive, got 0" in bag
    bag = violations_of({"preset": "example1_cnfdp",
                         "scheme": {"cfl_ratio_warn": -2.0}})
    assert "scheme.cfl_ratio_warn: must be positive, got -2.0" in bag


def test_t_final_must_be_integer_multiple_of_tau():
    bag = violations_of({"preset": "example1_cnfdp", "scheme": {"tau": 0.3}})
    assert ("scheme.t_final: 5.0 is not an integer multiple of scheme.tau 0.3"
            in bag)


def test_variant_validation():
    bag = violations_of({"preset": "example1_cnfdp",
                         "scheme": {"variant": {"kind": "l1"}}})
    assert "scheme.variant.kind: expected 'l2' or 'h1', got 'l1'" in bag

    bag = violations_of({
        "preset": "example1_cnfdp",
        "scheme": {"variant": {"kind": "l2", "root_method": "bisect"}},
    })
    assert ("scheme.variant.root_method: expected 'newton' or 'secant', "
            "got 'bisect'" in bag)

    bag = violations_of({
        "preset": "example1_cnfdp",
        "scheme": {"variant": {"kind": "l2", "max_iter": 0}},
    })
    assert "scheme.variant.max_iter: must be at least 1, got 0" in bag

    bag = violations_of({
        "preset": "example1_cnfdp2",
        "scheme": {"variant": {"kind": "h1", "newton_tol": 0}},
    })
    assert "scheme.variant.newton_tol: must be positive, got 0" in bag


def test_variant_kind_switch_reports_stale_keys():
    # changing the kind against a preset leaves the other kind's defaults in
    # the merged document; they are reported instead of silently dropped
    bag = violations_of({"preset": "example1_cnfdp",
                         "scheme": {"variant": {"kind": "h1"}}})
    assert "scheme.variant.max_iter: unknown key" in bag
    assert "scheme.variant.root_method: unknown key" in bag


def test_variant_partial_override_merges():
    cfg = parse_doc({"preset": "example1_cnfdp2",
                     "scheme": {"variant": {"kind": "h1", "max_newton": 50}}})
    assert cfg.variant.max_newton == 50
    assert cfg.variant.newton_tol == 1e-9
    cfg = parse_doc({"preset": "example1_cnfdp",
                     "scheme": {"variant": {"kind": "l2",
                                            "root_method": "secant"}}})
    assert cfg.variant.root_method == "secant"
    assert cfg.variant.max_iter == 100


def test_initial_rules():
    bag = violations_of({"preset": "example1_cnfdp",
                         "initial": {"p_constant": 1.0, "n_constant": 1.0}})
    assert "initial: preset 'example1_cnfdp' fixes its own initial data" in bag

    doc = dict(CUSTOM_FULL)
    doc["initial"] = {"p_constant": 1.0}
    assert "initial.n_constant: required value is missing" in violations_of(doc)

    doc["initial"] = {"p_constant": -1.0, "n_constant": 1.0}
    assert "initial.p_constant: must be positive, got -1.0" in violations_of(doc)


def test_study_rules():
    cfg = parse_doc({
        "preset": "example1_cnfdp",
        "study": {"refine": "temporal", "levels": [0.5, 0.25, 0.125]},
    })
    assert cfg.study.refine == "temporal"
    assert cfg.study.levels == (0.5, 0.25, 0.125)

    cfg = parse_doc({
        "preset": "example1_cnfdp2",
        "study": {"refine": "spatial", "levels": [16, 32]},
    })
    assert cfg.study.levels == (16, 32)

    bag = violations_of({"preset": "example2_neumann",
                         "study": {"refine": "temporal", "levels": [0.5]}})
    assert ("study: preset 'example2_neumann' has no exact solution to "
            "measure against" in bag)

    bag = violations_of({"preset": "example1_cnfdp",
                         "study": {"refine": "both", "levels": [0.5]}})
    assert "study.refine: expected 'temporal' or 'spatial', got 'both'" in bag

    # temporal levels must step evenly into the horizon
    bag = violations_of({"preset": "example1_cnfdp",
                         "study": {"refine": "temporal", "levels": [0.4]}})
    assert ("study.levels: t_final 5.0 is not an integer multiple of level "
            "tau 0.4" in bag)

    bag = violations_of({"preset": "example1_cnfdp",
                         "study": {"refine": "spatial", "levels": [16, 32.5]}})
    assert "study.levels: bad node count 32.5" in bag

    bag = violations_of({"preset": "example1_cnfdp",
                         "study": {"refine": "spatial", "levels": [1]}})
    assert "study.levels: bad node count 1" in bag

    bag = violations_of({"preset": "example1_cnfdp",
                         "study": {"refine": "temporal", "levels": []}})
    assert "study.levels: expected a nonempty list, got []" in bag


def test_snapshot_rules():
    cfg = parse_doc({"preset": "example1_cnfdp",
                     "snapshot_times": [5.0, 0.0, 1.0]})
    assert cfg.snapshot_times == (0.0, 1.0, 5.0)

    bag = violations_of({"preset": "example1_cnfdp", "snapshot_times": [9.0]})
    assert "snapshot_times: time 9.0 is beyond t_final 5.0" in bag

    bag = violations_of({"preset": "example1_cnfdp", "snapshot_times": 1.0})
    assert "snapshot_times: expected a list, got 1.0" in bag


def test_output_dir_rules():
    bag = violations_of({"preset": "example1_cnfdp", "output_dir": ""})
    assert "output_dir: expected a nonempty string, got ''" in bag
    cfg = parse_doc({"preset": "example1_cnfdp", "output_dir": "results/a"})
    assert cfg.output_dir == "results/a"


def test_serialize_idempotent_and_byte_stable():
    docs = [
        {"preset": "example1_cnfdp"},
        {"preset": "example2_neumann"},
        {"preset": "example3_fixed_charge_3d"},
        CUSTOM_FULL,
        {"preset": "example1_cnfdp2",
         "study": {"refine": "temporal", "levels": [0.5, 0.25]}},
    ]
    for doc in docs:
        text1 = serialize(parse_doc(doc))
        text2 = serialize(parse_config(text1))
        assert text2 == text1
        assert text1.endswith("\n")
        # canonical form is sorted, indented JSON with every field explicit
        body = json.loads(text1)
        assert json.dumps(body, sort_keys=True, indent=2) + "\n" == text1
        for key in ("preset", "grid", "scheme", "output_dir", "snapshot_times"):
            assert key in body
        assert set(body["grid"]) == {"lower", "upper", "n", "bc"}
        assert "variant" in body["scheme"]


def test_serialized_document_reparses_to_same_config():
    cfg = parse_doc(CUSTOM_FULL)
    again = parse_config(serialize(cfg))
    assert config_to_document(again) == config_to_document(cfg)


def test_overrides_recorded_as_dotted_assignments():
    cfg = parse_doc({"preset": "example1_cnfdp",
                     "scheme": {"tau": 0.05},
                     "grid": {"n": [64, 64]}})
    assert cfg.overrides == ("grid.n=[64, 64]", "scheme.tau=0.05")
    # writing the default back is not an override
    cfg = parse_doc({"preset": "example1_cnfdp", "scheme": {"t_final": 5.0}})
    assert cfg.overrides == ()


def test_apply_overrides():
    doc = {"preset": "custom"}
    out = apply_overrides(doc, [
        "grid.lower=[0, 0]",
        "grid.upper=[1, 1]",
        "grid.n=[8, 8]",
        "grid.bc=periodic",
        "scheme.tau=0.1",
        "scheme.t_final=1",
        "initial.p_constant=1.0",
        "initial.n_constant=1.0",
        "output_dir=results",
    ])
    assert out["grid"]["bc"] == "periodic"  # unquoted strings pass through
    assert out["grid"]["n"] == [8, 8]
    assert out["scheme"]["tau"] == 0.1
    assert out["output_dir"] == "results"
    assert doc == {"preset": "custom"}  # input document untouched
    cfg = parse_doc(out)
    assert cfg.grid.n == (8, 8)

    with pytest.raises(ConfigError) as err:
        apply_overrides({}, ["tau0.1"])
    assert err.value.violations == ["override 'tau0.1': expected key=value"]


def schema():
    return json.loads(SCHEMA_PATH.read_text())


def test_schema_accepts_what_the_parser_accepts():
    validator = jsonschema.Draft202012Validator(schema())
    docs = [
        {"preset": "example1_cnfdp"},
        {"preset": "example1_cnfdp2"},
        {"preset": "example2_neumann"},
        {"preset": "example3_fixed_charge_3d"},
        CUSTOM_FULL,
        {"preset": "example1_cnfdp", "scheme": {"tau": 0.05},
         "grid": {"n": [64, 64]}},
        {"preset": "example1_cnfdp2",
         "study": {"refine": "spatial", "levels": [16, 32]}},
        {"preset": "example2_neumann", "snapshot_times": [0.0, 0.5],
         "output_dir": "artifacts"},
        {"preset": "example3_fixed_charge_3d", "grid": {"n": [32, 32, 32]},
         "scheme": {"tau": 0.02, "t_final": 1.0}, "snapshot_times": []},
    ]
    for doc in docs:
        parse_doc(doc)
        validator.validate(doc)


def test_schema_rejects_what_the_parser_rejects():
    validator = jsonschema.Draft202012Validator(schema())
    bad_docs = [
        {"preset": "example9"},
        {"preset": "example1_cnfdp", "extra": 1},
        {"preset": "example1_cnfdp", "grid": {"bc": "mirror"}},
        {"preset": "example1_cnfdp", "grid": {"n": [8, 1]}},
        {"preset": "example1_cnfdp", "grid": {"n": [8] * 4}},
        {"preset": "example1_cnfdp", "scheme": {"tau": 0}},
        {"preset": "example1_cnfdp", "scheme": {"variant": {"kind": "l1"}}},
        {"preset": "example1_cnfdp",
         "scheme": {"variant": {"kind": "l2", "newton_tol": 1e-9}}},
        {"preset": "example1_cnfdp",
         "initial": {"p_constant": 1.0, "n_constant": 1.0}},
        {"preset": "example2_neumann",
         "study": {"refine": "temporal", "levels": [0.5]}},
        {"preset": "example1_cnfdp",
         "study": {"refine": "spatial", "levels": [16.5]}},
        {"preset": "example1_cnfdp", "snapshot_times": [-1.0]},
        {"preset": "example1_cnfdp", "output_dir": ""},
        {"preset": "custom"},
        dict(CUSTOM_FULL, grid={"lower": [0.0], "upper": [1.0], "n": [8],
                                "bc": "neumann"}),
    ]
    for doc in bad_docs:
        with pytest.raises(ConfigError):
            parse_doc(doc)
        assert not validator.is_valid(doc), doc


def test_schema_key_sets_match_parser():
    body = schema()
    assert set(body["properties"]) == TOP_LEVEL_KEYS
    assert set(body["properties"]["preset"]["enum"]) == set(PRESET_NAMES)
    defs = body["$defs"]
    assert set(defs["grid"]["properties"]) == GRID_KEYS
    assert set(defs["scheme"]["properties"]) == SCHEME_KEYS
    assert set(defs["initial"]["properties"]) == INITIAL_KEYS
    assert set(defs["study"]["properties"]) == STUDY_KEYS
    l2_branch, h1_branch = defs["variant"]["oneOf"]
    assert set(l2_branch["properties"]) == VARIANT_KEYS_L2
    assert set(h1_branch["properties"]) == VARIANT_KEYS_H1
