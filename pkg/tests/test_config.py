import json
from pathlib import Path

import pytest

from resilient_hull.config import (
    EXAMPLES,
    ConfigError,
    build_sim_config,
    config_hash,
    example_config,
    load_config,
    normalize,
    parse_config,
)

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"

MINIMAL = """{
  "problem": {
    "dimension": 2,
    "initial": {"kind": "uniform_box"}
  },
  "simulation": {
    "rounds": 3,
    "update": "PlainConsensus"
  }
}
"""


class TestValidation:
    def test_minimal_document(self):
        cfg = build_sim_config(parse_config(MINIMAL))
        assert cfg.rounds == 3
        assert cfg.schedule.num_agents == 11

    def test_unknown_key_points_at_its_line(self):
        text = MINIMAL.replace('"rounds": 3,', '"rounds": 3,\n    "colour": "red",')
        with pytest.raises(ConfigError) as err:
            parse_config(text)
        assert err.value.line == 8
        assert "colour" in str(err.value)

    def test_unknown_top_level_section(self):
        text = MINIMAL.rstrip()[:-1] + ',\n  "extra": {}\n}\n'
        with pytest.raises(ConfigError) as err:
            parse_config(text)
        assert err.value.line == 11

    def test_wrong_type_points_at_value(self):
        text = MINIMAL.replace('"rounds": 3', '"rounds": "three"')
        with pytest.raises(ConfigError) as err:
            parse_config(text)
        assert err.value.line == 7
        assert "simulation/rounds" in str(err.value)

    def test_nested_array_entry(self):
        text = MINIMAL.replace('"kind": "uniform_box"', '"kind": "uniform_box", "lo": [0,\n "x"]')
        with pytest.raises(ConfigError) as err:
            parse_config(text)
        assert err.value.line == 5

    def test_bad_enum(self):
        with pytest.raises(ConfigError, match="update"):
            parse_config(MINIMAL.replace("PlainConsensus", "Gossip"))

    def test_missing_section(self):
        with pytest.raises(ConfigError, match="simulation"):
            parse_config('{"problem": {"dimension": 1, "initial": {"kind": "uniform_box"}}}')

    def test_syntax_error_line(self):
        with pytest.raises(ConfigError) as err:
            parse_config(MINIMAL.replace('"rounds": 3,', '"rounds": 3,,'))
        assert err.value.line == 7

    def test_semantic_errors(self):
        doc = parse_config(MINIMAL)
        doc["simulation"]["update"] = "ProjectedLinear"
        with pytest.raises(ConfigError, match="constraints"):
            build_sim_config(doc)
        doc = parse_config(MINIMAL)
        doc["simulation"]["constraints"] = "linear_example"
        doc["simulation"]["topology"] = {"num_normal": 12}
        with pytest.raises(ConfigError, match="linear_example"):
            build_sim_config(doc)
        doc = parse_config(MINIMAL)
        doc["problem"]["initial"]["lo"] = [0.0, 0.0, 0.0]
        with pytest.raises(ConfigError, match="dimension"):
            build_sim_config(doc)
        doc = parse_config(MINIMAL)
        doc["simulation"]["topology"] = {"targets": [[[0, 1], [1]]]}
        with pytest.raises(ConfigError, match="topology"):
            build_sim_config(doc)

    def test_degree_requirement_surfaces(self):
        doc = parse_config(MINIMAL)
        doc["simulation"]["update"] = "ResilientConsensus"
        doc["resilience"] = {"kappa": 5}
        with pytest.raises(ConfigError, match="kappa"):
            build_sim_config(doc)


class TestHash:
    def test_formatting_and_order_do_not_matter(self):
        a = parse_config(MINIMAL)
        b = json.loads(json.dumps(a, sort_keys=True))
        assert config_hash(a) == config_hash(b)

    def test_explicit_defaults_do_not_matter(self):
        a = parse_config(MINIMAL)
        b = normalize(a)
        assert config_hash(a) == config_hash(b)

    def test_output_section_is_ignored(self):
        a = parse_config(MINIMAL)
        b = {**a, "output": {"trace": "elsewhere.csv"}}
        assert config_hash(a) == config_hash(b)

    @pytest.mark.parametrize(
        "path, value",
        [
            (("simulation", "seed"), 1),
            (("simulation", "rounds"), 4),
            (("simulation", "update"), "ResilientConsensus"),
            (("problem", "initial", "hi"), [3.0, 3.0]),
            (("resilience", "tol"), 1e-8),
        ],
    )
    def test_semantic_changes_change_hash(self, path, value):
        a = parse_config(MINIMAL)
        b = normalize(a)
        node = b
        for key in path[:-1]:
            node = node[key]
        node[path[-1]] = value
        assert config_hash(a) != config_hash(b)

    def test_generated_targets_match_explicit_ones(self):
        a = parse_config(MINIMAL)
        b = parse_config(MINIMAL)
        b["simulation"]["topology"] = {"targets": [[[0, 3], [1, 4]]]}
        assert config_hash(a) == config_hash(b)


@pytest.mark.parametrize("name", EXAMPLES)
def test_bundled_config_files(name):
    doc = load_config(CONFIG_DIR / f"{name}.json")
    expected = example_config(name)
    assert {k: v for k, v in doc.items() if k != "output"} == expected
    build_sim_config(doc)


def test_unknown_example():
    with pytest.raises(KeyError):
        example_config("nope")
