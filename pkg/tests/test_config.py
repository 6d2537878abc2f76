from pathlib import Path

import pytest

from clinstat.config import load_config, parse_config
from clinstat.dataset import Role
from clinstat.errors import ConfigError
from clinstat.mesothelioma import DEFAULT_SCHEMA, EXCLUDED, default_config_text

MINIMAL = """
[data]
path = d.csv
positive_label = yes
negative_label = no

[schema]
age = continuous
side = nominal: left, right
label = target
"""


class TestParseConfig:
    def test_minimal_defaults(self):
        cfg = parse_config(MINIMAL, base_dir="/data")
        assert cfg.dataset_path == Path("/data/d.csv")
        assert cfg.output_dir == Path("/data/out")
        assert cfg.schema[1].declared_levels == ("left", "right")
        assert cfg.train_fraction == 0.679 and cfg.report_format == "text"
        assert cfg.mining.min_lift == 2.0

    def test_default_file_matches_builtin_schema(self):
        cfg = parse_config(default_config_text())
        assert cfg.schema == DEFAULT_SCHEMA
        assert cfg.exclude == EXCLUDED
        assert cfg.expected_parameters == 43
        m = cfg.mining
        assert (m.min_condition_support_pct, m.min_confidence_pct, m.min_rule_support_pct) == (5.0, 10.0, 5.0)
        assert (m.max_rules, m.max_items_per_rule, m.max_items_per_condition, m.max_items_per_prediction) == (10, 10, 6, 3)
        assert m.flags_true_only and not m.allow_conditionless and m.sort_measure == "confidence"

    def test_names_with_punctuation(self):
        text = MINIMAL.replace("age = continuous", "cell count (WBC): x = continuous")
        cfg = parse_config(text)
        assert cfg.schema[0].name == "cell count (WBC): x" and cfg.schema[0].role is Role.CONTINUOUS

    @pytest.mark.parametrize("patch,message", [
        ("[bogus]\nx = 1\n", "unknown config sections"),
        ("[split]\nfraction = 0.5\n", "unknown keys"),
        ("[split]\ntrain_fraction = 1.5\n", "train_fraction"),
        ("[split]\nseed = soon\n", "invalid value"),
        ("[mining]\nminimum_confidence = 40\n", "proportion"),
        ("[mining]\nconsequents = some\n", "consequents"),
        ("[output]\nformat = xml\n", "format"),
        ("[logit]\nthreshold = 0\n", "threshold"),
    ])
    def test_invalid_values(self, patch, message):
        with pytest.raises(ConfigError, match=message):
            parse_config(MINIMAL + patch)

    def test_bad_role(self):
        with pytest.raises(ConfigError, match="unknown role"):
            parse_config(MINIMAL.replace("age = continuous", "age = numeric"))

    def test_missing_path_and_schema(self):
        with pytest.raises(ConfigError, match="path"):
            parse_config(MINIMAL.replace("path = d.csv\n", ""))
        with pytest.raises(ConfigError, match="schema"):
            parse_config("[data]\npath = d.csv\n")

    def test_two_targets(self):
        with pytest.raises(ConfigError, match="target"):
            parse_config(MINIMAL.replace("age = continuous", "age = target"))

    def test_unknown_excluded_column(self):
        with pytest.raises(ConfigError, match="excluded"):
            parse_config(MINIMAL.replace("negative_label = no", "negative_label = no\nexclude = height"))

    def test_overrides_skip_none(self):
        cfg = parse_config(MINIMAL)
        new = cfg.with_overrides(partition_seed=3, report_format=None)
        assert new.partition_seed == 3 and new.report_format == "text"
        assert new.seeds == {"partition": 3, "undersample": 11}

    def test_load_from_file(self, tmp_path):
        (tmp_path / "c.ini").write_text(MINIMAL)
        assert load_config(tmp_path / "c.ini").dataset_path == tmp_path / "d.csv"
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(tmp_path / "missing.ini")
