"""Analysis configuration files.

The format is INI (``configparser``) with ``=`` as the only key/value
delimiter, so column names may contain spaces, parentheses and colons.
``#`` and ``;`` start comments. Sections:

``[data]``
    ``path`` (CSV, relative to the config file), ``positive_label``,
    ``negative_label``, ``exclude`` (comma-separated column names).
``[schema]``
    One line per CSV column: ``<column name> = <role>`` where role is
    continuous, nominal, ordinal, flag or target. Declared levels follow a
    colon, e.g. ``keep side = nominal: left, right, both``; flags declare
    ``false, true`` labels the same way.
``[split]``
    ``train_fraction``, ``seed``, ``undersample`` (bool), ``undersample_seed``.
``[binning]``
    ``k_bins``.
``[logit]``
    ``tolerance``, ``max_iter``, ``threshold``, ``hosmer_lemeshow_groups``,
    ``expected_parameters`` (optional; a different design size warns).
``[mining]``
    The rule constraints, named after the usual model-setting phrases:
    ``maximum_number_of_rules``, ``minimum_condition_support``,
    ``minimum_confidence``, ``minimum_rule_support`` (proportions in 0..1),
    ``minimum_lift``, ``maximum_number_of_items_in_a_rule``,
    ``maximum_number_of_items_in_a_condition``,
    ``maximum_number_of_items_in_a_prediction``,
    ``use_only_true_value_for_flag_fields``, ``allow_rules_without_conditions``,
    ``evaluation_measure_sorting_the_rules``, and ``consequents``
    (``target`` or ``any``).
``[output]``
    ``dir``, ``format`` (text, json or csv), ``top_rules``.

Every key except ``[data] path`` and the schema lines has a default.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path

from .dataset import ColumnSchema, Role, validate_schema
from .errors import ConfigError, DataError
from .rules import MiningConfig

FORMATS = ("text", "json", "csv")


@dataclass(frozen=True)
class CliConfig:
    dataset_path: Path
    schema: tuple[ColumnSchema, ...]
    positive_label: str = "1"
    negative_label: str = "0"
    exclude: tuple[str, ...] = ()
    train_fraction: float = 0.679
    partition_seed: int = 7
    undersample: bool = False
    undersample_seed: int = 11
    k_bins: int = 5
    tolerance: float = 1e-5
    max_iter: int = 20
    threshold: float = 0.5
    hl_groups: int = 10
    expected_parameters: int | None = None
    mining: MiningConfig = field(default_factory=MiningConfig)
    output_dir: Path = Path("out")
    report_format: str = "text"
    top_rules: int = 5

    def __post_init__(self):
        names = {c.name for c in self.schema}
        missing = [c for c in self.exclude if c not in names]
        if missing:
            raise ConfigError(f"excluded columns not in schema: {missing}")
        if not 0 < self.train_fraction < 1:
            raise ConfigError(f"train_fraction must lie in (0, 1), got {self.train_fraction}")
        if not 0 < self.threshold < 1:
            raise ConfigError(f"threshold must lie in (0, 1), got {self.threshold}")
        if self.report_format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}, got {self.report_format!r}")
        if self.k_bins < 2 or self.hl_groups < 3 or self.max_iter < 1 or self.top_rules < 1:
            raise ConfigError("k_bins >= 2, hosmer_lemeshow_groups >= 3, max_iter >= 1 and top_rules >= 1 required")
        if self.tolerance <= 0:
            raise ConfigError("tolerance must be positive")

    def with_overrides(self, **changes) -> "CliConfig":
        return replace(self, **{k: v for k, v in changes.items() if v is not None})

    @property
    def seeds(self) -> dict[str, int]:
        return {"partition": self.partition_seed, "undersample": self.undersample_seed}


_KNOWN = {
    "data": {"path", "positive_label", "negative_label", "exclude"},
    "split": {"train_fraction", "seed", "undersample", "undersample_seed"},
    "binning": {"k_bins"},
    "logit": {"tolerance", "max_iter", "threshold", "hosmer_lemeshow_groups", "expected_parameters"},
    "mining": {
        "maximum_number_of_rules", "minimum_condition_support", "minimum_confidence",
        "minimum_rule_support", "minimum_lift", "maximum_number_of_items_in_a_rule",
        "maximum_number_of_items_in_a_condition", "maximum_number_of_items_in_a_prediction",
        "use_only_true_value_for_flag_fields", "allow_rules_without_conditions",
        "evaluation_measure_sorting_the_rules", "consequents",
    },
    "output": {"dir", "format", "top_rules"},
}


def _parse_schema_line(name: str, value: str) -> ColumnSchema:
    role_text, _, levels_text = value.partition(":")
    try:
        role = Role(role_text.strip().lower())
    except ValueError:
        raise ConfigError(f"schema column {name!r}: unknown role {role_text.strip()!r}") from None
    levels = None
    if levels_text.strip():
        levels = tuple(v.strip() for v in levels_text.split(","))
    try:
        return ColumnSchema(name, role, levels)
    except DataError as exc:
        raise ConfigError(str(exc)) from None


def parse_config(text: str, base_dir: str | Path = ".") -> CliConfig:
    parser = configparser.ConfigParser(delimiters=("=",), inline_comment_prefixes=("#", ";"),
                                       comment_prefixes=("#", ";"), interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None

    allowed = set(_KNOWN) | {"schema"}
    unknown_sections = [s for s in parser.sections() if s not in allowed]
    if unknown_sections:
        raise ConfigError(f"unknown config sections: {unknown_sections}")
    for section, keys in _KNOWN.items():
        if parser.has_section(section):
            extra = sorted(set(parser[section]) - keys)
            if extra:
                raise ConfigError(f"unknown keys in [{section}]: {extra}")
    if not parser.has_section("schema") or not parser["schema"]:
        raise ConfigError("config needs a non-empty [schema] section")
    if not parser.has_option("data", "path"):
        raise ConfigError("config needs [data] path")

    def get(section, key, conv, default):
        if not parser.has_option(section, key):
            return default
        raw = parser.get(section, key)
        try:
            if conv is bool:
                return parser.getboolean(section, key)
            return conv(raw)
        except ValueError:
            raise ConfigError(f"[{section}] {key}: invalid value {raw!r}") from None

    schema = tuple(_parse_schema_line(name, value) for name, value in parser["schema"].items())
    try:
        schema = validate_schema(schema)
    except DataError as exc:
        raise ConfigError(str(exc)) from None

    base_dir = Path(base_dir)
    data_path = Path(parser.get("data", "path"))
    if not data_path.is_absolute():
        data_path = base_dir / data_path
    exclude_raw = get("data", "exclude", str, "")
    exclude = tuple(c.strip() for c in exclude_raw.split(",") if c.strip())

    d = MiningConfig()
    consequents = get("mining", "consequents", str, "target").strip().lower()
    if consequents not in ("target", "any"):
        raise ConfigError(f"[mining] consequents must be 'target' or 'any', got {consequents!r}")
    try:
        mining = MiningConfig(
            max_rules=get("mining", "maximum_number_of_rules", int, d.max_rules),
            min_condition_support_pct=100.0 * get("mining", "minimum_condition_support", float,
                                                  d.min_condition_support_pct / 100.0),
            min_confidence_pct=100.0 * get("mining", "minimum_confidence", float, d.min_confidence_pct / 100.0),
            min_rule_support_pct=100.0 * get("mining", "minimum_rule_support", float,
                                             d.min_rule_support_pct / 100.0),
            min_lift=get("mining", "minimum_lift", float, d.min_lift),
            max_items_per_rule=get("mining", "maximum_number_of_items_in_a_rule", int, d.max_items_per_rule),
            max_items_per_condition=get("mining", "maximum_number_of_items_in_a_condition", int,
                                        d.max_items_per_condition),
            max_items_per_prediction=get("mining", "maximum_number_of_items_in_a_prediction", int,
                                         d.max_items_per_prediction),
            flags_true_only=get("mining", "use_only_true_value_for_flag_fields", bool, d.flags_true_only),
            allow_conditionless=get("mining", "allow_rules_without_conditions", bool, d.allow_conditionless),
            sort_measure=get("mining", "evaluation_measure_sorting_the_rules", str, d.sort_measure).strip().lower(),
            target_consequents_only=consequents == "target",
        )
    except DataError as exc:
        raise ConfigError(f"[mining] {exc}") from None
    for key in ("minimum_condition_support", "minimum_confidence", "minimum_rule_support"):
        if parser.has_option("mining", key) and not 0 <= parser.getfloat("mining", key) <= 1:
            raise ConfigError(f"[mining] {key} is a proportion in [0, 1]")

    expected = get("logit", "expected_parameters", str, "").strip()
    output_dir = Path(get("output", "dir", str, "out"))
    if not output_dir.is_absolute():
        output_dir = base_dir / output_dir
    try:
        return CliConfig(
            dataset_path=data_path,
            schema=schema,
            positive_label=get("data", "positive_label", str, "1").strip(),
            negative_label=get("data", "negative_label", str, "0").strip(),
            exclude=exclude,
            train_fraction=get("split", "train_fraction", float, 0.679),
            partition_seed=get("split", "seed", int, 7),
            undersample=get("split", "undersample", bool, False),
            undersample_seed=get("split", "undersample_seed", int, 11),
            k_bins=get("binning", "k_bins", int, 5),
            tolerance=get("logit", "tolerance", float, 1e-5),
            max_iter=get("logit", "max_iter", int, 20),
            threshold=get("logit", "threshold", float, 0.5),
            hl_groups=get("logit", "hosmer_lemeshow_groups", int, 10),
            expected_parameters=int(expected) if expected else None,
            mining=mining,
            output_dir=output_dir,
            report_format=get("output", "format", str, "text").strip(),
            top_rules=get("output", "top_rules", int, 5),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | Path) -> CliConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, base_dir=path.parent)
