"""Association rules over itemized records.

Records become transactions of items (true flags, category levels, numeric
bins and the target class). Frequent itemsets are found level-wise with
Apriori, using Python integers as transaction bitsets, and every frequent
itemset is split into condition => prediction rules that are then filtered
by the configured thresholds and item caps.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Iterable, Sequence

import numpy as np

from .dataset import BinningSpec, Dataset, Role
from .errors import DataError

SORT_MEASURES = ("confidence", "lift", "rule_support", "condition_support", "deployability")


@dataclass(frozen=True)
class Item:
    id: int
    label: str
    column: str
    kind: str  # "flag-true", "flag-false", "category-level", "numeric-bin" or "target"


@dataclass(frozen=True)
class ItemCatalog:
    items: tuple[Item, ...]
    transactions: tuple[frozenset[int], ...]
    n_records: int
    rows: tuple[int, ...] = ()
    tidsets: tuple[int, ...] = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        if not self.tidsets:
            bits = [0] * len(self.items)
            for t, items in enumerate(self.transactions):
                for i in items:
                    bits[i] |= 1 << t
            object.__setattr__(self, "tidsets", tuple(bits))

    @classmethod
    def from_transactions(cls, transactions: Iterable[Iterable[str]]) -> "ItemCatalog":
        """Catalog from plain label sets; items are numbered in sorted label order."""
        transactions = [set(t) for t in transactions]
        labels = sorted(set().union(*transactions)) if transactions else []
        ids = {label: i for i, label in enumerate(labels)}
        items = tuple(Item(i, label, label, "category-level") for i, label in enumerate(labels))
        return cls(items, tuple(frozenset(ids[x] for x in t) for t in transactions), len(transactions))

    def item_id(self, label: str) -> int:
        for item in self.items:
            if item.label == label:
                return item.id
        raise KeyError(label)

    def cover(self, item_ids: Iterable[int]) -> int:
        bits = (1 << self.n_records) - 1
        for i in item_ids:
            bits &= self.tidsets[i]
        return bits

    def support_count(self, item_ids: Iterable[int]) -> int:
        return self.cover(item_ids).bit_count()

    @property
    def target_items(self) -> frozenset[int]:
        return frozenset(item.id for item in self.items if item.kind == "target")

    def labels(self, item_ids: Iterable[int]) -> list[str]:
        return [self.items[i].label for i in sorted(item_ids)]


@dataclass(frozen=True)
class Itemset:
    item_ids: tuple[int, ...]
    support_count: int


@dataclass(frozen=True)
class RuleMeasures:
    condition_support_pct: float
    rule_support_pct: float
    confidence_pct: float
    lift: float
    deployability_pct: float
    condition_count: int
    rule_count: int
    prediction_count: int


@dataclass(frozen=True)
class AssociationRule:
    condition: Itemset
    prediction: Itemset
    condition_labels: tuple[str, ...]
    prediction_labels: tuple[str, ...]
    condition_support_pct: float
    rule_support_pct: float
    confidence_pct: float
    lift: float
    deployability_pct: float
    rule_count: int

    @property
    def text(self) -> str:
        return f"{' & '.join(self.condition_labels) or '(none)'} => {' & '.join(self.prediction_labels)}"

    def measure(self, name: str) -> float:
        return getattr(self, f"{name}_pct" if name != "lift" else "lift")


@dataclass(frozen=True)
class MiningConfig:
    """Rule constraints; percentages are on a 0..100 scale."""

    max_rules: int = 10
    min_condition_support_pct: float = 5.0
    min_confidence_pct: float = 10.0
    min_rule_support_pct: float = 5.0
    min_lift: float = 2.0
    max_items_per_rule: int = 10
    max_items_per_condition: int = 6
    max_items_per_prediction: int = 3
    flags_true_only: bool = True
    allow_conditionless: bool = False
    sort_measure: str = "confidence"
    target_consequents_only: bool = True

    def __post_init__(self):
        for name in ("min_condition_support_pct", "min_confidence_pct", "min_rule_support_pct", "min_lift"):
            if getattr(self, name) < 0:
                raise DataError(f"{name} must be non-negative")
        for name in ("max_items_per_rule", "max_items_per_condition", "max_items_per_prediction", "max_rules"):
            if getattr(self, name) < 1:
                raise DataError(f"{name} must be at least 1")
        if self.max_items_per_rule < self.max_items_per_condition:
            raise DataError("max_items_per_rule must be at least max_items_per_condition")
        if self.max_items_per_prediction > self.max_items_per_rule:
            raise DataError("max_items_per_prediction cannot exceed max_items_per_rule")
        if self.sort_measure not in SORT_MEASURES:
            raise DataError(f"sort_measure must be one of {SORT_MEASURES}, got {self.sort_measure!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "MiningConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in known})


@dataclass(frozen=True)
class MeasureSummary:
    minimum: float
    maximum: float
    mean: float
    std: float


@dataclass(frozen=True)
class RuleAggregate:
    measures: dict[str, MeasureSummary]
    n_rules: int
    n_records: int


def itemize_records(ds: Dataset, indices: Sequence[int] | None, bins: Sequence[BinningSpec],
                    flags_true_only: bool = True, exclude: Sequence[str] = ()) -> ItemCatalog:
    """Turn records into transactions.

    Rows with a missing cell in any used predictor are left out. Flags give
    an item when true (and a "not" item when false unless ``flags_true_only``);
    categories give one item per level; continuous columns give their bin.
    """
    bin_for = {b.column: b for b in bins}
    predictors = ds.predictors(exclude)
    unbinned = [c.name for c in predictors if c.role is Role.CONTINUOUS and c.name not in bin_for]
    if unbinned:
        raise DataError(f"continuous columns without a BinningSpec: {unbinned}")
    rows = ds.complete_rows(indices, exclude)

    items: list[Item] = []
    per_column: list[tuple[str, np.ndarray, dict[int, int]]] = []

    def add(label, column, kind):
        items.append(Item(len(items), label, column, kind))
        return items[-1].id

    for col in ds.schema:
        if col.role is Role.TARGET:
            values = ds.target[rows]
            negative, positive = ds.class_labels
            mapping = {0: add(negative, col.name, "target"), 1: add(positive, col.name, "target")}
        elif col.name in exclude:
            continue
        elif col.role is Role.FLAG:
            values = ds.columns[col.name][rows].astype(int)
            false_label, true_label = col.declared_levels or (f"not {col.name}", col.name)
            if col.declared_levels:
                false_label, true_label = f"{col.name} = {false_label}", f"{col.name} = {true_label}"
            mapping = {1: add(true_label, col.name, "flag-true")}
            if not flags_true_only:
                mapping[0] = add(false_label, col.name, "flag-false")
        elif col.role is Role.CONTINUOUS:
            spec = bin_for[col.name]
            values = spec.assign(ds.columns[col.name][rows])
            mapping = {b: add(spec.label(b), col.name, "numeric-bin") for b in range(spec.k_bins)}
        else:
            values = ds.columns[col.name][rows].astype(int)
            labels = ds.levels[col.name]
            mapping = {k + 1: add(f"{col.name} = {label}", col.name, "category-level")
                       for k, label in enumerate(labels)}
        per_column.append((col.name, np.asarray(values), mapping))

    transactions = []
    for r in range(len(rows)):
        t = set()
        for _, values, mapping in per_column:
            item = mapping.get(int(values[r]))
            if item is not None:
                t.add(item)
        transactions.append(frozenset(t))
    return ItemCatalog(tuple(items), tuple(transactions), len(rows), tuple(int(r) for r in rows))


def _min_count(min_support_pct: float, n: int) -> int:
    # smallest count c >= 1 with 100 * c / n >= min_support_pct, robust to float noise
    c = max(1, math.ceil(min_support_pct * n / 100.0 - 1e-9))
    while c > 1 and 100.0 * (c - 1) / n >= min_support_pct:
        c -= 1
    while 100.0 * c / n < min_support_pct and c <= n:
        c += 1
    return c


def _apriori(tidsets: Sequence[int], candidates: Sequence[int], base: int, min_count: int,
             max_size: int) -> list[tuple[tuple[int, ...], int]]:
    """Level-wise search over ``candidates`` within the records of bitset ``base``."""
    found = []
    level: dict[tuple[int, ...], int] = {}
    for i in sorted(candidates):
        cover = base & tidsets[i]
        if cover.bit_count() >= min_count:
            level[(i,)] = cover
    size = 1
    while level:
        found.extend((k, v.bit_count()) for k, v in level.items())
        if size >= max_size:
            break
        keys = sorted(level)
        nxt: dict[tuple[int, ...], int] = {}
        # join itemsets sharing all but their last item
        for a_idx, a in enumerate(keys):
            for b in keys[a_idx + 1:]:
                if a[:-1] != b[:-1]:
                    break
                cand = a + (b[-1],)
                if size >= 2 and any(cand[:k] + cand[k + 1:] not in level for k in range(len(cand) - 2)):
                    continue
                cover = level[a] & tidsets[b[-1]]
                if cover.bit_count() >= min_count:
                    nxt[cand] = cover
        level = nxt
        size += 1
    return found


def mine_frequent_itemsets(catalog: ItemCatalog, min_support_pct: float, max_size: int,
                           must_contain: Iterable[int] | None = None) -> list[Itemset]:
    """All itemsets of at most ``max_size`` items with support at or above the threshold.

    Itemsets with zero support are never reported. With ``must_contain``,
    only itemsets holding at least one of those items are mined, by running
    Apriori inside the records of each such item.
    """
    if not 0 <= min_support_pct <= 100:
        raise DataError(f"min_support_pct must lie in [0, 100], got {min_support_pct}")
    if catalog.n_records == 0 or not catalog.items:
        raise DataError("cannot mine an empty catalog")
    min_count = _min_count(min_support_pct, catalog.n_records)
    everything = (1 << catalog.n_records) - 1
    all_ids = range(len(catalog.items))
    if must_contain is None:
        found = _apriori(catalog.tidsets, all_ids, everything, min_count, max_size)
    else:
        anchors = sorted(set(must_contain))
        found = []
        for pos, anchor in enumerate(anchors):
            base = catalog.tidsets[anchor]
            if base.bit_count() < min_count:
                continue
            found.append(((anchor,), base.bit_count()))
            if max_size < 2:
                continue
            blocked = set(anchors[:pos + 1])
            others = [i for i in all_ids if i not in blocked]
            for ids, count in _apriori(catalog.tidsets, others, base, min_count, max_size - 1):
                found.append((tuple(sorted(ids + (anchor,))), count))
    found.sort(key=lambda kv: (len(kv[0]), kv[0]))
    return [Itemset(ids, count) for ids, count in found]


def score_rule(X: Itemset | Sequence[int], Y: Itemset | Sequence[int], catalog: ItemCatalog) -> RuleMeasures:
    x = tuple(X.item_ids if isinstance(X, Itemset) else X)
    y = tuple(Y.item_ids if isinstance(Y, Itemset) else Y)
    if not y:
        raise DataError("a rule needs a non-empty prediction")
    if set(x) & set(y):
        raise DataError("condition and prediction must be disjoint")
    n = catalog.n_records
    cover_x = catalog.cover(x)
    sx = cover_x.bit_count()
    if sx == 0:
        raise DataError("condition never occurs; confidence is undefined")
    cover_y = catalog.cover(y)
    sy = cover_y.bit_count()
    sxy = (cover_x & cover_y).bit_count()
    condition_support = 100.0 * sx / n
    rule_support = 100.0 * sxy / n
    confidence = 100.0 * sxy / sx
    lift = (sxy / sx) / (sy / n) if sy else math.inf
    return RuleMeasures(condition_support, rule_support, confidence, lift,
                        100.0 * (sx - sxy) / n, sx, sxy, sy)


def derive_rules(frequent: Sequence[Itemset], catalog: ItemCatalog, config: MiningConfig) -> list[AssociationRule]:
    """Split frequent itemsets into rules that meet every threshold and item cap."""
    consequent_ok = catalog.target_items if config.target_consequents_only else None
    rules = []
    for z in frequent:
        ids = z.item_ids
        if len(ids) > config.max_items_per_rule:
            continue
        pool = [i for i in ids if consequent_ok is None or i in consequent_ok]
        for k in range(1, min(config.max_items_per_prediction, len(pool)) + 1):
            for y in itertools.combinations(pool, k):
                x = tuple(i for i in ids if i not in y)
                if len(x) > config.max_items_per_condition:
                    continue
                if not x and not config.allow_conditionless:
                    continue
                m = score_rule(x, y, catalog)
                if (m.condition_support_pct >= config.min_condition_support_pct
                        and m.rule_support_pct >= config.min_rule_support_pct
                        and m.confidence_pct >= config.min_confidence_pct
                        and m.lift >= config.min_lift):
                    rules.append(AssociationRule(
                        Itemset(x, m.condition_count), Itemset(y, m.prediction_count),
                        tuple(catalog.labels(x)), tuple(catalog.labels(y)),
                        m.condition_support_pct, m.rule_support_pct, m.confidence_pct, m.lift,
                        m.deployability_pct, m.rule_count))
    return rules


def select_rules(rules: Sequence[AssociationRule], config: MiningConfig) -> list[AssociationRule]:
    """Best rules by the sort measure, ties to higher rule support, fewer conditions, then text."""
    ranked = sorted(rules, key=lambda r: (-r.measure(config.sort_measure), -r.rule_support_pct,
                                          len(r.condition.item_ids), r.text))
    return ranked[:config.max_rules]


def mine_rules(catalog: ItemCatalog, config: MiningConfig) -> list[AssociationRule]:
    """Frequent itemsets, rule derivation and selection in one call."""
    max_size = min(config.max_items_per_rule, config.max_items_per_condition + config.max_items_per_prediction)
    min_support = config.min_rule_support_pct
    if config.target_consequents_only:
        frequent = mine_frequent_itemsets(catalog, min_support, max_size, must_contain=catalog.target_items)
    else:
        frequent = mine_frequent_itemsets(catalog, min_support, max_size)
    return select_rules(derive_rules(frequent, catalog, config), config)


AGGREGATE_MEASURES = ("condition_support", "confidence", "rule_support", "lift", "deployability")


def aggregate_rule_statistics(rules: Sequence[AssociationRule], n_records: int) -> RuleAggregate:
    if not rules:
        raise DataError("no rules to summarize")
    out = {}
    for name in AGGREGATE_MEASURES:
        values = np.array([r.measure(name) for r in rules])
        out[name] = MeasureSummary(float(values.min()), float(values.max()), float(values.mean()),
                                   float(values.std()))
    return RuleAggregate(out, len(rules), int(n_records))
