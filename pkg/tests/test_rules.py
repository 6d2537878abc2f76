import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clinstat.dataset import BinningSpec, ColumnSchema, Dataset, Role
from clinstat.errors import DataError
from clinstat.rules import (AssociationRule, Item, ItemCatalog, Itemset, MiningConfig, aggregate_rule_statistics,
                            derive_rules, itemize_records, mine_frequent_itemsets, mine_rules, score_rule,
                            select_rules)


def random_catalog(seed, n_items=None, n_records=None, targets=0):
    rng = np.random.default_rng(seed)
    n_items = n_items or int(rng.integers(1, 13))
    n_records = n_records or int(rng.integers(1, 65))
    density = rng.uniform(0.1, 0.7)
    kinds = ["target" if i < targets else "category-level" for i in range(n_items)]
    items = tuple(Item(i, f"i{i}", f"c{i}", kinds[i]) for i in range(n_items))
    transactions = tuple(frozenset(int(i) for i in np.flatnonzero(rng.random(n_items) < density))
                         for _ in range(n_records))
    return ItemCatalog(items, transactions, n_records)


def powerset_frequent(catalog, min_support_pct, max_size, must_contain=None):
    """Every itemset counted directly against the transactions."""
    out = {}
    ids = range(len(catalog.items))
    for k in range(1, max_size + 1):
        for combo in itertools.combinations(ids, k):
            if must_contain is not None and not set(combo) & set(must_contain):
                continue
            count = sum(1 for t in catalog.transactions if set(combo) <= t)
            if count and 100.0 * count / catalog.n_records >= min_support_pct:
                out[combo] = count
    return out


def powerset_rules(catalog, config):
    found = {}
    ids = range(len(catalog.items))
    n = catalog.n_records
    allowed_y = catalog.target_items if config.target_consequents_only else set(ids)
    for ky in range(1, config.max_items_per_prediction + 1):
        for y in itertools.combinations(sorted(allowed_y), ky):
            rest = [i for i in ids if i not in y]
            for kx in range(0, config.max_items_per_condition + 1):
                if kx == 0 and not config.allow_conditionless:
                    continue
                if kx + ky > config.max_items_per_rule:
                    continue
                for x in itertools.combinations(rest, kx):
                    sx = sum(1 for t in catalog.transactions if set(x) <= t)
                    sy = sum(1 for t in catalog.transactions if set(y) <= t)
                    sxy = sum(1 for t in catalog.transactions if set(x) | set(y) <= t)
                    if sx == 0 or sxy == 0:
                        continue
                    cs, rs, conf = 100 * sx / n, 100 * sxy / n, 100 * sxy / sx
                    lift = (sxy / sx) / (sy / n)
                    if (cs >= config.min_condition_support_pct and rs >= config.min_rule_support_pct
                            and conf >= config.min_confidence_pct and lift >= config.min_lift):
                        found[(x, y)] = sxy
    return found


class TestFrequentItemsets:
    @pytest.mark.parametrize("seed", range(25))
    def test_equals_powerset_enumeration(self, seed):
        catalog = random_catalog(seed)
        support = float(np.random.default_rng(seed + 1000).uniform(0, 60))
        got = {s.item_ids: s.support_count for s in mine_frequent_itemsets(catalog, support, 12)}
        assert got == powerset_frequent(catalog, support, 12)

    @pytest.mark.parametrize("seed", range(15))
    def test_must_contain_equals_filtered_powerset(self, seed):
        catalog = random_catalog(seed, targets=2, n_items=8)
        got = {s.item_ids: s.support_count for s in mine_frequent_itemsets(catalog, 10.0, 5, must_contain={0, 1})}
        assert got == powerset_frequent(catalog, 10.0, 5, must_contain={0, 1})

    def test_zero_support_never_reported(self):
        catalog = ItemCatalog.from_transactions([{"a"}, {"b"}])
        got = mine_frequent_itemsets(catalog, 0.0, 3)
        assert [s.item_ids for s in got] == [(0,), (1,)]

    def test_threshold_boundary_is_inclusive(self):
        catalog = ItemCatalog.from_transactions([{"a", "b"}] + [{"a"}] * 19)
        got = {s.item_ids for s in mine_frequent_itemsets(catalog, 5.0, 2)}
        assert (0, 1) in got

    def test_invalid_support(self):
        catalog = ItemCatalog.from_transactions([{"a"}])
        with pytest.raises(DataError):
            mine_frequent_itemsets(catalog, 120.0, 2)


class TestRuleMeasures:
    def test_example_arithmetic(self):
        # 100 records: X in 40, Y in 50, both in 30
        transactions = [{"x", "y"}] * 30 + [{"x"}] * 10 + [{"y"}] * 20 + [set()] * 40
        catalog = ItemCatalog.from_transactions(transactions)
        m = score_rule([catalog.item_id("x")], [catalog.item_id("y")], catalog)
        assert m.condition_support_pct == pytest.approx(40.0)
        assert m.rule_support_pct == pytest.approx(30.0)
        assert m.confidence_pct == pytest.approx(75.0)
        assert m.lift == pytest.approx(1.5)
        assert m.deployability_pct == pytest.approx(10.0)

    def test_empty_condition_covers_everything(self):
        catalog = ItemCatalog.from_transactions([{"y"}, set(), {"y"}, set()])
        m = score_rule([], [0], catalog)
        assert m.condition_support_pct == 100.0 and m.confidence_pct == 50.0 and m.lift == 1.0

    def test_unseen_condition_is_rejected(self):
        catalog = ItemCatalog(tuple(Item(i, f"i{i}", "c", "category-level") for i in range(2)),
                              (frozenset({1}),), 1)
        with pytest.raises(DataError):
            score_rule([0], [1], catalog)

    def test_overlap_rejected(self):
        catalog = ItemCatalog.from_transactions([{"a", "b"}])
        with pytest.raises(DataError):
            score_rule([0, 1], [1], catalog)

    @settings(max_examples=150, deadline=None)
    @given(seed=st.integers(0, 100_000))
    def test_deployability_identity(self, seed):
        catalog = random_catalog(seed, n_items=5, n_records=40)
        m = score_rule([0, 1], [2], catalog) if catalog.support_count([0, 1]) else None
        if m is None:
            return
        assert m.deployability_pct == pytest.approx(m.condition_support_pct - m.rule_support_pct, abs=1e-12)
        assert m.deployability_pct == pytest.approx(m.condition_support_pct * (1 - m.confidence_pct / 100), abs=1e-9)
        assert 0 <= m.rule_support_pct <= m.condition_support_pct <= 100


class TestRuleDerivation:
    @pytest.mark.parametrize("seed", range(20))
    def test_matches_exhaustive_rules(self, seed):
        catalog = random_catalog(seed, n_items=7, n_records=40, targets=2)
        config = MiningConfig(max_rules=1000, min_condition_support_pct=10, min_confidence_pct=30,
                              min_rule_support_pct=5, min_lift=1.0, max_items_per_rule=4,
                              max_items_per_condition=3, max_items_per_prediction=2)
        size = min(config.max_items_per_rule, config.max_items_per_condition + config.max_items_per_prediction)
        frequent = mine_frequent_itemsets(catalog, config.min_rule_support_pct, size,
                                          must_contain=catalog.target_items)
        got = {(r.condition.item_ids, r.prediction.item_ids): r.rule_count
               for r in derive_rules(frequent, catalog, config)}
        assert got == powerset_rules(catalog, config)

    def test_any_consequent_mode(self):
        catalog = random_catalog(3, n_items=5, n_records=30)
        config = MiningConfig(max_rules=1000, min_lift=0.0, min_confidence_pct=0, min_condition_support_pct=0,
                              min_rule_support_pct=10, max_items_per_prediction=1, target_consequents_only=False,
                              max_items_per_condition=2, max_items_per_rule=3)
        got = {(r.condition.item_ids, r.prediction.item_ids) for r in mine_rules(catalog, config)}
        assert got == set(powerset_rules(catalog, config))

    def test_caps_and_thresholds_hold(self):
        catalog = random_catalog(11, n_items=10, n_records=64, targets=2)
        config = MiningConfig(min_lift=1.0)
        for r in mine_rules(catalog, config):
            assert 1 <= len(r.condition.item_ids) <= config.max_items_per_condition
            assert len(r.prediction.item_ids) <= config.max_items_per_prediction
            assert set(r.prediction.item_ids) <= catalog.target_items
            assert r.confidence_pct >= config.min_confidence_pct and r.lift >= config.min_lift

    def test_selection_order_and_cap(self):
        catalog = random_catalog(5, n_items=9, n_records=60, targets=2)
        config = MiningConfig(max_rules=4, min_lift=0.5)
        everything = mine_rules(catalog, MiningConfig(max_rules=10_000, min_lift=0.5))
        top = select_rules(everything, config)
        assert len(top) == min(4, len(everything))
        confs = [r.confidence_pct for r in everything]
        assert [r.confidence_pct for r in top] == sorted(confs, reverse=True)[:len(top)]

    def test_sort_by_lift(self):
        catalog = random_catalog(8, n_items=9, n_records=60, targets=2)
        config = MiningConfig(max_rules=50, min_lift=0.5, sort_measure="lift")
        lifts = [r.lift for r in mine_rules(catalog, config)]
        assert lifts == sorted(lifts, reverse=True)


class TestMiningConfig:
    def test_round_trip(self):
        config = MiningConfig(max_rules=7, min_lift=1.5)
        assert MiningConfig.from_dict(config.to_dict()) == config

    @pytest.mark.parametrize("kwargs", [
        {"min_lift": -1.0}, {"max_rules": 0}, {"max_items_per_rule": 2},
        {"max_items_per_prediction": 11}, {"sort_measure": "chance"},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(DataError):
            MiningConfig(**kwargs)


class TestAggregate:
    def _rule(self, confidence):
        return AssociationRule(Itemset((0,), 10), Itemset((1,), 20), ("x",), ("y",), 10.0,
                               confidence / 10.0, confidence, 2.0, 10.0 - confidence / 10.0, 1)

    def test_mean_and_population_std(self):
        agg = aggregate_rule_statistics([self._rule(60.0), self._rule(70.0)], 100)
        conf = agg.measures["confidence"]
        assert (conf.minimum, conf.maximum, conf.mean, conf.std) == (60.0, 70.0, 65.0, 5.0)
        assert agg.n_rules == 2 and agg.n_records == 100

    def test_empty(self):
        with pytest.raises(DataError):
            aggregate_rule_statistics([], 10)


class TestItemize:
    def _dataset(self):
        schema = (ColumnSchema("f", Role.FLAG), ColumnSchema("c", Role.NOMINAL, ("a", "b")),
                  ColumnSchema("v", Role.CONTINUOUS), ColumnSchema("t", Role.TARGET))
        cols = {"f": np.array([1.0, 0.0, 1.0, np.nan]), "c": np.array([1.0, 2.0, 2.0, 1.0]),
                "v": np.array([0.0, 5.0, 10.0, 2.0]), "t": np.array([1, 0, 1, 0])}
        return Dataset(schema, cols, {"c": ("a", "b")}, ("no", "yes"))

    def test_items_and_transactions(self):
        ds = self._dataset()
        spec = BinningSpec("v", 2, (0.0, 5.0, 10.0))
        catalog = itemize_records(ds, None, [spec])
        labels = [i.label for i in catalog.items]
        assert labels == ["f", "c = a", "c = b", "0.000 ≤ v < 5.000", "5.000 ≤ v ≤ 10.000", "no", "yes"]
        assert catalog.n_records == 3 and catalog.rows == (0, 1, 2)
        assert catalog.labels(catalog.transactions[1]) == ["c = b", "5.000 ≤ v ≤ 10.000", "no"]
        assert catalog.target_items == {5, 6}

    def test_false_flags_become_items(self):
        catalog = itemize_records(self._dataset(), None, [BinningSpec("v", 2, (0.0, 5.0, 10.0))],
                                  flags_true_only=False)
        assert "not f" in [i.label for i in catalog.items]

    def test_unbinned_continuous_is_an_error(self):
        with pytest.raises(DataError):
            itemize_records(self._dataset(), None, [])

    def test_support_counts_use_bitsets(self):
        catalog = random_catalog(2, n_items=6, n_records=50)
        for combo in itertools.combinations(range(6), 2):
            direct = sum(1 for t in catalog.transactions if set(combo) <= t)
            assert catalog.support_count(combo) == direct
        assert catalog.support_count([]) == 50
        assert math.isfinite(catalog.cover([]))
