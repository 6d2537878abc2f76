"""End-to-end analysis: split, fit, diagnose, mine, and assemble report sections."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .config import CliConfig
from .dataset import (BinningSpec, CrossTab, Dataset, PartitionIndex, Role, discretize_equal_width,
                      encode_target, load_csv, partition, summarize_crosstab, undersample)
from .diagnostics import (ClassificationTable, PseudoR2, RocSummary, ScreenEntry, TestResult,
                          classification_table, hosmer_lemeshow, logistic_correlation_screen,
                          omnibus_test, pseudo_r_squares, roc_auc_gini)
from .errors import ClinstatWarning, DataError, FitError, SchemaMismatchWarning
from .logit import (DesignMatrix, LogitFit, WaldRow, build_design, expand_design, fit_intercept_only,
                    fit_logit_irls, predict_prob, wald_statistics)
from .report import (ModelArtifact, ReportDocument, Section, fmt3, fmt_p, fmt_pct, make_section, cell,
                     schema_fingerprint)
from .rules import AssociationRule, ItemCatalog, RuleAggregate, aggregate_rule_statistics, itemize_records, mine_rules

log = logging.getLogger("clinstat")


def load_dataset(config: CliConfig) -> Dataset:
    """Read and encode the configured file; a file holding one class is a fit failure."""
    ds = load_csv(config.dataset_path, config.schema)
    present = {str(v) for v in ds.columns[ds.target_name]}
    if ds.n_rows and present in ({config.positive_label}, {config.negative_label}):
        (only,) = present
        raise FitError(f"degenerate target {ds.target_name!r}: all {ds.n_rows} records have class {only!r}")
    return encode_target(ds, config.positive_label, config.negative_label)


@dataclass
class ModelResults:
    analysis_rows: np.ndarray
    design: DesignMatrix
    baseline: LogitFit
    baseline_wald: WaldRow
    full: LogitFit
    train_probs: np.ndarray
    test_rows: np.ndarray
    test_probs: np.ndarray | None
    baseline_table: ClassificationTable
    train_table: ClassificationTable
    test_table: ClassificationTable | None
    omnibus: TestResult
    pseudo_r2: PseudoR2
    hosmer_lemeshow: TestResult
    train_roc: RocSummary
    test_roc: RocSummary | None
    excluded_test_rows: int = 0


@dataclass
class MiningResults:
    bins: list[BinningSpec]
    catalog: ItemCatalog
    rules: list[AssociationRule]
    aggregate: RuleAggregate | None


@dataclass
class Analysis:
    config: CliConfig
    dataset: Dataset
    split: PartitionIndex
    selected_rows: np.ndarray  # training rows, after optional under-sampling
    included_rows: np.ndarray  # selected rows with no missing predictor
    models: ModelResults | None = None
    screen: list[ScreenEntry] | None = None
    mining: MiningResults | None = None
    warnings: list[str] = field(default_factory=list)

    @property
    def train_rows(self) -> np.ndarray:
        return np.asarray(self.split.train_indices, dtype=np.int64)


def prepare(config: CliConfig, ds: Dataset | None = None) -> Analysis:
    ds = load_dataset(config) if ds is None else ds
    split = partition(ds, config.train_fraction, config.partition_seed)
    selected = np.asarray(split.train_indices, dtype=np.int64)
    if config.undersample:
        selected = np.asarray(undersample(ds, selected, config.undersample_seed), dtype=np.int64)
    included = ds.complete_rows(selected, config.exclude)
    log.info("clinstat %s: %d rows, partition seed %d -> %d train / %d test; undersample=%s (seed %d)",
             __version__, ds.n_rows, config.partition_seed, len(split.train_indices), len(split.test_indices),
             config.undersample, config.undersample_seed)
    return Analysis(config, ds, split, selected, included)


def fit_models(an: Analysis) -> ModelResults:
    cfg, ds = an.config, an.dataset
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ClinstatWarning)
        design = expand_design(ds, an.included_rows, cfg.exclude)
    for w in caught:
        an.warnings.append(str(w.message))
        log.warning("%s", w.message)
    y = ds.target[design.rows]
    baseline, baseline_wald = fit_intercept_only(y)

    if cfg.expected_parameters is not None and design.n_params != cfg.expected_parameters:
        msg = (f"design has {design.n_params} model parameters, expected {cfg.expected_parameters}; "
               f"the schema or observed levels differ from the reference analysis ({_design_breakdown(design)})")
        an.warnings.append(msg)
        warnings.warn(msg, SchemaMismatchWarning, stacklevel=2)

    full = fit_logit_irls(design, y, cfg.tolerance, cfg.max_iter)
    if not full.converged:
        worst = np.argsort(-np.abs(full.coefficients))[:5]
        detail = ", ".join(f"{full.column_names[j]}={full.coefficients[j]:.3g}" for j in worst)
        raise FitError(f"full model did not converge after {full.iterations} iterations "
                       f"(possible separation); largest coefficients: {detail}")

    train_probs = predict_prob(full, design)
    baseline_probs = predict_prob(baseline, np.ones((len(y), 1)))
    omni = omnibus_test(baseline.neg2_log_likelihood, full.neg2_log_likelihood, design.n_params)
    r2 = pseudo_r_squares(baseline.neg2_log_likelihood, full.neg2_log_likelihood, len(y))
    hl = hosmer_lemeshow(train_probs, y, cfg.hl_groups)

    test_all = np.asarray(an.split.test_indices, dtype=np.int64)
    test_rows = ds.complete_rows(test_all, cfg.exclude)
    test_probs = test_table = test_roc = None
    if len(test_rows):
        _warn_unseen_levels(an, ds, design, test_rows)
        test_design = build_design(ds, test_rows, design.terms)
        test_probs = predict_prob(full, test_design)
        y_test = ds.target[test_rows]
        test_table = classification_table(test_probs, y_test, cfg.threshold)
        if 0 < y_test.sum() < len(y_test):
            test_roc = roc_auc_gini(test_probs, y_test)

    results = ModelResults(
        analysis_rows=design.rows, design=design, baseline=baseline, baseline_wald=baseline_wald, full=full,
        train_probs=train_probs, test_rows=test_rows, test_probs=test_probs,
        baseline_table=classification_table(baseline_probs, y, cfg.threshold),
        train_table=classification_table(train_probs, y, cfg.threshold), test_table=test_table,
        omnibus=omni, pseudo_r2=r2, hosmer_lemeshow=hl, train_roc=roc_auc_gini(train_probs, y),
        test_roc=test_roc, excluded_test_rows=len(test_all) - len(test_rows))
    log.info("full model: %d parameters, -2LL %.3f, %d iterations", design.n_params,
             full.neg2_log_likelihood, full.iterations)
    an.models = results
    return results


def _design_breakdown(design: DesignMatrix) -> str:
    counts: dict[str, int] = {}
    for t in design.terms[1:]:
        counts[t.source] = counts.get(t.source, 0) + 1
    multi = ", ".join(f"{k}: {v}" for k, v in counts.items() if v > 1)
    return f"{len(counts)} source columns; multi-column expansions {multi or 'none'}"


def _warn_unseen_levels(an: Analysis, ds: Dataset, design: DesignMatrix, rows: np.ndarray) -> None:
    seen: dict[str, set[str]] = {}
    sources = {t.source for t in design.terms if t.kind == "level"}
    for t in design.terms:
        if t.kind == "level":
            seen.setdefault(t.source, set()).add(t.level)
    train_rows = design.rows
    for src in sorted(sources):
        labels = ds.levels[src]
        train_codes = {int(v) for v in ds.columns[src][train_rows]}
        extra = {int(v) for v in ds.columns[src][rows]} - train_codes
        if extra:
            msg = f"test rows hold levels of {src!r} unseen in training ({[labels[c - 1] for c in sorted(extra)]}); scored as reference"
            an.warnings.append(msg)
            log.warning("%s", msg)


def run_screen(an: Analysis) -> list[ScreenEntry]:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ClinstatWarning)
        an.screen = logistic_correlation_screen(an.dataset, an.included_rows, an.config.exclude)
    return an.screen


def run_mining(an: Analysis) -> MiningResults:
    cfg, ds = an.config, an.dataset
    bins = [discretize_equal_width(ds, c.name, cfg.k_bins, an.included_rows)
            for c in ds.predictors(cfg.exclude) if c.role is Role.CONTINUOUS]
    catalog = itemize_records(ds, an.included_rows, bins, cfg.mining.flags_true_only, cfg.exclude)
    rules = mine_rules(catalog, cfg.mining)
    aggregate = aggregate_rule_statistics(rules, catalog.n_records) if rules else None
    log.info("mining: %d items over %d records, %d rules selected", len(catalog.items), catalog.n_records, len(rules))
    an.mining = MiningResults(bins, catalog, rules, aggregate)
    return an.mining


def run_all(config: CliConfig, ds: Dataset | None = None) -> Analysis:
    an = prepare(config, ds)
    fit_models(an)
    run_screen(an)
    run_mining(an)
    return an


def model_artifacts(an: Analysis) -> tuple[ModelArtifact, ModelArtifact]:
    m, cfg = an.models, an.config
    fp = schema_fingerprint(an.dataset.schema)
    meta = {"tool_version": __version__, "seeds": cfg.seeds, "undersample": cfg.undersample,
            "positive_label": cfg.positive_label, "negative_label": cfg.negative_label}
    bins = an.mining.bins if an.mining else []
    null = m.baseline.neg2_log_likelihood
    baseline = ModelArtifact(fp, [m.design.terms[0]], list(m.baseline.coefficients), list(m.baseline.std_errors),
                             null, null, m.baseline.n_used, 0, True, [], None, {**meta, "model": "baseline"})
    full = ModelArtifact(fp, list(m.design.terms), list(m.full.coefficients), list(m.full.std_errors), null,
                         m.full.neg2_log_likelihood, m.full.n_used, m.full.iterations, m.full.converged, bins,
                         cfg.mining, {**meta, "model": "full"})
    return baseline, full


def predict_with_artifact(art: ModelArtifact, ds: Dataset, exclude=()) -> tuple[np.ndarray, np.ndarray]:
    """Probabilities for the complete rows of ``ds``; returns (rows, probabilities)."""
    used = {t.source for t in art.design_terms if t.source}
    others = [c.name for c in ds.predictors() if c.name not in used]
    rows = ds.complete_rows(None, others)
    design = build_design(ds, rows, art.design_terms)
    fit = LogitFit(np.asarray(art.coefficients), np.asarray(art.std_errors), art.neg2ll_model,
                   art.iterations, art.converged, art.n_used, tuple(t.name for t in art.design_terms))
    return rows, predict_prob(fit, design)


# ---------------------------------------------------------------- report sections

def _class_names(an: Analysis) -> tuple[str, str]:
    return an.dataset.class_labels


def partition_section(an: Analysis) -> Section:
    n = an.dataset.n_rows
    tr, te = len(an.split.train_indices), len(an.split.test_indices)
    return make_section("partition_summary", "Data partitioning", ("Partition", "N", "Percent"), [
        ("Training", tr, cell(100.0 * tr / n, fmt_pct)),
        ("Testing", te, cell(100.0 * te / n, fmt_pct)),
        ("Total", n, cell(100.0, fmt_pct)),
    ], notes=(f"partition seed {an.split.seed}",))


def case_processing_section(an: Analysis) -> Section:
    selected = len(an.selected_rows)
    included = len(an.included_rows)
    train = len(an.split.train_indices)
    unselected = train - selected

    def pct(k, d):
        return cell(100.0 * k / d if d else 0.0, fmt_pct)

    return make_section("case_processing", "Case processing summary", ("Unweighted cases", "N", "Percent"), [
        ("Included in analysis", included, pct(included, train)),
        ("Missing cases", selected - included, pct(selected - included, train)),
        ("Selected cases total", selected, pct(selected, train)),
        ("Unselected cases", unselected, pct(unselected, train)),
        ("Total", train, pct(train, train)),
    ])


def encoding_section(an: Analysis) -> Section:
    neg, pos = _class_names(an)
    return make_section("dependent_encoding", "Dependent variable encoding", ("Original value", "Internal value"),
                        [(neg, 0), (pos, 1)])


def screen_section(an: Analysis) -> Section:
    rows = [(e.predictor, cell(e.score, fmt3), "excluded" if e.excluded else "") for e in an.screen]
    rows += [(name, "", "excluded by config") for name in an.config.exclude]
    return make_section("predictor_screen", f"Logistic correlation with {an.dataset.target_name!r}",
                        ("Input variable", "Logistic correlation", "Status"), rows)


def _classification_section(name, title, table: ClassificationTable, classes, step) -> Section:
    neg, pos = classes
    return make_section(name, title, ("Step", "Observed", f"Predicted {neg}", f"Predicted {pos}",
                                      "Percentage correct"), [
        (step, neg, table.tn, table.fp, cell(table.per_class_pct[0], fmt_pct)),
        (step, pos, table.fn, table.tp, cell(table.per_class_pct[1], fmt_pct)),
        (step, "Overall percentage", "", "", cell(table.overall_pct, fmt_pct)),
    ], notes=(f"cut value {table.threshold:g}",))


def _wald_row(step, w: WaldRow):
    return (step, w.name, cell(w.B, fmt3), cell(w.SE, fmt3), cell(w.Wald, fmt3), w.df, cell(w.sig, fmt_p),
            cell(w.expB, fmt3))


def wald_section(an: Analysis) -> Section:
    m = an.models
    rows = [_wald_row("Step 0", m.baseline_wald)]
    rows += [_wald_row("Step 1", w) for w in wald_statistics(m.full)]
    return make_section("variables_in_equation", "Variables in the equation",
                        ("Step", "Variable", "B", "S.E.", "Wald", "df", "Sig.", "Exp(B)"), rows)


def omnibus_section(an: Analysis) -> Section:
    o = an.models.omnibus
    rows = [("Step 1", label, cell(o.statistic, fmt3), o.df, cell(o.sig, fmt_p)) for label in ("Step", "Block", "Model")]
    return make_section("omnibus", "Omnibus tests of model coefficients", ("Step", "", "Chi-square", "df", "Sig."), rows)


def model_summary_section(an: Analysis) -> Section:
    m = an.models
    note = (f"estimation terminated at iteration number {m.full.iterations} because -2 log likelihood changed "
            f"by less than {100 * an.config.tolerance:g} percent")
    return make_section("model_summary", "Model summary",
                        ("Step", "-2 Log likelihood", "Cox and Snell R Square", "Nagelkerke R Square"), [
        (1, cell(m.full.neg2_log_likelihood, fmt3), cell(m.pseudo_r2.cox_snell, fmt3),
         cell(m.pseudo_r2.nagelkerke, fmt3)),
    ], notes=(note, f"baseline -2 log likelihood {m.baseline.neg2_log_likelihood:.3f}"))


def hosmer_lemeshow_section(an: Analysis) -> Section:
    h = an.models.hosmer_lemeshow
    return make_section("hosmer_lemeshow", "Hosmer and Lemeshow test", ("Step", "Chi-square", "df", "Sig."),
                        [(1, cell(h.statistic, fmt3), h.df, cell(h.sig, fmt_p))])


def comparison_section(an: Analysis) -> Section:
    m = an.models
    tr, te = m.train_table, m.test_table

    def part(t):
        if t is None:
            return ("", "", "", "", "")
        return (t.correct, cell(t.overall_pct, fmt_pct), t.n - t.correct, cell(100.0 - t.overall_pct, fmt_pct), t.n)

    a, b = part(tr), part(te)
    notes = ()
    if m.excluded_test_rows:
        notes = (f"{m.excluded_test_rows} testing rows with missing predictors were not scored",)
    return make_section("train_test_comparison", "Comparing training and testing classification accuracy",
                        ("Partition", "Training N", "Training %", "Testing N", "Testing %"), [
        ("Correct", a[0], a[1], b[0], b[1]),
        ("Wrong", a[2], a[3], b[2], b[3]),
        ("Total", a[4], "", b[4], ""),
    ], notes=notes)


def evaluation_section(an: Analysis) -> Section:
    m = an.models
    te = m.test_roc
    return make_section("evaluation_matrix", "Evaluation matrix",
                        ("Model", "Training AUC", "Training GINI", "Testing AUC", "Testing GINI"), [
        ("Target", cell(m.train_roc.auc, fmt3), cell(m.train_roc.gini, fmt3),
         cell(te.auc, fmt3) if te else "", cell(te.gini, fmt3) if te else ""),
    ])


NO_RULES = "no rules met constraints"


def rule_statistics_section(an: Analysis) -> Section:
    mr = an.mining
    label = {"condition_support": "Condition Support (%)", "confidence": "Confidence (%)",
             "rule_support": "Rule Support (%)", "lift": "Lift", "deployability": "Deployability (%)"}
    header = ("Measurement", "Minimum", "Maximum", "Mean", "Standard deviation")
    if mr.aggregate is None:
        return make_section("rule_statistics", "Rule statistics", header, [],
                            notes=(NO_RULES, f"valid data source records {mr.catalog.n_records}"))
    agg = mr.aggregate
    f2 = lambda v: f"{v:.2f}"  # noqa: E731
    rows = [(label[k], cell(s.minimum, f2), cell(s.maximum, f2), cell(s.mean, f2), cell(s.std, f2))
            for k, s in agg.measures.items()]
    return make_section("rule_statistics", "Rule statistics", header, rows,
                        notes=(f"number of rules {agg.n_rules}", f"valid data source records {agg.n_records}"))


def top_rules_section(an: Analysis) -> Section:
    mr = an.mining
    header = ("Condition", "Prediction", "Confidence (%)", "Condition Support (%)", "Rule Support (%)", "Lift",
              "Deployability (%)", "Rule count")
    top = mr.rules[:an.config.top_rules]
    if not top:
        return make_section("top_rules", "Top association rules", header, [], notes=(NO_RULES,))
    f2 = lambda v: f"{v:.2f}"  # noqa: E731
    rows = [(" & ".join(r.condition_labels), " & ".join(r.prediction_labels), cell(r.confidence_pct, f2),
             cell(r.condition_support_pct, f2), cell(r.rule_support_pct, f2), cell(r.lift, f2),
             cell(r.deployability_pct, f2), r.rule_count) for r in top]
    return make_section("top_rules", f"Top {len(top)} association rules sorted by {an.config.mining.sort_measure}",
                        header, rows)


DIAGNOSE_SECTIONS = (partition_section, case_processing_section, encoding_section, screen_section)
MODEL_SECTIONS = (wald_section, omnibus_section, model_summary_section, hosmer_lemeshow_section,
                  comparison_section, evaluation_section)
MINING_SECTIONS = (rule_statistics_section, top_rules_section)


def report_metadata(an: Analysis) -> dict:
    return {"tool_version": __version__, "seeds": an.config.seeds, "undersample": an.config.undersample,
            "n_rows": an.dataset.n_rows}


def build_report(an: Analysis, parts: tuple[str, ...] = ("diagnose", "mine")) -> ReportDocument:
    sections = []
    if "diagnose" in parts:
        sections += [f(an) for f in DIAGNOSE_SECTIONS if f is not screen_section or an.screen is not None]
        m = an.models
        sections.append(_classification_section("baseline_classification", "Classification table, baseline model",
                                                 m.baseline_table, _class_names(an), "Step 0"))
        sections += [f(an) for f in MODEL_SECTIONS[:4]]
        sections.append(_classification_section("new_model_classification",
                                                 "Classification table, full model (training)",
                                                 m.train_table, _class_names(an), "Step 1"))
        sections += [f(an) for f in MODEL_SECTIONS[4:]]
    if "mine" in parts:
        sections += [f(an) for f in MINING_SECTIONS]
    return ReportDocument(tuple(sections), report_metadata(an))


def crosstab_sections(an: Analysis, columns=None) -> list[Section]:
    ds = an.dataset
    out = []
    cols = columns or [c.name for c in ds.predictors(an.config.exclude)
                       if c.role in (Role.NOMINAL, Role.ORDINAL, Role.FLAG) or c.name == "age"]
    for name in cols:
        col = ds.column(name)
        binning = None
        if col.role is Role.CONTINUOUS:
            binning = discretize_equal_width(ds, name, an.config.k_bins)
        ct = summarize_crosstab(ds, name, binning=binning)
        out.append(crosstab_to_section(ct))
    return out


def crosstab_to_section(ct: CrossTab) -> Section:
    neg, pos = ct.class_labels
    rows = [(r.level, r.count_negative, cell(r.pct_negative, fmt_pct), r.count_positive,
             cell(r.pct_positive, fmt_pct), r.total) for r in ct.rows]
    return make_section(f"crosstab:{ct.column}", f"{ct.column} versus health outcome",
                        (ct.column, neg, f"{neg} %", pos, f"{pos} %", "Total"), rows,
                        notes=(f"percentages of all {ct.n} records",))
