"""Model evaluation statistics: classification tables, likelihood-ratio tests,
pseudo R-squares, Hosmer-Lemeshow, ROC AUC/GINI and a per-predictor screen."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import Dataset
from .errors import ClinstatWarning, DataError, SeparationWarning
from .logit import expand_design, fit_intercept_only, fit_logit_irls
from .special import chi_square_survival

__all__ = [
    "ClassificationTable", "TestResult", "PseudoR2", "RocSummary", "ScreenEntry",
    "chi_square_survival", "classification_table", "omnibus_test", "pseudo_r_squares",
    "hosmer_lemeshow", "roc_auc_gini", "logistic_correlation_screen",
]


@dataclass(frozen=True)
class ClassificationTable:
    tp: int
    tn: int
    fp: int
    fn: int
    threshold: float
    per_class_pct: tuple[float, float]  # percent correct among observed 0s, observed 1s
    overall_pct: float

    @property
    def n(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    @property
    def correct(self) -> int:
        return self.tp + self.tn

    @classmethod
    def from_counts(cls, tn: int, fp: int, fn: int, tp: int, threshold: float = 0.5) -> "ClassificationTable":
        n = tn + fp + fn + tp
        if n == 0:
            raise DataError("classification table needs at least one scored row")
        pct0 = 100.0 * tn / (tn + fp) if tn + fp else math.nan
        pct1 = 100.0 * tp / (tp + fn) if tp + fn else math.nan
        return cls(tp, tn, fp, fn, threshold, (pct0, pct1), 100.0 * (tp + tn) / n)


@dataclass(frozen=True)
class TestResult:
    statistic: float
    df: int
    sig: float

    __test__ = False  # keep pytest from collecting this class


@dataclass(frozen=True)
class PseudoR2:
    neg2LL_model: float
    cox_snell: float
    nagelkerke: float


@dataclass(frozen=True)
class RocSummary:
    auc: float
    gini: float

    @classmethod
    def from_auc(cls, auc: float) -> "RocSummary":
        return cls(auc, 2.0 * auc - 1.0)


@dataclass(frozen=True)
class ScreenEntry:
    predictor: str
    score: float
    excluded: bool


def classification_table(probs, y, threshold: float = 0.5) -> ClassificationTable:
    probs = np.asarray(probs, dtype=float)
    y = np.asarray(y)
    if len(probs) == 0:
        raise DataError("classification table needs at least one scored row")
    if len(probs) != len(y):
        raise DataError(f"{len(probs)} probabilities but {len(y)} targets")
    pred = probs >= threshold
    obs = y == 1
    return ClassificationTable.from_counts(
        tn=int(np.sum(~pred & ~obs)), fp=int(np.sum(pred & ~obs)),
        fn=int(np.sum(~pred & obs)), tp=int(np.sum(pred & obs)), threshold=threshold)


def _lr_statistic(neg2LL_null: float, neg2LL_model: float) -> float:
    stat = neg2LL_null - neg2LL_model
    if stat < 0:
        # round-off on equal likelihoods is tolerated, a real increase is not
        if stat < -1e-9 * max(abs(neg2LL_null), 1.0):
            raise DataError(
                f"model -2LL {neg2LL_model} exceeds null -2LL {neg2LL_null}; the fit is worse than baseline")
        stat = 0.0
    return stat


def omnibus_test(neg2LL_null: float, neg2LL_model: float, df_added: int) -> TestResult:
    """Likelihood-ratio chi-square of the model against the baseline."""
    stat = _lr_statistic(neg2LL_null, neg2LL_model)
    return TestResult(stat, int(df_added), chi_square_survival(stat, df_added))


def pseudo_r_squares(neg2LL_null: float, neg2LL_model: float, n: int) -> PseudoR2:
    if n <= 0:
        raise DataError("pseudo R-square needs n > 0")
    stat = _lr_statistic(neg2LL_null, neg2LL_model)
    cox_snell = -math.expm1(-stat / n)
    max_cs = -math.expm1(-neg2LL_null / n)
    nagelkerke = cox_snell / max_cs if max_cs > 0 else 0.0
    return PseudoR2(neg2LL_model, cox_snell, nagelkerke)


def _risk_groups(p_sorted: np.ndarray, groups: int) -> list[tuple[int, int]]:
    n = len(p_sorted)
    base, extra = divmod(n, groups)
    sizes = [base + 1 if g < extra else base for g in range(groups)]
    cuts = list(np.cumsum(sizes)[:-1])
    moved = []
    for cut in cuts:
        # tied probabilities stay in one group: push the boundary past the tie run
        while 0 < cut < n and p_sorted[cut] == p_sorted[cut - 1]:
            cut += 1
        moved.append(cut)
    bounds = sorted(set([0] + [c for c in moved if 0 < c < n] + [n]))
    return [(a, b) for a, b in zip(bounds[:-1], bounds[1:])]


def hosmer_lemeshow(probs, y, groups: int = 10) -> TestResult:
    """Hosmer-Lemeshow calibration test over deciles of predicted risk.

    Groups are formed on the sorted probabilities with sizes differing by at
    most one (earlier groups take the remainder); a boundary that would split
    tied probabilities moves forward. df is the final group count minus 2.
    """
    probs = np.asarray(probs, dtype=float)
    y = np.asarray(y, dtype=float)
    if groups < 2:
        raise DataError("Hosmer-Lemeshow needs at least 2 groups")
    if len(probs) < groups:
        raise DataError(f"{len(probs)} records cannot form {groups} groups")
    order = np.argsort(probs, kind="stable")
    p, obs = probs[order], y[order]
    stats = []
    for a, b in _risk_groups(p, groups):
        stats.append([obs[a:b].sum(), p[a:b].sum(), b - a])

    merged = []
    for row in stats:
        merged.append(row)
        while len(merged) > 1 and (merged[-1][1] <= 1e-12 or merged[-1][2] - merged[-1][1] <= 1e-12):
            last = merged.pop()
            merged[-1] = [x + z for x, z in zip(merged[-1], last)]
    while len(merged) > 1 and (merged[0][1] <= 1e-12 or merged[0][2] - merged[0][1] <= 1e-12):
        first = merged.pop(0)
        merged[0] = [x + z for x, z in zip(merged[0], first)]
    if len(merged) < len(stats):
        warnings.warn(f"merged {len(stats) - len(merged)} risk group(s) with zero expected count",
                      ClinstatWarning, stacklevel=2)

    chi2 = 0.0
    for o1, e1, size in merged:
        o0, e0 = size - o1, size - e1
        chi2 += (o1 - e1) ** 2 / e1 + (o0 - e0) ** 2 / e0
    df = len(merged) - 2
    if df < 1:
        raise DataError("too few distinct risk groups for a Hosmer-Lemeshow test")
    return TestResult(float(chi2), df, chi_square_survival(chi2, df))


def roc_auc_gini(probs, y) -> RocSummary:
    """AUC as the Mann-Whitney pair statistic (ties count one half)."""
    probs = np.asarray(probs, dtype=float)
    y = np.asarray(y)
    n1 = int(np.sum(y == 1))
    n0 = int(np.sum(y == 0))
    if n1 == 0 or n0 == 0:
        raise DataError("AUC needs both classes present")
    order = np.argsort(probs, kind="mergesort")
    sorted_p = probs[order]
    ranks = np.empty(len(probs))
    i = 0
    while i < len(sorted_p):
        j = i
        while j + 1 < len(sorted_p) and sorted_p[j + 1] == sorted_p[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    # concordant + 0.5 * tied pairs, counted via twice the rank sum to stay in integers
    twice_u = 2.0 * ranks[y == 1].sum() - n1 * (n1 + 1)
    return RocSummary.from_auc(twice_u / (2.0 * n1 * n0))


def logistic_correlation_screen(ds: Dataset, indices: Sequence[int] | None = None,
                                exclude: Sequence[str] = ()) -> list[ScreenEntry]:
    """Association of each predictor with the target, on a 0..1 scale.

    Each score is the square root of the Nagelkerke R-square of a univariate
    logistic model on that predictor's indicator expansion. Scores of 0.999
    or more mark a predictor that separates the classes by itself.
    """
    idx = np.arange(ds.n_rows) if indices is None else np.asarray(indices, dtype=np.int64)
    entries = []
    for col in ds.predictors(exclude):
        others = [c.name for c in ds.predictors() if c.name != col.name]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ClinstatWarning)
            design = expand_design(ds, idx, exclude=others)
        if design.n_params == 0:
            warnings.warn(f"predictor {col.name!r} has zero variance; scored 0", ClinstatWarning, stacklevel=2)
            entries.append(ScreenEntry(col.name, 0.0, False))
            continue
        y = ds.target[design.rows]
        null, _ = fit_intercept_only(y)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SeparationWarning)
            warnings.simplefilter("ignore", ClinstatWarning)
            fit = fit_logit_irls(design, y)
        r2 = pseudo_r_squares(null.neg2_log_likelihood, min(fit.neg2_log_likelihood, null.neg2_log_likelihood),
                              len(y))
        score = min(1.0, max(0.0, math.sqrt(r2.nagelkerke)))
        entries.append(ScreenEntry(col.name, score, score >= 0.999))
    return entries
