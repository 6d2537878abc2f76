"""Binary logistic regression by maximum likelihood.

The full model is fitted with Newton-Raphson (equivalently IRLS) on the
Bernoulli log-likelihood; the intercept-only baseline has a closed form.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dataset import Dataset, Role
from .errors import ClinstatWarning, DataError, FitError, SeparationWarning, SingularDesignError
from .special import chi_square_survival

DIVERGENCE_BOUND = 25.0


@dataclass(frozen=True)
class DesignTerm:
    """How one design column is computed from the source data."""

    name: str
    source: str | None  # None for the intercept
    kind: str  # "intercept", "continuous", "flag" or "level"
    level: str | None = None  # category label for "level" terms

    def to_dict(self) -> dict:
        return {"name": self.name, "source": self.source, "kind": self.kind, "level": self.level}

    @classmethod
    def from_dict(cls, data: dict) -> "DesignTerm":
        return cls(data["name"], data["source"], data["kind"], data.get("level"))


@dataclass(frozen=True)
class DesignMatrix:
    values: np.ndarray
    terms: tuple[DesignTerm, ...]
    rows: np.ndarray  # dataset row index of each design row

    @property
    def column_names(self) -> list[str]:
        return [t.name for t in self.terms]

    @property
    def source_columns(self) -> dict[str, str | None]:
        return {t.name: t.source for t in self.terms}

    @property
    def n_params(self) -> int:
        return len(self.terms) - 1


def _terms_for(ds: Dataset, rows: np.ndarray, exclude: Sequence[str]) -> list[DesignTerm]:
    terms = [DesignTerm("(Intercept)", None, "intercept")]
    for col in ds.predictors(exclude):
        values = ds.columns[col.name][rows]
        if col.role is Role.CONTINUOUS or col.role is Role.FLAG:
            if len(values) and np.all(values == values[0]):
                warnings.warn(f"dropping constant column {col.name!r}", ClinstatWarning, stacklevel=3)
                continue
            terms.append(DesignTerm(col.name, col.name, col.role.value))
            continue
        observed = sorted({int(v) for v in values})
        if len(observed) < 2:
            warnings.warn(f"dropping {col.name!r}: only one observed level", ClinstatWarning, stacklevel=3)
            continue
        labels = ds.levels[col.name]
        for code in observed[1:]:
            terms.append(DesignTerm(f"{col.name}={labels[code - 1]}", col.name, "level", labels[code - 1]))
    return terms


def build_design(ds: Dataset, rows: Sequence[int], terms: Sequence[DesignTerm]) -> DesignMatrix:
    """Evaluate fixed design terms on the given rows (used for scoring new data).

    Indicator terms match on the level label, so a dataset coded from a
    different file lines up with the training coding; a level absent from
    ``ds`` yields an all-zero column.
    """
    rows = np.asarray(rows, dtype=np.int64)
    X = np.empty((len(rows), len(terms)))
    for j, term in enumerate(terms):
        if term.kind == "intercept":
            X[:, j] = 1.0
        elif term.kind == "level":
            labels = ds.levels[term.source]
            code = labels.index(term.level) + 1 if term.level in labels else -1
            X[:, j] = (ds.columns[term.source][rows] == code).astype(float)
        else:
            X[:, j] = ds.columns[term.source][rows]
    if np.isnan(X).any():
        raise DataError("design rows contain missing cells; filter with Dataset.complete_rows first")
    return DesignMatrix(X, tuple(terms), rows)


def expand_design(ds: Dataset, indices: Sequence[int], exclude: Sequence[str] = ()) -> DesignMatrix:
    """Design matrix with a leading intercept and indicator coding for categories.

    Rows with a missing cell in any used predictor are skipped. Nominal and
    ordinal columns with L observed levels give L-1 indicators against the
    first observed level; flags and continuous columns pass through.
    """
    rows = ds.complete_rows(indices, exclude)
    if len(rows) == 0:
        raise DataError("no usable rows for the design matrix")
    return build_design(ds, rows, _terms_for(ds, rows, exclude))


@dataclass(frozen=True)
class LogitFit:
    coefficients: np.ndarray
    std_errors: np.ndarray
    neg2_log_likelihood: float
    iterations: int
    converged: bool
    n_used: int
    column_names: tuple[str, ...] = ()
    neg2ll_trace: tuple[float, ...] = field(default=(), compare=False)

    @property
    def intercept(self) -> float:
        return float(self.coefficients[0])


@dataclass(frozen=True)
class WaldRow:
    name: str
    B: float
    SE: float
    Wald: float
    df: int
    sig: float
    expB: float


def sigmoid(eta) -> np.ndarray:
    eta = np.asarray(eta, dtype=float)
    out = np.empty_like(eta)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    e = np.exp(eta[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def neg2_log_likelihood(X: np.ndarray, y: np.ndarray, beta: np.ndarray) -> float:
    """-2 log L of a Bernoulli model with logit link, evaluated stably."""
    eta = X @ beta
    # log(1 + e^eta) - y*eta summed, via logaddexp
    return float(2.0 * np.sum(np.logaddexp(0.0, eta) - y * eta))


def _check_binary(y: np.ndarray) -> tuple[int, int]:
    if not np.isin(y, (0, 1)).all():
        raise DataError("targets must be 0/1")
    n1 = int(y.sum())
    n0 = len(y) - n1
    if n0 == 0 or n1 == 0:
        only = "1" if n0 == 0 else "0"
        raise FitError(f"degenerate target: every one of the {len(y)} records has class {only}")
    return n0, n1


def fit_intercept_only(targets: Sequence[int]) -> tuple[LogitFit, WaldRow]:
    """Closed-form baseline: alpha = ln(n1/n0), SE = sqrt(1/n1 + 1/n0)."""
    y = np.asarray(targets, dtype=float)
    n0, n1 = _check_binary(y)
    n = n0 + n1
    alpha = math.log(n1 / n0)
    se = math.sqrt(1.0 / n1 + 1.0 / n0)
    neg2ll = -2.0 * (n1 * math.log(n1 / n) + n0 * math.log(n0 / n))
    fit = LogitFit(np.array([alpha]), np.array([se]), neg2ll, 0, True, n, ("(Intercept)",), (neg2ll,))
    wald = (alpha / se) ** 2
    return fit, WaldRow("Constant", alpha, se, wald, 1, chi_square_survival(wald, 1), math.exp(alpha))


def _collinear_columns(X: np.ndarray, names: Sequence[str]) -> list[str]:
    kept: list[int] = []
    dependent = []
    for j in range(X.shape[1]):
        trial = X[:, kept + [j]]
        if np.linalg.matrix_rank(trial) <= len(kept):
            dependent.append(names[j])
        else:
            kept.append(j)
    return dependent


def _intercept_column(X: np.ndarray) -> int | None:
    for j in range(X.shape[1]):
        if np.all(X[:, j] == 1.0):
            return j
    return None


def _diverging(beta: np.ndarray, intercept_col: int | None) -> bool:
    # the intercept soaks up offsets of unscaled predictors, so only slopes are bounded,
    # unless the model has nothing else
    slopes = np.delete(beta, intercept_col) if intercept_col is not None and len(beta) > 1 else beta
    return bool(np.max(np.abs(slopes)) > DIVERGENCE_BOUND)


def _polish(X, y, beta, dev, max_steps=4):
    # the -2LL stopping rule leaves O(sqrt(tol)) error in beta; finish on the score
    for _ in range(max_steps):
        p = sigmoid(X @ beta)
        grad = X.T @ (y - p)
        if np.max(np.abs(grad)) < 1e-10 * max(1.0, len(y)):
            break
        info = X.T @ (X * (p * (1.0 - p))[:, None])
        try:
            step = np.linalg.solve(info, grad)
        except np.linalg.LinAlgError:
            break
        new_beta = beta + step
        new_dev = neg2_log_likelihood(X, y, new_beta)
        if not np.all(np.isfinite(new_beta)) or new_dev > dev + 1e-9 * max(dev, 1.0):
            break
        beta, dev = new_beta, new_dev
    return beta, dev


def fit_logit_irls(X: DesignMatrix | np.ndarray, y: Sequence[int], tolerance: float = 1e-5,
                   max_iter: int = 20) -> LogitFit:
    """Newton-Raphson maximum likelihood for the logit model.

    Iteration stops once -2LL changes by less than ``tolerance`` relative to
    its previous value; the estimate is then refined by a few extra Newton
    steps on the score, which do not count as iterations. Step halving guards
    against an increase in -2LL. If any slope (or the lone coefficient of an
    intercept-only design) exceeds 25 in magnitude, or an update is
    non-finite, the fit is returned with ``converged=False`` and a
    SeparationWarning.
    """
    if isinstance(X, DesignMatrix):
        names = tuple(X.column_names)
        X = X.values
    else:
        X = np.asarray(X, dtype=float)
        names = tuple(f"x{j}" for j in range(X.shape[1]))
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
        raise FitError("empty design matrix")
    if X.shape[0] != len(y):
        raise DataError(f"design has {X.shape[0]} rows but {len(y)} targets")
    _check_binary(y)
    if np.linalg.matrix_rank(X) < X.shape[1]:
        cols = _collinear_columns(X, names)
        raise SingularDesignError(f"singular information matrix; collinear design columns: {cols}", cols)

    intercept_col = _intercept_column(X)
    beta = np.zeros(X.shape[1])
    dev = neg2_log_likelihood(X, y, beta)
    trace = [dev]
    converged = diverged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        p = sigmoid(X @ beta)
        grad = X.T @ (y - p)
        info = X.T @ (X * (p * (1.0 - p))[:, None])
        try:
            step = np.linalg.solve(info, grad)
        except np.linalg.LinAlgError:
            diverged = True
            break
        if not np.all(np.isfinite(step)):
            diverged = True
            break
        new_beta = beta + step
        new_dev = neg2_log_likelihood(X, y, new_beta)
        halvings = 0
        while new_dev > dev and halvings < 20:
            step /= 2.0
            new_beta = beta + step
            new_dev = neg2_log_likelihood(X, y, new_beta)
            halvings += 1
        beta, old_dev, dev = new_beta, dev, new_dev
        trace.append(dev)
        if not math.isfinite(dev) or _diverging(beta, intercept_col):
            diverged = True
            break
        if abs(old_dev - dev) < tolerance * max(old_dev, np.finfo(float).tiny):
            converged = True
            break

    if diverged:
        warnings.warn(
            f"logistic fit diverged after {iterations} iterations (max |coefficient| "
            f"{np.max(np.abs(beta)):.3g}); the data are (quasi-)separated and the MLE does not exist",
            SeparationWarning, stacklevel=2)
    elif not converged:
        warnings.warn(f"logistic fit did not converge in {max_iter} iterations", ClinstatWarning, stacklevel=2)

    if converged:
        beta, dev = _polish(X, y, beta, dev)
    p = sigmoid(X @ beta)
    info = X.T @ (X * (p * (1.0 - p))[:, None])
    try:
        cov = np.linalg.inv(info)
        se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    except np.linalg.LinAlgError:
        se = np.full(len(beta), np.nan)
    if converged and not np.all(se > 0):
        converged = False
    return LogitFit(beta, se, dev, iterations, converged, len(y), names, tuple(trace))


def predict_prob(fit: LogitFit, X: DesignMatrix | np.ndarray) -> np.ndarray:
    values = X.values if isinstance(X, DesignMatrix) else np.atleast_2d(np.asarray(X, dtype=float))
    if values.shape[1] != len(fit.coefficients):
        raise DataError(f"design has {values.shape[1]} columns, model has {len(fit.coefficients)} coefficients")
    tiny = np.finfo(float).tiny
    return np.clip(sigmoid(values @ fit.coefficients), tiny, 1.0 - np.finfo(float).epsneg)


def wald_statistics(fit: LogitFit) -> list[WaldRow]:
    """Wald chi-square, 1 df, for every coefficient of a converged fit."""
    if not fit.converged:
        raise FitError("Wald statistics are suppressed for a fit that did not converge")
    names = fit.column_names or tuple(f"x{j}" for j in range(len(fit.coefficients)))
    rows = []
    for name, b, se in zip(names, fit.coefficients, fit.std_errors):
        b, se = float(b), float(se)
        wald = (b / se) ** 2
        label = "Constant" if name == "(Intercept)" else name
        rows.append(WaldRow(label, b, se, wald, 1, chi_square_survival(wald, 1), math.exp(b)))
    return rows
