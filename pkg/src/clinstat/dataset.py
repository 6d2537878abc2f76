"""Tabular dataset loading, target encoding, partitioning, balancing and binning.

Cells are held column-wise in numpy arrays. Continuous and flag columns are
float arrays with ``nan`` marking a missing cell; nominal and ordinal columns
are float arrays of integer codes ``1..L`` (``nan`` when missing) whose labels
live in :attr:`Dataset.levels`. The target column keeps its raw text labels
until :func:`encode_target` recodes it to an integer 0/1 array.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import DataError


class Role(str, enum.Enum):
    CONTINUOUS = "continuous"
    NOMINAL = "nominal"
    ORDINAL = "ordinal"
    FLAG = "flag"
    TARGET = "target"

    @property
    def categorical(self) -> bool:
        return self in (Role.NOMINAL, Role.ORDINAL)


@dataclass(frozen=True)
class ColumnSchema:
    name: str
    role: Role
    declared_levels: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "role", Role(self.role))
        if self.declared_levels is not None:
            levels = tuple(str(v) for v in self.declared_levels)
            object.__setattr__(self, "declared_levels", levels)
            if self.role in (Role.CONTINUOUS, Role.TARGET):
                raise DataError(f"column {self.name!r}: levels cannot be declared for role {self.role.value}")
            if not levels or any(not v for v in levels):
                raise DataError(f"column {self.name!r}: declared levels must be non-empty")
            if len(set(levels)) != len(levels):
                raise DataError(f"column {self.name!r}: declared levels are not unique")
            if self.role is Role.FLAG and len(levels) != 2:
                raise DataError(f"flag column {self.name!r} needs exactly two levels (false, true)")


def validate_schema(schema: Sequence[ColumnSchema]) -> tuple[ColumnSchema, ...]:
    schema = tuple(schema)
    names = [c.name for c in schema]
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise DataError(f"duplicate column names in schema: {dupes}")
    targets = [c.name for c in schema if c.role is Role.TARGET]
    if len(targets) != 1:
        raise DataError(f"schema must have exactly one target column, found {len(targets)}")
    return schema


@dataclass(frozen=True)
class Dataset:
    schema: tuple[ColumnSchema, ...]
    columns: Mapping[str, np.ndarray]
    levels: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    class_labels: tuple[str, str] | None = None

    @property
    def n_rows(self) -> int:
        return len(self.columns[self.target_name])

    @property
    def target_name(self) -> str:
        return next(c.name for c in self.schema if c.role is Role.TARGET)

    @property
    def encoded(self) -> bool:
        return self.class_labels is not None

    @property
    def target(self) -> np.ndarray:
        if not self.encoded:
            raise DataError("target column has not been encoded; call encode_target first")
        return self.columns[self.target_name]

    def column(self, name: str) -> ColumnSchema:
        for col in self.schema:
            if col.name == name:
                return col
        raise DataError(f"unknown column {name!r}")

    def predictors(self, exclude: Sequence[str] = ()) -> list[ColumnSchema]:
        for name in exclude:
            self.column(name)
        return [c for c in self.schema if c.role is not Role.TARGET and c.name not in exclude]

    def complete_rows(self, indices: Sequence[int] | None = None, exclude: Sequence[str] = ()) -> np.ndarray:
        """Indices among ``indices`` with no missing cell in any used predictor."""
        idx = np.arange(self.n_rows) if indices is None else np.asarray(indices, dtype=np.int64)
        ok = np.ones(len(idx), dtype=bool)
        for col in self.predictors(exclude):
            ok &= ~np.isnan(self.columns[col.name][idx])
        return idx[ok]


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def _parse_float(text: str, row: int, name: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"row {row}, column {name!r}: cannot parse {text!r} as a number") from None
    if not math.isfinite(value):
        raise DataError(f"row {row}, column {name!r}: non-finite value {text!r}")
    return value


def load_csv(path: str | Path, schema: Sequence[ColumnSchema], require_target: bool = True) -> Dataset:
    """Read a comma-separated file whose header names exactly the schema columns.

    Empty fields are missing. Row numbers in error messages count the header
    as row 1, matching what a spreadsheet shows. With ``require_target=False``
    the target column may be absent (files to be scored); it is then left
    blank.
    """
    schema = validate_schema(schema)
    try:
        with open(path, newline="", encoding="utf-8-sig") as fh:
            reader = csv.reader(fh)
            try:
                header = [h.strip() for h in next(reader)]
            except StopIteration:
                raise DataError(f"{path}: file is empty (no header)") from None
            records = [row for row in reader if any(cell.strip() for cell in row)]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None

    dupes = sorted({h for h in header if header.count(h) > 1})
    if dupes:
        raise DataError(f"{path}: duplicate column names in header: {dupes}")
    expected = {c.name for c in schema}
    target_name = next(c.name for c in schema if c.role is Role.TARGET)
    absent_target = not require_target and target_name not in header
    if absent_target:
        expected.discard(target_name)
    missing, extra = sorted(expected - set(header)), sorted(set(header) - expected)
    if missing or extra:
        raise DataError(f"{path}: header mismatch; missing {missing}, unexpected {extra}")

    position = {name: i for i, name in enumerate(header)}
    for lineno, row in enumerate(records, start=2):
        if len(row) != len(header):
            raise DataError(f"{path}: row {lineno} has {len(row)} fields, expected {len(header)}")

    columns: dict[str, np.ndarray] = {}
    levels: dict[str, tuple[str, ...]] = {}
    for col in schema:
        if col.role is Role.TARGET and absent_target:
            columns[col.name] = _freeze(np.array([""] * len(records), dtype=object))
            continue
        raw = [row[position[col.name]].strip() for row in records]
        if col.role is Role.TARGET:
            blanks = [i + 2 for i, v in enumerate(raw) if not v]
            if blanks and require_target:
                raise DataError(f"{path}: target {col.name!r} is missing at rows {blanks[:10]}")
            columns[col.name] = _freeze(np.array(raw, dtype=object))
        elif col.role is Role.CONTINUOUS:
            values = [math.nan if not v else _parse_float(v, i + 2, col.name) for i, v in enumerate(raw)]
            columns[col.name] = _freeze(np.array(values, dtype=float))
        elif col.role is Role.FLAG:
            columns[col.name] = _freeze(_parse_flag(raw, col))
        else:
            codes, labels = _parse_categorical(raw, col)
            columns[col.name] = _freeze(codes)
            levels[col.name] = labels
    return Dataset(schema=schema, columns=columns, levels=levels)


def _parse_flag(raw: list[str], col: ColumnSchema) -> np.ndarray:
    out = np.full(len(raw), np.nan)
    for i, v in enumerate(raw):
        if not v:
            continue
        if col.declared_levels is not None:
            if v not in col.declared_levels:
                raise DataError(f"row {i + 2}, column {col.name!r}: {v!r} is not one of {list(col.declared_levels)}")
            out[i] = float(col.declared_levels.index(v))
        else:
            value = _parse_float(v, i + 2, col.name)
            if value not in (0.0, 1.0):
                raise DataError(f"row {i + 2}, flag column {col.name!r}: expected 0 or 1, got {v!r}")
            out[i] = value
    return out


def _parse_categorical(raw: list[str], col: ColumnSchema) -> tuple[np.ndarray, tuple[str, ...]]:
    """Code categorical cells as consecutive integers from 1.

    Undeclared columns must hold non-negative numbers; decimals are truncated
    and the sorted distinct values become levels ``1..L``.
    """
    out = np.full(len(raw), np.nan)
    if col.declared_levels is not None:
        lookup = {label: k + 1 for k, label in enumerate(col.declared_levels)}
        for i, v in enumerate(raw):
            if not v:
                continue
            if v not in lookup:
                raise DataError(f"row {i + 2}, column {col.name!r}: {v!r} is not a declared level")
            out[i] = lookup[v]
        return out, col.declared_levels

    ints: list[int | None] = []
    for i, v in enumerate(raw):
        if not v:
            ints.append(None)
            continue
        value = _parse_float(v, i + 2, col.name)
        if value < 0:
            raise DataError(f"row {i + 2}, column {col.name!r}: categorical values cannot be negative ({v!r})")
        ints.append(int(value))
    observed = sorted({v for v in ints if v is not None})
    code = {v: k + 1 for k, v in enumerate(observed)}
    for i, v in enumerate(ints):
        if v is not None:
            out[i] = code[v]
    return out, tuple(str(v) for v in observed)


def encode_target(ds: Dataset, positive_label: str, negative_label: str) -> Dataset:
    """Recode the target so ``negative_label`` becomes 0 and ``positive_label`` 1."""
    positive_label, negative_label = str(positive_label), str(negative_label)
    if positive_label == negative_label:
        raise DataError("positive and negative labels must differ")
    raw = [str(v) for v in ds.columns[ds.target_name]]
    bad = [i for i, v in enumerate(raw) if v not in (positive_label, negative_label)]
    if bad:
        shown = ", ".join(f"{i} ({raw[i]!r})" for i in bad[:10])
        raise DataError(f"target {ds.target_name!r} has labels other than {negative_label!r}/{positive_label!r} at rows {shown}")
    present = set(raw)
    for label in (negative_label, positive_label):
        if ds.n_rows and label not in present:
            raise DataError(f"target label {label!r} does not occur in the data")
    encoded = np.array([1 if v == positive_label else 0 for v in raw], dtype=np.int64)
    columns = dict(ds.columns)
    columns[ds.target_name] = _freeze(encoded)
    return replace(ds, columns=columns, class_labels=(negative_label, positive_label))


@dataclass(frozen=True)
class PartitionIndex:
    train_indices: tuple[int, ...]
    test_indices: tuple[int, ...]
    seed: int

    def to_dict(self) -> dict:
        return {"seed": self.seed, "train_indices": list(self.train_indices), "test_indices": list(self.test_indices)}

    @classmethod
    def from_dict(cls, data: dict) -> "PartitionIndex":
        return cls(tuple(data["train_indices"]), tuple(data["test_indices"]), int(data["seed"]))


def partition(ds: Dataset, train_fraction: float, seed: int) -> PartitionIndex:
    """Seeded uniform random train/test split; the train size is rounded half up."""
    if not 0 < train_fraction < 1:
        raise DataError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    n = ds.n_rows
    if n < 2:
        raise DataError(f"cannot partition {n} rows")
    n_train = min(max(int(math.floor(train_fraction * n + 0.5)), 1), n - 1)
    perm = np.random.default_rng(seed).permutation(n)
    train = sorted(int(i) for i in perm[:n_train])
    test = sorted(int(i) for i in perm[n_train:])
    return PartitionIndex(tuple(train), tuple(test), int(seed))


def undersample(ds: Dataset, indices: Sequence[int], seed: int) -> list[int]:
    """Drop majority-class rows at random until both classes have the minority count."""
    idx = np.asarray(indices, dtype=np.int64)
    y = ds.target[idx]
    pos, neg = idx[y == 1], idx[y == 0]
    if len(pos) == 0 or len(neg) == 0:
        raise DataError("undersampling needs both classes among the given rows")
    minority, majority = (pos, neg) if len(pos) <= len(neg) else (neg, pos)
    kept = np.random.default_rng(seed).choice(majority, size=len(minority), replace=False)
    return sorted(int(i) for i in np.concatenate([minority, kept]))


@dataclass(frozen=True)
class BinningSpec:
    column: str
    k_bins: int
    edges: tuple[float, ...]

    def assign(self, values) -> np.ndarray:
        """Bin index per value; -1 for missing. Out-of-range values clip to the end bins."""
        values = np.asarray(values, dtype=float)
        inner = np.asarray(self.edges[1:-1])
        out = np.searchsorted(inner, values, side="right")
        return np.where(np.isnan(values), -1, out)

    def label(self, b: int) -> str:
        lo, hi = self.edges[b], self.edges[b + 1]
        upper = "≤" if b == self.k_bins - 1 else "<"
        return f"{lo:.3f} ≤ {self.column} {upper} {hi:.3f}"

    def to_dict(self) -> dict:
        return {"column": self.column, "k_bins": self.k_bins, "edges": list(self.edges)}

    @classmethod
    def from_dict(cls, data: dict) -> "BinningSpec":
        return cls(data["column"], int(data["k_bins"]), tuple(float(e) for e in data["edges"]))


def discretize_equal_width(ds: Dataset, column: str, k_bins: int = 5,
                           indices: Sequence[int] | None = None) -> BinningSpec:
    col = ds.column(column)
    if col.role is not Role.CONTINUOUS:
        raise DataError(f"column {column!r} is {col.role.value}, not continuous")
    if k_bins < 2:
        raise DataError(f"k_bins must be at least 2, got {k_bins}")
    values = ds.columns[column] if indices is None else ds.columns[column][np.asarray(indices, dtype=np.int64)]
    values = values[~np.isnan(values)]
    if len(np.unique(values)) < 2:
        raise DataError(f"column {column!r} needs at least two distinct values to bin")
    lo, hi = float(values.min()), float(values.max())
    edges = np.linspace(lo, hi, k_bins + 1)
    edges[0], edges[-1] = lo, hi
    return BinningSpec(column, int(k_bins), tuple(float(e) for e in edges))


@dataclass(frozen=True)
class CrossTabRow:
    level: str
    count_negative: int
    count_positive: int
    pct_negative: float
    pct_positive: float

    @property
    def total(self) -> int:
        return self.count_negative + self.count_positive


@dataclass(frozen=True)
class CrossTab:
    column: str
    class_labels: tuple[str, str]
    rows: tuple[CrossTabRow, ...]
    n: int


def summarize_crosstab(ds: Dataset, by: str, indices: Sequence[int] | None = None,
                       binning: BinningSpec | None = None) -> CrossTab:
    """Counts of each target class per level of ``by``, with percentages of all rows."""
    col = ds.column(by)
    idx = np.arange(ds.n_rows) if indices is None else np.asarray(indices, dtype=np.int64)
    values = ds.columns[by][idx]
    y = ds.target[idx]
    if col.role is Role.TARGET:
        raise DataError("cannot cross-tabulate the target against itself")
    if col.role is Role.CONTINUOUS:
        if binning is None:
            raise DataError(f"continuous column {by!r} needs a BinningSpec to cross-tabulate")
        codes = binning.assign(values)
        labels = [binning.label(b) for b in range(binning.k_bins)]
    elif col.role is Role.FLAG:
        codes = np.where(np.isnan(values), -1, values).astype(int)
        labels = list(col.declared_levels or ("0", "1"))
    else:
        codes = np.where(np.isnan(values), 0, values).astype(int) - 1
        labels = list(ds.levels[by])

    n = len(idx)
    rows = []

    def make(level, mask):
        c0, c1 = int(np.sum(mask & (y == 0))), int(np.sum(mask & (y == 1)))
        return CrossTabRow(level, c0, c1, 100.0 * c0 / n if n else 0.0, 100.0 * c1 / n if n else 0.0)

    for code, label in enumerate(labels):
        mask = codes == code
        if col.role is Role.CONTINUOUS or mask.any():
            rows.append(make(label, mask))
    if (codes < 0).any():
        rows.append(make("(missing)", codes < 0))
    return CrossTab(by, ds.class_labels, tuple(rows), n)
