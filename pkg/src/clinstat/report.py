"""Model files and analysis reports.

A model file is one UTF-8 JSON document::

    {
      "format_version": 1,
      "schema_fingerprint": "<sha256 of the column names, roles and levels>",
      "design_terms": [{"name", "source", "kind", "level"}, ...],
      "coefficients": [...], "std_errors": [...],
      "neg2ll_null": float, "neg2ll_model": float, "n_used": int,
      "iterations": int, "converged": bool,
      "binning": [{"column", "k_bins", "edges"}, ...],
      "mining_config": {...} | null,
      "metadata": {"tool_version", "seeds", ...}
    }

Floats are written with Python's shortest round-trip repr, so loading a
saved file reproduces every number bit for bit.

A report is an ordered list of sections, each a small table whose cells keep
the full-precision value next to the rendered text.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .dataset import BinningSpec, ColumnSchema
from .errors import ArtifactError, SchemaMismatchWarning
from .logit import DesignTerm
from .rules import MiningConfig

FORMAT_VERSION = 1


def schema_fingerprint(schema: Sequence[ColumnSchema]) -> str:
    canon = [[c.name, c.role.value, list(c.declared_levels) if c.declared_levels else None] for c in schema]
    return hashlib.sha256(json.dumps(canon, ensure_ascii=False).encode("utf-8")).hexdigest()


@dataclass
class ModelArtifact:
    schema_fingerprint: str
    design_terms: list[DesignTerm]
    coefficients: list[float]
    std_errors: list[float]
    neg2ll_null: float
    neg2ll_model: float
    n_used: int
    iterations: int = 0
    converged: bool = True
    binning: list[BinningSpec] = field(default_factory=list)
    mining_config: MiningConfig | None = None
    metadata: dict[str, Any] = field(default_factory=dict)
    format_version: int = FORMAT_VERSION

    @property
    def design_columns(self) -> list[str]:
        return [t.name for t in self.design_terms]

    def to_dict(self) -> dict:
        return {
            "format_version": self.format_version,
            "schema_fingerprint": self.schema_fingerprint,
            "design_terms": [t.to_dict() for t in self.design_terms],
            "coefficients": [float(v) for v in self.coefficients],
            "std_errors": [float(v) for v in self.std_errors],
            "neg2ll_null": float(self.neg2ll_null),
            "neg2ll_model": float(self.neg2ll_model),
            "n_used": int(self.n_used),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "binning": [b.to_dict() for b in self.binning],
            "mining_config": self.mining_config.to_dict() if self.mining_config else None,
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ModelArtifact":
        try:
            art = cls(
                schema_fingerprint=str(data["schema_fingerprint"]),
                design_terms=[DesignTerm.from_dict(t) for t in data["design_terms"]],
                coefficients=[float(v) for v in data["coefficients"]],
                std_errors=[float(v) for v in data["std_errors"]],
                neg2ll_null=float(data["neg2ll_null"]),
                neg2ll_model=float(data["neg2ll_model"]),
                n_used=int(data["n_used"]),
                iterations=int(data.get("iterations", 0)),
                converged=bool(data.get("converged", True)),
                binning=[BinningSpec.from_dict(b) for b in data.get("binning", [])],
                mining_config=MiningConfig.from_dict(data["mining_config"]) if data.get("mining_config") else None,
                metadata=dict(data.get("metadata", {})),
                format_version=int(data["format_version"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ArtifactError(f"malformed model document: {exc!r}") from exc
        if len(art.coefficients) != len(art.design_terms) or len(art.std_errors) != len(art.design_terms):
            raise ArtifactError("coefficient, standard error and design term counts disagree")
        return art


def _atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def save_model(artifact: ModelArtifact, path: str | Path) -> None:
    text = json.dumps(artifact.to_dict(), indent=2, ensure_ascii=False, allow_nan=True) + "\n"
    try:
        _atomic_write(Path(path), text)
    except OSError as exc:
        raise ArtifactError(f"cannot write model file {path}: {exc}") from exc


def load_model(path: str | Path, schema: Sequence[ColumnSchema] | None = None, strict: bool = False) -> ModelArtifact:
    """Read a model file; a schema fingerprint mismatch warns, or raises when ``strict``."""
    try:
        text = Path(path).read_bytes().decode("utf-8")
    except OSError as exc:
        raise ArtifactError(f"cannot read model file {path}: {exc}") from None
    except UnicodeDecodeError as exc:
        raise ArtifactError(f"{path}: not UTF-8 at byte {exc.start}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[:exc.pos].encode("utf-8"))
        raise ArtifactError(f"{path}: invalid JSON at byte {offset}: {exc.msg}") from None
    if not isinstance(data, dict) or "format_version" not in data:
        raise ArtifactError(f"{path}: not a model document (no format_version)")
    if data["format_version"] != FORMAT_VERSION:
        raise ArtifactError(f"{path}: unsupported format_version {data['format_version']}")
    art = ModelArtifact.from_dict(data)
    if schema is not None and schema_fingerprint(schema) != art.schema_fingerprint:
        message = f"{path}: model was saved with a different schema"
        if strict:
            raise ArtifactError(message)
        warnings.warn(message, SchemaMismatchWarning, stacklevel=2)
    return art


# ---------------------------------------------------------------- reports

def fmt_pct(v: float) -> str:
    return "" if v is None or (isinstance(v, float) and math.isnan(v)) else f"{v:.2f}%"


def fmt3(v: float) -> str:
    return "" if v is None or (isinstance(v, float) and math.isnan(v)) else f"{v:.3f}"


def fmt_p(v: float) -> str:
    """Three decimals; "0.000" reads as below 0.0005."""
    return fmt3(v)


@dataclass(frozen=True)
class Cell:
    value: Any
    text: str

    def to_json(self):
        value = self.value
        if isinstance(value, float) and not math.isfinite(value):
            value = None
        return {"value": value, "text": self.text}


def cell(value, fmt=None) -> Cell:
    if isinstance(value, Cell):
        return value
    if fmt is not None:
        return Cell(value, fmt(value))
    if isinstance(value, bool) or value is None:
        return Cell(value, "" if value is None else str(value))
    if isinstance(value, int):
        return Cell(value, str(value))
    if isinstance(value, float):
        return Cell(value, fmt3(value))
    return Cell(value, str(value))


@dataclass(frozen=True)
class Section:
    name: str
    title: str
    header: tuple[str, ...]
    rows: tuple[tuple[Cell, ...], ...]
    notes: tuple[str, ...] = ()

    def to_json(self) -> dict:
        return {
            "title": self.title,
            "header": list(self.header),
            "rows": [[c.to_json() for c in row] for row in self.rows],
            "notes": list(self.notes),
        }


def make_section(name, title, header, rows, notes=()) -> Section:
    return Section(name, title, tuple(header), tuple(tuple(cell(v) for v in row) for row in rows), tuple(notes))


SECTION_ORDER = (
    "partition_summary", "case_processing", "dependent_encoding", "predictor_screen",
    "baseline_classification", "variables_in_equation", "omnibus", "model_summary",
    "hosmer_lemeshow", "new_model_classification", "train_test_comparison",
    "evaluation_matrix", "rule_statistics", "top_rules",
)


@dataclass(frozen=True)
class ReportDocument:
    sections: tuple[Section, ...]
    metadata: dict = field(default_factory=dict)
    strict: bool = field(default=True, compare=False)

    def __post_init__(self):
        if not self.strict:
            object.__setattr__(self, "sections", tuple(self.sections))
            return
        rank = {name: i for i, name in enumerate(SECTION_ORDER)}
        unknown = [s.name for s in self.sections if s.name not in rank]
        if unknown:
            raise ValueError(f"unknown report sections: {unknown}")
        ordered = tuple(sorted(self.sections, key=lambda s: rank[s.name]))
        object.__setattr__(self, "sections", ordered)

    def section(self, name: str) -> Section:
        for s in self.sections:
            if s.name == name:
                return s
        raise KeyError(name)

    def to_json(self) -> dict:
        return {"metadata": self.metadata, "sections": {s.name: s.to_json() for s in self.sections}}


def render_sections(sections: Sequence[Section], format: str = "text") -> bytes:
    """Render free-standing sections (e.g. cross-tabulations) outside a report."""
    return render_report(ReportDocument(tuple(sections), strict=False), format)


def _render_text(doc: ReportDocument) -> str:
    out = []
    for s in doc.sections:
        out.append(s.title)
        out.append("=" * len(s.title))
        if not s.rows:
            if not s.notes:
                out.append("(empty)")
        else:
            table = [list(s.header)] + [[c.text for c in row] for row in s.rows]
            widths = [max(len(r[j]) for r in table) for j in range(len(s.header))]
            for i, row in enumerate(table):
                line = "  ".join(t.ljust(w) if j == 0 else t.rjust(w) for j, (t, w) in enumerate(zip(row, widths)))
                out.append(line.rstrip())
                if i == 0:
                    out.append("  ".join("-" * w for w in widths))
        for note in s.notes:
            out.append(f"  {note}")
        out.append("")
    return "\n".join(out)


def _render_csv(doc: ReportDocument) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for s in doc.sections:
        writer.writerow([f"# {s.name}", s.title])
        writer.writerow(s.header)
        for row in s.rows:
            writer.writerow([c.text for c in row])
        for note in s.notes:
            writer.writerow([f"# note: {note}"])
        writer.writerow([])
    return buf.getvalue()


def render_report(doc: ReportDocument, format: str = "text") -> bytes:
    if format == "text":
        text = _render_text(doc)
    elif format == "json":
        text = json.dumps(doc.to_json(), indent=2, ensure_ascii=False) + "\n"
    elif format == "csv":
        text = _render_csv(doc)
    else:
        raise ValueError(f"unknown report format {format!r}; expected text, json or csv")
    return text.encode("utf-8")


def write_report(doc: ReportDocument, path: str | Path, format: str = "text") -> None:
    _atomic_write(Path(path), render_report(doc, format).decode("utf-8"))


def default_metadata(**extra) -> dict:
    return {"tool_version": __version__, **extra}
