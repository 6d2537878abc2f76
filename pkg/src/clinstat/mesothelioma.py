"""Default schema for the 34-attribute mesothelioma records, and a synthetic stand-in.

The roles mark gender, city, type of MM, keep side, cytology, dyspnoea, ache
on chest, weakness, habit of cigarette, performance status, dead or not and
pleural effusion as categorical; everything else is continuous. With the
level counts produced by :func:`synthesize` this gives 21 continuous columns
plus 22 indicator columns, i.e. 43 model parameters.

:func:`synthesize` produces records with the same columns, the class balance
(228 healthy / 96 mesothelioma over 324 rows), the gender split and roughly
the per-city class shares of the public data set. Its values are simulated,
so fitted numbers will not match an analysis of the real file; it exists so the whole
pipeline can be exercised when the real file is not at hand.

Run ``python -m clinstat.mesothelioma DIR`` to write ``mesothelioma.csv`` and
a matching ``mesothelioma.ini`` into DIR.
"""

from __future__ import annotations

import csv
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .dataset import ColumnSchema, Role

TARGET = "class of diagnosis"
POSITIVE_LABEL = "Mesothelioma"
NEGATIVE_LABEL = "Healthy"
EXCLUDED = ("diagnosis method",)
EXPECTED_PARAMETERS = 43

_C, _N, _O, _F = Role.CONTINUOUS, Role.NOMINAL, Role.ORDINAL, Role.FLAG

COLUMNS: tuple[tuple[str, Role], ...] = (
    ("age", _C),
    ("gender", _F),
    ("city", _N),
    ("asbestos exposure", _C),
    ("type of MM", _N),
    ("duration of asbestos exposure", _C),
    ("diagnosis method", _C),
    ("keep side", _N),
    ("cytology", _F),
    ("duration of symptoms", _C),
    ("dyspnoea", _F),
    ("ache on chest", _F),
    ("weakness", _F),
    ("habit of cigarette", _O),
    ("performance status", _O),
    ("white blood", _C),
    ("cell count (WBC)", _C),
    ("hemoglobin (HGB)", _C),
    ("platelet count (PLT)", _C),
    ("sedimentation", _C),
    ("blood lactic dehydrogenise (LDH)", _C),
    ("alkaline phosphatise (ALP)", _C),
    ("total protein", _C),
    ("albumin", _C),
    ("glucose", _C),
    ("pleural lactic dehydrogenise", _C),
    ("pleural protein", _C),
    ("pleural albumin", _C),
    ("pleural glucose", _C),
    ("dead or not", _F),
    ("pleural effusion", _F),
    ("pleural thickness on tomography", _C),
    ("pleural level of acidity (pH)", _C),
    ("C-reactive protein (CRP)", _C),
    (TARGET, Role.TARGET),
)

DEFAULT_SCHEMA: tuple[ColumnSchema, ...] = tuple(ColumnSchema(name, role) for name, role in COLUMNS)

# (healthy, mesothelioma) patients per city 0..8
CITY_COUNTS = ((71, 29), (36, 6), (32, 19), (13, 13), (16, 6), (4, 2), (45, 17), (9, 3), (2, 1))


def synthesize(seed: int = 2018) -> list[dict[str, object]]:
    """Simulated records keyed by column name (target as text labels)."""
    rng = np.random.default_rng(seed)
    records = []
    for city, counts in enumerate(CITY_COUNTS):
        for cls, count in enumerate(counts):
            for _ in range(count):
                records.append(_record(rng, city, bool(cls)))
    order = rng.permutation(len(records))
    return [records[i] for i in order]


def _flag(rng, p):
    return int(rng.random() < p)


def _clip(v, lo, hi, digits=1):
    return round(float(min(max(v, lo), hi)), digits)


def _record(rng: np.random.Generator, city: int, meso: bool) -> dict[str, object]:
    r: dict[str, object] = {}
    r["age"] = int(_clip(rng.normal(55 if meso else 53, 11), 19, 85, 0))
    r["gender"] = _flag(rng, 0.62 if meso else 0.57)
    r["city"] = city
    r["asbestos exposure"] = _flag(rng, 0.93 if meso else 0.82)
    r["type of MM"] = int(rng.random() < 0.35)
    r["duration of asbestos exposure"] = _clip(rng.normal(33 if meso else 30, 14), 0, 70, 0)
    r["diagnosis method"] = int(meso)
    r["keep side"] = int(rng.choice(3, p=[0.45, 0.35, 0.20]))
    r["cytology"] = _flag(rng, 0.45 if meso else 0.30)
    r["duration of symptoms"] = _clip(rng.gamma(2.0, 2.2), 0.5, 24, 1)
    r["dyspnoea"] = _flag(rng, 0.85 if meso else 0.55)
    r["ache on chest"] = _flag(rng, 0.60 if meso else 0.50)
    r["weakness"] = _flag(rng, 0.80 if meso else 0.42)
    r["habit of cigarette"] = int(rng.choice(4, p=[0.30, 0.30, 0.25, 0.15]))
    r["performance status"] = _flag(rng, 0.40)
    r["white blood"] = _clip(rng.normal(8400, 2600), 2400, 19000, 0)
    wbc = rng.normal(9.4, 1.2) if meso and rng.random() < 0.8 else rng.normal(9.5, 3.6)
    r["cell count (WBC)"] = _clip(wbc, 4.0, 22.0, 2)
    r["hemoglobin (HGB)"] = _clip(rng.normal(12.0, 1.8), 6.5, 17.0, 1)
    r["platelet count (PLT)"] = _clip(rng.normal(330 if meso else 310, 110), 80, 800, 0)
    r["sedimentation"] = _clip(rng.normal(52, 24), 2, 120, 0)
    r["blood lactic dehydrogenise (LDH)"] = _clip(rng.normal(300, 120), 80, 900, 0)
    r["alkaline phosphatise (ALP)"] = _clip(rng.normal(110, 45), 30, 300, 0)
    r["total protein"] = _clip(rng.normal(6.6, 0.9), 3.5, 9.0, 2)
    r["albumin"] = _clip(rng.normal(3.2, 0.6), 1.0, 5.0, 2)
    r["glucose"] = _clip(rng.normal(105, 35), 40, 300, 0)
    r["pleural lactic dehydrogenise"] = _clip(rng.normal(560, 400), 20, 3500, 0)
    r["pleural protein"] = _clip(rng.normal(3.8, 1.4), 0.2, 7.0, 2)
    alb = rng.normal(2.2, 0.28) if meso and rng.random() < 0.8 else rng.normal(2.0, 0.95)
    r["pleural albumin"] = _clip(alb, 0.0, 4.4, 2)
    r["pleural glucose"] = _clip(rng.normal(85, 40), 5, 250, 0)
    r["dead or not"] = _flag(rng, 0.50 if meso else 0.45)
    r["pleural effusion"] = _flag(rng, 0.75 if meso else 0.65)
    r["pleural thickness on tomography"] = _flag(rng, 0.30 if meso else 0.22)
    r["pleural level of acidity (pH)"] = _flag(rng, 0.45)
    r["C-reactive protein (CRP)"] = _clip(rng.normal(70 if meso else 55, 40), 1, 200, 0)
    r[TARGET] = POSITIVE_LABEL if meso else NEGATIVE_LABEL
    return r


def write_csv(path: str | Path, records: list[dict[str, object]] | None = None, seed: int = 2018) -> Path:
    records = synthesize(seed) if records is None else records
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=[name for name, _ in COLUMNS], lineterminator="\n")
        writer.writeheader()
        writer.writerows(records)
    return path


def default_config_text() -> str:
    return resources.files("clinstat").joinpath("data/mesothelioma.ini").read_text(encoding="utf-8")


def write_example(directory: str | Path, seed: int = 2018) -> tuple[Path, Path]:
    """Write the synthetic CSV and the default config next to each other."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    csv_path = write_csv(directory / "mesothelioma.csv", seed=seed)
    ini_path = directory / "mesothelioma.ini"
    ini_path.write_text(default_config_text(), encoding="utf-8")
    return csv_path, ini_path


if __name__ == "__main__":
    target = sys.argv[1] if len(sys.argv) > 1 else "."
    for p in write_example(target):
        print(p)
