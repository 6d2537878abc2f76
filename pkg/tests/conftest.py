import csv
from pathlib import Path

import numpy as np
import pytest

from clinstat.dataset import ColumnSchema, Role, encode_target, load_csv
from clinstat.mesothelioma import write_example

# acceptance outcomes, filled by test_acceptance and printed after the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


SMALL_SCHEMA = (
    ColumnSchema("age", Role.CONTINUOUS),
    ColumnSchema("smoker", Role.FLAG),
    ColumnSchema("side", Role.NOMINAL, ("left", "right", "both")),
    ColumnSchema("grade", Role.ORDINAL),
    ColumnSchema("label", Role.TARGET),
)


def write_rows(path: Path, header, rows) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return path


def small_rows(n=60, seed=0):
    rng = np.random.default_rng(seed)
    rows = []
    for _ in range(n):
        age = int(rng.integers(20, 80))
        smoker = int(rng.random() < 0.4)
        side = ["left", "right", "both"][int(rng.integers(0, 3))]
        grade = int(rng.integers(0, 3))
        eta = -3.0 + 0.04 * age + 0.8 * smoker
        label = "yes" if rng.random() < 1 / (1 + np.exp(-eta)) else "no"
        rows.append([age, smoker, side, grade, label])
    return rows


@pytest.fixture
def small_csv(tmp_path):
    return write_rows(tmp_path / "small.csv", [c.name for c in SMALL_SCHEMA], small_rows())


@pytest.fixture
def small_ds(small_csv):
    return encode_target(load_csv(small_csv, SMALL_SCHEMA), "yes", "no")


@pytest.fixture(scope="session")
def meso_example(tmp_path_factory):
    """Synthetic mesothelioma CSV plus the default config, written once."""
    return write_example(tmp_path_factory.mktemp("meso"))
