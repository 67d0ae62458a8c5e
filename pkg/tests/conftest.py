import csv

import numpy as np
import pytest

from evidential.bootstrap import CellLayout
from evidential.io import bundled_path
from evidential.linear_model import build_two_way_design, fit


def citrus_yield():
    with bundled_path().open(encoding="utf-8", newline="") as fh:
        return np.array([float(row["yield"]) for row in csv.DictReader(fh)])


@pytest.fixture(scope="session")
def citrus():
    """Citrus yields with the 3 x 4 interaction design and its interaction test."""
    y = citrus_yield()
    X, spec = build_two_way_design(3, 4, 2, names=("variety", "pesticide"))
    layout = CellLayout.from_counts(np.full((3, 4), 2))
    return {"y": y, "X": X, "spec": spec, "fit": fit(X, y), "layout": layout}


ACCEPTANCE_LINES = []


def record(criterion, passed, detail):
    """Register one acceptance line; printed in the terminal summary."""
    line = f"{'PASS' if passed else 'FAIL'}  criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
