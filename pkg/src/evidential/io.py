"""CSV ingestion and design construction for the command-line tool.

Factor columns are coded with one indicator per level except the last, which
serves as the reference.  Levels are ordered by first appearance in the file,
so the bundled citrus data code exactly like ``build_two_way_design(3, 4, 2)``.
"""

import csv
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .bootstrap import CellLayout
from .errors import DataLoadError, SpecError
from .linear_model import ComparisonSpec, DesignMatrix, ResponseVector

CITRUS = "citrus.csv"
INTERCEPT = "(Intercept)"


def bundled_path(name=CITRUS):
    return resources.files("evidential").joinpath("data", name)


@dataclass(frozen=True)
class AnalysisConfig:
    """Everything a command needs to turn a CSV file into a nested comparison.

    ``test`` is ``"interaction"``, ``"drop:<term>,<term>"`` or
    ``"contrast:<path>"``.  A drop term is a design column label, a factor
    name (all its indicator columns) or ``a:b`` (the interaction block).
    """

    data: str = CITRUS
    response: str = "yield"
    factors: tuple = ("variety", "pesticide")
    covariates: tuple = ()
    test: str = "interaction"
    interactions: bool = False
    deltas: tuple = (0.5,)
    gamma1: float = 0.05
    gamma2: float = 0.05
    n_boot: int = 1024
    seed: int = 0
    ci_level: float = 0.90
    out: str = None

    def __post_init__(self):
        for d in self.deltas:
            if not (math.isfinite(d) and d >= 0):
                raise SpecError(f"delta must be finite and >= 0, got {d!r}")
        for name in ("gamma1", "gamma2"):
            g = getattr(self, name)
            if not 0.0 < g < 1.0:
                raise SpecError(f"{name} must lie in (0, 1), got {g!r}")
        if not 0.0 < self.ci_level < 1.0:
            raise SpecError(f"ci level must lie in (0, 1), got {self.ci_level!r}")
        if self.n_boot < 1:
            raise SpecError(f"number of bootstrap replicates must be >= 1, got {self.n_boot}")

    @property
    def wants_interaction(self):
        return self.interactions or self.test == "interaction"


@dataclass(frozen=True, eq=False)
class LoadedData:
    X: DesignMatrix
    y: ResponseVector
    layout: CellLayout
    spec: ComparisonSpec
    terms: dict
    source: str


def resolve_data_path(path):
    """The given path, or the bundled copy when a missing path names a bundled file."""
    p = Path(path)
    if p.exists():
        return p
    bundled = bundled_path(p.name)
    if bundled.is_file():
        return bundled
    raise DataLoadError(f"data file not found: {path}")


def read_table(path, min_rows=2):
    """Header plus rows of a comma-separated file, as strings."""
    p = resolve_data_path(path)
    try:
        with p.open("r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            rows = [row for row in reader if any(cell.strip() for cell in row)]
    except UnicodeDecodeError as exc:
        raise DataLoadError(f"{path}: not UTF-8 text ({exc})") from exc
    except csv.Error as exc:
        raise DataLoadError(f"{path}: malformed CSV ({exc})") from exc
    if not header:
        raise DataLoadError(f"{path}: missing header row")
    header = [h.strip() for h in header]
    if len(set(header)) != len(header):
        raise DataLoadError(f"{path}: duplicate column names in header")
    for i, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise DataLoadError(f"{path}, line {i}: expected {len(header)} fields, found {len(row)}")
    if len(rows) < min_rows:
        raise DataLoadError(f"{path}: need at least {min_rows} data row(s), found {len(rows)}")
    return header, [[c.strip() for c in row] for row in rows], str(p)


def _column(header, rows, name, path):
    if name not in header:
        raise DataLoadError(f"{path}: no column named {name!r} (have {', '.join(header)})")
    j = header.index(name)
    values = [row[j] for row in rows]
    for i, v in enumerate(values, start=2):
        if v == "" or v.upper() == "NA":
            raise DataLoadError(f"{path}, line {i}: missing value in column {name!r}")
    return values


def _numeric(values, name, path):
    try:
        out = np.array([float(v) for v in values])
    except ValueError as exc:
        raise DataLoadError(f"{path}: column {name!r} is not numeric ({exc})") from exc
    if not np.isfinite(out).all():
        raise DataLoadError(f"{path}: column {name!r} has non-finite values")
    return out


def _levels(values):
    return list(dict.fromkeys(values))


def load_csv(config):
    """Build the full design, response, cell layout and comparison for ``config``."""
    header, rows, source = read_table(config.data)
    path = config.data
    y = _numeric(_column(header, rows, config.response, path), config.response, path)
    n = y.size

    columns = [np.ones(n)]
    labels = [INTERCEPT]
    terms = {}
    indicators = {}
    for name in config.factors:
        values = _column(header, rows, name, path)
        levels = _levels(values)
        if len(levels) < 2:
            raise DataLoadError(f"{path}: factor {name!r} has a single level")
        block = []
        for lev in levels[:-1]:
            columns.append(np.array([float(v == lev) for v in values]))
            labels.append(f"{name}[{lev}]")
            block.append(len(labels) - 1)
        terms[name] = block
        indicators[name] = (values, levels)
    for name in config.covariates:
        columns.append(_numeric(_column(header, rows, name, path), name, path))
        labels.append(name)
        terms[name] = [len(labels) - 1]

    if config.wants_interaction:
        if len(config.factors) != 2:
            raise SpecError(
                f"the interaction test needs exactly two factors, got {len(config.factors)}"
            )
        a, b = config.factors
        (va, la), (vb, lb) = indicators[a], indicators[b]
        block = []
        for x in la[:-1]:
            for z in lb[:-1]:
                columns.append(np.array([float(p == x and q == z) for p, q in zip(va, vb)]))
                labels.append(f"{a}[{x}]:{b}[{z}]")
                block.append(len(labels) - 1)
        terms[f"{a}:{b}"] = block

    X = DesignMatrix(np.column_stack(columns), tuple(labels))
    spec = parse_test(config.test, X, terms)

    if config.factors:
        keys = list(zip(*(indicators[f][0] for f in config.factors)))
        layout = CellLayout.from_keys(":".join(k) for k in keys)
    else:
        layout = CellLayout(np.zeros(n, dtype=np.int64))
    return LoadedData(X, ResponseVector(y), layout, spec, terms, source)


def parse_test(test, X, terms):
    """Turn a ``--test`` value into a :class:`ComparisonSpec` for design ``X``."""
    if test == "interaction":
        block = next((v for k, v in terms.items() if ":" in k), None)
        if not block:
            raise SpecError("no interaction columns in the design")
        return ComparisonSpec.drop(block)
    kind, _, arg = test.partition(":")
    if kind == "drop" and arg:
        cols = []
        for term in (t.strip() for t in arg.split(",")):
            if term in terms:
                cols.extend(terms[term])
            elif term in X.column_labels:
                cols.append(X.index(term))
            else:
                raise SpecError(f"unknown term {term!r}; known terms: {', '.join(terms)}")
        return ComparisonSpec.drop(sorted(set(cols)))
    if kind == "contrast" and arg:
        return read_contrast(arg, X)
    raise SpecError(f"unrecognized test {test!r}; use interaction, drop:<terms> or contrast:<file>")


def read_contrast(path, X):
    """Contrast rows from a CSV whose header names design columns plus an optional ``h``.

    Design columns missing from the header get coefficient zero.
    """
    header, rows, _ = read_table(path, min_rows=1)
    unknown = [h for h in header if h != "h" and h not in X.column_labels]
    if unknown:
        raise SpecError(f"{path}: contrast columns not in the design: {', '.join(unknown)}")
    L = np.zeros((len(rows), X.r))
    h = np.zeros(len(rows))
    for i, row in enumerate(rows):
        for name, cell in zip(header, row):
            try:
                v = float(cell)
            except ValueError as exc:
                raise SpecError(f"{path}: non-numeric contrast entry {cell!r}") from exc
            if name == "h":
                h[i] = v
            else:
                L[i, X.index(name)] = v
    return ComparisonSpec.contrast(L, h)


def write_csv(path_or_file, header, rows):
    """Write rows with full float precision."""
    def fmt(v):
        if isinstance(v, (float, np.floating)):
            return repr(float(v))
        return str(v)

    def dump(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])

    if hasattr(path_or_file, "write"):
        dump(path_or_file)
    else:
        with open(path_or_file, "w", encoding="utf-8", newline="") as fh:
            dump(fh)
