"""Dataset containers and CSV ingestion.

Two layouts are supported:

* long format (one row per observation) for one-way / ANCOVA data, read by
  :func:`load_ancova_csv`;
* matrix format for unreplicated two-way layouts, read by
  :func:`load_twoway_csv`, with the first column holding row labels and the
  header holding column labels.

Levels of the grouping factor are numbered ``1..K`` in order of first
appearance so scheme labels follow the user's input order.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DataValidationError, ParseError


@dataclass(frozen=True)
class Dataset:
    """Long-format data: response, grouping-factor level, optional covariate.

    ``level`` holds 1-based level indices; ``level_labels[k - 1]`` is the
    original label of level ``k``.
    """

    y: np.ndarray
    level: np.ndarray
    level_labels: tuple[str, ...]
    covariate: np.ndarray | None = None
    response_name: str = "y"
    covariate_name: str | None = None
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        level = np.asarray(self.level, dtype=int)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "level", level)
        if y.ndim != 1 or level.shape != y.shape:
            raise DataValidationError("y and level must be 1-D arrays of equal length")
        if not np.all(np.isfinite(y)):
            raise DataValidationError("response contains non-finite values")
        if self.covariate is not None:
            x = np.asarray(self.covariate, dtype=float)
            object.__setattr__(self, "covariate", x)
            if x.shape != y.shape:
                raise DataValidationError("covariate length differs from response length")
            if not np.all(np.isfinite(x)):
                raise DataValidationError("covariate contains non-finite values")
        K = len(self.level_labels)
        if K < 2:
            raise DataValidationError("the grouping factor needs at least 2 levels")
        if level.min(initial=1) < 1 or level.max(initial=1) > K:
            raise DataValidationError("level index out of range 1..K")
        counts = np.bincount(level, minlength=K + 1)
        empty = [self.level_labels[k - 1] for k in range(1, K + 1) if counts[k] == 0]
        if empty:
            raise DataValidationError(f"levels with no observations: {', '.join(empty)}")

    @property
    def N(self) -> int:
        return self.y.size

    @property
    def K(self) -> int:
        return len(self.level_labels)

    @property
    def slgf_level(self) -> np.ndarray:
        return self.level

    def level_counts(self) -> np.ndarray:
        return np.bincount(self.level, minlength=self.K + 1)[1:]


@dataclass(frozen=True)
class TwoWayLayout:
    """Unreplicated R x C table; rows are the grouping factor unless transposed."""

    cells: np.ndarray
    row_labels: tuple[str, ...]
    col_labels: tuple[str, ...]
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=float)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "row_labels", tuple(self.row_labels))
        object.__setattr__(self, "col_labels", tuple(self.col_labels))
        if cells.ndim != 2:
            raise DataValidationError("cells must be a 2-D matrix")
        if cells.shape != (len(self.row_labels), len(self.col_labels)):
            raise DataValidationError("label counts do not match the table shape")
        if not np.all(np.isfinite(cells)):
            raise DataValidationError("two-way layout must be complete (missing or non-finite cell)")

    @property
    def R(self) -> int:
        return self.cells.shape[0]

    @property
    def C(self) -> int:
        return self.cells.shape[1]

    @property
    def N(self) -> int:
        return self.cells.size

    @property
    def K(self) -> int:
        return self.R

    @property
    def y(self) -> np.ndarray:
        """Cells flattened row-major."""
        return self.cells.reshape(-1)

    @property
    def slgf_level(self) -> np.ndarray:
        return np.repeat(np.arange(1, self.R + 1), self.C)

    @property
    def column_index(self) -> np.ndarray:
        return np.tile(np.arange(1, self.C + 1), self.R)


def transpose_layout(layout: TwoWayLayout) -> TwoWayLayout:
    """Swap rows and columns so the column factor becomes the grouping factor."""
    return TwoWayLayout(
        cells=layout.cells.T.copy(),
        row_labels=layout.col_labels,
        col_labels=layout.row_labels,
        metadata=dict(layout.metadata),
    )


def _parse_float(text: str, row: int, column: str) -> float:
    text = text.strip()
    if text == "":
        raise ParseError(f"row {row}: empty value in column '{column}'")
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"row {row}: non-numeric value {text!r} in column '{column}'") from None
    if not math.isfinite(value):
        raise ParseError(f"row {row}: non-finite value {text!r} in column '{column}'")
    return value


def load_ancova_csv(
    path: str | Path,
    response_col: str,
    slgf_col: str,
    covariate_col: str | None = None,
) -> Dataset:
    """Read long-format data. Row numbers in errors count the header as row 1."""
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for name in (response_col, slgf_col, covariate_col):
            if name is not None and name not in header:
                raise ConfigurationError(f"column '{name}' not found in {path.name} (have: {header})")
        y, x, raw_levels = [], [], []
        for i, rec in enumerate(reader, start=2):
            y.append(_parse_float(rec[response_col] or "", i, response_col))
            if covariate_col is not None:
                x.append(_parse_float(rec[covariate_col] or "", i, covariate_col))
            label = (rec[slgf_col] or "").strip()
            if label == "":
                raise ParseError(f"row {i}: empty level in column '{slgf_col}'")
            raw_levels.append(label)
    if not y:
        raise DataValidationError(f"{path.name} has no data rows")
    labels: dict[str, int] = {}
    for label in raw_levels:
        labels.setdefault(label, len(labels) + 1)
    return Dataset(
        y=np.array(y),
        level=np.array([labels[v] for v in raw_levels]),
        level_labels=tuple(labels),
        covariate=np.array(x) if covariate_col is not None else None,
        response_name=response_col,
        covariate_name=covariate_col,
    )


def load_twoway_csv(path: str | Path) -> TwoWayLayout:
    """Read a matrix-format table (first column = row labels, header = column labels)."""
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if any(cell.strip() for cell in r)]
    if len(rows) < 2:
        raise ParseError(f"{path.name}: need a header row and at least one data row")
    header = [h.strip() for h in rows[0]]
    col_labels = header[1:]
    if not col_labels:
        raise ParseError(f"{path.name}: header has no column labels")
    row_labels, cells = [], []
    for i, rec in enumerate(rows[1:], start=2):
        if len(rec) != len(header):
            raise ParseError(f"row {i}: expected {len(header)} fields, found {len(rec)} (ragged table)")
        row_labels.append(rec[0].strip())
        values = []
        for lab, text in zip(col_labels, rec[1:]):
            if text.strip() == "":
                raise DataValidationError(f"row {i}: missing cell in column '{lab}'; layout must be complete")
            values.append(_parse_float(text, i, lab))
        cells.append(values)
    return TwoWayLayout(np.array(cells), tuple(row_labels), tuple(col_labels))


def load_twoway_long_csv(path: str | Path, response_col: str, row_col: str, col_col: str) -> TwoWayLayout:
    """Read a two-way layout stored one observation per line.

    Duplicate (row, column) pairs are rejected: the layout is unreplicated.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for name in (response_col, row_col, col_col):
            if name not in header:
                raise ConfigurationError(f"column '{name}' not found in {path.name}")
        rows: dict[str, int] = {}
        cols: dict[str, int] = {}
        seen: dict[tuple[str, str], float] = {}
        for i, rec in enumerate(reader, start=2):
            r, c = rec[row_col].strip(), rec[col_col].strip()
            if (r, c) in seen:
                raise DataValidationError(f"row {i}: duplicate cell ({r}, {c}); replicated layouts are not supported")
            seen[(r, c)] = _parse_float(rec[response_col] or "", i, response_col)
            rows.setdefault(r, len(rows))
            cols.setdefault(c, len(cols))
    cells = np.full((len(rows), len(cols)), np.nan)
    for (r, c), v in seen.items():
        cells[rows[r], cols[c]] = v
    if np.isnan(cells).any():
        raise DataValidationError("two-way layout must be complete (missing cell)")
    return TwoWayLayout(cells, tuple(rows), tuple(cols))


def write_ancova_csv(data: Dataset, path: str | Path) -> None:
    """Write long-format data with values at full (round-trip) precision."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        head = [data.response_name, "level"]
        if data.covariate is not None:
            head.append(data.covariate_name or "x")
        w.writerow(head)
        for i in range(data.N):
            row = [repr(float(data.y[i])), data.level_labels[data.level[i] - 1]]
            if data.covariate is not None:
                row.append(repr(float(data.covariate[i])))
            w.writerow(row)


def write_twoway_csv(layout: TwoWayLayout, path: str | Path, corner: str = "row") -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([corner, *layout.col_labels])
        for label, row in zip(layout.row_labels, layout.cells):
            w.writerow([label, *(repr(float(v)) for v in row)])


# Dog lymphoma copy-number study, read to two decimals: six dogs
# (rows) by normal/tumor tissue (columns).
DOG_LYMPHOMA = TwoWayLayout(
    cells=np.array(
        [
            [9.33, 9.22],
            [9.51, 9.39],
            [8.75, 9.42],
            [8.64, 9.25],
            [9.50, 9.46],
            [8.73, 9.35],
        ]
    ),
    row_labels=("dog1", "dog2", "dog3", "dog4", "dog5", "dog6"),
    col_labels=("normal", "tumor"),
    metadata={"source": "dog lymphoma hybridization signal, 6 dogs x 2 tissues"},
)

BUILTIN_DATASETS = {"dog-lymphoma": DOG_LYMPHOMA}


def builtin_dataset(name: str) -> TwoWayLayout:
    key = name.removeprefix("builtin:")
    try:
        return BUILTIN_DATASETS[key]
    except KeyError:
        raise ConfigurationError(f"unknown builtin dataset '{name}' (have: {', '.join(BUILTIN_DATASETS)})") from None
