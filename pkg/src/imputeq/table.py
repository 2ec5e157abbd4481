"""Typed column-major tables with explicit missing masks.

The data model is deliberately small: a :class:`Table` is an ordered list of
:class:`Column` objects sharing one row count.  Every column carries a boolean
mask (``True`` = missing) next to its values, so missingness survives every
transformation instead of being squeezed into sentinel values.  Tables are
treated as immutable: operations that change data return new tables.

Raw CSV input may contain string columns; those keep an object-dtype value
array until :func:`label_encode` maps them to integer codes with a stored
label dictionary.  All downstream numerics (kind inference, imputation,
scoring) expect encoded tables.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    DataIoError,
    DegenerateInput,
    InvalidArgument,
    InvalidFoldCount,
    ParseError,
    RaggedRows,
)

DEFAULT_MISSING_SENTINELS = ("", "NA", "NaN", "?")


class ColumnKind(enum.Enum):
    CONTINUOUS = "continuous"
    DISCRETE = "discrete"
    BINARY = "binary"
    CATEGORICAL = "categorical"


@dataclass(frozen=True)
class Column:
    """One feature: values, missing mask, inferred kind, optional labels.

    ``values`` is float64 for encoded columns (np.nan at masked positions) or
    an object array of strings for raw, not-yet-encoded categorical input.
    ``labels`` maps integer codes to the original strings for columns that
    went through label encoding.
    """

    name: str
    values: np.ndarray
    mask: np.ndarray
    kind: ColumnKind | None = None
    labels: dict[int, str] | None = None

    def __post_init__(self):
        if len(self.values) != len(self.mask):
            raise InvalidArgument(
                f"column {self.name!r}: values and mask lengths differ"
            )

    @property
    def n_rows(self) -> int:
        return len(self.values)

    @property
    def is_encoded(self) -> bool:
        return self.values.dtype != object

    def observed_values(self) -> np.ndarray:
        return self.values[~self.mask]

    def n_missing(self) -> int:
        return int(self.mask.sum())

    def take(self, rows: np.ndarray) -> "Column":
        return replace(self, values=self.values[rows], mask=self.mask[rows])


@dataclass(frozen=True)
class Table:
    columns: tuple[Column, ...]
    n_rows: int = field(default=-1)

    def __post_init__(self):
        n = self.n_rows
        if n < 0:
            n = self.columns[0].n_rows if self.columns else 0
            object.__setattr__(self, "n_rows", n)
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise InvalidArgument("duplicate column names")
        for c in self.columns:
            if c.n_rows != n:
                raise InvalidArgument(
                    f"column {c.name!r} has {c.n_rows} rows, table has {n}"
                )

    @property
    def column_names(self) -> list[str]:
        return [c.name for c in self.columns]

    def column(self, name: str) -> Column:
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(name)

    def column_index(self, name: str) -> int:
        for i, c in enumerate(self.columns):
            if c.name == name:
                return i
        raise KeyError(name)

    def select_columns(self, names: list[str]) -> "Table":
        return Table(tuple(self.column(n) for n in names))

    def select_rows(self, rows: np.ndarray) -> "Table":
        rows = np.asarray(rows)
        return Table(tuple(c.take(rows) for c in self.columns), len(rows))

    def with_column(self, col: Column) -> "Table":
        """Return a table where the column of the same name is replaced."""
        cols = tuple(col if c.name == col.name else c for c in self.columns)
        if col.name not in self.column_names:
            raise KeyError(col.name)
        return Table(cols, self.n_rows)

    def total_missing(self) -> int:
        return sum(c.n_missing() for c in self.columns)

    def missing_cell_fraction(self) -> float:
        cells = self.n_rows * len(self.columns)
        return self.total_missing() / cells if cells else 0.0


@dataclass(frozen=True)
class SplitIndices:
    """K train/test index pairs; test sets partition the rows."""

    folds: tuple[tuple[np.ndarray, np.ndarray], ...]

    def __iter__(self):
        return iter(self.folds)

    def __len__(self):
        return len(self.folds)


def load_csv(
    path,
    schema_hints: dict[str, ColumnKind] | None = None,
    missing_sentinels=DEFAULT_MISSING_SENTINELS,
) -> Table:
    """Read an RFC-4180 style CSV (header required) into a raw Table.

    Cells matching a missing sentinel are masked.  A column is parsed as
    numeric when at least one non-missing cell parses as a number and no
    kind hint says otherwise; a non-parseable cell in such a column raises
    :class:`ParseError`.  Columns with no numeric cells stay as strings for
    later label encoding.
    """
    hints = schema_hints or {}
    sentinels = set(missing_sentinels)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DataIoError(f"{path}: empty file, header required") from None
            rows = list(reader)
    except OSError as exc:
        raise DataIoError(f"cannot read {path}: {exc}") from exc

    header = [h.strip() for h in header]
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise RaggedRows(
                f"row {i + 1} has {len(row)} fields, header has {len(header)}"
            )

    n = len(rows)
    columns = []
    for j, name in enumerate(header):
        raw = [rows[i][j].strip() for i in range(n)]
        mask = np.array([cell in sentinels for cell in raw], dtype=bool)
        parsed = np.full(n, np.nan)
        numeric = np.zeros(n, dtype=bool)
        for i, cell in enumerate(raw):
            if mask[i]:
                continue
            try:
                parsed[i] = float(cell)
                numeric[i] = True
            except ValueError:
                pass
        hinted = hints.get(name)
        as_strings = hinted is ColumnKind.CATEGORICAL or not numeric.any()
        if as_strings:
            values = np.array(
                [None if mask[i] else raw[i] for i in range(n)], dtype=object
            )
            columns.append(Column(name, values, mask, kind=hinted))
        else:
            bad = ~numeric & ~mask
            if bad.any():
                i = int(np.flatnonzero(bad)[0])
                raise ParseError(i, name, raw[i])
            columns.append(Column(name, parsed, mask, kind=hinted))
    return Table(tuple(columns), n)


def write_csv(table: Table, path, float_format: str = "%.12g") -> None:
    """Write a table to CSV, decoding labeled columns and leaving missing
    cells empty."""
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(table.column_names)
            for i in range(table.n_rows):
                row = []
                for c in table.columns:
                    if c.mask[i]:
                        row.append("")
                    elif c.labels is not None:
                        row.append(c.labels.get(int(c.values[i]), str(c.values[i])))
                    elif not c.is_encoded:
                        row.append(str(c.values[i]))
                    else:
                        v = float(c.values[i])
                        row.append(str(int(v)) if v == int(v) else float_format % v)
                writer.writerow(row)
    except OSError as exc:
        raise DataIoError(f"cannot write {path}: {exc}") from exc


def label_encode(table: Table) -> Table:
    """Map string columns to integer codes 0..V-1 in first-appearance order.

    Already-numeric columns pass through unchanged (no dictionary).  The
    mapping is deterministic for a fixed input; decoding is the stored
    ``labels`` dictionary on each encoded column.
    """
    out = []
    for c in table.columns:
        if c.is_encoded:
            out.append(c)
            continue
        codes: dict[str, int] = {}
        values = np.full(c.n_rows, np.nan)
        for i in range(c.n_rows):
            if c.mask[i]:
                continue
            cell = c.values[i]
            if cell not in codes:
                codes[cell] = len(codes)
            values[i] = codes[cell]
        labels = {v: k for k, v in codes.items()}
        out.append(replace(c, values=values, labels=labels))
    return Table(tuple(out), table.n_rows)


def decode_column(c: Column) -> list:
    """Inverse of label encoding for one column; None at masked cells."""
    out = []
    for i in range(c.n_rows):
        if c.mask[i]:
            out.append(None)
        elif c.labels is not None:
            out.append(c.labels[int(c.values[i])])
        else:
            out.append(c.values[i])
    return out


MIN_LEVEL_COUNT = 5  # a value must appear this often for a non-continuous kind


def infer_column_kinds(table: Table) -> Table:
    """Assign a :class:`ColumnKind` to every column.

    A column is non-continuous only when every distinct observed value occurs
    at least :data:`MIN_LEVEL_COUNT` times.  Non-continuous columns with two
    distinct values are Binary; otherwise columns carrying a label dictionary
    are Categorical and plain numeric ones are Discrete (their values have a
    natural order).  Constant columns are Discrete, all-missing columns are
    flagged Continuous by convention.  Hinted kinds are preserved.
    """
    out = []
    for c in table.columns:
        if not c.is_encoded:
            raise InvalidArgument(
                f"column {c.name!r} is not encoded; run label_encode first"
            )
        if c.kind is not None:
            out.append(c)
            continue
        obs = c.observed_values()
        if obs.size == 0:
            out.append(replace(c, kind=ColumnKind.CONTINUOUS))
            continue
        uniq, counts = np.unique(obs, return_counts=True)
        if counts.min() < MIN_LEVEL_COUNT and len(uniq) > 1:
            kind = ColumnKind.CONTINUOUS
        elif len(uniq) == 2:
            kind = ColumnKind.BINARY
        elif c.labels is not None:
            kind = ColumnKind.CATEGORICAL
        else:
            kind = ColumnKind.DISCRETE
        out.append(replace(c, kind=kind))
    return Table(tuple(out), table.n_rows)


def missing_fraction(c: Column) -> float:
    """Fraction of masked cells; completeness is 1 minus this value."""
    if c.n_rows == 0:
        raise DegenerateInput(f"column {c.name!r} has no rows")
    return c.n_missing() / c.n_rows


def completeness(c: Column) -> float:
    return 1.0 - missing_fraction(c)


def inject_mcar(
    table: Table, rate: float, seed: int, protect: set[str] | None = None
) -> Table:
    """Mask each observed cell independently with probability ``rate``.

    Existing masks are preserved; columns named in ``protect`` are left
    untouched.  Deterministic per seed.
    """
    if not 0.0 <= rate < 1.0:
        raise InvalidArgument(f"rate must be in [0, 1), got {rate}")
    protect = protect or set()
    rng = np.random.default_rng(seed)
    out = []
    for c in table.columns:
        if c.name in protect or rate == 0.0:
            out.append(c)
            continue
        hit = rng.random(c.n_rows) < rate
        new_mask = c.mask | (hit & ~c.mask)
        values = c.values.copy()
        if c.is_encoded:
            values[new_mask] = np.nan
        else:
            values[new_mask] = None
        out.append(replace(c, values=values, mask=new_mask))
    return Table(tuple(out), table.n_rows)


def kfold_split(n_rows: int, k: int, seed: int) -> SplitIndices:
    """Shuffled partition into k folds with test sizes differing by <= 1."""
    if k < 2 or k > n_rows:
        raise InvalidFoldCount(f"k={k} outside [2, {n_rows}]")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n_rows)
    chunks = np.array_split(order, k)
    folds = []
    for i, test in enumerate(chunks):
        train = np.concatenate([chunks[j] for j in range(k) if j != i])
        folds.append((np.sort(train), np.sort(test)))
    return SplitIndices(tuple(folds))
