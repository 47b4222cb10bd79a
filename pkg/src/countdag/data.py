"""Count-data matrices and their CSV representation."""
from __future__ import annotations

from dataclasses import dataclass
import numpy as np

from .graphs import _check_labels, default_labels


class InvalidData(ValueError):
    """Malformed count data: negative, non-integral, or non-finite entries."""


@dataclass(frozen=True)
class CountMatrix:
    """n observations (rows) of p non-negative integer variables (columns)."""

    values: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        values = np.asarray(self.values)
        if values.ndim != 2:
            raise InvalidData(f"count matrix must be 2-D, got shape {values.shape}")
        if not np.issubdtype(values.dtype, np.integer):
            if not np.all(np.isfinite(values)):
                raise InvalidData("count matrix contains non-finite entries")
            if not np.all(values == np.floor(values)):
                raise InvalidData("count matrix entries must be integers")
            values = values.astype(np.int64)
        if values.size and values.min() < 0:
            raise InvalidData("count matrix entries must be non-negative")
        values = np.ascontiguousarray(values, dtype=np.int64)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", _check_labels(values.shape[1], self.labels))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def column_labels(self) -> tuple[str, ...]:
        return self.labels or default_labels(self.p)

    def columns_as_float(self) -> np.ndarray:
        return self.values.astype(np.float64)


def counts_to_csv(data: CountMatrix) -> str:
    header = ",".join(data.column_labels())
    body = "\n".join(",".join(str(v) for v in row) for row in data.values)
    return header + "\n" + body + ("\n" if data.n else "")


def counts_from_csv(text: str) -> CountMatrix:
    """Parse a counts CSV. The header row is optional: a first row with any
    non-integer cell is taken as column labels."""
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise InvalidData("empty counts CSV")
    first = [cell.strip() for cell in lines[0].split(",")]
    labels: tuple[str, ...] | None = None
    start = 0
    if not all(_is_int(cell) for cell in first):
        labels = tuple(first)
        start = 1
    rows = []
    width = len(first)
    for lineno, line in enumerate(lines[start:], start=start + 1):
        cells = [cell.strip() for cell in line.split(",")]
        if len(cells) != width:
            raise InvalidData(f"line {lineno}: expected {width} columns, got {len(cells)}")
        row = []
        for col, cell in enumerate(cells, start=1):
            if not _is_int(cell):
                raise InvalidData(f"line {lineno}, column {col}: {cell!r} is not an integer")
            value = int(cell)
            if value < 0:
                raise InvalidData(f"line {lineno}, column {col}: negative count {value}")
            row.append(value)
        rows.append(row)
    if not rows:
        raise InvalidData("counts CSV has a header but no data rows")
    return CountMatrix(np.array(rows, dtype=np.int64), labels)


def _is_int(cell: str) -> bool:
    if not cell:
        return False
    body = cell[1:] if cell[0] in "+-" else cell
    return body.isdigit()


def outlier_filter(data: CountMatrix) -> tuple[CountMatrix, int]:
    """Drop every row containing an entry more than three standard deviations
    from its column mean (sample standard deviation, n-1 denominator).

    Constant columns (zero deviation) never cause drops. Returns the filtered
    matrix and the number of rows removed; raises if nothing survives.
    """
    if data.n < 2:
        raise InvalidData("outlier filter needs at least 2 rows")
    values = data.values.astype(np.float64)
    mu = values.mean(axis=0)
    sd = values.std(axis=0, ddof=1)
    dev = np.abs(values - mu)
    with np.errstate(invalid="ignore"):
        bad = (dev > 3.0 * sd) & (sd > 0.0)
    keep = ~bad.any(axis=1)
    dropped = int((~keep).sum())
    if not keep.any():
        raise InvalidData("outlier filter removed every row")
    return CountMatrix(data.values[keep], data.labels), dropped
