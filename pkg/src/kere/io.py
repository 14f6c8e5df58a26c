"""CSV ingestion and deterministic CSV/JSON writers."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class DataError(ValueError):
    """Raised for malformed input files; the message names the offending cell."""


@dataclass
class Dataset:
    columns: list[str]
    X: np.ndarray
    y: np.ndarray | None
    source: str
    response: str | None

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def provenance(self) -> dict:
        return {"path": self.source, "response": self.response, "columns": self.columns}


def _resolve_column(header, response) -> int:
    if isinstance(response, int) or (isinstance(response, str) and response.lstrip("-").isdigit()
                                     and response not in header):
        idx = int(response)
        if not 0 <= idx < len(header):
            raise DataError(f"response index {idx} out of range for {len(header)} columns")
        return idx
    if response not in header:
        raise DataError(f"response column {response!r} not found; columns are {header}")
    return header.index(response)


def load_csv(path, response=None) -> Dataset:
    """Read a headered numeric CSV. ``response`` is a column name or index; None means no response."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"file not found: {path}")
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: empty file, a header row is required")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    resp = _resolve_column(header, response) if response is not None else None
    if len(header) - (resp is not None) < 1:
        raise DataError(f"{path}: need at least one feature column")
    if not body:
        raise DataError(f"{path}: no data rows")
    data = np.empty((len(body), len(header)))
    for i, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise DataError(f"{path}: row {i} has {len(row)} cells, header has {len(header)}")
        for j, cell in enumerate(row):
            try:
                val = float(cell)
            except ValueError:
                raise DataError(f"{path}: non-numeric cell at row {i}, column {header[j]!r}: "
                                f"{cell!r}") from None
            if not math.isfinite(val):
                raise DataError(f"{path}: non-finite cell at row {i}, column {header[j]!r}")
            data[i - 2, j] = val
    feats = [j for j in range(len(header)) if j != resp]
    return Dataset(columns=[header[j] for j in feats], X=data[:, feats],
                   y=data[:, resp] if resp is not None else None,
                   source=str(path), response=header[resp] if resp is not None else None)


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    if v is None:
        return ""
    return str(v)


def write_csv(path, rows: list[dict], columns: list[str] | None = None) -> None:
    columns = columns or (list(rows[0]) if rows else [])
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(row.get(c)) for c in columns])


def write_matrix_csv(path, columns: list[str], cols: list[np.ndarray]) -> None:
    rows = [dict(zip(columns, vals)) for vals in zip(*cols)]
    write_csv(path, rows, columns)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(_jsonable(obj), indent=1, sort_keys=True) + "\n")
