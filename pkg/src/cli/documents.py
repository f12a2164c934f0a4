"""Matrix input documents: JSON arrays of numbers or [re, im] pairs, or plain text rows."""
from __future__ import annotations

import cmath
import json
import re
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from src.core.matrixcore import SUPPORTED_DIMENSIONS, ComplexMatrix

_ROW_SEPARATOR = re.compile(r"[;\n]")


class MatrixDocumentError(ValueError):
    def __init__(self, message: str, row: int | None = None, column: int | None = None) -> None:
        self.row = row
        self.column = column
        if row is not None and column is not None:
            message = f"row {row}, column {column}: {message}"
        elif row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class MatrixDocument:
    n: int
    entries: ComplexMatrix

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "entries": [[[value.real, value.imag] for value in row] for row in self.entries],
        }


def parse_entry(value: Any, row: int, column: int) -> complex:
    """One entry: a number, an ``[re, im]`` pair or an ``a+bi`` token. Positions are 1-based."""
    if isinstance(value, bool):
        raise MatrixDocumentError(f"expected a number, got {value!r}", row, column)
    if isinstance(value, int | float):
        result = complex(value)
    elif isinstance(value, list):
        if len(value) != 2 or not all(
            isinstance(part, int | float) and not isinstance(part, bool) for part in value
        ):
            raise MatrixDocumentError(f"expected an [re, im] pair, got {value!r}", row, column)
        result = complex(value[0], value[1])
    elif isinstance(value, str):
        token = value.strip().replace(" ", "").replace("i", "j").replace("I", "j")
        try:
            result = complex(token)
        except ValueError as error:
            raise MatrixDocumentError(
                f"cannot read {value!r} as a complex number", row, column
            ) from error
    else:
        raise MatrixDocumentError(f"expected a number, got {value!r}", row, column)

    if not cmath.isfinite(result):
        raise MatrixDocumentError(f"entry {value!r} is not finite", row, column)
    return result


def _from_rows(rows: Any) -> MatrixDocument:
    if not isinstance(rows, list) or not rows:
        raise MatrixDocumentError("expected a non-empty list of rows")
    n = len(rows)
    if n not in SUPPORTED_DIMENSIONS:
        raise MatrixDocumentError(f"expected 2 or 3 rows, got {n}")
    entries = np.zeros((n, n), dtype=complex)
    for i, row in enumerate(rows, start=1):
        if not isinstance(row, list):
            raise MatrixDocumentError(f"expected a list of entries, got {row!r}", i)
        if len(row) != n:
            raise MatrixDocumentError(f"has {len(row)} entries, expected {n}", i)
        for j, value in enumerate(row, start=1):
            entries[i - 1, j - 1] = parse_entry(value, i, j)
    return MatrixDocument(n=n, entries=entries)


def _from_json(payload: Any) -> MatrixDocument:
    if isinstance(payload, dict):
        if "entries" not in payload:
            raise MatrixDocumentError("document object needs an 'entries' field")
        document = _from_rows(payload["entries"])
        declared = payload.get("n")
        if declared is not None and declared != document.n:
            raise MatrixDocumentError(f"declares n={declared} but has {document.n} rows")
        return document
    return _from_rows(payload)


def _from_text(text: str) -> MatrixDocument:
    rows = [line.replace(",", " ").split() for line in _ROW_SEPARATOR.split(text)]
    return _from_rows([row for row in rows if row])


def parse_document(text: str) -> MatrixDocument:
    stripped = text.strip()
    if not stripped:
        raise MatrixDocumentError("empty matrix document")
    if stripped[0] in "[{":
        try:
            payload = json.loads(stripped)
        except json.JSONDecodeError as error:
            raise MatrixDocumentError(
                f"invalid JSON at line {error.lineno}, column {error.colno}: {error.msg}"
            ) from error
        return _from_json(payload)
    return _from_text(stripped)


def read_document(source: str) -> MatrixDocument:
    """Read from ``-`` (stdin), a file path, or the literal matrix text itself."""
    if source == "-":
        return parse_document(sys.stdin.read())
    path = Path(source)
    if path.is_file():
        try:
            return parse_document(path.read_text(encoding="utf-8"))
        except UnicodeDecodeError as error:
            raise MatrixDocumentError(f"{source} is not a text file") from error
    if path.suffix in {".json", ".txt"}:
        raise MatrixDocumentError(f"no such file: {source}")
    return parse_document(source)
