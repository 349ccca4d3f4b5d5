"""Small CSV helpers shared by the file formats."""

from __future__ import annotations

import csv
from typing import Sequence

from .errors import ParseError


def read_csv(path) -> tuple[list[str], list[tuple[int, list[str]]]]:
    """Header fields plus (line number, fields) for every non-blank row."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError("empty file", 1) from None
        for row in reader:
            if not row or all(not f.strip() for f in row):
                continue
            rows.append((reader.line_num, [f.strip() for f in row]))
    return header, rows


def read_csv_rows(path, header: Sequence[str]) -> list[tuple[int, list[str]]]:
    found, rows = read_csv(path)
    if found != list(header):
        raise ParseError(f"expected header {','.join(header)}", 1)
    return rows
