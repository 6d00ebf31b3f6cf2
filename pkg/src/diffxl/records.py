"""Segment records and the DiffList container shared by the pipeline stages."""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterator

from .grid import CellAddress, ValueClass

LIST_VERSION = "diffxl-list/1"
UNIT_SEPARATOR = 0x1F
ESCAPE = 0x1B

FORMULA = "F"
VALUE = "V"


class Mode(str, Enum):
    CHECKSUM = "checksum"
    FULL = "full"


@dataclass(frozen=True, order=True)
class Segment:
    """One homogeneous rectangle of a contiguous range.

    ``classes`` is a run-length summary of the value classes of a V
    segment's cells in row-major order (``"N2T1"``); empty for F segments.
    """

    sheet: str
    contig_id: int
    row: int
    col: int
    rows: int
    cols: int
    kind: str
    payload: str = ""
    classes: str = ""

    def __post_init__(self) -> None:
        if self.kind not in (FORMULA, VALUE):
            raise ValueError(f"segment kind must be F or V, got {self.kind!r}")
        if self.kind == FORMULA and not self.payload.startswith("="):
            raise ValueError(f"F segment payload must start with '=': {self.payload!r}")
        if self.kind == FORMULA and self.classes:
            raise ValueError("F segment cannot carry value classes")
        if min(self.row, self.col, self.rows, self.cols, self.contig_id) < 1:
            raise ValueError(f"segment geometry must be positive: {self}")

    @property
    def bottom(self) -> int:
        return self.row + self.rows - 1

    @property
    def right(self) -> int:
        return self.col + self.cols - 1

    @property
    def area(self) -> int:
        return self.rows * self.cols

    @property
    def bbox(self) -> tuple[int, int, int, int]:
        return (self.row, self.col, self.rows, self.cols)

    def cells(self) -> Iterator[CellAddress]:
        for r in range(self.row, self.row + self.rows):
            for c in range(self.col, self.col + self.cols):
                yield CellAddress(r, c)

    def contains(self, row: int, col: int) -> bool:
        return self.row <= row <= self.bottom and self.col <= col <= self.right

    def class_list(self) -> list[ValueClass]:
        return expand_classes(self.classes)


_RUN_RE = re.compile(r"([A-Z])([0-9]+)")


def compress_classes(classes: list[ValueClass]) -> str:
    out = []
    prev, count = None, 0
    for cls in classes:
        if cls is prev:
            count += 1
            continue
        if prev is not None:
            out.append(f"{prev.code}{count}")
        prev, count = cls, 1
    if prev is not None:
        out.append(f"{prev.code}{count}")
    return "".join(out)


def expand_classes(text: str) -> list[ValueClass]:
    pos, out = 0, []
    while pos < len(text):
        m = _RUN_RE.match(text, pos)
        if not m:
            raise ValueError(f"malformed class summary {text!r}")
        out.extend([ValueClass.from_code(m.group(1))] * int(m.group(2)))
        pos = m.end()
    return out


@dataclass(frozen=True)
class DiffList:
    mode: Mode
    entries: tuple[Segment, ...] = ()
    sheets: tuple[tuple[str, str], ...] = ()
    separator: int = UNIT_SEPARATOR
    source_label: str = ""
    version: str = LIST_VERSION

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "entries", tuple(self.entries))
        object.__setattr__(self, "sheets", tuple(tuple(s) for s in self.sheets))
        if self.separator == ESCAPE:
            raise ValueError("separator cannot be the escape character U+001B")

    @property
    def sheet_names(self) -> list[str]:
        return [obj for obj, _ in self.sheets]

    def sheet_entries(self, object_name: str) -> list[Segment]:
        return [s for s in self.entries if s.sheet == object_name]

    def tab_name(self, object_name: str) -> str:
        return dict(self.sheets).get(object_name, object_name)


__all__ = [
    "DiffList", "Segment", "Mode", "FORMULA", "VALUE", "LIST_VERSION",
    "UNIT_SEPARATOR", "ESCAPE", "compress_classes", "expand_classes",
]
