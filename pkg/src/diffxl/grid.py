"""Workbook data model and A1 cell reference arithmetic."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Mapping

MAX_ROWS = 1048576
MAX_COLS = 16384


class DiffXLError(Exception):
    """Base class for all errors raised by this package."""


class MalformedRef(DiffXLError, ValueError):
    pass


class OutOfBounds(DiffXLError, ValueError):
    pass


class MalformedFormula(DiffXLError, ValueError):
    pass


@dataclass(frozen=True, order=True)
class CellAddress:
    row: int
    col: int

    def __post_init__(self) -> None:
        if not (1 <= self.row <= MAX_ROWS and 1 <= self.col <= MAX_COLS):
            raise OutOfBounds(f"cell ({self.row}, {self.col}) outside the grid")

    @property
    def a1(self) -> str:
        return f"{column_letters(self.col)}{self.row}"

    def offset(self, drow: int, dcol: int) -> CellAddress:
        return CellAddress(self.row + drow, self.col + dcol)


@dataclass(frozen=True)
class RefStyleFlags:
    row_absolute: bool = False
    col_absolute: bool = False


class CellKind(str, Enum):
    VALUE = "value"
    FORMULA = "formula"


class ValueClass(str, Enum):
    NUMBER = "number"
    TEXT = "text"
    BOOLEAN = "boolean"
    ERROR = "error"
    BLANK = "blank"

    @property
    def code(self) -> str:
        return _CLASS_CODES[self]

    @classmethod
    def from_code(cls, code: str) -> ValueClass:
        try:
            return _CODE_CLASSES[code]
        except KeyError:
            raise ValueError(f"unknown value class code {code!r}") from None


_CLASS_CODES = {
    ValueClass.NUMBER: "N",
    ValueClass.TEXT: "T",
    ValueClass.BOOLEAN: "B",
    ValueClass.ERROR: "E",
    ValueClass.BLANK: "Z",
}
_CODE_CLASSES = {v: k for k, v in _CLASS_CODES.items()}


@dataclass(frozen=True)
class CellContent:
    """What a populated cell holds.

    For formulas ``value_text`` is the A1 source and ``r1c1_text`` the
    position-independent normal form; value cells leave ``r1c1_text`` empty.
    """

    kind: CellKind
    value_text: str
    r1c1_text: str = ""
    value_class: ValueClass | None = None

    def __post_init__(self) -> None:
        if self.kind is CellKind.FORMULA:
            if not self.r1c1_text.startswith("="):
                raise ValueError("formula cell needs an R1C1 text starting with '='")
            if self.value_class is not None:
                raise ValueError("formula cell cannot carry a value class")
        else:
            if self.r1c1_text:
                raise ValueError("value cell cannot carry R1C1 text")
            if self.value_class is None:
                raise ValueError("value cell needs a value class")

    @property
    def is_formula(self) -> bool:
        return self.kind is CellKind.FORMULA

    @classmethod
    def value(cls, text: str, value_class: ValueClass = ValueClass.TEXT) -> CellContent:
        if value_class is ValueClass.NUMBER:
            text = canonical_number(text)
        return cls(CellKind.VALUE, text, "", value_class)

    @classmethod
    def formula(cls, a1_text: str, r1c1_text: str) -> CellContent:
        return cls(CellKind.FORMULA, a1_text, r1c1_text, None)


@dataclass(frozen=True)
class Sheet:
    object_name: str
    tab_name: str
    cells: Mapping[CellAddress, CellContent] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.object_name:
            raise ValueError("sheet object name must be non-empty")
        # Freeze into a row-major ordered dict so iteration order is canonical.
        object.__setattr__(self, "cells", dict(sorted(self.cells.items())))

    def __len__(self) -> int:
        return len(self.cells)

    def __iter__(self) -> Iterator[tuple[CellAddress, CellContent]]:
        return iter(self.cells.items())

    def get(self, row: int, col: int) -> CellContent | None:
        if row < 1 or col < 1 or row > MAX_ROWS or col > MAX_COLS:
            return None
        return self.cells.get(CellAddress(row, col))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Sheet):
            return NotImplemented
        return (self.object_name, self.tab_name, self.cells) == (
            other.object_name, other.tab_name, other.cells)

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class Workbook:
    sheets: tuple[Sheet, ...] = ()
    source_label: str = ""
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "sheets", tuple(self.sheets))
        names = [s.object_name for s in self.sheets]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate sheet object names in {names}")

    def sheet(self, object_name: str) -> Sheet:
        for s in self.sheets:
            if s.object_name == object_name:
                return s
        raise KeyError(object_name)

    @property
    def sheet_names(self) -> set[str]:
        return {s.tab_name for s in self.sheets} | {s.object_name for s in self.sheets}


def column_index(letters: str) -> int:
    """Bijective base-26: ``A`` -> 1, ``Z`` -> 26, ``AA`` -> 27."""
    n = 0
    for ch in letters.upper():
        if not "A" <= ch <= "Z":
            raise MalformedRef(f"bad column letters {letters!r}")
        n = n * 26 + (ord(ch) - 64)
    if n == 0:
        raise MalformedRef("empty column letters")
    return n


def column_letters(index: int) -> str:
    if index < 1:
        raise OutOfBounds(f"column {index} below 1")
    out = []
    while index:
        index, rem = divmod(index - 1, 26)
        out.append(chr(65 + rem))
    return "".join(reversed(out))


_A1_RE = re.compile(r"(\$?)([A-Za-z]{1,3})(\$?)([0-9]+)")


def parse_a1_ref(text: str) -> tuple[CellAddress, RefStyleFlags]:
    m = _A1_RE.fullmatch(text)
    if not m:
        raise MalformedRef(f"not an A1 reference: {text!r}")
    col = column_index(m.group(2))
    row = int(m.group(4))
    if row < 1 or row > MAX_ROWS or col > MAX_COLS:
        raise OutOfBounds(f"reference {text!r} outside the grid")
    flags = RefStyleFlags(row_absolute=bool(m.group(3)), col_absolute=bool(m.group(1)))
    return CellAddress(row, col), flags


def format_a1_ref(address: CellAddress, flags: RefStyleFlags = RefStyleFlags()) -> str:
    return "{}{}{}{}".format(
        "$" if flags.col_absolute else "",
        column_letters(address.col),
        "$" if flags.row_absolute else "",
        address.row,
    )


def canonical_number(text: str | float | int) -> str:
    """Shortest round-trip decimal rendering; integral values lose the ``.0``."""
    value = float(text)
    if math.isnan(value) or math.isinf(value):
        raise ValueError(f"non-finite number {text!r}")
    if value == 0:
        return "0"
    if value.is_integer() and abs(value) < 1e16:
        return str(int(value))
    return repr(value)
