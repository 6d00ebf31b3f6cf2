"""Formula tokenizer and A1 <-> R1C1 reference rewriting.

Only references are rewritten. Strings, numbers, function names, defined
names, error literals and sheet qualifiers are copied through untouched, so
two cells holding the "same" relative formula end up with identical R1C1
text regardless of where they sit on the sheet.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable

from .grid import (
    MAX_COLS,
    MAX_ROWS,
    CellAddress,
    MalformedFormula,
    OutOfBounds,
    column_index,
    column_letters,
)

# Token kinds
STRING = "string"
SHEET = "sheet"
CELL = "cell"
ROWS = "rows"
COLS = "cols"
NUMBER = "number"
ERROR = "error"
NAME = "name"
BRACKET = "bracket"
SPACE = "space"
OP = "op"


@dataclass(frozen=True)
class Axis:
    """One row or column coordinate of a reference.

    ``absolute`` axes hold the index itself; relative ones hold it too (A1
    side) or an offset from the origin cell (R1C1 side), see ``relative``.
    """

    value: int
    absolute: bool


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    row: Axis | None = None
    col: Axis | None = None
    row2: Axis | None = None
    col2: Axis | None = None


_IDENT_CHARS = r"A-Za-z0-9_.\\À-￿"
_IDENT_RE = re.compile(rf"[A-Za-z_\\À-￿][{_IDENT_CHARS}]*")
_SHEET_RE = re.compile(rf"[{_IDENT_CHARS}]+!")
_NUMBER_RE = re.compile(r"(?:[0-9]+\.?[0-9]*|\.[0-9]+)(?:[eE][+-]?[0-9]+)?")
_ERROR_RE = re.compile(
    r"#(?:NULL!|DIV/0!|VALUE!|REF!|NAME\?|NUM!|N/A|GETTING_DATA|SPILL!|CALC!)",
    re.IGNORECASE)
_SPACE_RE = re.compile(r"\s+")
# A reference must not run straight into more identifier text or a call.
_STOP = rf"(?![{_IDENT_CHARS}(!\[])"

_A1_CELL_RE = re.compile(rf"(\$?)([A-Za-z]{{1,3}})(\$?)([0-9]+){_STOP}")
_A1_COLS_RE = re.compile(rf"(\$?)([A-Za-z]{{1,3}}):(\$?)([A-Za-z]{{1,3}}){_STOP}")
_A1_ROWS_RE = re.compile(rf"(\$?)([0-9]+):(\$?)([0-9]+){_STOP}")

_R1C1_PART = r"(?:\[([+-]?[0-9]+)\]|([0-9]+))?"
_R1C1_CELL_RE = re.compile(rf"[Rr]{_R1C1_PART}[Cc]{_R1C1_PART}{_STOP}")
_R1C1_ROWS_RE = re.compile(rf"[Rr]{_R1C1_PART}:[Rr]{_R1C1_PART}{_STOP}")
_R1C1_COLS_RE = re.compile(rf"[Cc]{_R1C1_PART}:[Cc]{_R1C1_PART}{_STOP}")


def _scan_quoted(text: str, i: int, quote: str) -> int:
    """Return the index just past the closing quote starting at ``text[i]``."""
    j = i + 1
    while True:
        k = text.find(quote, j)
        if k < 0:
            raise MalformedFormula(f"unterminated {quote} at position {i} in {text!r}")
        if text.startswith(quote * 2, k):
            j = k + 2
            continue
        return k + 1


def _scan_brackets(text: str, i: int) -> int:
    depth = 0
    for j in range(i, len(text)):
        if text[j] == "[":
            depth += 1
        elif text[j] == "]":
            depth -= 1
            if depth == 0:
                return j + 1
    raise MalformedFormula(f"unbalanced '[' at position {i} in {text!r}")


def _a1_axis(dollar: str, value: int) -> Axis:
    return Axis(value, bool(dollar))


def _r1c1_axis(bracket: str | None, plain: str | None) -> Axis:
    if plain is not None:
        return Axis(int(plain), True)
    return Axis(int(bracket) if bracket is not None else 0, False)


def _match_ref(text: str, i: int, style: str) -> Token | None:
    if style == "A1":
        m = _A1_CELL_RE.match(text, i)
        if m:
            col, row = column_index(m.group(2)), int(m.group(4))
            if 1 <= row <= MAX_ROWS and col <= MAX_COLS:
                return Token(CELL, m.group(0), row=_a1_axis(m.group(3), row),
                             col=_a1_axis(m.group(1), col))
            return None
        m = _A1_COLS_RE.match(text, i)
        if m:
            c1, c2 = column_index(m.group(2)), column_index(m.group(4))
            if c1 <= MAX_COLS and c2 <= MAX_COLS:
                return Token(COLS, m.group(0), col=_a1_axis(m.group(1), c1),
                             col2=_a1_axis(m.group(3), c2))
            return None
        m = _A1_ROWS_RE.match(text, i)
        if m:
            r1, r2 = int(m.group(2)), int(m.group(4))
            if 1 <= r1 <= MAX_ROWS and 1 <= r2 <= MAX_ROWS:
                return Token(ROWS, m.group(0), row=_a1_axis(m.group(1), r1),
                             row2=_a1_axis(m.group(3), r2))
        return None

    m = _R1C1_CELL_RE.match(text, i)
    if m:
        return Token(CELL, m.group(0), row=_r1c1_axis(m.group(1), m.group(2)),
                     col=_r1c1_axis(m.group(3), m.group(4)))
    m = _R1C1_ROWS_RE.match(text, i)
    if m:
        return Token(ROWS, m.group(0), row=_r1c1_axis(m.group(1), m.group(2)),
                     row2=_r1c1_axis(m.group(3), m.group(4)))
    m = _R1C1_COLS_RE.match(text, i)
    if m:
        return Token(COLS, m.group(0), col=_r1c1_axis(m.group(1), m.group(2)),
                     col2=_r1c1_axis(m.group(3), m.group(4)))
    return None


def tokenize(formula: str, style: str = "A1",
             sheet_names: Iterable[str] = ()) -> list[Token]:
    """Split a formula (leading ``=`` included) into tokens.

    ``style`` selects how references are recognised: ``"A1"`` or ``"R1C1"``.
    Known sheet names are matched first so unquoted names that would
    otherwise look like references still qualify correctly.
    """
    if style not in ("A1", "R1C1"):
        raise ValueError(f"unknown reference style {style!r}")
    if not formula.startswith("="):
        raise MalformedFormula(f"formula must start with '=': {formula!r}")
    known = sorted((n + "!" for n in sheet_names if n), key=len, reverse=True)

    tokens = [Token(OP, "=")]
    depth = {"(": 0, "{": 0}
    closers = {")": "(", "}": "{"}
    i, n = 1, len(formula)
    while i < n:
        ch = formula[i]
        if ch == '"':
            j = _scan_quoted(formula, i, '"')
            tokens.append(Token(STRING, formula[i:j]))
        elif ch == "'":
            j = _scan_quoted(formula, i, "'")
            if not formula.startswith("!", j):
                raise MalformedFormula(f"quoted name without '!' at {i} in {formula!r}")
            j += 1
            tokens.append(Token(SHEET, formula[i:j]))
        elif ch == "[":
            j = _scan_brackets(formula, i)
            tokens.append(Token(BRACKET, formula[i:j]))
        elif ch == "#" and (m := _ERROR_RE.match(formula, i)):
            j = m.end()
            tokens.append(Token(ERROR, m.group(0)))
        elif ch.isspace():
            j = _SPACE_RE.match(formula, i).end()
            tokens.append(Token(SPACE, formula[i:j]))
        else:
            tok = None
            for name in known:
                if formula.startswith(name, i):
                    tok = Token(SHEET, name)
                    break
            if tok is None and (m := _SHEET_RE.match(formula, i)) and not ch.isdigit():
                tok = Token(SHEET, m.group(0))
            if tok is None:
                tok = _match_ref(formula, i, style)
            if tok is None and (ch.isdigit() or ch == "."):
                m = _NUMBER_RE.match(formula, i)
                if m:
                    tok = Token(NUMBER, m.group(0))
            if tok is None and (m := _IDENT_RE.match(formula, i)):
                tok = Token(NAME, m.group(0))
            if tok is None:
                if ch in depth:
                    depth[ch] += 1
                elif ch in closers:
                    depth[closers[ch]] -= 1
                    if depth[closers[ch]] < 0:
                        raise MalformedFormula(f"unbalanced {ch!r} at {i} in {formula!r}")
                tok = Token(OP, ch)
            j = i + len(tok.text)
            tokens.append(tok)
        i = j
    if any(depth.values()):
        raise MalformedFormula(f"unbalanced brackets in {formula!r}")
    return tokens


def _rel_part(marker: str, axis: Axis, origin: int) -> str:
    if axis.absolute:
        return f"{marker}{axis.value}"
    delta = axis.value - origin
    return marker if delta == 0 else f"{marker}[{delta}]"


def a1_to_r1c1(formula: str, origin: CellAddress,
               sheet_names: Iterable[str] = ()) -> str:
    """Rewrite every reference of an A1 formula relative to ``origin``.

    >>> a1_to_r1c1("=B2*C2", CellAddress(2, 4))
    '=RC[-2]*RC[-1]'
    """
    out = []
    for tok in tokenize(formula, "A1", sheet_names):
        if tok.kind == CELL:
            out.append(_rel_part("R", tok.row, origin.row) + _rel_part("C", tok.col, origin.col))
        elif tok.kind == ROWS:
            out.append(_rel_part("R", tok.row, origin.row) + ":" + _rel_part("R", tok.row2, origin.row))
        elif tok.kind == COLS:
            out.append(_rel_part("C", tok.col, origin.col) + ":" + _rel_part("C", tok.col2, origin.col))
        else:
            out.append(tok.text)
    return "".join(out)


def _resolve(axis: Axis, origin: int, limit: int) -> int:
    value = axis.value if axis.absolute else origin + axis.value
    if not 1 <= value <= limit:
        raise OutOfBounds(f"reference resolves to {value}, outside 1..{limit}")
    return value


def _a1_row(axis: Axis, origin: int) -> str:
    return ("$" if axis.absolute else "") + str(_resolve(axis, origin, MAX_ROWS))


def _a1_col(axis: Axis, origin: int) -> str:
    return ("$" if axis.absolute else "") + column_letters(_resolve(axis, origin, MAX_COLS))


def r1c1_to_a1(formula: str, origin: CellAddress,
               sheet_names: Iterable[str] = ()) -> str:
    """Inverse of :func:`a1_to_r1c1` for a formula sitting at ``origin``."""
    out = []
    for tok in tokenize(formula, "R1C1", sheet_names):
        if tok.kind == CELL:
            out.append(_a1_col(tok.col, origin.col) + _a1_row(tok.row, origin.row))
        elif tok.kind == ROWS:
            out.append(_a1_row(tok.row, origin.row) + ":" + _a1_row(tok.row2, origin.row))
        elif tok.kind == COLS:
            out.append(_a1_col(tok.col, origin.col) + ":" + _a1_col(tok.col2, origin.col))
        else:
            out.append(tok.text)
    return "".join(out)


def canonicalize_a1(formula: str, sheet_names: Iterable[str] = ()) -> str:
    """Upper-case the column letters of references; everything else verbatim."""
    out = []
    for tok in tokenize(formula, "A1", sheet_names):
        out.append(tok.text.upper() if tok.kind in (CELL, COLS) else tok.text)
    return "".join(out)
