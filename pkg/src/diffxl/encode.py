"""Static-value payload encoding and the ``.diffxl`` list file format.

A list file is UTF-8 text: a ``#`` header block (version, mode, separator,
source label, one line per sheet) followed by a column header line and one
tab-separated record per segment::

    # diffxl-list/1
    # mode: checksum
    # separator: U+001F
    # source: model.grid.json
    # sheet: Sheet1	Sheet1
    Sheet	Contig ID	Row	Col	Rows	Cols	F/V	Formula	Classes
    Sheet1	1	1	1	6	1	V	0A1B2C3D	T6

Backslash, tab, CR, LF and other control characters inside fields are
written as ``\\\\``, ``\\t``, ``\\r``, ``\\n`` and ``\\xHH``.
"""

from __future__ import annotations

import re
from typing import Sequence

from .grid import DiffXLError
from .records import (
    ESCAPE,
    FORMULA,
    LIST_VERSION,
    UNIT_SEPARATOR,
    VALUE,
    DiffList,
    Mode,
    Segment,
    expand_classes,
)

COLUMNS = ("Sheet", "Contig ID", "Row", "Col", "Rows", "Cols", "F/V", "Formula", "Classes")

_HEX8_RE = re.compile(r"[0-9A-F]{8}")


class FormatError(DiffXLError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class VersionMismatch(FormatError):
    pass


def _make_table() -> list[int]:
    table = []
    for n in range(256):
        c = n
        for _ in range(8):
            c = (c >> 1) ^ 0xEDB88320 if c & 1 else c >> 1
        table.append(c)
    return table


_CRC_TABLE = _make_table()


def crc32(data: bytes | str) -> int:
    """Reflected CRC-32 (IEEE 802.3): poly 0xEDB88320, init and xorout 0xFFFFFFFF."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    crc = 0xFFFFFFFF
    table = _CRC_TABLE
    for byte in data:
        crc = table[(crc ^ byte) & 0xFF] ^ (crc >> 8)
    return crc ^ 0xFFFFFFFF


def checksum_hex(text: str) -> str:
    return f"{crc32(text):08X}"


def concat_static(cells: Sequence[str], separator: str = chr(UNIT_SEPARATOR)) -> str:
    """Join cell values with ``separator`` between every adjacent pair.

    Separator and escape characters inside a value are prefixed with ESC
    (U+001B), which makes the encoding injective.
    """
    esc = chr(ESCAPE)
    if separator == esc or len(separator) != 1:
        raise ValueError("separator must be a single character other than ESC")
    parts = [v.replace(esc, esc + esc).replace(separator, esc + separator) for v in cells]
    return separator.join(parts)


def split_static(payload: str, separator: str = chr(UNIT_SEPARATOR)) -> list[str]:
    """Inverse of :func:`concat_static`."""
    esc = chr(ESCAPE)
    cells, cur = [], []
    i = 0
    while i < len(payload):
        ch = payload[i]
        if ch == esc:
            if i + 1 >= len(payload):
                raise FormatError("dangling escape character in static payload")
            cur.append(payload[i + 1])
            i += 2
            continue
        if ch == separator:
            cells.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
        i += 1
    cells.append("".join(cur))
    return cells


def encode_v_payload(cells: Sequence[str], mode: Mode | str,
                     separator: str = chr(UNIT_SEPARATOR)) -> str:
    joined = concat_static(cells, separator)
    if Mode(mode) is Mode.FULL:
        return joined
    return checksum_hex(joined)


def _escape_field(text: str) -> str:
    out = []
    for ch in text:
        o = ord(ch)
        if ch == "\\":
            out.append("\\\\")
        elif ch == "\t":
            out.append("\\t")
        elif ch == "\n":
            out.append("\\n")
        elif ch == "\r":
            out.append("\\r")
        elif o < 0x20 or o == 0x7F:
            out.append(f"\\x{o:02x}")
        else:
            out.append(ch)
    return "".join(out)


_SIMPLE_ESCAPES = {"\\": "\\", "t": "\t", "n": "\n", "r": "\r"}


def _unescape_field(text: str, line: int) -> str:
    if "\\" not in text:
        return text
    out = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch != "\\":
            out.append(ch)
            i += 1
            continue
        nxt = text[i + 1:i + 2]
        if nxt in _SIMPLE_ESCAPES:
            out.append(_SIMPLE_ESCAPES[nxt])
            i += 2
        elif nxt == "x" and re.fullmatch(r"[0-9a-fA-F]{2}", text[i + 2:i + 4]):
            out.append(chr(int(text[i + 2:i + 4], 16)))
            i += 4
        else:
            raise FormatError(f"bad escape sequence in field {text!r}", line)
    return "".join(out)


def format_codepoint(cp: int) -> str:
    return f"U+{cp:04X}"


def parse_codepoint(text: str) -> int:
    m = re.fullmatch(r"[Uu]\+([0-9A-Fa-f]{4,6})", text.strip())
    if not m:
        raise ValueError(f"expected a code point like U+001F, got {text!r}")
    cp = int(m.group(1), 16)
    if cp > 0x10FFFF or cp == ESCAPE:
        raise ValueError(f"unusable separator code point {text!r}")
    return cp


def serialize_list(dl: DiffList) -> bytes:
    lines = [
        f"# {dl.version}",
        f"# mode: {dl.mode.value}",
        f"# separator: {format_codepoint(dl.separator)}",
        f"# source: {_escape_field(dl.source_label)}",
    ]
    for obj, tab in dl.sheets:
        lines.append(f"# sheet: {_escape_field(obj)}\t{_escape_field(tab)}")
    lines.append("\t".join(COLUMNS))
    for s in dl.entries:
        lines.append("\t".join((
            _escape_field(s.sheet), str(s.contig_id), str(s.row), str(s.col),
            str(s.rows), str(s.cols), s.kind, _escape_field(s.payload), s.classes,
        )))
    return ("\n".join(lines) + "\n").encode("utf-8")


def _positive(text: str, name: str, line: int) -> int:
    if not re.fullmatch(r"[1-9][0-9]*", text):
        raise FormatError(f"{name} must be a positive integer, got {text!r}", line)
    return int(text)


def parse_list(data: bytes | str) -> DiffList:
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"list file is not UTF-8: {exc}") from None
    lines = data.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise FormatError("empty list file", 1)

    first = lines[0]
    if not first.startswith("# diffxl-list/"):
        raise FormatError("missing '# diffxl-list/<n>' version line", 1)
    version = first[2:]
    if version != LIST_VERSION:
        raise VersionMismatch(f"unsupported list version {version!r}", 1)

    header: dict[str, str] = {}
    sheets: list[tuple[str, str]] = []
    idx = 1
    while idx < len(lines) and lines[idx].startswith("#"):
        lineno = idx + 1
        key, sep, value = lines[idx][1:].lstrip().partition(":")
        if not sep:
            raise FormatError(f"malformed header line {lines[idx]!r}", lineno)
        key, value = key.strip(), value[1:] if value.startswith(" ") else value
        if key == "sheet":
            parts = value.split("\t")
            if len(parts) != 2:
                raise FormatError("sheet header needs object and tab names", lineno)
            sheets.append((_unescape_field(parts[0], lineno), _unescape_field(parts[1], lineno)))
        elif key in ("mode", "separator", "source"):
            if key in header:
                raise FormatError(f"duplicate header {key!r}", lineno)
            header[key] = value
        else:
            raise FormatError(f"unknown header {key!r}", lineno)
        idx += 1
    for key in ("mode", "separator", "source"):
        if key not in header:
            raise FormatError(f"missing header {key!r}", idx)
    try:
        mode = Mode(header["mode"])
    except ValueError:
        raise FormatError(f"unknown mode {header['mode']!r}") from None
    try:
        separator = parse_codepoint(header["separator"])
    except ValueError as exc:
        raise FormatError(str(exc)) from None

    if idx >= len(lines) or lines[idx] != "\t".join(COLUMNS):
        raise FormatError("missing column header line", idx + 1)
    idx += 1

    known = {obj for obj, _ in sheets}
    entries = []
    for i in range(idx, len(lines)):
        lineno = i + 1
        fields = lines[i].split("\t")
        if len(fields) != len(COLUMNS):
            raise FormatError(f"expected {len(COLUMNS)} columns, got {len(fields)}", lineno)
        sheet = _unescape_field(fields[0], lineno)
        if sheet not in known:
            raise FormatError(f"record for undeclared sheet {sheet!r}", lineno)
        contig, row, col, rows, cols = (
            _positive(f, name, lineno) for f, name in zip(fields[1:6], COLUMNS[1:6]))
        kind = fields[6]
        if kind not in (FORMULA, VALUE):
            raise FormatError(f"F/V column must be 'F' or 'V', got {kind!r}", lineno)
        payload = _unescape_field(fields[7], lineno)
        classes = fields[8]
        if kind == FORMULA:
            if not payload.startswith("=") or classes:
                raise FormatError("formula record needs '=' payload and no classes", lineno)
        else:
            if mode is Mode.CHECKSUM and not _HEX8_RE.fullmatch(payload):
                raise FormatError(f"checksum payload must be 8 hex digits, got {payload!r}", lineno)
            try:
                n_classes = len(expand_classes(classes))
            except ValueError as exc:
                raise FormatError(str(exc), lineno) from None
            if n_classes != rows * cols:
                raise FormatError("class summary does not match segment area", lineno)
        entries.append(Segment(sheet, contig, row, col, rows, cols, kind, payload, classes))

    return DiffList(
        mode=mode, entries=tuple(entries), sheets=tuple(sheets), separator=separator,
        source_label=_unescape_field(header["source"], 1), version=version,
    )
