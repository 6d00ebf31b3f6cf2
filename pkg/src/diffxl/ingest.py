"""Workbook loaders: the canonical grid document and a read-only XLSX subset."""

from __future__ import annotations

import io
import json
import logging
import posixpath
import re
import zipfile
from pathlib import Path
from typing import Any
from xml.etree import ElementTree as ET

from .formula import a1_to_r1c1, r1c1_to_a1
from .grid import (
    CellAddress,
    CellContent,
    DiffXLError,
    MalformedFormula,
    MalformedRef,
    OutOfBounds,
    Sheet,
    ValueClass,
    Workbook,
    canonical_number,
    parse_a1_ref,
)

logger = logging.getLogger(__name__)

GRID_VERSION = "diffxl-grid/1"


class ParseError(DiffXLError, ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line, self.column = line, column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)


class DuplicateRef(ParseError):
    pass


class DuplicateContent(ParseError):
    pass


class UnknownVersion(ParseError):
    pass


class ContainerError(DiffXLError, ValueError):
    pass


def _formula_content(a1: str, addr: CellAddress, sheet_names: set[str],
                     where: str, warnings: list[str]) -> CellContent:
    try:
        return CellContent.formula(a1, a1_to_r1c1(a1, addr, sheet_names))
    except (MalformedFormula, MalformedRef, OutOfBounds) as exc:
        msg = f"cell-degraded: {where}!{addr.a1}: formula kept as text ({exc})"
        logger.warning(msg)
        warnings.append(msg)
        return CellContent.value(a1, ValueClass.TEXT)


def _value_content(raw: Any, value_class: str | None, where: str) -> CellContent:
    if isinstance(raw, bool):
        text, default = ("TRUE" if raw else "FALSE"), ValueClass.BOOLEAN
    elif isinstance(raw, (int, float)):
        text, default = str(raw), ValueClass.NUMBER
    elif isinstance(raw, str):
        text, default = raw, (ValueClass.BLANK if raw == "" else ValueClass.TEXT)
    else:
        raise ParseError(f"{where}: value must be a string, number or boolean")
    try:
        cls = ValueClass(value_class) if value_class is not None else default
    except ValueError:
        raise ParseError(f"{where}: unknown value_class {value_class!r}") from None
    if cls is ValueClass.BOOLEAN:
        text = text.upper()
        if text not in ("TRUE", "FALSE"):
            raise ParseError(f"{where}: boolean value must be TRUE or FALSE")
    try:
        return CellContent.value(text, cls)
    except ValueError:
        raise ParseError(f"{where}: {text!r} is not a finite number") from None


def load_grid(data: bytes | str, source_label: str = "") -> Workbook:
    """Parse a grid document into a Workbook with R1C1-normalised formulas."""
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from None
    except UnicodeDecodeError as exc:
        raise ParseError(f"grid document is not UTF-8: {exc}") from None
    if not isinstance(doc, dict):
        raise ParseError("grid document must be an object")
    if doc.get("version") != GRID_VERSION:
        raise UnknownVersion(f"unknown grid version {doc.get('version')!r}")
    raw_sheets = doc.get("sheets")
    if not isinstance(raw_sheets, list):
        raise ParseError("'sheets' must be a list")

    sheet_names: set[str] = set()
    for s in raw_sheets:
        if not isinstance(s, dict) or not s.get("object_name"):
            raise ParseError("every sheet needs an object_name")
        sheet_names.add(s.get("tab_name") or s["object_name"])
        sheet_names.add(s["object_name"])

    warnings: list[str] = []
    sheets = []
    for s in raw_sheets:
        obj = s["object_name"]
        tab = s.get("tab_name") or obj
        cells: dict[CellAddress, CellContent] = {}
        for rec in s.get("cells", []):
            if not isinstance(rec, dict) or "ref" not in rec:
                raise ParseError(f"sheet {obj!r}: every cell needs a ref")
            where = f"{obj}!{rec['ref']}"
            try:
                addr, _ = parse_a1_ref(rec["ref"])
            except (MalformedRef, OutOfBounds) as exc:
                raise ParseError(f"{where}: {exc}") from None
            if addr in cells:
                raise DuplicateRef(f"duplicate cell reference {where}")
            has_value, has_formula = "value" in rec, "formula" in rec
            if has_value and has_formula:
                raise DuplicateContent(f"{where}: cell has both a value and a formula")
            if has_formula:
                f = rec["formula"]
                if not isinstance(f, str) or not f.startswith("="):
                    raise ParseError(f"{where}: formula must be a string starting with '='")
                cells[addr] = _formula_content(f, addr, sheet_names, obj, warnings)
            elif has_value:
                cells[addr] = _value_content(rec["value"], rec.get("value_class"), where)
            else:
                raise ParseError(f"{where}: cell has neither value nor formula")
        sheets.append(Sheet(obj, tab, cells))
    try:
        return Workbook(tuple(sheets), source_label, tuple(warnings))
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def save_grid(workbook: Workbook) -> bytes:
    sheets = []
    for sheet in workbook.sheets:
        cells = []
        for addr, content in sheet:
            if content.is_formula:
                cells.append({"ref": addr.a1, "formula": content.value_text})
            else:
                cells.append({"ref": addr.a1, "value": content.value_text,
                              "value_class": content.value_class.value})
        sheets.append({"object_name": sheet.object_name, "tab_name": sheet.tab_name,
                       "cells": cells})
    doc = {"version": GRID_VERSION, "sheets": sheets}
    return (json.dumps(doc, indent=1, ensure_ascii=False) + "\n").encode("utf-8")


# --- XLSX -------------------------------------------------------------------

_NS = {
    "m": "http://schemas.openxmlformats.org/spreadsheetml/2006/main",
    "r": "http://schemas.openxmlformats.org/officeDocument/2006/relationships",
    "pr": "http://schemas.openxmlformats.org/package/2006/relationships",
}
_R_ID = "{%s}id" % _NS["r"]
_IGNORED_PARTS = [
    (re.compile(r"(^|/)vbaProject\.bin$"), "macros"),
    (re.compile(r"^xl/charts/"), "charts"),
    (re.compile(r"^xl/drawings/"), "drawings"),
    (re.compile(r"^xl/pivotCache/"), "pivot caches"),
    (re.compile(r"^xl/pivotTables/"), "pivot tables"),
    (re.compile(r"^xl/externalLinks/"), "external links"),
    (re.compile(r"^xl/connections\.xml$"), "data connections"),
    (re.compile(r"^xl/tables/"), "tables"),
]


def _rels(zf: zipfile.ZipFile, part: str) -> dict[str, tuple[str, str]]:
    """Map relationship id -> (type, resolved part name) for ``part``."""
    folder, name = posixpath.split(part)
    rels_name = posixpath.join(folder, "_rels", name + ".rels")
    if rels_name not in zf.namelist():
        return {}
    root = ET.fromstring(zf.read(rels_name))
    out = {}
    for rel in root.findall("pr:Relationship", _NS):
        target = rel.get("Target", "")
        if rel.get("TargetMode") == "External":
            continue
        if target.startswith("/"):
            resolved = target.lstrip("/")
        else:
            resolved = posixpath.normpath(posixpath.join(folder, target))
        out[rel.get("Id")] = (rel.get("Type", "").rsplit("/", 1)[-1], resolved)
    return out


def _text_of(el: ET.Element) -> str:
    # Rich text runs concatenate; phonetic hints are not cell content.
    parts = []
    for child in el:
        tag = child.tag.split("}")[-1]
        if tag == "t":
            parts.append(child.text or "")
        elif tag == "r":
            t = child.find("m:t", _NS)
            parts.append(t.text or "" if t is not None else "")
    return "".join(parts)


def _shared_strings(zf: zipfile.ZipFile, part: str | None) -> list[str]:
    if part is None or part not in zf.namelist():
        return []
    root = ET.fromstring(zf.read(part))
    return [_text_of(si) for si in root.findall("m:si", _NS)]


def _xlsx_value(cell: ET.Element, strings: list[str], where: str) -> CellContent | None:
    t = cell.get("t", "n")
    v = cell.find("m:v", _NS)
    if t == "inlineStr":
        is_el = cell.find("m:is", _NS)
        if is_el is None:
            return None
        text = _text_of(is_el)
        return CellContent.value(text, ValueClass.BLANK if text == "" else ValueClass.TEXT)
    if v is None or v.text is None:
        return None
    raw = v.text
    if t == "s":
        try:
            text = strings[int(raw)]
        except (ValueError, IndexError):
            raise ContainerError(f"{where}: bad shared string index {raw!r}") from None
        return CellContent.value(text, ValueClass.BLANK if text == "" else ValueClass.TEXT)
    if t == "b":
        return CellContent.value("TRUE" if raw.strip() == "1" else "FALSE", ValueClass.BOOLEAN)
    if t == "e":
        return CellContent.value(raw, ValueClass.ERROR)
    if t in ("str", "d"):
        return CellContent.value(raw, ValueClass.BLANK if raw == "" else ValueClass.TEXT)
    try:
        return CellContent.value(canonical_number(raw), ValueClass.NUMBER)
    except ValueError:
        raise ContainerError(f"{where}: bad numeric value {raw!r}") from None


def _read_sheet(xml: bytes, obj: str, strings: list[str], sheet_names: set[str],
                warnings: list[str]) -> tuple[str | None, dict[CellAddress, CellContent]]:
    root = ET.fromstring(xml)
    pr = root.find("m:sheetPr", _NS)
    code_name = pr.get("codeName") if pr is not None else None

    rows = root.findall("m:sheetData/m:row", _NS)
    masters: dict[str, tuple[CellAddress, str]] = {}
    pending: list[tuple[CellAddress, ET.Element]] = []
    last_row = 0
    for row in rows:
        row_no = int(row.get("r", last_row + 1))
        last_row, last_col = row_no, 0
        for cell in row.findall("m:c", _NS):
            ref = cell.get("r")
            if ref:
                addr, _ = parse_a1_ref(ref)
            else:
                addr = CellAddress(row_no, last_col + 1)
            last_col = addr.col
            pending.append((addr, cell))
            f = cell.find("m:f", _NS)
            if f is not None and f.get("t") == "shared" and f.text:
                masters[f.get("si")] = (addr, "=" + f.text)

    cells: dict[CellAddress, CellContent] = {}
    for addr, cell in pending:
        where = f"{obj}!{addr.a1}"
        f = cell.find("m:f", _NS)
        a1 = None
        if f is not None:
            if f.text:
                a1 = "=" + f.text
            elif f.get("t") == "shared" and f.get("si") in masters:
                m_addr, m_text = masters[f.get("si")]
                try:
                    a1 = r1c1_to_a1(a1_to_r1c1(m_text, m_addr, sheet_names), addr, sheet_names)
                except (MalformedFormula, OutOfBounds) as exc:
                    msg = f"cell-degraded: {where}: shared formula not expandable ({exc})"
                    warnings.append(msg)
                    logger.warning(msg)
            # Array formula followers carry no <f> text; they are plain values.
        if a1 is not None:
            cells[addr] = _formula_content(a1, addr, sheet_names, obj, warnings)
            continue
        content = _xlsx_value(cell, strings, where)
        if content is not None:
            cells[addr] = content
    return code_name, cells


def load_xlsx(data: bytes, source_label: str = "") -> Workbook:
    """Read cell content from an XLSX container.

    Only values, stored formula text (shared formulas expanded per cell),
    shared/inline strings and sheet code names are read. Macros, charts,
    pivot caches and the like are recorded as warnings and skipped.
    """
    try:
        zf = zipfile.ZipFile(io.BytesIO(data))
        names = zf.namelist()
        root_rels = _rels(zf, "")
        wb_part = next((p for t, p in root_rels.values() if t == "officeDocument"),
                       "xl/workbook.xml")
        wb_root = ET.fromstring(zf.read(wb_part))
        wb_rels = _rels(zf, wb_part)
        strings_part = next((p for t, p in wb_rels.values() if t == "sharedStrings"), None)
        strings = _shared_strings(zf, strings_part)

        warnings: list[str] = []
        for name in names:
            for pattern, label in _IGNORED_PARTS:
                if pattern.search(name):
                    warnings.append(f"UnsupportedFeature: {label} ignored ({name})")
                    break
        if wb_root.findall("m:definedNames/m:definedName", _NS):
            warnings.append("UnsupportedFeature: defined names ignored")

        entries = []
        for el in wb_root.findall("m:sheets/m:sheet", _NS):
            tab = el.get("name", "")
            rel_type, part = wb_rels.get(el.get(_R_ID), ("", ""))
            if rel_type != "worksheet":
                warnings.append(f"UnsupportedFeature: non-worksheet sheet {tab!r} ignored")
                continue
            entries.append((tab, part))
        sheet_names = {tab for tab, _ in entries}

        sheets = []
        used: set[str] = set()
        for tab, part in entries:
            code_name, cells = _read_sheet(zf.read(part), tab, strings, sheet_names, warnings)
            obj = code_name if code_name and code_name not in used else tab
            if obj in used:
                raise ContainerError(f"cannot derive a unique object name for sheet {tab!r}")
            used.add(obj)
            sheets.append(Sheet(obj, tab, cells))
    except (zipfile.BadZipFile, zipfile.LargeZipFile, EOFError) as exc:
        raise ContainerError(f"not a readable ZIP container: {exc}") from None
    except KeyError as exc:
        raise ContainerError(f"missing part {exc}") from None
    except ET.ParseError as exc:
        raise ContainerError(f"malformed XML: {exc}") from None
    except (MalformedRef, OutOfBounds) as exc:
        raise ContainerError(f"bad cell reference: {exc}") from None

    for w in warnings:
        logger.warning(w)
    return Workbook(tuple(sheets), source_label, tuple(warnings))


ZIP_MAGIC = b"PK\x03\x04"


def sniff_format(data: bytes, path: str | Path | None = None) -> str:
    """Return ``"xlsx"``, ``"list"`` or ``"grid"`` for the given bytes."""
    if data.startswith(ZIP_MAGIC):
        return "xlsx"
    if data.lstrip().startswith(b"# diffxl-list/"):
        return "list"
    if path is not None and str(path).endswith((".xlsx", ".xlsm")):
        return "xlsx"
    return "grid"


def load_workbook(path: str | Path, fmt: str | None = None) -> Workbook:
    path = Path(path)
    data = path.read_bytes()
    fmt = fmt or sniff_format(data, path)
    if fmt == "xlsx":
        return load_xlsx(data, path.name)
    if fmt == "grid":
        return load_grid(data, path.name)
    raise ValueError(f"{path} is not a workbook (format {fmt!r})")
