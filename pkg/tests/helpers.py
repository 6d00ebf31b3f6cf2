"""Shared builders for tests: worked example, random workbooks, mutations, oracle."""

from __future__ import annotations

import json
import random
from dataclasses import replace
from pathlib import Path

from diffxl.formula import a1_to_r1c1, r1c1_to_a1
from diffxl.grid import CellAddress, CellContent, Sheet, ValueClass, Workbook, column_letters
from diffxl.ingest import load_grid
from diffxl.segmenter import find_contiguous_ranges

FIXTURES = Path(__file__).parent / "fixtures"
RISK_PAIRS = FIXTURES / "risk_pairs"


def a1(row: int, col: int) -> str:
    return f"{column_letters(col)}{row}"


def example_cells(top: int = 1, left: int = 1, *, c4: str | None = None,
                average_row: bool = False, header=("Base", "X", "Y", "Gamma", "Delta"),
                rows: int = 6) -> list[dict]:
    """Cell records of the worked 6x5 example, optionally shifted.

    ``c4`` overrides the inconsistent cell: ``None`` keeps the number,
    a string starting with ``=`` puts an A1 formula there.
    """
    def ref(r: int, c: int) -> str:
        return a1(r + top - 1, c + left - 1)

    cells = [{"ref": ref(1, c), "value": h} for c, h in enumerate(header, 1)]
    for r in range(2, rows + 1):
        cells.append({"ref": ref(r, 1), "value": "CORONA"})
        cells.append({"ref": ref(r, 2), "formula": f"=Data!{ref(r, 2)}"})
        if r == 4 and (c4 is None or not c4.startswith("=")):
            cells.append({"ref": ref(r, 3), "value": c4 or "96.10542",
                          "value_class": "number" if c4 is None else "text"})
        else:
            cells.append({"ref": ref(r, 3), "formula": f"=Data!{ref(r, 3)}"})
        cells.append({"ref": ref(r, 4), "formula": f"=Data!{ref(r, 4)}*Freq"})
        cells.append({"ref": ref(r, 5), "formula": f"={ref(r, 3)}*{ref(r, 4)}"})
    if average_row:
        for c in range(2, 6):
            cells.append({"ref": ref(rows + 2, c),
                          "formula": f"=AVERAGE({ref(2, c)}:{ref(rows, c)})"})
    return cells


def grid_doc(*sheets: tuple[str, list[dict]] | tuple[str, str, list[dict]]) -> dict:
    out = []
    for entry in sheets:
        if len(entry) == 2:
            obj, cells = entry
            tab = obj
        else:
            obj, tab, cells = entry
        out.append({"object_name": obj, "tab_name": tab, "cells": cells})
    return {"version": "diffxl-grid/1", "sheets": out}


def load_doc(doc: dict, label: str = "") -> Workbook:
    return load_grid(json.dumps(doc), label)


def example_workbook(**kw) -> Workbook:
    return load_doc(grid_doc(("Sheet1", example_cells(**kw))), "example.grid.json")


# --- random workbooks ---------------------------------------------------------

# Relative patterns stay in-bounds because generated cells sit at row, col >= 2
# whenever a pattern looks up or left.
FORMULA_PATTERNS = [
    "=RC[-1]*2",
    "=R[-1]C+1",
    "=Data!RC",
    "=RC[-1]*Freq",
    "=SUM(R1C:R[-1]C)",
    "=$A$1",
    "=IF(RC[-1]>0,\"pos\",\"neg\")",
    "=R1C1+RC[-1]",
]
WORDS = ["alpha", "beta", "gamma", "CORONA", "Base", "", "x|y", "\x1f", "\x1b"]


def formula_cell(r1c1: str, row: int, col: int) -> CellContent:
    addr = CellAddress(row, col)
    text = r1c1_to_a1(r1c1, addr)
    return CellContent.formula(text, a1_to_r1c1(text, addr))


def random_value(rng: random.Random) -> CellContent:
    roll = rng.random()
    if roll < 0.45:
        return CellContent.value(str(rng.choice([1, 2, 3, 7, 42, 96.10542, -0.5])),
                                 ValueClass.NUMBER)
    if roll < 0.55:
        return CellContent.value(rng.choice(["TRUE", "FALSE"]), ValueClass.BOOLEAN)
    text = rng.choice(WORDS)
    return CellContent.value(text, ValueClass.BLANK if text == "" else ValueClass.TEXT)


def random_sheet(rng: random.Random, name: str, size: int = 12) -> Sheet:
    cells: dict[CellAddress, CellContent] = {}
    for _ in range(rng.randint(1, 3)):
        h, w = rng.randint(1, 6), rng.randint(1, 5)
        top, left = rng.randint(2, size - h + 1), rng.randint(2, size - w + 1)
        for c in range(left, left + w):
            if rng.random() < 0.5:
                pattern = rng.choice(FORMULA_PATTERNS)
                for r in range(top, top + h):
                    cells[CellAddress(r, c)] = formula_cell(pattern, r, c)
            else:
                for r in range(top, top + h):
                    cells[CellAddress(r, c)] = random_value(rng)
    # a few stray cells and inconsistent formulas
    for _ in range(rng.randint(0, 3)):
        r, c = rng.randint(2, size), rng.randint(2, size)
        if rng.random() < 0.5:
            cells[CellAddress(r, c)] = random_value(rng)
        else:
            cells[CellAddress(r, c)] = formula_cell(rng.choice(FORMULA_PATTERNS), r, c)
    if rng.random() < 0.3:
        cells[CellAddress(1, 1)] = CellContent.value("Title", ValueClass.TEXT)
    return Sheet(name, name, cells)


def random_workbook(rng: random.Random) -> Workbook:
    n = rng.randint(1, 3)
    return Workbook(tuple(random_sheet(rng, f"Sheet{i + 1}") for i in range(n)), "random")


# --- mutations ----------------------------------------------------------------

def _with_sheet(wb: Workbook, sheet: Sheet) -> Workbook:
    return Workbook(tuple(sheet if s.object_name == sheet.object_name else s for s in wb.sheets),
                    wb.source_label)


def _relocate(content: CellContent, row: int, col: int) -> CellContent | None:
    if not content.is_formula:
        return content
    try:
        return formula_cell(content.r1c1_text, row, col)
    except ValueError:
        return None


def mutate(wb: Workbook, rng: random.Random) -> tuple[Workbook, str]:
    """Apply one random structural mutation; returns the new workbook and its name."""
    ops = ["overwrite_formula", "edit_value", "insert_rows", "delete_rows", "move_range",
           "add_sheet", "delete_cell", "change_formula", "number_to_text", "add_cell",
           "delete_sheet"]
    rng.shuffle(ops)
    for op in ops:
        out = _MUTATIONS[op](wb, rng)
        if out is not None:
            return out, op
    raise AssertionError("no mutation applicable")


def _pick(wb: Workbook, rng: random.Random, pred) -> tuple[Sheet, CellAddress] | None:
    choices = [(s, a) for s in wb.sheets for a, c in s if pred(c)]
    return rng.choice(choices) if choices else None


def _set(wb: Workbook, sheet: Sheet, addr: CellAddress, content: CellContent | None) -> Workbook:
    cells = dict(sheet.cells)
    if content is None:
        cells.pop(addr, None)
    else:
        cells[addr] = content
    return _with_sheet(wb, Sheet(sheet.object_name, sheet.tab_name, cells))


def _overwrite_formula(wb, rng):
    hit = _pick(wb, rng, lambda c: c.is_formula)
    if hit:
        return _set(wb, *hit, CellContent.value("96.105", ValueClass.NUMBER))


def _edit_value(wb, rng):
    hit = _pick(wb, rng, lambda c: not c.is_formula)
    if hit:
        old = hit[0].cells[hit[1]]
        text = old.value_text + "!" if old.value_class is not ValueClass.NUMBER else "12345"
        cls = ValueClass.TEXT if old.value_class is not ValueClass.NUMBER else ValueClass.NUMBER
        return _set(wb, *hit, CellContent.value(text, cls))


def _number_to_text(wb, rng):
    hit = _pick(wb, rng, lambda c: c.value_class is ValueClass.NUMBER)
    if hit:
        old = hit[0].cells[hit[1]]
        return _set(wb, *hit, CellContent.value(old.value_text, ValueClass.TEXT))


def _change_formula(wb, rng):
    hit = _pick(wb, rng, lambda c: c.is_formula)
    if hit:
        sheet, addr = hit
        old = sheet.cells[addr].r1c1_text
        for pattern in rng.sample(FORMULA_PATTERNS, len(FORMULA_PATTERNS)):
            if pattern != old:
                new = _relocate(CellContent.formula("=1", pattern), addr.row, addr.col)
                if new is not None:
                    return _set(wb, sheet, addr, new)


def _delete_cell(wb, rng):
    hit = _pick(wb, rng, lambda c: True)
    if hit:
        return _set(wb, *hit, None)


def _add_cell(wb, rng):
    if not wb.sheets:
        return None
    sheet = rng.choice(wb.sheets)
    for _ in range(20):
        addr = CellAddress(rng.randint(1, 13), rng.randint(1, 13))
        if addr not in sheet.cells:
            return _set(wb, sheet, addr, random_value(rng))


def _shift_rows(wb, rng, insert: bool):
    candidates = [s for s in wb.sheets if len(s)]
    if not candidates:
        return None
    sheet = rng.choice(candidates)
    rows = sorted({a.row for a in sheet.cells})
    at, k = rng.choice(rows), rng.randint(1, 2)
    cells = {}
    for a, c in sheet:
        if insert:
            r = a.row + k if a.row >= at else a.row
        else:
            if at <= a.row < at + k:
                continue
            r = a.row - k if a.row >= at + k else a.row
        moved = _relocate(c, r, a.col)
        if moved is None:
            return None
        cells[CellAddress(r, a.col)] = moved
    if insert and rng.random() < 0.5:
        # populate the inserted band by copying the row below it
        for a, c in list(cells.items()):
            if a.row == at + k:
                for r in range(at, at + k):
                    moved = _relocate(c, r, a.col)
                    if moved is None:
                        return None
                    cells[CellAddress(r, a.col)] = moved
    return _with_sheet(wb, Sheet(sheet.object_name, sheet.tab_name, cells))


def _move_range(wb, rng):
    sheets = [s for s in wb.sheets if len(s)]
    if not sheets:
        return None
    sheet = rng.choice(sheets)
    ranges = find_contiguous_ranges(sheet)
    rng_ = rng.choice(ranges)
    others = {(a.row, a.col) for a in sheet.cells if a not in rng_.member_cells}
    for _ in range(30):
        dr, dc = rng.randint(-3, 12), rng.randint(-3, 12)
        if (dr, dc) == (0, 0):
            continue
        target = {(a.row + dr, a.col + dc) for a in rng_.member_cells}
        if any(r < 1 or c < 1 for r, c in target):
            continue
        halo = {(r + i, c + j) for r, c in target for i in (-1, 0, 1) for j in (-1, 0, 1)}
        if halo & others:
            continue
        cells = {a: c for a, c in sheet if a not in rng_.member_cells}
        ok = True
        for a in rng_.member_cells:
            moved = sheet.cells[a]
            # A move keeps the relative formula text, as a copy would.
            if moved.is_formula:
                moved = _relocate(moved, a.row + dr, a.col + dc)
                if moved is None:
                    ok = False
                    break
            cells[CellAddress(a.row + dr, a.col + dc)] = moved
        if ok:
            return _with_sheet(wb, Sheet(sheet.object_name, sheet.tab_name, cells))
    return None


def _add_sheet(wb, rng):
    names = {s.object_name for s in wb.sheets}
    name = next(f"Extra{i}" for i in range(10) if f"Extra{i}" not in names)
    sheet = random_sheet(rng, name)
    return Workbook(wb.sheets + (sheet,), wb.source_label)


def _delete_sheet(wb, rng):
    if len(wb.sheets) < 2:
        return None
    victim = rng.choice(wb.sheets)
    return Workbook(tuple(s for s in wb.sheets if s is not victim), wb.source_label)


_MUTATIONS = {
    "overwrite_formula": _overwrite_formula,
    "edit_value": _edit_value,
    "number_to_text": _number_to_text,
    "change_formula": _change_formula,
    "delete_cell": _delete_cell,
    "add_cell": _add_cell,
    "insert_rows": lambda wb, rng: _shift_rows(wb, rng, insert=True),
    "delete_rows": lambda wb, rng: _shift_rows(wb, rng, insert=False),
    "move_range": _move_range,
    "add_sheet": _add_sheet,
    "delete_sheet": _delete_sheet,
}


# --- brute-force structural diff ------------------------------------------------

def _cell_key(c: CellContent | None):
    if c is None:
        return None
    # Formula identity is positional: same R1C1 at the same cell means same formula.
    return (c.kind, c.r1c1_text) if c.is_formula else (c.kind, c.value_text, c.value_class)


def oracle_diff(old: Workbook, new: Workbook) -> tuple[set[tuple[str, int, int]], set[str]]:
    """Cells whose formula or data differ, plus sheets present on one side only."""
    old_s = {s.object_name: s for s in old.sheets}
    new_s = {s.object_name: s for s in new.sheets}
    changed = set()
    for name in old_s.keys() | new_s.keys():
        a = old_s.get(name)
        b = new_s.get(name)
        cells_a = a.cells if a else {}
        cells_b = b.cells if b else {}
        for addr in cells_a.keys() | cells_b.keys():
            if _cell_key(cells_a.get(addr)) != _cell_key(cells_b.get(addr)):
                changed.add((name, addr.row, addr.col))
    sheets = set(old_s) ^ set(new_s)
    return changed, sheets


def translate_sheet(sheet: Sheet, dr: int, dc: int) -> Sheet:
    return replace(sheet, cells={CellAddress(a.row + dr, a.col + dc): c for a, c in sheet})


# --- formula grammar -------------------------------------------------------------

class GenRef:
    """A generated reference that knows its A1 and R1C1 spellings."""

    def __init__(self, kind: str, axes: list[tuple[str, int, bool]], sheet: str = ""):
        self.kind, self.axes, self.sheet = kind, axes, sheet

    def a1(self, dr: int = 0, dc: int = 0) -> str:
        def one(axis: str, v: int, absolute: bool) -> str:
            if axis == "r":
                return ("$" if absolute else "") + str(v if absolute else v + dr)
            return ("$" if absolute else "") + column_letters(v if absolute else v + dc)
        parts = []
        if self.kind == "cell":
            for i in range(0, len(self.axes), 2):
                (_, r, ra), (_, c, ca) = self.axes[i], self.axes[i + 1]
                parts.append(one("c", c, ca) + one("r", r, ra))
        else:
            parts = [one(*ax) for ax in self.axes]
        return self.sheet + ":".join(parts)

    def r1c1(self, origin: CellAddress) -> str:
        def one(axis: str, v: int, absolute: bool) -> str:
            mark = "R" if axis == "r" else "C"
            if absolute:
                return f"{mark}{v}"
            d = v - (origin.row if axis == "r" else origin.col)
            return mark if d == 0 else f"{mark}[{d}]"
        if self.kind == "cell":
            parts = [one(*self.axes[i]) + one(*self.axes[i + 1])
                     for i in range(0, len(self.axes), 2)]
        else:
            parts = [one(*ax) for ax in self.axes]
        return self.sheet + ":".join(parts)


_SHEETS = ["", "", "", "Data!", "'My Sheet'!", "Sheet2!"]
_FUNCS = ["SUM(", "AVERAGE(", "IF(", "MAX(", "LOG10("]
_NAMES = ["Freq", "Rate_2", "TRUE", "x.y"]
_STRINGS = ['"A1"', '"R1C1"', '"it""s B2"', '""', '"Sheet1!C3"']
_ERRORS = ["#REF!", "#N/A", "#DIV/0!"]


def gen_formula(rng: random.Random, lo: int = 1, hi: int = 60) -> list:
    """A formula as a list of literal strings and GenRef items."""
    def ref() -> GenRef:
        sheet = rng.choice(_SHEETS)
        roll = rng.random()
        if roll < 0.7:
            n = 2 if roll < 0.5 else 4
            axes = [(("r", "c")[i % 2], rng.randint(lo, hi), rng.random() < 0.3) for i in range(n)]
            return GenRef("cell", axes, sheet)
        axis = "r" if roll < 0.85 else "c"
        return GenRef("rows" if axis == "r" else "cols",
                      [(axis, rng.randint(lo, hi), rng.random() < 0.3) for _ in range(2)], sheet)

    def expr(depth: int) -> list:
        roll = rng.random()
        if depth > 2 or roll < 0.45:
            pick = rng.random()
            if pick < 0.6:
                return [ref()]
            if pick < 0.75:
                return [str(rng.choice([1, 2.5, 100, "1E3"]))]
            if pick < 0.85:
                return [rng.choice(_STRINGS)]
            if pick < 0.93:
                return [rng.choice(_NAMES)]
            return [rng.choice(_ERRORS)]
        if roll < 0.75:
            return expr(depth + 1) + [rng.choice(["+", "-", "*", "/", "&", "^", "<>", ">="])] + expr(depth + 1)
        args = [expr(depth + 1) for _ in range(rng.randint(1, 3))]
        out = [rng.choice(_FUNCS)]
        for i, a in enumerate(args):
            if i:
                out.append(",")
            out.extend(a)
        return out + [")"]

    return ["="] + expr(0)


def render_a1(parts: list, dr: int = 0, dc: int = 0) -> str:
    return "".join(p.a1(dr, dc) if isinstance(p, GenRef) else p for p in parts)


def render_r1c1(parts: list, origin: CellAddress) -> str:
    return "".join(p.r1c1(origin) if isinstance(p, GenRef) else p for p in parts)


def relative_extent(parts: list) -> tuple[int, int, int, int]:
    """(min row, min col, max row, max col) over relative axes; 0s when none."""
    rows = [v for p in parts if isinstance(p, GenRef) for a, v, ab in p.axes if a == "r" and not ab]
    cols = [v for p in parts if isinstance(p, GenRef) for a, v, ab in p.axes if a == "c" and not ab]
    return (min(rows, default=0), min(cols, default=0), max(rows, default=0), max(cols, default=0))


# --- segmentation invariants -------------------------------------------------------

def components_oracle(sheet: Sheet) -> list[set[tuple[int, int]]]:
    """8-connected components by union-find, ordered by bounding-box (top, left)."""
    cells = [(a.row, a.col) for a in sheet.cells]
    parent = {c: c for c in cells}

    def find(c):
        while parent[c] != c:
            parent[c] = parent[parent[c]]
            c = parent[c]
        return c

    for r, c in cells:
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                n = (r + dr, c + dc)
                if n in parent:
                    parent[find(n)] = find((r, c))
    groups: dict = {}
    for c in cells:
        groups.setdefault(find(c), set()).add(c)
    return sorted(groups.values(), key=lambda g: (min(r for r, _ in g), min(c for _, c in g)))


def segment_violations(sheet: Sheet, segments) -> list[str]:
    """Check partition, homogeneity and the greedy down-then-right rule."""
    problems = []

    def cls(pos):
        content = sheet.get(*pos)
        return content.r1c1_text if content.is_formula else "value"

    comps = components_oracle(sheet)
    by_id = {i + 1: comp for i, comp in enumerate(comps)}
    seen: set = set()
    for cid, comp in by_id.items():
        segs = [s for s in segments if s.contig_id == cid]
        assigned: set = set()
        for s in segs:
            cells = {(a.row, a.col) for a in s.cells()}
            if not cells <= comp:
                problems.append(f"{s} leaves its range")
                continue
            if cells & assigned:
                problems.append(f"{s} overlaps")
            kinds = {cls(p) for p in cells}
            if len(kinds) != 1:
                problems.append(f"{s} not homogeneous")
            k = kinds.pop()
            if (s.kind == "F") != (k != "value") or (s.kind == "F" and s.payload != k):
                problems.append(f"{s} kind/payload mismatch")
            free = sorted(comp - assigned)
            if free and free[0] != (s.row, s.col):
                problems.append(f"{s} does not start at first free cell {free[0]}")

            def open_(p):
                return p in comp and p not in assigned and cls(p) == k
            # could not grow down in the first column, nor right by a full column
            if open_((s.bottom + 1, s.col)) and all(
                    open_((r, s.col)) for r in range(s.row, s.bottom + 1)):
                problems.append(f"{s} not maximal downward")
            if all(open_((r, s.right + 1)) for r in range(s.row, s.bottom + 1)):
                problems.append(f"{s} not maximal rightward")
            assigned |= cells
        if assigned != comp:
            problems.append(f"range {cid} not covered")
        seen |= assigned
    if any(s.contig_id not in by_id for s in segments):
        problems.append("unknown contig id")
    return problems
