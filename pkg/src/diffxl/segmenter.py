"""Contiguous-range detection and greedy rectangular decomposition."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .encode import encode_v_payload
from .grid import MAX_COLS, MAX_ROWS, CellAddress, CellContent, Sheet, Workbook
from .records import (
    FORMULA,
    UNIT_SEPARATOR,
    VALUE,
    DiffList,
    Mode,
    Segment,
    compress_classes,
)

_NEIGHBOURS = [(dr, dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1) if dr or dc]


@dataclass(frozen=True)
class ContiguousRange:
    contig_id: int
    member_cells: frozenset[CellAddress]
    bounding_box: tuple[int, int, int, int]  # top, left, height, width


def _bbox(cells) -> tuple[int, int, int, int]:
    rows = [c.row for c in cells]
    cols = [c.col for c in cells]
    top, left = min(rows), min(cols)
    return top, left, max(rows) - top + 1, max(cols) - left + 1


def find_contiguous_ranges(sheet: Sheet) -> list[ContiguousRange]:
    """8-connected components of populated cells, numbered by (top, left)."""
    populated = set(sheet.cells)
    seen: set[CellAddress] = set()
    components = []
    for start in sorted(populated):
        if start in seen:
            continue
        seen.add(start)
        queue, members = deque([start]), [start]
        while queue:
            cur = queue.popleft()
            for dr, dc in _NEIGHBOURS:
                r, c = cur.row + dr, cur.col + dc
                if r < 1 or c < 1 or r > MAX_ROWS or c > MAX_COLS:
                    continue
                nb = CellAddress(r, c)
                if nb in populated and nb not in seen:
                    seen.add(nb)
                    members.append(nb)
                    queue.append(nb)
        components.append(frozenset(members))
    boxes = sorted((_bbox(m), sorted(m)[0], m) for m in components)
    return [ContiguousRange(i, m, box) for i, (box, _, m) in enumerate(boxes, start=1)]


def _cell_class(content: CellContent) -> str | None:
    # All value cells share one class regardless of number/text.
    return content.r1c1_text if content.is_formula else None


def segment_range(sheet: Sheet, rng: ContiguousRange) -> list[Segment]:
    """Greedy down-then-right decomposition of one range.

    V payloads are left empty here; :func:`build_diff_list` fills them.
    """
    members = rng.member_cells
    cls = {a: _cell_class(sheet.cells[a]) for a in members}
    assigned: set[CellAddress] = set()

    def free(r: int, c: int, want: str | None) -> bool:
        if r < 1 or c < 1 or r > MAX_ROWS or c > MAX_COLS:
            return False
        a = CellAddress(r, c)
        return a in members and a not in assigned and cls[a] == want

    segments = []
    for start in sorted(members):
        if start in assigned:
            continue
        want = cls[start]
        top, left = start.row, start.col
        bottom = top
        while free(bottom + 1, left, want):
            bottom += 1
        right = left
        while all(free(r, right + 1, want) for r in range(top, bottom + 1)):
            right += 1
        for r in range(top, bottom + 1):
            for c in range(left, right + 1):
                assigned.add(CellAddress(r, c))
        segments.append(Segment(
            sheet.object_name, rng.contig_id, top, left,
            bottom - top + 1, right - left + 1,
            VALUE if want is None else FORMULA,
            "" if want is None else want,
        ))
    return segments


def segment_sheet(sheet: Sheet) -> list[Segment]:
    out = []
    for rng in find_contiguous_ranges(sheet):
        out.extend(segment_range(sheet, rng))
    return out


def _encode_values(sheet: Sheet, seg: Segment, mode: Mode, separator: str) -> Segment:
    contents = [sheet.cells[a] for a in seg.cells()]
    payload = encode_v_payload([c.value_text for c in contents], mode, separator)
    classes = compress_classes([c.value_class for c in contents])
    return Segment(seg.sheet, seg.contig_id, seg.row, seg.col, seg.rows, seg.cols,
                   seg.kind, payload, classes)


def build_diff_list(workbook: Workbook, mode: Mode | str = Mode.CHECKSUM,
                    separator: int = UNIT_SEPARATOR) -> DiffList:
    mode = Mode(mode)
    sep = chr(separator)
    entries = []
    for sheet in workbook.sheets:
        for seg in segment_sheet(sheet):
            if seg.kind == VALUE:
                seg = _encode_values(sheet, seg, mode, sep)
            entries.append(seg)
    return DiffList(
        mode=mode,
        entries=tuple(entries),
        sheets=tuple((s.object_name, s.tab_name) for s in workbook.sheets),
        separator=separator,
        source_label=workbook.source_label,
    )
