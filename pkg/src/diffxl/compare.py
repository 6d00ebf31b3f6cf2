"""Compare two DiffLists and classify structural changes.

Sheets pair by object name, ranges pair by fingerprint (exact, then
similar, then positional overlap), and each matched range pair is diffed
cell by cell from the segment records alone. Value cells are compared
exactly in full mode; in checksum mode only whole segments can be compared.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Iterable

from .encode import FormatError, split_static
from .grid import DiffXLError, ValueClass
from .records import FORMULA, VALUE, DiffList, Mode, Segment

if TYPE_CHECKING:
    from .risk import RiskLevel

SIMILARITY_THRESHOLD = 0.5

Pos = tuple[int, int]
BBox = tuple[int, int, int, int]


class IncompatibleLists(DiffXLError, ValueError):
    pass


class ChangeKind(str, Enum):
    RANGE_MOVED = "RangeMoved"
    NEW_ISOLATED_STATIC_TEXT = "NewIsolatedStaticText"
    RANGE_SORTED = "RangeSorted"
    TEXT_OR_HEADERS_CHANGED = "TextOrHeadersChanged"
    RANGE_SPLIT = "RangeSplit"
    ITEMS_ADDED_WITHIN_RANGE = "ItemsAddedWithinRange"
    FORMULAE_CHANGED_THROUGHOUT_RANGE = "FormulaeChangedThroughoutRange"
    ITEMS_REMOVED_FROM_RANGE = "ItemsRemovedFromRange"
    ITEMS_REMOVED_BREAKING_RANGE = "ItemsRemovedBreakingRange"
    NUMBER_BECAME_TEXT_FORMATTED = "NumberBecameTextFormatted"
    FORMULA_OVERWRITTEN_BY_VALUE = "FormulaOverwrittenByValue"
    NEW_DATA_AND_FORMULAE = "NewDataAndFormulae"
    WORKSHEET_ADDED_OR_DELETED = "WorksheetAddedOrDeleted"
    UNCLASSIFIED = "Unclassified"


@dataclass(frozen=True)
class Region:
    contig_id: int
    bbox: BBox  # top, left, height, width

    def contains(self, row: int, col: int) -> bool:
        top, left, h, w = self.bbox
        return top <= row < top + h and left <= col < left + w


@dataclass(frozen=True)
class ChangeEvent:
    kind: ChangeKind
    sheet: str
    before: Region | None = None
    after: Region | None = None
    detail: str = ""
    risk: RiskLevel | None = None

    def __post_init__(self) -> None:
        if self.before is None and self.after is None and \
                self.kind is not ChangeKind.WORKSHEET_ADDED_OR_DELETED:
            raise ValueError(f"{self.kind.value} event needs a before or after region")

    def covers(self, sheet: str, row: int, col: int) -> bool:
        if sheet != self.sheet:
            return False
        if self.kind is ChangeKind.WORKSHEET_ADDED_OR_DELETED:
            return True
        return any(r is not None and r.contains(row, col) for r in (self.before, self.after))


# --- range views --------------------------------------------------------------

@dataclass(frozen=True)
class CellInfo:
    kind: str
    payload: str  # R1C1 text for F cells, segment payload for V cells
    segment: Segment
    value: str | None = None  # full mode only
    vclass: ValueClass | None = None


def _bbox_of(positions: Iterable[Pos]) -> BBox:
    positions = list(positions)
    top = min(r for r, _ in positions)
    left = min(c for _, c in positions)
    bottom = max(r for r, _ in positions)
    right = max(c for _, c in positions)
    return top, left, bottom - top + 1, right - left + 1


@dataclass
class RangeView:
    """The segments of one contiguous range, plus derived per-cell detail."""

    contig_id: int
    segments: list[Segment]
    mode: Mode
    separator: str
    cells: dict[Pos, CellInfo] = field(init=False)
    bbox: BBox = field(init=False)

    def __post_init__(self) -> None:
        cells = {}
        for seg in self.segments:
            if seg.kind == FORMULA:
                for a in seg.cells():
                    cells[(a.row, a.col)] = CellInfo(FORMULA, seg.payload, seg)
                continue
            classes = seg.class_list() or [None] * seg.area
            values: list[str | None] = [None] * seg.area
            if self.mode is Mode.FULL:
                try:
                    split = split_static(seg.payload, self.separator)
                except FormatError:
                    split = []
                if len(split) == seg.area:
                    values = split
            for i, a in enumerate(seg.cells()):
                cells[(a.row, a.col)] = CellInfo(VALUE, seg.payload, seg, values[i], classes[i])
        self.cells = cells
        self.bbox = _bbox_of(cells)

    @property
    def has_formulas(self) -> bool:
        return any(s.kind == FORMULA for s in self.segments)

    def fingerprint(self) -> tuple:
        top, left, h, w = self.bbox
        return (h, w, tuple(sorted(
            (s.row - top, s.col - left, s.rows, s.cols, s.kind, s.payload, s.classes)
            for s in self.segments)))

    def labels(self) -> Counter:
        return Counter(info.payload if info.kind == FORMULA else VALUE
                       for info in self.cells.values())

    def label_at(self, pos: Pos) -> str | None:
        info = self.cells.get(pos)
        if info is None:
            return None
        return info.payload if info.kind == FORMULA else VALUE


def similarity(a: RangeView, b: RangeView) -> float:
    """Area-weighted overlap of the two ranges' segment content.

    Every cell contributes its segment's label (the R1C1 text for formula
    cells, a shared token for value cells), so the score ignores position
    and survives rows being inserted into or removed from a block.
    """
    la, lb = a.labels(), b.labels()
    overlap = sum((la & lb).values())
    return overlap / max(sum(la.values()), sum(lb.values()))


def _group(segments: Iterable[Segment], mode: Mode, separator: str) -> dict[int, RangeView]:
    by_id: dict[int, list[Segment]] = defaultdict(list)
    for s in segments:
        by_id[s.contig_id].append(s)
    return {cid: RangeView(cid, segs, mode, separator) for cid, segs in sorted(by_id.items())}


# --- matching -----------------------------------------------------------------

@dataclass
class RangePair:
    old_ids: list[int]
    new_ids: list[int]
    offset: Pos  # new position = old position + offset
    exact: bool = False

    @property
    def old_id(self) -> int:
        return self.old_ids[0]

    @property
    def new_id(self) -> int:
        return self.new_ids[0]


@dataclass
class RangePairing:
    pairs: list[RangePair]
    only_old: list[int]
    only_new: list[int]


def _candidate_offset(old: RangeView, new: RangeView) -> Pos:
    """Pick the translation under which the most cells keep their label."""
    ot, ol, oh, ow = old.bbox
    nt, nl, nh, nw = new.bbox
    candidates = [
        (0, 0),
        (nt - ot, nl - ol),
        (nt + nh - ot - oh, nl - ol),
        (nt - ot, nl + nw - ol - ow),
        (nt + nh - ot - oh, nl + nw - ol - ow),
    ]
    best, best_score = (0, 0), -1
    for dr, dc in candidates:
        score = sum(1 for (r, c) in old.cells
                    if new.label_at((r + dr, c + dc)) == old.label_at((r, c)))
        if score > best_score:
            best, best_score = (dr, dc), score
    return best


def match_ranges(old: dict[int, RangeView], new: dict[int, RangeView]) -> RangePairing:
    free_old, free_new = sorted(old), sorted(new)
    pairs: list[RangePair] = []

    def take(o: int, n: int, offset: Pos, exact: bool = False) -> None:
        free_old.remove(o)
        free_new.remove(n)
        pairs.append(RangePair([o], [n], offset, exact))

    fps_old = {o: old[o].fingerprint() for o in old}
    fps_new = {n: new[n].fingerprint() for n in new}
    # identical content in place, then identical content elsewhere
    for same_place in (True, False):
        for o in list(free_old):
            for n in free_new:
                if fps_old[o] != fps_new[n]:
                    continue
                if same_place and old[o].bbox != new[n].bbox:
                    continue
                ob, nb = old[o].bbox, new[n].bbox
                take(o, n, (nb[0] - ob[0], nb[1] - ob[1]), exact=True)
                break

    scored = []
    for o in free_old:
        for n in free_new:
            sim = similarity(old[o], new[n])
            if sim >= SIMILARITY_THRESHOLD:
                shared = len(old[o].cells.keys() & new[n].cells.keys())
                scored.append((-sim, -shared, o, n))
    for _, _, o, n in sorted(scored):
        if o in free_old and n in free_new:
            take(o, n, _candidate_offset(old[o], new[n]))

    # leftovers that still occupy common cells are the same range, heavily edited
    scored = []
    for o in free_old:
        for n in free_new:
            shared = len(old[o].cells.keys() & new[n].cells.keys())
            if shared:
                scored.append((-shared, o, n))
    for _, o, n in sorted(scored):
        if o in free_old and n in free_new:
            take(o, n, (0, 0))

    # fragments: a range broken apart, or ranges joined together
    in_place = [p for p in pairs if p.offset == (0, 0) and not p.exact]
    for n in list(free_new):
        for p in in_place:
            if any(new[n].cells.keys() & old[o].cells.keys() for o in p.old_ids):
                p.new_ids.append(n)
                free_new.remove(n)
                break
    for o in list(free_old):
        for p in in_place:
            if any(old[o].cells.keys() & new[n].cells.keys() for n in p.new_ids):
                p.old_ids.append(o)
                free_old.remove(o)
                break

    pairs.sort(key=lambda p: (p.old_id, p.new_id))
    return RangePairing(pairs, free_old, free_new)


def match_sheets(old: DiffList, new: DiffList) -> tuple[list[str], list[str], list[str]]:
    """Pair sheets by object name; returns (paired, only_old, only_new)."""
    check_compatible(old, new)
    old_names, new_names = old.sheet_names, new.sheet_names
    new_set, old_set = set(new_names), set(old_names)
    paired = [s for s in old_names if s in new_set]
    return paired, [s for s in old_names if s not in new_set], \
        [s for s in new_names if s not in old_set]


def check_compatible(old: DiffList, new: DiffList) -> None:
    if old.mode is not new.mode:
        raise IncompatibleLists(f"list modes differ: {old.mode.value} vs {new.mode.value}")
    if old.separator != new.separator:
        raise IncompatibleLists(
            f"separators differ: U+{old.separator:04X} vs U+{new.separator:04X}")


# --- per-pair diff --------------------------------------------------------------

def _numeric_equal(a: str | None, b: str | None) -> bool:
    if a is None or b is None:
        return False
    try:
        return float(a) == float(b.strip())
    except ValueError:
        return False


def _shift(seg: Segment, offset: Pos) -> BBox:
    return (seg.row + offset[0], seg.col + offset[1], seg.rows, seg.cols)


def _is_sorted_block(old_seg: Segment, new_seg: Segment, old_cells: dict[Pos, CellInfo],
                     new_cells: dict[Pos, CellInfo], offset: Pos) -> bool:
    def rows(seg: Segment, cells: dict[Pos, CellInfo], shift: Pos) -> Counter:
        out = Counter()
        for r in range(seg.row, seg.bottom + 1):
            row = []
            for c in range(seg.col, seg.right + 1):
                info = cells[(r + shift[0], c + shift[1])]
                if info.value is None:
                    return Counter()
                row.append((info.value, info.vclass))
            out[tuple(row)] += 1
        return out

    before = rows(old_seg, old_cells, offset)
    return bool(before) and before == rows(new_seg, new_cells, (0, 0))


def diff_matched_range(old_segments: list[Segment], new_segments: list[Segment],
                       mode: Mode | str, *, offset: Pos = (0, 0),
                       separator: str = "\x1f", new_fragments: int = 0,
                       old_fragments: int = 0) -> list[ChangeEvent]:
    """Classify the differences between two versions of one range.

    ``old_segments`` may span several old ranges (joined in the new version)
    and ``new_segments`` several new ones (a range broken apart); the counts
    of extra ranges on each side come in as ``old_fragments`` and
    ``new_fragments``. Rules run from the riskiest pattern down and each
    cell is claimed by the first rule that matches it.
    """
    mode = Mode(mode)
    if not old_segments or not new_segments:
        raise ValueError("both sides of a matched range need segments")
    sheet = new_segments[0].sheet
    old_id, new_id = old_segments[0].contig_id, new_segments[0].contig_id
    old_v = RangeView(old_id, list(old_segments), mode, separator)
    new_v = RangeView(new_id, list(new_segments), mode, separator)
    dr, dc = offset
    old_cells = {(r + dr, c + dc): info for (r, c), info in old_v.cells.items()}
    new_cells = new_v.cells

    overwritten, num_to_text, formula_changed, to_formula = set(), set(), set(), set()
    added, removed, v_same_rect, v_other_rect = set(), set(), set(), set()
    for pos in sorted(old_cells.keys() | new_cells.keys()):
        o, n = old_cells.get(pos), new_cells.get(pos)
        if n is None:
            removed.add(pos)
        elif o is None:
            added.add(pos)
        elif o.kind == FORMULA and n.kind == FORMULA:
            if o.payload != n.payload:
                formula_changed.add(pos)
        elif o.kind == FORMULA:
            overwritten.add(pos)
        elif n.kind == FORMULA:
            to_formula.add(pos)
        else:
            same_rect = _shift(o.segment, offset) == n.segment.bbox
            same_text = same_rect and o.payload == n.payload
            if mode is Mode.FULL:
                same_text = o.value is not None and o.value == n.value
            if o.vclass is ValueClass.NUMBER and n.vclass is ValueClass.TEXT and (
                    same_text or (mode is Mode.FULL and _numeric_equal(o.value, n.value))):
                num_to_text.add(pos)
            elif same_text and o.vclass is n.vclass:
                continue
            elif same_rect:
                v_same_rect.add(pos)
            else:
                v_other_rect.add(pos)

    events: list[ChangeEvent] = []

    def region(cid: int, positions: Iterable[Pos], shift: Pos = (0, 0)) -> Region:
        return Region(cid, _bbox_of((r - shift[0], c - shift[1]) for r, c in positions))

    def emit(kind: ChangeKind, cells: set[Pos], detail: str) -> None:
        events.append(ChangeEvent(kind, sheet, region(old_id, cells, offset),
                                  region(new_id, cells), detail))

    if offset != (0, 0):
        events.append(ChangeEvent(
            ChangeKind.RANGE_MOVED, sheet, Region(old_id, old_v.bbox), Region(new_id, new_v.bbox),
            f"range moved by {dr:+d} rows, {dc:+d} columns"))

    # Value cells whose segment changed shape only because the formula/value
    # layout or membership changed go to the first such structural event.
    structural = [
        (ChangeKind.FORMULA_OVERWRITTEN_BY_VALUE, overwritten, "formula cells overwritten by values"),
        (ChangeKind.NEW_DATA_AND_FORMULAE, to_formula, "value cells replaced by formulas"),
    ]
    if new_fragments:
        structural.append((ChangeKind.ITEMS_REMOVED_BREAKING_RANGE, removed,
                           f"cells removed, range broken into {new_fragments + 1} ranges"))
    else:
        structural.append((ChangeKind.ITEMS_REMOVED_FROM_RANGE, removed, "cells removed from range"))
    joined = f", {old_fragments + 1} ranges joined" if old_fragments else ""
    structural.append((ChangeKind.ITEMS_ADDED_WITHIN_RANGE, added, "cells added to range" + joined))
    absorber = next((kind for kind, cells, _ in structural if cells), None)
    if absorber is None and new_fragments:
        absorber = ChangeKind.ITEMS_REMOVED_BREAKING_RANGE
    if absorber is None:
        v_same_rect |= v_other_rect

    def structural_event(kind: ChangeKind, cells: set[Pos], detail: str) -> None:
        if kind is absorber:
            cells = cells | v_other_rect or set(new_cells)
        if cells:
            emit(kind, cells, detail)

    structural_event(*structural[0])

    if num_to_text:
        emit(ChangeKind.NUMBER_BECAME_TEXT_FORMATTED, num_to_text,
             "numeric cells now hold numbers stored as text")

    if formula_changed:
        throughout, partial = set(), set()
        new_rects = {s.bbox for s in new_segments if s.kind == FORMULA}
        for seg in {old_cells[p].segment for p in formula_changed}:
            cells = {(a.row + dr, a.col + dc) for a in seg.cells()}
            if cells <= formula_changed and _shift(seg, offset) in new_rects:
                throughout |= cells
            else:
                partial |= cells & formula_changed
        if throughout:
            emit(ChangeKind.FORMULAE_CHANGED_THROUGHOUT_RANGE, throughout,
                 "formula changed in every cell of its segment")
        if partial:
            emit(ChangeKind.RANGE_SPLIT, partial, "formula block broken into differing segments"
                 if len(new_segments) >= len(old_segments) else "formula segments merged")

    for item in structural[1:]:
        structural_event(*item)

    if v_same_rect:
        sorted_cells, text_cells = set(), set()
        if mode is Mode.FULL:
            by_seg: dict[Segment, set[Pos]] = defaultdict(set)
            for p in v_same_rect:
                by_seg[new_cells[p].segment].add(p)
            for nseg, cells in sorted(by_seg.items()):
                oseg = old_cells[next(iter(cells))].segment
                if _is_sorted_block(oseg, nseg, old_cells, new_cells, offset):
                    sorted_cells |= cells
                else:
                    text_cells |= cells
        else:
            text_cells = v_same_rect
        if sorted_cells:
            emit(ChangeKind.RANGE_SORTED, sorted_cells, "rows reordered")
        if text_cells:
            emit(ChangeKind.TEXT_OR_HEADERS_CHANGED, text_cells, "static values changed")

    if not events and (old_v.fingerprint() != new_v.fingerprint() or offset != (0, 0)):
        emit(ChangeKind.UNCLASSIFIED, set(old_cells) | set(new_cells), "unclassified difference")
    return events


# --- top level ----------------------------------------------------------------

def _range_event(view: RangeView, sheet: str, added: bool) -> ChangeEvent:
    kind = (ChangeKind.NEW_DATA_AND_FORMULAE if view.has_formulas
            else ChangeKind.NEW_ISOLATED_STATIC_TEXT)
    what = "formula range" if view.has_formulas else "static range"
    reg = Region(view.contig_id, view.bbox)
    if added:
        return ChangeEvent(kind, sheet, None, reg, f"{what} added")
    return ChangeEvent(kind, sheet, reg, None, f"{what} removed")


def compare_sheet(old: DiffList, new: DiffList, sheet: str) -> list[ChangeEvent]:
    sep = chr(old.separator)
    old_ranges = _group(old.sheet_entries(sheet), old.mode, sep)
    new_ranges = _group(new.sheet_entries(sheet), new.mode, sep)
    pairing = match_ranges(old_ranges, new_ranges)

    keyed: list[tuple[tuple, ChangeEvent]] = []
    for p in pairing.pairs:
        if p.exact and p.offset == (0, 0):
            continue
        old_segs = [s for o in p.old_ids for s in old_ranges[o].segments]
        new_segs = [s for n in p.new_ids for s in new_ranges[n].segments]
        events = diff_matched_range(
            old_segs, new_segs, old.mode, offset=p.offset, separator=sep,
            new_fragments=len(p.new_ids) - 1, old_fragments=len(p.old_ids) - 1)
        keyed.extend(((p.old_id, p.new_id, i), e) for i, e in enumerate(events))
    for o in pairing.only_old:
        keyed.append(((o, 0, 0), _range_event(old_ranges[o], sheet, added=False)))
    big = float("inf")
    for n in pairing.only_new:
        keyed.append(((big, n, 0), _range_event(new_ranges[n], sheet, added=True)))
    keyed.sort(key=lambda kv: kv[0])
    return [e for _, e in keyed]


def compare_lists(old: DiffList, new: DiffList) -> list[ChangeEvent]:
    paired, only_old, only_new = match_sheets(old, new)
    only_old_set, only_new_set = set(only_old), set(only_new)
    events: list[ChangeEvent] = []
    order = old.sheet_names + [s for s in new.sheet_names if s in only_new_set]
    for sheet in order:
        if sheet in only_old_set:
            events.append(ChangeEvent(ChangeKind.WORKSHEET_ADDED_OR_DELETED, sheet,
                                      detail=f"worksheet deleted (tab {old.tab_name(sheet)!r})"))
        elif sheet in only_new_set:
            events.append(ChangeEvent(ChangeKind.WORKSHEET_ADDED_OR_DELETED, sheet,
                                      detail=f"worksheet added (tab {new.tab_name(sheet)!r})"))
        else:
            events.extend(compare_sheet(old, new, sheet))
    return events
