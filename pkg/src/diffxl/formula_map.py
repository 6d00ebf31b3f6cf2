"""Formula maps: colour cells by shared R1C1 formula, values in grey."""

from __future__ import annotations

import html

from .grid import Workbook
from .records import FORMULA
from .segmenter import segment_sheet

HTML_PALETTE = [
    "#8dd3c7", "#ffffb3", "#bebada", "#fb8072", "#80b1d3", "#fdb462",
    "#b3de69", "#fccde5", "#bc80bd", "#ccebc5", "#ffed6f", "#66c2a5",
]
ANSI_PALETTE = [37, 229, 147, 209, 110, 215, 149, 218, 140, 194, 227, 79]
HTML_GREY = "#d9d9d9"
ANSI_GREY = 250
VALUE_KEY = "V"


def assign_colours(workbook: Workbook) -> tuple[dict[str, int], dict[str, dict[tuple[int, int], str]]]:
    """Return (payload -> palette index, sheet -> cell -> key).

    A cell's key is its R1C1 formula, or ``"V"`` for values. Palette
    indices follow the order formulas are first met in the segment list.
    """
    colours: dict[str, int] = {}
    keys: dict[str, dict[tuple[int, int], str]] = {}
    for sheet in workbook.sheets:
        grid: dict[tuple[int, int], str] = {}
        for seg in segment_sheet(sheet):
            key = seg.payload if seg.kind == FORMULA else VALUE_KEY
            if seg.kind == FORMULA and key not in colours:
                colours[key] = len(colours)
            for a in seg.cells():
                grid[(a.row, a.col)] = key
        keys[sheet.object_name] = grid
    return colours, keys


def _extent(grid: dict[tuple[int, int], str]) -> tuple[int, int]:
    if not grid:
        return 0, 0
    return max(r for r, _ in grid), max(c for _, c in grid)


def _display(workbook: Workbook, sheet_name: str, row: int, col: int) -> str:
    content = workbook.sheet(sheet_name).get(row, col)
    if content is None:
        return ""
    return content.r1c1_text if content.is_formula else content.value_text


def render_html(workbook: Workbook) -> str:
    colours, keys = assign_colours(workbook)
    out = [
        "<!DOCTYPE html>",
        "<html><head><meta charset=\"utf-8\"><title>Formula map</title>",
        "<style>table{border-collapse:collapse;font:12px monospace}"
        "td,th{border:1px solid #999;padding:2px 4px}</style></head><body>",
    ]
    for sheet in workbook.sheets:
        grid = keys[sheet.object_name]
        nrows, ncols = _extent(grid)
        out.append(f"<h2>{html.escape(sheet.tab_name)} ({html.escape(sheet.object_name)})</h2>")
        out.append("<table>")
        out.append("<tr><th></th>" + "".join(f"<th>{c}</th>" for c in range(1, ncols + 1)) + "</tr>")
        for r in range(1, nrows + 1):
            row = [f"<tr><th>{r}</th>"]
            for c in range(1, ncols + 1):
                key = grid.get((r, c))
                if key is None:
                    row.append("<td></td>")
                    continue
                bg = HTML_GREY if key == VALUE_KEY else \
                    HTML_PALETTE[colours[key] % len(HTML_PALETTE)]
                text = html.escape(_display(workbook, sheet.object_name, r, c))
                row.append(f"<td style=\"background:{bg}\">{text}</td>")
            out.append("".join(row) + "</tr>")
        out.append("</table>")
    if colours:
        out.append("<h2>Legend</h2><table>")
        for payload, idx in colours.items():
            bg = HTML_PALETTE[idx % len(HTML_PALETTE)]
            out.append(f"<tr><td style=\"background:{bg}\">{idx + 1}</td>"
                       f"<td>{html.escape(payload)}</td></tr>")
        out.append("</table>")
    out.append("</body></html>")
    return "\n".join(out) + "\n"


def render_ansi(workbook: Workbook, width: int = 10) -> str:
    colours, keys = assign_colours(workbook)
    out = []
    for sheet in workbook.sheets:
        grid = keys[sheet.object_name]
        nrows, ncols = _extent(grid)
        out.append(f"== {sheet.tab_name} ({sheet.object_name})")
        for r in range(1, nrows + 1):
            line = [f"{r:>4} "]
            for c in range(1, ncols + 1):
                key = grid.get((r, c))
                if key is None:
                    line.append(" " * width)
                    continue
                code = ANSI_GREY if key == VALUE_KEY else \
                    ANSI_PALETTE[colours[key] % len(ANSI_PALETTE)]
                text = _display(workbook, sheet.object_name, r, c)[:width - 1].ljust(width - 1)
                line.append(f"\x1b[30;48;5;{code}m{text}\x1b[0m ")
            out.append("".join(line).rstrip())
        out.append("")
    for payload, idx in colours.items():
        code = ANSI_PALETTE[idx % len(ANSI_PALETTE)]
        out.append(f"\x1b[48;5;{code}m  \x1b[0m {idx + 1:>2} {payload}")
    return "\n".join(out) + "\n"


def render_map(workbook: Workbook, style: str = "html") -> str:
    if style == "html":
        return render_html(workbook)
    if style == "ansi":
        return render_ansi(workbook)
    raise ValueError(f"unknown map style {style!r}")
