"""Structural diffing of spreadsheet versions.

Worksheets are cut into homogeneous rectangles (cells sharing one R1C1
formula, or plain values), written out as a segment list, and two lists
are compared to classify and risk-rate what changed.
"""

from .compare import ChangeEvent, ChangeKind, IncompatibleLists, compare_lists
from .encode import concat_static, crc32, encode_v_payload, parse_list, serialize_list
from .formula import a1_to_r1c1, r1c1_to_a1
from .grid import CellAddress, CellContent, Sheet, ValueClass, Workbook, parse_a1_ref
from .ingest import load_grid, load_workbook, load_xlsx, save_grid
from .records import DiffList, Mode, Segment
from .risk import RiskConfig, RiskLevel, aggregate, build_report, classify, render_report
from .segmenter import build_diff_list, find_contiguous_ranges, segment_range

__version__ = "0.1.0"

__all__ = [
    "CellAddress", "CellContent", "ChangeEvent", "ChangeKind", "DiffList",
    "IncompatibleLists", "Mode", "RiskConfig", "RiskLevel", "Segment", "Sheet",
    "ValueClass", "Workbook", "a1_to_r1c1", "aggregate", "build_diff_list",
    "build_report", "classify", "compare_lists", "concat_static", "crc32",
    "encode_v_payload", "find_contiguous_ranges", "load_grid", "load_workbook",
    "load_xlsx", "parse_a1_ref", "parse_list", "r1c1_to_a1", "render_report",
    "save_grid", "segment_range", "serialize_list",
]
