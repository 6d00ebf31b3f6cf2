"""Command-line interface.

Exit status of ``compare``: 0 no changes, 10 low, 11 medium, 12 high,
2 operational error, 3 incompatible lists. With ``--fail-on LEVEL`` an
overall risk below LEVEL exits 0.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .compare import IncompatibleLists, compare_lists
from .encode import parse_codepoint, parse_list, serialize_list
from .formula_map import render_map
from .grid import DiffXLError
from .ingest import load_grid, load_xlsx, sniff_format
from .records import UNIT_SEPARATOR, DiffList, Mode
from .risk import RiskConfig, RiskLevel, build_report, default_config_bytes, load_config, render_report
from .segmenter import build_diff_list

EXIT_OK = 0
EXIT_ERROR = 2
EXIT_INCOMPATIBLE = 3
EXIT_BY_LEVEL = {RiskLevel.LOW: 10, RiskLevel.MEDIUM: 11, RiskLevel.HIGH: 12}

logger = logging.getLogger("diffxl")


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_ERROR):
        super().__init__(message)
        self.code = code


def _read(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror or exc}") from None


def _write(data: bytes, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
        return
    try:
        Path(out).write_bytes(data)
    except OSError as exc:
        raise CliError(f"cannot write {out}: {exc.strerror or exc}") from None


def _load_workbook(path: str, data: bytes, fmt: str):
    if fmt == "xlsx":
        return load_xlsx(data, Path(path).name)
    return load_grid(data, Path(path).name)


def _to_list(path: str, fmt: str | None, mode: Mode, separator: int) -> DiffList:
    data = _read(path)
    fmt = fmt or sniff_format(data, path)
    if fmt == "list":
        return parse_list(data)
    return build_diff_list(_load_workbook(path, data, fmt), mode, separator)


def cmd_extract(args: argparse.Namespace) -> int:
    data = _read(args.workbook)
    fmt = args.format or sniff_format(data, args.workbook)
    if fmt == "list":
        raise CliError(f"{args.workbook} is already a list file")
    wb = _load_workbook(args.workbook, data, fmt)
    _write(serialize_list(build_diff_list(wb, args.mode, args.separator)), args.out)
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    old_data, new_data = _read(args.old), _read(args.new)
    old_fmt = args.format or sniff_format(old_data, args.old)
    new_fmt = args.format or sniff_format(new_data, args.new)
    mode, sep = args.mode, args.separator
    # A workbook compared against a list is extracted with the list's settings.
    for fmt, data in ((old_fmt, old_data), (new_fmt, new_data)):
        if fmt == "list" and not args.mode_given:
            ref = parse_list(data)
            mode, sep = ref.mode, ref.separator
            break
    old = _to_list(args.old, old_fmt, mode, sep)
    new = _to_list(args.new, new_fmt, mode, sep)

    config = RiskConfig()
    if args.config:
        config = load_config(_read(args.config))
    try:
        events = compare_lists(old, new)
    except IncompatibleLists as exc:
        raise CliError(str(exc), EXIT_INCOMPATIBLE) from None
    report = build_report(events, config, old_label=old.source_label or args.old,
                          new_label=new.source_label or args.new, mode=old.mode.value,
                          fixed_timestamp=args.fixed_timestamp)
    _write(render_report(report, "structured" if args.report == "json" else "text"), args.out)
    if report.no_changes:
        return EXIT_OK
    if args.fail_on is not None and report.overall < RiskLevel(args.fail_on):
        return EXIT_OK
    return EXIT_BY_LEVEL[report.overall]


def cmd_map(args: argparse.Namespace) -> int:
    data = _read(args.workbook)
    fmt = args.format or sniff_format(data, args.workbook)
    if fmt == "list":
        raise CliError("formula maps need a workbook, not a list file")
    wb = _load_workbook(args.workbook, data, fmt)
    _write(render_map(wb, args.style).encode("utf-8"), args.out)
    return EXIT_OK


def cmd_default_config(args: argparse.Namespace) -> int:
    _write(default_config_bytes(), args.out)
    return EXIT_OK


def _separator(text: str) -> int:
    try:
        return parse_codepoint(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diffxl", description="Structural diff and risk rating of spreadsheet versions.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log warnings to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, formats: list[str]) -> None:
        p.add_argument("--format", choices=formats, help="override input format sniffing")
        p.add_argument("--out", help="output path (default: stdout)")

    def encoding(p: argparse.ArgumentParser) -> None:
        p.add_argument("--mode", choices=[m.value for m in Mode], default=None,
                       help="static value encoding (default: checksum)")
        p.add_argument("--separator", type=_separator, default=UNIT_SEPARATOR,
                       help="static value separator as U+xxxx (default: U+001F)")

    p = sub.add_parser("extract", help="write the segment list of a workbook")
    p.add_argument("workbook")
    common(p, ["grid", "xlsx"])
    encoding(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("compare", help="compare two workbooks or list files")
    p.add_argument("old")
    p.add_argument("new")
    common(p, ["grid", "xlsx", "list"])
    encoding(p)
    p.add_argument("--config", help="risk configuration file")
    p.add_argument("--report", choices=["text", "json"], default="text")
    p.add_argument("--fixed-timestamp", action="store_true",
                   help="stamp reports with a constant time for reproducible output")
    p.add_argument("--fail-on", choices=[lvl.value for lvl in RiskLevel],
                   help="lowest overall risk that yields a non-zero exit")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("map", help="render a formula map")
    p.add_argument("workbook")
    common(p, ["grid", "xlsx"])
    p.add_argument("--style", choices=["html", "ansi"], default="html")
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("default-config", help="print the default risk configuration")
    p.add_argument("--out", help="output path (default: stdout)")
    p.set_defaults(func=cmd_default_config)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.verbose else logging.ERROR,
                        format="diffxl: %(levelname)s: %(message)s")
    if hasattr(args, "mode"):
        args.mode_given = args.mode is not None
        args.mode = Mode(args.mode or Mode.CHECKSUM)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"diffxl: {exc}", file=sys.stderr)
        return exc.code
    except IncompatibleLists as exc:
        print(f"diffxl: {exc}", file=sys.stderr)
        return EXIT_INCOMPATIBLE
    except (DiffXLError, ValueError) as exc:
        print(f"diffxl: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
