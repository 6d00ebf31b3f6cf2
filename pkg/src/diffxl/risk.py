"""Risk levels, configurable kind->level mapping, aggregation and reports."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from importlib import resources
from typing import Any, Iterable, Mapping

from .compare import ChangeEvent, ChangeKind, Region
from .grid import DiffXLError

CONFIG_VERSION = "diffxl-risk/1"
REPORT_SCHEMA = "diffxl-report/1"
FIXED_TIMESTAMP = "1970-01-01T00:00:00Z"


class ConfigError(DiffXLError, ValueError):
    pass


class RiskLevel(str, Enum):
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"

    @property
    def rank(self) -> int:
        return _RANKS[self]

    # str already defines ordering, so every comparison is spelled out.
    def __lt__(self, other: object) -> bool:
        if not isinstance(other, RiskLevel):
            return NotImplemented
        return self.rank < other.rank

    def __le__(self, other: object) -> bool:
        if not isinstance(other, RiskLevel):
            return NotImplemented
        return self.rank <= other.rank

    def __gt__(self, other: object) -> bool:
        if not isinstance(other, RiskLevel):
            return NotImplemented
        return self.rank > other.rank

    def __ge__(self, other: object) -> bool:
        if not isinstance(other, RiskLevel):
            return NotImplemented
        return self.rank >= other.rank

    def escalated(self) -> RiskLevel:
        return _ORDER[min(self.rank + 1, len(_ORDER) - 1)]


_ORDER = [RiskLevel.LOW, RiskLevel.MEDIUM, RiskLevel.HIGH]
_RANKS = {lvl: i for i, lvl in enumerate(_ORDER)}

DEFAULT_LEVELS: dict[ChangeKind, RiskLevel] = {
    ChangeKind.RANGE_MOVED: RiskLevel.LOW,
    ChangeKind.NEW_ISOLATED_STATIC_TEXT: RiskLevel.LOW,
    ChangeKind.RANGE_SORTED: RiskLevel.LOW,
    ChangeKind.TEXT_OR_HEADERS_CHANGED: RiskLevel.MEDIUM,
    ChangeKind.RANGE_SPLIT: RiskLevel.MEDIUM,
    ChangeKind.ITEMS_ADDED_WITHIN_RANGE: RiskLevel.MEDIUM,
    ChangeKind.FORMULAE_CHANGED_THROUGHOUT_RANGE: RiskLevel.MEDIUM,
    ChangeKind.ITEMS_REMOVED_FROM_RANGE: RiskLevel.MEDIUM,
    ChangeKind.ITEMS_REMOVED_BREAKING_RANGE: RiskLevel.MEDIUM,
    ChangeKind.NUMBER_BECAME_TEXT_FORMATTED: RiskLevel.HIGH,
    ChangeKind.FORMULA_OVERWRITTEN_BY_VALUE: RiskLevel.HIGH,
    ChangeKind.NEW_DATA_AND_FORMULAE: RiskLevel.HIGH,
    ChangeKind.WORKSHEET_ADDED_OR_DELETED: RiskLevel.HIGH,
}

TAXONOMY_KINDS = tuple(DEFAULT_LEVELS)


class Policy(str, Enum):
    MAX_ONLY = "max-only"
    COUNT_ESCALATION = "count-escalation"


@dataclass(frozen=True)
class RiskConfig:
    kind_levels: Mapping[ChangeKind, RiskLevel] = field(
        default_factory=lambda: dict(DEFAULT_LEVELS))
    policy: Policy = Policy.MAX_ONLY
    threshold: int = 3
    unclassified_level: RiskLevel = RiskLevel.HIGH

    def __post_init__(self) -> None:
        missing = [k.value for k in TAXONOMY_KINDS if k not in self.kind_levels]
        if missing:
            raise ConfigError(f"risk config has no level for {', '.join(missing)}")
        if self.threshold < 1:
            raise ConfigError("escalation threshold must be a positive integer")

    def level_for(self, kind: ChangeKind) -> RiskLevel:
        if kind is ChangeKind.UNCLASSIFIED:
            return self.unclassified_level
        return self.kind_levels[kind]

    def with_level(self, kind: ChangeKind, level: RiskLevel) -> RiskConfig:
        if kind is ChangeKind.UNCLASSIFIED:
            return replace(self, unclassified_level=level)
        levels = dict(self.kind_levels)
        levels[kind] = level
        return replace(self, kind_levels=levels)

    def to_dict(self) -> dict[str, Any]:
        return {
            "version": CONFIG_VERSION,
            "levels": {k.value: self.kind_levels[k].value for k in TAXONOMY_KINDS},
            "unclassified": self.unclassified_level.value,
            "escalation": {"policy": self.policy.value, "threshold": self.threshold},
        }

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> RiskConfig:
        if doc.get("version") != CONFIG_VERSION:
            raise ConfigError(f"unknown risk config version {doc.get('version')!r}")
        levels = {}
        for name, level in doc.get("levels", {}).items():
            try:
                kind = ChangeKind(name)
            except ValueError:
                raise ConfigError(f"unknown change kind {name!r}") from None
            if kind is ChangeKind.UNCLASSIFIED:
                raise ConfigError("set the Unclassified level with the 'unclassified' key")
            levels[kind] = _level(level)
        esc = doc.get("escalation", {})
        try:
            policy = Policy(esc.get("policy", Policy.MAX_ONLY.value))
        except ValueError:
            raise ConfigError(f"unknown escalation policy {esc.get('policy')!r}") from None
        threshold = esc.get("threshold", 3)
        if not isinstance(threshold, int) or isinstance(threshold, bool):
            raise ConfigError("escalation threshold must be an integer")
        return cls(levels, policy, threshold, _level(doc.get("unclassified", "high")))


def _level(text: Any) -> RiskLevel:
    try:
        return RiskLevel(str(text).lower())
    except ValueError:
        raise ConfigError(f"risk level must be low, medium or high, got {text!r}") from None


def dump_config(config: RiskConfig) -> bytes:
    return (json.dumps(config.to_dict(), indent=2) + "\n").encode("utf-8")


def load_config(data: bytes | str) -> RiskConfig:
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"risk config is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("risk config must be an object")
    return RiskConfig.from_dict(doc)


def default_config_bytes() -> bytes:
    return resources.files("diffxl").joinpath("default_risk.json").read_bytes()


def classify(events: Iterable[ChangeEvent], config: RiskConfig | None = None) -> list[ChangeEvent]:
    config = config or RiskConfig()
    return [replace(e, risk=config.level_for(e.kind)) for e in events]


def aggregate(events: Iterable[ChangeEvent], config: RiskConfig | None = None) -> RiskLevel:
    """Overall level of a classified event list; Low when there are none.

    Under count-escalation, ``threshold`` or more events at a level below
    High lift the result to at least the next level up.
    """
    config = config or RiskConfig()
    levels = [e.risk if e.risk is not None else config.level_for(e.kind) for e in events]
    if not levels:
        return RiskLevel.LOW
    overall = max(levels)
    if config.policy is Policy.COUNT_ESCALATION:
        for level, count in Counter(levels).items():
            if level is not RiskLevel.HIGH and count >= config.threshold:
                overall = max(overall, level.escalated())
    return overall


@dataclass(frozen=True)
class Report:
    events: tuple[ChangeEvent, ...]
    overall: RiskLevel
    no_changes: bool
    counts: Mapping[RiskLevel, int]
    old_label: str = ""
    new_label: str = ""
    mode: str = ""
    timestamp: str = FIXED_TIMESTAMP


def build_report(events: Iterable[ChangeEvent], config: RiskConfig | None = None, *,
                 old_label: str = "", new_label: str = "", mode: str = "",
                 fixed_timestamp: bool = False) -> Report:
    config = config or RiskConfig()
    classified = tuple(classify(events, config))
    counts = Counter(e.risk for e in classified)
    stamp = FIXED_TIMESTAMP if fixed_timestamp else \
        datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    return Report(
        events=classified,
        overall=aggregate(classified, config),
        no_changes=not classified,
        counts={lvl: counts.get(lvl, 0) for lvl in _ORDER},
        old_label=old_label, new_label=new_label, mode=mode, timestamp=stamp,
    )


def _region_doc(region: Region | None) -> dict[str, Any] | None:
    if region is None:
        return None
    top, left, h, w = region.bbox
    return {"contig_id": region.contig_id, "row": top, "col": left, "rows": h, "cols": w}


def report_to_dict(report: Report) -> dict[str, Any]:
    return {
        "schema": REPORT_SCHEMA,
        "old": report.old_label,
        "new": report.new_label,
        "mode": report.mode,
        "timestamp": report.timestamp,
        "overall": report.overall.value,
        "no_changes": report.no_changes,
        "counts": {lvl.value: report.counts.get(lvl, 0) for lvl in _ORDER},
        "events": [
            {
                "kind": e.kind.value,
                "risk": e.risk.value if e.risk else None,
                "sheet": e.sheet,
                "before": _region_doc(e.before),
                "after": _region_doc(e.after),
                "detail": e.detail,
            }
            for e in report.events
        ],
    }


def _fmt_region(region: Region | None) -> str:
    if region is None:
        return "-"
    top, left, h, w = region.bbox
    return f"#{region.contig_id} R{top}C{left} {h}x{w}"


def render_report(report: Report, fmt: str = "structured") -> bytes:
    if fmt in ("structured", "json"):
        return (json.dumps(report_to_dict(report), indent=2, ensure_ascii=False) + "\n").encode()
    if fmt != "text":
        raise ValueError(f"unknown report format {fmt!r}")
    lines = [f"DiffXL report: {report.old_label} -> {report.new_label} ({report.mode} mode)"]
    if report.no_changes:
        lines.append("No structural changes.")
    else:
        counts = ", ".join(f"{report.counts.get(lvl, 0)} {lvl.value}" for lvl in _ORDER)
        lines.append(f"Overall risk: {report.overall.value.upper()} ({counts})")
        current = None
        for e in report.events:
            if e.sheet != current:
                current = e.sheet
                lines.append("")
                lines.append(f"Sheet {e.sheet}")
            badge = f"[{e.risk.value.upper()}]" if e.risk else "[?]"
            lines.append(f"  {badge:<8} {e.kind.value}: {e.detail}"
                         f"  (before {_fmt_region(e.before)}, after {_fmt_region(e.after)})")
    return ("\n".join(lines) + "\n").encode()
