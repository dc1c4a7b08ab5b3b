"""Deterministic evaluation report containers and renderers."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any

FORMATS = ("text-table", "structured")

SKIPPED = "skipped"


@dataclass
class EvalReport:
    title: str
    columns: list[str]
    rows: dict[str, dict[str, Any]] = field(default_factory=dict)
    provenance: dict[str, Any] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def set(self, row_id: str, column: str, value: Any) -> None:
        self.rows.setdefault(row_id, {})[column] = value

    def to_json_obj(self) -> dict[str, Any]:
        return {
            "title": self.title,
            "columns": self.columns,
            "rows": self.rows,
            "provenance": self.provenance,
            "notes": self.notes,
        }

    @classmethod
    def from_json_obj(cls, obj: dict[str, Any]) -> "EvalReport":
        return cls(
            title=obj["title"],
            columns=list(obj["columns"]),
            rows={k: dict(v) for k, v in obj["rows"].items()},
            provenance=dict(obj.get("provenance", {})),
            notes=list(obj.get("notes", [])),
        )


def config_digest(params: dict[str, Any]) -> str:
    canonical = json.dumps(params, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def _format_cell(value: Any) -> str:
    if value is None:
        return "n/a"
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def _render_table(report: EvalReport) -> str:
    header = ["id", *report.columns]
    body = [
        [row_id, *(_format_cell(report.rows[row_id].get(col)) for col in report.columns)]
        for row_id in sorted(report.rows)
    ]
    widths = [max(len(row[i]) for row in [header, *body]) for i in range(len(header))]
    lines = [f"# {report.title}"]
    for key in sorted(report.provenance):
        lines.append(f"#   {key}: {report.provenance[key]}")
    lines.append("  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip())
    lines.append("  ".join("-" * w for w in widths))
    for row in body:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
    for note in report.notes:
        lines.append(f"# note: {note}")
    return "\n".join(lines) + "\n"


def render_report(reports: EvalReport | list[EvalReport], format: str = "text-table") -> bytes:
    """Serialize one or more reports; identical input gives identical bytes."""
    if isinstance(reports, EvalReport):
        reports = [reports]
    if format == "structured":
        doc = {"reports": [r.to_json_obj() for r in reports]}
        return (json.dumps(doc, sort_keys=True, indent=2) + "\n").encode("utf-8")
    if format == "text-table":
        return "\n".join(_render_table(r) for r in reports).encode("utf-8")
    raise ValueError(f"unknown format {format!r}; expected one of {FORMATS}")


def parse_structured(data: bytes) -> list[EvalReport]:
    doc = json.loads(data.decode("utf-8"))
    return [EvalReport.from_json_obj(obj) for obj in doc["reports"]]
