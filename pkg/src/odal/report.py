"""Run-report rendering: aligned table, CSV, or lossless JSON.

Rows are always ordered by descending signal-to-noise so the strongest
configuration reads first.  The table's JSON rate column is the strict rate;
CSV carries both rates.
"""

from __future__ import annotations

import csv
import io
import json

from .errors import ConfigInvalid
from .scoring import MetricReport, format_pct, report_to_dict

FORMATS = ("table", "json", "csv")

TABLE_COLUMNS = (
    "Version",
    "Vision Encoder",
    "Comprehensive",
    "ODAL_score (%)",
    "ODAL_SNR",
    "JSON Rate (%)",
)


def _yes_no(flag: bool) -> str:
    return "yes" if flag else "no"


def _sorted_reports(reports: list[MetricReport]) -> list[MetricReport]:
    return sorted(
        reports, key=lambda r: r.odal_snr.sort_value(), reverse=True
    )


def _row(report: MetricReport) -> tuple[str, ...]:
    meta = report.run_meta
    version = meta.prompt_version.upper() or meta.label or "-"
    return (
        version,
        _yes_no(meta.fine_tune.vision_encoder),
        _yes_no(meta.fine_tune.comprehensive),
        format_pct(report.odal_score_pct),
        report.odal_snr.render(4),
        format_pct(report.json_rate_strict_pct),
    )


def emit_report(reports: list[MetricReport], fmt: str = "table") -> str:
    if fmt not in FORMATS:
        raise ConfigInvalid(f"unknown report format {fmt!r}")
    ordered = _sorted_reports(list(reports))
    if fmt == "json":
        return json.dumps(
            [report_to_dict(r) for r in ordered], sort_keys=True, indent=2
        ) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(
            [
                "version", "vision_encoder", "comprehensive", "odal_score_pct",
                "odal_snr", "json_rate_strict_pct", "json_rate_lenient_pct",
                "correct", "hallucinations", "snr_cap",
            ]
        )
        for r in ordered:
            writer.writerow(
                [
                    r.run_meta.prompt_version.upper() or r.run_meta.label or "-",
                    _yes_no(r.run_meta.fine_tune.vision_encoder),
                    _yes_no(r.run_meta.fine_tune.comprehensive),
                    format_pct(r.odal_score_pct),
                    r.odal_snr.render(4),
                    format_pct(r.json_rate_strict_pct),
                    format_pct(r.json_rate_lenient_pct),
                    r.correct_count,
                    r.hallucination_count,
                    r.snr_cap,
                ]
            )
        return buf.getvalue()
    rows = [TABLE_COLUMNS] + [_row(r) for r in ordered]
    widths = [max(len(row[i]) for row in rows) for i in range(len(TABLE_COLUMNS))]
    lines = []
    for idx, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
        if idx == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"
