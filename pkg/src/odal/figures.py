"""Comparison figures rendered next to delimited report output.

Charts are written as PNG files; nothing here ever opens a window.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .scoring import MetricReport


def _run_labels(reports: list[MetricReport]) -> list[str]:
    labels = []
    for i, r in enumerate(reports):
        meta = r.run_meta
        label = meta.label or meta.prompt_version.upper() or meta.backend_id
        labels.append(label or f"run {i + 1}")
    return labels


def render_score_figure(reports: list[MetricReport], path: str | Path) -> Path:
    """Bar chart of score percent per run."""
    labels = _run_labels(reports)
    values = [float(r.odal_score_pct) for r in reports]
    fig, ax = plt.subplots(figsize=(max(4.0, 1.2 * len(reports) + 2), 3.5))
    bars = ax.bar(labels, values, color="#3572b0")
    ax.bar_label(bars, fmt="%.2f", padding=2, fontsize=8)
    ax.set_ylabel("score (%)")
    ax.set_ylim(0, 105)
    ax.set_title("Detection/localization score by run")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_snr_figure(reports: list[MetricReport], path: str | Path) -> Path:
    """Bar chart of the correct-to-hallucination ratio per run.

    Capped runs draw at the cap value and are annotated as such.
    """
    labels = _run_labels(reports)
    values = [float(r.odal_snr.sort_value()) for r in reports]
    fig, ax = plt.subplots(figsize=(max(4.0, 1.2 * len(reports) + 2), 3.5))
    bars = ax.bar(labels, values, color="#67a661")
    for bar, r in zip(bars, reports):
        text = r.odal_snr.render(2)
        ax.annotate(
            text,
            (bar.get_x() + bar.get_width() / 2, bar.get_height()),
            ha="center", va="bottom", fontsize=8,
        )
    ax.set_ylabel("correct / hallucinated")
    ax.set_title("Signal-to-noise by run")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_json_rate_figure(reports: list[MetricReport], path: str | Path) -> Path:
    """Grouped bars for strict and lenient JSON conformance rates."""
    labels = _run_labels(reports)
    strict = [float(r.json_rate_strict_pct) for r in reports]
    lenient = [float(r.json_rate_lenient_pct) for r in reports]
    x = range(len(reports))
    width = 0.38
    fig, ax = plt.subplots(figsize=(max(4.0, 1.4 * len(reports) + 2), 3.5))
    ax.bar([i - width / 2 for i in x], strict, width, label="strict", color="#3572b0")
    ax.bar([i + width / 2 for i in x], lenient, width, label="lenient", color="#b8cfe8")
    ax.set_xticks(list(x), labels)
    ax.set_ylabel("JSON rate (%)")
    ax.set_ylim(0, 105)
    ax.set_title("Response format conformance by run")
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_latency_figure(scenario_stats: dict[str, dict], path: str | Path) -> Path:
    """Grouped p50/p95 per-frame latency bars per transport scenario."""
    labels = list(scenario_stats)
    p50 = [scenario_stats[s]["p50_s"] for s in labels]
    p95 = [scenario_stats[s]["p95_s"] for s in labels]
    x = range(len(labels))
    width = 0.38
    fig, ax = plt.subplots(figsize=(max(4.0, 1.4 * len(labels) + 2), 3.5))
    ax.bar([i - width / 2 for i in x], p50, width, label="p50", color="#caa053")
    ax.bar([i + width / 2 for i in x], p95, width, label="p95", color="#e4cfa4")
    ax.set_xticks(list(x), labels)
    ax.set_ylabel("seconds per frame")
    ax.set_title("Simulated end-to-end latency")
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_uplink_figure(scenario_stats: dict[str, dict], path: str | Path) -> Path:
    labels = list(scenario_stats)
    values = [scenario_stats[s]["uplink_bytes"] / 1e6 for s in labels]
    fig, ax = plt.subplots(figsize=(max(4.0, 1.2 * len(labels) + 2), 3.5))
    bars = ax.bar(labels, values, color="#9268a8")
    ax.bar_label(bars, fmt="%.2f", padding=2, fontsize=8)
    ax.set_ylabel("uplink MB (total)")
    ax.set_title("Simulated uplink volume")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
