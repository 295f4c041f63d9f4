"""Closed-form network simulation for the three deployment shapes.

No sockets here: upload latency is rtt/2 + size/bandwidth plus a
non-negative Gaussian jitter term drawn deterministically per (seed, call
index), so a report is a pure function of its configuration.
"""

from __future__ import annotations

import csv
import io
import json
import math
import random
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigInvalid
from .wire import DTYPE_WIDTHS, embedding_meta_fields, envelope_size

SCENARIOS = ("raw_upload", "embedding_upload", "onboard_only")


@dataclass(frozen=True)
class LinkModel:
    bandwidth_bps: float  # uplink bytes per second
    rtt_s: float
    jitter_std_s: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.bandwidth_bps <= 0:
            raise ConfigInvalid(f"bandwidth {self.bandwidth_bps} must be positive")
        if self.rtt_s < 0 or self.jitter_std_s < 0:
            raise ConfigInvalid("rtt and jitter must be non-negative")


@dataclass(frozen=True)
class ComputeProfile:
    """Fixed per-frame compute costs in seconds."""

    edge_encode_s: float
    cloud_decode_s: float
    edge_full_s: float


@dataclass(frozen=True)
class ImagePayload:
    width: int = 4000
    height: int = 3000
    compression_factor: float = 1.0

    def payload_bytes(self) -> int:
        if self.compression_factor <= 0:
            raise ConfigInvalid("compression factor must be positive")
        return math.ceil(self.width * self.height * 3 / self.compression_factor)


@dataclass(frozen=True)
class EmbeddingSpec:
    tokens: int = 576
    dim: int = 1024
    dtype: str = "f16"
    encoder_id: str = "mock-encoder"
    prompt_version: str = "v1"

    def body_bytes(self) -> int:
        return self.tokens * self.dim * DTYPE_WIDTHS[self.dtype]

    def envelope_bytes(self, frame_id: str) -> int:
        meta = embedding_meta_fields(
            frame_id, self.encoder_id, self.dtype, (self.tokens, self.dim),
            self.prompt_version,
        )
        return envelope_size(meta, self.body_bytes())


def simulate_upload(size_bytes: int, link: LinkModel, call_index: int = 0) -> float:
    """One uplink transfer; deterministic per (link.seed, call_index).

    The jitter term is clamped at zero so the closed form
    rtt/2 + size/bandwidth is an exact lower bound.
    """
    rng = random.Random(f"simnet:{link.seed}:{call_index}")
    jitter = max(0.0, rng.gauss(0.0, link.jitter_std_s))
    return link.rtt_s / 2 + size_bytes / link.bandwidth_bps + jitter


@dataclass(frozen=True)
class ScenarioStats:
    latencies_s: tuple[float, ...]
    uplink_bytes: int
    p50_s: float
    p95_s: float


@dataclass(frozen=True)
class SimReport:
    frame_count: int
    scenarios: dict[str, ScenarioStats]


def _percentile(values: list[float], q: float) -> float:
    ordered = sorted(values)
    rank = max(1, math.ceil(q * len(ordered)))
    return ordered[rank - 1]


def compare_scenarios(
    frame_ids: list[str],
    link: LinkModel,
    compute: ComputeProfile,
    image: ImagePayload = ImagePayload(),
    embedding: EmbeddingSpec = EmbeddingSpec(),
) -> SimReport:
    """Per-frame latency for raw upload, embedding upload, and on-board."""
    if not frame_ids:
        raise ConfigInvalid("no frames to simulate")
    image_bytes = image.payload_bytes()
    raw, emb, onboard = [], [], []
    raw_uplink = emb_uplink = 0
    for i, frame_id in enumerate(frame_ids):
        embed_bytes = embedding.envelope_bytes(frame_id)
        raw.append(simulate_upload(image_bytes, link, i) + compute.cloud_decode_s)
        emb.append(
            compute.edge_encode_s
            + simulate_upload(embed_bytes, link, i)
            + compute.cloud_decode_s
        )
        onboard.append(compute.edge_full_s)
        raw_uplink += image_bytes
        emb_uplink += embed_bytes
    def stats(latencies: list[float], uplink: int) -> ScenarioStats:
        return ScenarioStats(
            latencies_s=tuple(latencies),
            uplink_bytes=uplink,
            p50_s=_percentile(latencies, 0.50),
            p95_s=_percentile(latencies, 0.95),
        )
    return SimReport(
        frame_count=len(frame_ids),
        scenarios={
            "raw_upload": stats(raw, raw_uplink),
            "embedding_upload": stats(emb, emb_uplink),
            "onboard_only": stats(onboard, 0),
        },
    )


def sim_report_to_dict(report: SimReport, include_latencies: bool = False) -> dict:
    doc: dict = {"frame_count": report.frame_count, "scenarios": {}}
    for name, s in report.scenarios.items():
        entry = {
            "uplink_bytes": s.uplink_bytes,
            "p50_s": s.p50_s,
            "p95_s": s.p95_s,
            "mean_s": sum(s.latencies_s) / len(s.latencies_s),
        }
        if include_latencies:
            entry["latencies_s"] = list(s.latencies_s)
        doc["scenarios"][name] = entry
    return doc


def sim_report_to_json(report: SimReport, include_latencies: bool = False) -> str:
    return json.dumps(
        sim_report_to_dict(report, include_latencies), sort_keys=True, indent=2
    ) + "\n"


def sim_report_to_csv(report: SimReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["scenario", "frames", "uplink_bytes", "p50_s", "p95_s", "mean_s"])
    for name, s in report.scenarios.items():
        writer.writerow(
            [
                name, report.frame_count, s.uplink_bytes,
                f"{s.p50_s:.6f}", f"{s.p95_s:.6f}",
                f"{sum(s.latencies_s) / len(s.latencies_s):.6f}",
            ]
        )
    return buf.getvalue()


def load_sim_config(path: str | Path) -> tuple[LinkModel, ComputeProfile, ImagePayload, EmbeddingSpec]:
    """Read the simulation scenario file (JSON object with link/compute/
    image/embedding sections; missing sections fall back to defaults)."""
    try:
        doc = json.loads(Path(path).read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"scenario config is not valid JSON: {exc}") from exc
    try:
        link_doc = doc["link"]
        link = LinkModel(
            bandwidth_bps=float(link_doc["bandwidth_bps"]),
            rtt_s=float(link_doc["rtt_s"]),
            jitter_std_s=float(link_doc.get("jitter_std_s", 0.0)),
            seed=int(link_doc.get("seed", 0)),
        )
        compute_doc = doc["compute"]
        compute = ComputeProfile(
            edge_encode_s=float(compute_doc["edge_encode_s"]),
            cloud_decode_s=float(compute_doc["cloud_decode_s"]),
            edge_full_s=float(compute_doc["edge_full_s"]),
        )
        image_doc = doc.get("image", {})
        image = ImagePayload(
            width=int(image_doc.get("width", 4000)),
            height=int(image_doc.get("height", 3000)),
            compression_factor=float(image_doc.get("compression_factor", 1.0)),
        )
        embed_doc = doc.get("embedding", {})
        embedding = EmbeddingSpec(
            tokens=int(embed_doc.get("tokens", 576)),
            dim=int(embed_doc.get("dim", 1024)),
            dtype=str(embed_doc.get("dtype", "f16")),
            encoder_id=str(embed_doc.get("encoder_id", "mock-encoder")),
            prompt_version=str(embed_doc.get("prompt_version", "v1")),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigInvalid(f"scenario config invalid: {exc}") from exc
    return link, compute, image, embedding
