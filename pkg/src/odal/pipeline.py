"""End-to-end split pipeline: encode on the edge, infer in the cloud.

Loopback mode calls the cloud stage in-process; http mode POSTs the same
envelope bytes to a remote service.  Response texts are identical either
way for the same fixture and seeds; only timing fields differ.  Per-frame
failures are recorded, never raised, so one bad frame cannot sink a run.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import httpx

from .backends import MockVisionBackend
from .dataset import DatasetManifest
from .errors import BackendUnreachable, OdalError
from .ontology import CabinOntology
from .prompts import PromptTemplate, render_prompt
from .wire import (
    EmbeddingTensor,
    decode_embedding_message,
    encode_embedding_message,
)

TOKEN_LIMIT = 512


@dataclass(frozen=True)
class ModelResponse:
    frame_id: str
    text: str
    token_count: int
    backend_id: str
    latency_ms: float = 0.0
    truncated: bool = False


@dataclass(frozen=True)
class RunRecord:
    frame_id: str
    text: str = ""
    token_count: int = 0
    backend_id: str = ""
    prompt_version: str = ""
    latency_ms: float = 0.0
    truncated: bool = False
    envelope_bytes: int = 0
    response_bytes: int = 0
    error: str = ""


@dataclass
class PipelineConfig:
    ontology: CabinOntology
    llm_backend: object = None  # loopback mode
    vision_backend: object = field(default_factory=MockVisionBackend)
    prompt_version: str = "v1"
    mode: str = "loopback"  # "loopback" | "http"
    cloud_url: str = ""
    token_limit: int = TOKEN_LIMIT
    template_dir: str | None = None
    http_client: httpx.Client | None = None


def count_tokens(text: str) -> int:
    """Whitespace token count, the accounting unit for mock backends."""
    return len(text.split())


def truncate_tokens(text: str, limit: int) -> tuple[str, int, bool]:
    tokens = text.split()
    if len(tokens) <= limit:
        return text, len(tokens), False
    return " ".join(tokens[:limit]), limit, True


def edge_encode(image_bytes: bytes, vision_backend) -> EmbeddingTensor:
    return vision_backend.encode(image_bytes)


def cloud_infer(
    envelope: bytes,
    llm_backend,
    prompt: PromptTemplate | None = None,
    token_limit: int = TOKEN_LIMIT,
) -> ModelResponse:
    """Decode an uploaded envelope and answer it with the configured backend.

    Wire errors propagate to the caller; the HTTP service maps them to 400.
    """
    started = time.perf_counter()
    _tensor, meta = decode_embedding_message(envelope)
    frame_id = str(meta.get("frame_id", ""))
    text, reported_tokens = llm_backend.respond(frame_id, prompt)
    if reported_tokens is None:
        text, token_count, truncated = truncate_tokens(text, token_limit)
    else:
        token_count, truncated = reported_tokens, False
        if reported_tokens > token_limit:
            text, token_count, truncated = truncate_tokens(text, token_limit)
    return ModelResponse(
        frame_id=frame_id,
        text=text,
        token_count=token_count,
        backend_id=llm_backend.backend_id,
        latency_ms=(time.perf_counter() - started) * 1000.0,
        truncated=truncated,
    )


def _read_frame_bytes(image_ref: str) -> bytes:
    return Path(image_ref).read_bytes()


def run_pipeline(manifest: DatasetManifest, cfg: PipelineConfig) -> list[RunRecord]:
    """Process every frame in manifest order; one record per frame."""
    prompt = render_prompt(cfg.prompt_version, cfg.ontology, cfg.template_dir)
    records: list[RunRecord] = []
    client = cfg.http_client
    owns_client = False
    if cfg.mode == "http" and client is None:
        client = httpx.Client(timeout=60.0)
        owns_client = True
    try:
        for frame in manifest.frames:
            started = time.perf_counter()
            try:
                image_bytes = _read_frame_bytes(frame.image_ref)
                tensor = edge_encode(image_bytes, cfg.vision_backend)
                envelope = encode_embedding_message(
                    tensor, frame.frame_id, cfg.prompt_version
                )
                if cfg.mode == "loopback":
                    response = cloud_infer(
                        envelope, cfg.llm_backend, prompt, cfg.token_limit
                    )
                    response_bytes = len(response.text.encode("utf-8"))
                elif cfg.mode == "http":
                    response, response_bytes = _infer_over_http(
                        client, cfg.cloud_url, envelope
                    )
                else:
                    raise OdalError(f"unknown pipeline mode {cfg.mode!r}")
            except FileNotFoundError as exc:
                records.append(
                    RunRecord(
                        frame_id=frame.frame_id,
                        prompt_version=cfg.prompt_version,
                        error=f"MissingImage: {exc}",
                    )
                )
                continue
            except OdalError as exc:
                records.append(
                    RunRecord(
                        frame_id=frame.frame_id,
                        prompt_version=cfg.prompt_version,
                        error=f"{type(exc).__name__}: {exc}",
                    )
                )
                continue
            records.append(
                RunRecord(
                    frame_id=frame.frame_id,
                    text=response.text,
                    token_count=response.token_count,
                    backend_id=response.backend_id,
                    prompt_version=cfg.prompt_version,
                    latency_ms=(time.perf_counter() - started) * 1000.0,
                    truncated=response.truncated,
                    envelope_bytes=len(envelope),
                    response_bytes=response_bytes,
                )
            )
    finally:
        if owns_client and client is not None:
            client.close()
    return records


def _infer_over_http(
    client: httpx.Client, cloud_url: str, envelope: bytes
) -> tuple[ModelResponse, int]:
    try:
        resp = client.post(
            cloud_url.rstrip("/") + "/v1/infer",
            content=envelope,
            headers={"Content-Type": "application/octet-stream"},
        )
    except (httpx.HTTPError, OSError) as exc:
        raise BackendUnreachable(f"cloud at {cloud_url}: {exc}") from exc
    if resp.status_code != 200:
        raise BackendUnreachable(
            f"cloud at {cloud_url} returned HTTP {resp.status_code}: {resp.text[:200]}"
        )
    doc = resp.json()
    return (
        ModelResponse(
            frame_id=str(doc["frame_id"]),
            text=str(doc["text"]),
            token_count=int(doc["token_count"]),
            backend_id=str(doc.get("backend_id", "")),
            truncated=bool(doc.get("truncated", False)),
        ),
        len(resp.content),
    )


def record_to_dict(record: RunRecord) -> dict:
    return {
        "frame_id": record.frame_id,
        "text": record.text,
        "token_count": record.token_count,
        "backend_id": record.backend_id,
        "prompt_version": record.prompt_version,
        "latency_ms": record.latency_ms,
        "truncated": record.truncated,
        "envelope_bytes": record.envelope_bytes,
        "response_bytes": record.response_bytes,
        "error": record.error,
    }


def record_from_dict(doc: dict) -> RunRecord:
    return RunRecord(
        frame_id=doc["frame_id"],
        text=doc.get("text", ""),
        token_count=int(doc.get("token_count", 0)),
        backend_id=doc.get("backend_id", ""),
        prompt_version=doc.get("prompt_version", ""),
        latency_ms=float(doc.get("latency_ms", 0.0)),
        truncated=bool(doc.get("truncated", False)),
        envelope_bytes=int(doc.get("envelope_bytes", 0)),
        response_bytes=int(doc.get("response_bytes", 0)),
        error=doc.get("error", ""),
    )


def write_records(path: str | Path, records: Iterable[RunRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record_to_dict(record), sort_keys=True) + "\n")


def read_records(path: str | Path) -> Iterator[RunRecord]:
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield record_from_dict(json.loads(line))


__all__ = [
    "ModelResponse",
    "RunRecord",
    "PipelineConfig",
    "cloud_infer",
    "edge_encode",
    "run_pipeline",
    "count_tokens",
    "truncate_tokens",
    "read_records",
    "write_records",
]
