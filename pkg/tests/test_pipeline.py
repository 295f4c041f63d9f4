import socket
import threading
import time

import httpx
import pytest
from fastapi.testclient import TestClient

from odal.backends import (
    ErrorProfile,
    MockVisionBackend,
    OracleLlmBackend,
    ScriptedLlmBackend,
)
from odal.dataset import generate_fixture
from odal.pipeline import (
    PipelineConfig,
    cloud_infer,
    count_tokens,
    read_records,
    run_pipeline,
    truncate_tokens,
    write_records,
)
from odal.service import create_cloud_app, create_encoder_app
from odal.wire import decode_embedding_message, encode_embedding_message, tensor_from_array

import numpy as np


SMALL_VISION = MockVisionBackend(tokens=4, dim=8)


def _fixture(tmp_path, ontology, n=6, seed=1):
    return generate_fixture(n, ontology, seed=seed, out_dir=tmp_path / "frames")


def _oracle(manifest, ontology, seed=0, **rates):
    labels = {f.frame_id: f for f in manifest.frames}
    return OracleLlmBackend(labels, ErrorProfile(seed=seed, **rates), ontology)


def test_token_helpers():
    assert count_tokens("a b  c\nd") == 4
    text, n, truncated = truncate_tokens("one two three", 5)
    assert (text, n, truncated) == ("one two three", 3, False)
    text, n, truncated = truncate_tokens("one two three", 2)
    assert (text, n, truncated) == ("one two", 2, True)


def test_cloud_infer_round_trip(ontology):
    backend = ScriptedLlmBackend({"f1": "hello world"})
    tensor = SMALL_VISION.encode(b"img")
    envelope = encode_embedding_message(tensor, "f1", "v1")
    response = cloud_infer(envelope, backend)
    assert response.frame_id == "f1"
    assert response.text == "hello world"
    assert response.token_count == 2
    assert response.backend_id == "scripted"
    assert not response.truncated


def test_cloud_infer_truncates_long_output():
    long_text = " ".join(str(i) for i in range(600))
    backend = ScriptedLlmBackend(default_text=long_text)
    envelope = encode_embedding_message(SMALL_VISION.encode(b"x"), "f", "v1")
    response = cloud_infer(envelope, backend)
    assert response.token_count == 512
    assert response.truncated
    assert count_tokens(response.text) == 512
    shorter = cloud_infer(envelope, backend, token_limit=10)
    assert shorter.token_count == 10 and shorter.truncated


def test_cloud_infer_honors_reported_token_count():
    class Reporting:
        backend_id = "reporting"

        def respond(self, frame_id, prompt=None):
            return "some text", 42

    envelope = encode_embedding_message(SMALL_VISION.encode(b"x"), "f", "v1")
    response = cloud_infer(envelope, Reporting())
    assert response.token_count == 42
    assert not response.truncated


def test_loopback_run_is_deterministic(tmp_path, ontology):
    manifest = _fixture(tmp_path, ontology)
    cfg = PipelineConfig(
        ontology=ontology,
        llm_backend=_oracle(manifest, ontology, p_mislocalize=0.5),
        vision_backend=SMALL_VISION,
    )
    runs = [run_pipeline(manifest, cfg) for _ in range(3)]
    texts = [[r.text for r in run] for run in runs]
    assert texts[0] == texts[1] == texts[2]
    assert all(r.error == "" for r in runs[0])
    assert all(r.envelope_bytes > 0 for r in runs[0])
    assert [r.frame_id for r in runs[0]] == [f.frame_id for f in manifest.frames]


def test_missing_image_recorded_not_raised(tmp_path, ontology):
    manifest = _fixture(tmp_path, ontology)
    victim = manifest.frames[2]
    (tmp_path / "frames" / f"{victim.frame_id}.ppm").unlink()
    cfg = PipelineConfig(
        ontology=ontology,
        llm_backend=_oracle(manifest, ontology),
        vision_backend=SMALL_VISION,
    )
    records = run_pipeline(manifest, cfg)
    assert len(records) == len(manifest.frames)
    bad = [r for r in records if r.error]
    assert len(bad) == 1
    assert bad[0].frame_id == victim.frame_id
    assert bad[0].error.startswith("MissingImage:")
    assert all(r.text for r in records if not r.error)


def test_backend_error_recorded_per_frame(tmp_path, ontology):
    manifest = _fixture(tmp_path, ontology)
    labels = {f.frame_id: f for f in manifest.frames}
    del labels[manifest.frames[0].frame_id]  # oracle loses one frame
    backend = OracleLlmBackend(labels, ErrorProfile(), ontology)
    cfg = PipelineConfig(ontology=ontology, llm_backend=backend, vision_backend=SMALL_VISION)
    records = run_pipeline(manifest, cfg)
    assert records[0].error.startswith("BackendMalformedOutput:")
    assert all(r.error == "" for r in records[1:])


def test_records_round_trip(tmp_path, ontology):
    manifest = _fixture(tmp_path, ontology, n=3)
    cfg = PipelineConfig(
        ontology=ontology,
        llm_backend=_oracle(manifest, ontology),
        vision_backend=SMALL_VISION,
    )
    records = run_pipeline(manifest, cfg)
    path = tmp_path / "responses.jsonl"
    write_records(path, records)
    loaded = list(read_records(path))
    assert [(r.frame_id, r.text, r.token_count) for r in loaded] == [
        (r.frame_id, r.text, r.token_count) for r in records
    ]


def test_http_mode_matches_loopback_texts(tmp_path, ontology):
    manifest = _fixture(tmp_path, ontology)
    backend = _oracle(manifest, ontology, p_mislocalize=0.4, seed=5)
    loopback_cfg = PipelineConfig(
        ontology=ontology, llm_backend=backend, vision_backend=SMALL_VISION
    )
    loopback = run_pipeline(manifest, loopback_cfg)

    app = create_cloud_app(backend)
    with TestClient(app) as client:
        http_cfg = PipelineConfig(
            ontology=ontology,
            vision_backend=SMALL_VISION,
            mode="http",
            cloud_url="http://testserver",
            http_client=client,
        )
        over_http = run_pipeline(manifest, http_cfg)
    assert [r.text for r in over_http] == [r.text for r in loopback]
    assert [r.frame_id for r in over_http] == [r.frame_id for r in loopback]
    assert all(r.error == "" for r in over_http)
    assert app.state.served_frames == [f.frame_id for f in manifest.frames]


def test_http_mode_records_unreachable_cloud(tmp_path, ontology):
    manifest = _fixture(tmp_path, ontology, n=2)

    def refuse(request):
        raise httpx.ConnectError("refused")

    with httpx.Client(transport=httpx.MockTransport(refuse)) as client:
        cfg = PipelineConfig(
            ontology=ontology,
            vision_backend=SMALL_VISION,
            mode="http",
            cloud_url="http://nowhere.test",
            http_client=client,
        )
        records = run_pipeline(manifest, cfg)
    assert all(r.error.startswith("BackendUnreachable:") for r in records)


def test_cloud_app_error_codes(ontology):
    app = create_cloud_app(ScriptedLlmBackend())
    with TestClient(app) as client:
        health = client.get("/v1/health")
        assert health.status_code == 200
        assert health.json() == {"status": "ok", "backend_id": "scripted"}

        bad = client.post("/v1/infer", content=b"not an envelope")
        assert bad.status_code == 400
        doc = bad.json()
        assert doc["error"] in ("BadMagic", "LengthMismatch")
        assert "message" in doc

        envelope = encode_embedding_message(SMALL_VISION.encode(b"x"), "f1", "v1")
        corrupted = bytearray(envelope)
        corrupted[-1] ^= 0xFF
        assert client.post("/v1/infer", content=bytes(corrupted)).status_code == 400
        assert (
            client.post("/v1/infer", content=bytes(corrupted)).json()["error"]
            == "ChecksumMismatch"
        )


def test_cloud_app_backend_failure_is_502(ontology):
    class Exploding:
        backend_id = "exploding"

        def respond(self, frame_id, prompt=None):
            from odal.errors import BackendUnreachable

            raise BackendUnreachable("model host down")

    app = create_cloud_app(Exploding())
    with TestClient(app) as client:
        envelope = encode_embedding_message(SMALL_VISION.encode(b"x"), "f1", "v1")
        resp = client.post("/v1/infer", content=envelope)
        assert resp.status_code == 502
        assert resp.json()["error"] == "BackendUnreachable"


def test_encoder_app(ontology):
    app = create_encoder_app(SMALL_VISION, prompt_version="v2")
    with TestClient(app) as client:
        resp = client.post(
            "/v1/encode", content=b"image-bytes", headers={"X-Frame-Id": "f7"}
        )
        assert resp.status_code == 200
        tensor, meta = decode_embedding_message(resp.content)
        assert meta["frame_id"] == "f7"
        assert meta["prompt_version"] == "v2"
        assert tensor == SMALL_VISION.encode(b"image-bytes")
        assert client.post("/v1/encode", content=b"").status_code == 400
        assert client.get("/v1/health").json()["status"] == "ok"


def _free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


@pytest.mark.slow
def test_http_mode_over_real_socket(tmp_path, ontology):
    import uvicorn

    manifest = _fixture(tmp_path, ontology, n=3)
    backend = _oracle(manifest, ontology)
    app = create_cloud_app(backend)
    port = _free_port()
    server = uvicorn.Server(
        uvicorn.Config(app, host="127.0.0.1", port=port, log_level="error")
    )
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    try:
        deadline = time.time() + 10
        while not server.started:
            if time.time() > deadline:
                pytest.fail("server did not start")
            time.sleep(0.05)
        cfg = PipelineConfig(
            ontology=ontology,
            vision_backend=SMALL_VISION,
            mode="http",
            cloud_url=f"http://127.0.0.1:{port}",
        )
        records = run_pipeline(manifest, cfg)
        assert all(r.error == "" for r in records)
        loopback_cfg = PipelineConfig(
            ontology=ontology, llm_backend=backend, vision_backend=SMALL_VISION
        )
        assert [r.text for r in records] == [
            r.text for r in run_pipeline(manifest, loopback_cfg)
        ]
    finally:
        server.should_exit = True
        thread.join(timeout=10)


def test_unknown_mode_recorded(tmp_path, ontology):
    manifest = _fixture(tmp_path, ontology, n=1)
    cfg = PipelineConfig(ontology=ontology, vision_backend=SMALL_VISION, mode="carrier-pigeon")
    records = run_pipeline(manifest, cfg)
    assert records[0].error.startswith("OdalError: unknown pipeline mode")
