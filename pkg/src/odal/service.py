"""HTTP services: the cloud inference endpoint and a mock edge encoder.

Request handling is stateless apart from an append-only log of served frame
ids, guarded by a lock, so concurrent requests stay isolated.
"""

from __future__ import annotations

import threading

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse

from .errors import BackendMalformedOutput, BackendUnreachable, WireError
from .pipeline import TOKEN_LIMIT, cloud_infer
from .prompts import PromptTemplate
from .wire import encode_embedding_message


def create_cloud_app(
    llm_backend,
    prompt: PromptTemplate | None = None,
    token_limit: int = TOKEN_LIMIT,
) -> FastAPI:
    """POST /v1/infer takes an envelope, returns the response JSON.

    Undecodable envelopes get 400 with the error class name; backend
    failures get 502.  GET /v1/health reports the backend id.
    """
    app = FastAPI(title="split-inference cloud node")
    log_lock = threading.Lock()
    served: list[str] = []
    app.state.served_frames = served

    @app.post("/v1/infer")
    async def infer(request: Request) -> JSONResponse:
        envelope = await request.body()
        try:
            response = cloud_infer(envelope, llm_backend, prompt, token_limit)
        except WireError as exc:
            return JSONResponse(
                {"error": type(exc).__name__, "message": str(exc)}, status_code=400
            )
        except (BackendUnreachable, BackendMalformedOutput) as exc:
            return JSONResponse(
                {"error": type(exc).__name__, "message": str(exc)}, status_code=502
            )
        with log_lock:
            served.append(response.frame_id)
        return JSONResponse(
            {
                "frame_id": response.frame_id,
                "text": response.text,
                "token_count": response.token_count,
                "backend_id": response.backend_id,
                "truncated": response.truncated,
            }
        )

    @app.get("/v1/health")
    async def health() -> JSONResponse:
        return JSONResponse(
            {"status": "ok", "backend_id": llm_backend.backend_id}
        )

    return app


def create_encoder_app(vision_backend, prompt_version: str = "v1") -> FastAPI:
    """POST /v1/encode takes raw image bytes, returns an embedding envelope."""
    app = FastAPI(title="mock edge encoder")

    @app.post("/v1/encode")
    async def encode(request: Request) -> Response:
        image_bytes = await request.body()
        if not image_bytes:
            return JSONResponse(
                {"error": "EmptyBody", "message": "no image bytes"}, status_code=400
            )
        frame_id = request.headers.get("X-Frame-Id", "")
        tensor = vision_backend.encode(image_bytes)
        envelope = encode_embedding_message(tensor, frame_id, prompt_version)
        return Response(content=envelope, media_type="application/octet-stream")

    @app.get("/v1/health")
    async def health() -> JSONResponse:
        return JSONResponse(
            {"status": "ok", "backend_id": vision_backend.backend_id}
        )

    return app
