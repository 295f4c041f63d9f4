"""Vision and language backends for the split pipeline.

The mock vision backend and the error-injecting oracle exist so that every
stage of the pipeline can run, and be measured, with no model in the loop.
The oracle reads ground truth and corrupts it according to an ErrorProfile;
with the zero profile its output parses back to exactly the visible labels.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .chat_client import ChatCompletionsClient
from .errors import BackendMalformedOutput, BackendUnreachable, ConfigInvalid
from .labels import FrameLabel
from .ontology import CabinOntology
from .prompts import PromptTemplate
from .wire import EmbeddingTensor, decode_embedding_message, tensor_from_array


@dataclass(frozen=True)
class ErrorProfile:
    """Corruption rates applied per frame by the oracle responder.

    p_miss drops a visible object; p_mislocalize moves a surviving object to
    a uniformly different position; p_hallucinate is the Poisson mean of
    invented objects added per frame.
    """

    p_miss: float = 0.0
    p_mislocalize: float = 0.0
    p_hallucinate: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("p_miss", "p_mislocalize"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigInvalid(f"{name}={v} outside [0, 1]")
        if self.p_hallucinate < 0.0:
            raise ConfigInvalid(f"p_hallucinate={self.p_hallucinate} negative")


ZERO_PROFILE = ErrorProfile()


def load_distractors(path: str | Path | None = None) -> tuple[str, ...]:
    """Invented object names used for hallucinations; disjoint from the
    ontology vocabulary by construction (validated at load)."""
    if path is None:
        text = resources.files("odal").joinpath("data/distractors.json").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    names = tuple(json.loads(text)["names"])
    if not names:
        raise ConfigInvalid("distractor list is empty")
    return names


def check_distractors_disjoint(
    names: tuple[str, ...], ontology: CabinOntology
) -> None:
    vocab = set(ontology.classes) | set(ontology.aliases)
    clash = sorted(n for n in names if n.strip().lower() in vocab)
    if clash:
        raise ConfigInvalid(f"distractor names collide with ontology: {clash}")


def _poisson(rng: random.Random, mean: float) -> int:
    if mean <= 0.0:
        return 0
    limit = math.exp(-mean)
    k, p = 0, 1.0
    while True:
        p *= rng.random()
        if p <= limit:
            return k
        k += 1


def oracle_respond(
    label: FrameLabel,
    profile: ErrorProfile,
    ontology: CabinOntology,
    distractors: tuple[str, ...] | None = None,
) -> str:
    """Render a response for one frame from its ground truth plus noise.

    Deterministic per (label, profile): the RNG is seeded from the profile
    seed and the frame id, never from global state.
    """
    if distractors is None:
        distractors = load_distractors()
    check_distractors_disjoint(distractors, ontology)
    rng = random.Random(f"oracle:{profile.seed}:{label.frame_id}")
    entries: dict[str, dict] = {}
    for cls, obj in label.visible_items():
        if rng.random() < profile.p_miss:
            continue
        position = obj.position
        if rng.random() < profile.p_mislocalize:
            others = [p for p in ontology.positions if p != position]
            position = rng.choice(others)
        entries[cls] = {"position": position, "is_visible": "True"}
    n_fake = min(_poisson(rng, profile.p_hallucinate), len(distractors))
    for name in rng.sample(distractors, n_fake):
        entries[name] = {
            "position": rng.choice(ontology.positions),
            "is_visible": "True",
        }
    return json.dumps(entries, indent=2)


class MockVisionBackend:
    """Deterministic stand-in encoder: embeddings are a pure function of the
    image bytes, so identical frames upload identical envelopes."""

    def __init__(
        self, tokens: int = 576, dim: int = 1024, dtype: str = "f16",
        encoder_id: str = "mock-encoder",
    ) -> None:
        self.tokens = tokens
        self.dim = dim
        self.dtype = dtype
        self.backend_id = encoder_id

    def encode(self, image_bytes: bytes) -> EmbeddingTensor:
        seed = int.from_bytes(hashlib.sha256(image_bytes).digest()[:8], "little")
        rng = np.random.default_rng(seed)
        arr = rng.standard_normal((self.tokens, self.dim), dtype=np.float32)
        return tensor_from_array(arr, self.backend_id, self.dtype)


class HttpVisionBackend:
    """Delegates encoding to a remote POST /v1/encode service."""

    def __init__(
        self, base_url: str, timeout: float = 60.0, client=None
    ) -> None:
        import httpx

        self.base_url = base_url.rstrip("/")
        self.backend_id = f"http-encoder:{self.base_url}"
        self._client = client or httpx.Client(timeout=timeout)

    def encode(self, image_bytes: bytes) -> EmbeddingTensor:
        import httpx

        try:
            resp = self._client.post(
                f"{self.base_url}/v1/encode",
                content=image_bytes,
                headers={"Content-Type": "application/octet-stream"},
            )
            resp.raise_for_status()
        except (httpx.HTTPError, OSError) as exc:
            raise BackendUnreachable(f"encoder at {self.base_url}: {exc}") from exc
        try:
            tensor, _ = decode_embedding_message(resp.content)
        except Exception as exc:
            raise BackendMalformedOutput(f"encoder returned a bad envelope: {exc}") from exc
        return tensor


class ScriptedLlmBackend:
    """Returns canned text per frame id, with an optional default."""

    def __init__(
        self,
        texts: dict[str, str] | None = None,
        default_text: str = "{}",
        backend_id: str = "scripted",
    ) -> None:
        self.texts = dict(texts or {})
        self.default_text = default_text
        self.backend_id = backend_id

    def respond(self, frame_id: str, prompt: PromptTemplate | None = None) -> tuple[str, int | None]:
        return self.texts.get(frame_id, self.default_text), None


class OracleLlmBackend:
    """Ground-truth responder for closed-loop evaluation runs."""

    def __init__(
        self,
        labels: dict[str, FrameLabel],
        profile: ErrorProfile,
        ontology: CabinOntology,
        distractors: tuple[str, ...] | None = None,
    ) -> None:
        self.labels = labels
        self.profile = profile
        self.ontology = ontology
        self.distractors = distractors if distractors is not None else load_distractors()
        check_distractors_disjoint(self.distractors, ontology)
        self.backend_id = f"oracle(seed={profile.seed})"

    def respond(self, frame_id: str, prompt: PromptTemplate | None = None) -> tuple[str, int | None]:
        label = self.labels.get(frame_id)
        if label is None:
            raise BackendMalformedOutput(f"oracle has no ground truth for {frame_id!r}")
        return (
            oracle_respond(label, self.profile, self.ontology, self.distractors),
            None,
        )


class OpenAiLlmBackend:
    """Forwards the rendered prompt to an OpenAI-compatible endpoint."""

    def __init__(
        self, client: ChatCompletionsClient, max_tokens: int = 512
    ) -> None:
        self.client = client
        self.max_tokens = max_tokens
        self.backend_id = f"openai:{client.base_url}"

    def respond(self, frame_id: str, prompt: PromptTemplate | None = None) -> tuple[str, int | None]:
        messages = []
        if prompt is not None:
            messages.append({"role": "system", "content": prompt.system_text})
            messages.append({"role": "user", "content": prompt.user_text})
        else:
            messages.append({"role": "user", "content": f"frame {frame_id}"})
        result = self.client.complete(messages, temperature=0.0, max_tokens=self.max_tokens)
        return result.text, result.completion_tokens
