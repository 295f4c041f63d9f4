"""Binary envelope carrying embeddings and responses between edge and cloud.

Layout, all integers little-endian:

    magic     4 bytes   b"ODAL"
    version   u8        currently 1
    msg_type  u8        1 embedding upload, 2 inference response, 3 error
    meta_len  u32
    meta      meta_len bytes of UTF-8 JSON
    body_len  u64
    body      body_len bytes
    crc32c    u32       Castagnoli CRC over meta || body

Decoding checks structure before the checksum and the checksum before
parsing meta, so corrupt payloads fail with a precise error class and never
reach the JSON layer.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadMagic,
    ChecksumMismatch,
    LengthMismatch,
    UnsupportedVersion,
)

MAGIC = b"ODAL"
VERSION = 1

MSG_EMBEDDING_UPLOAD = 1
MSG_INFERENCE_RESPONSE = 2
MSG_ERROR = 3

_HEADER = struct.Struct("<4sBBI")
_BODY_LEN = struct.Struct("<Q")
_CRC = struct.Struct("<I")

DTYPE_WIDTHS = {"f32": 4, "f16": 2, "i8_scaled": 1}
_NUMPY_DTYPES = {"f32": np.float32, "f16": np.float16, "i8_scaled": np.int8}


def _make_tables() -> list[list[int]]:
    # CRC-32C (Castagnoli), reflected polynomial 0x82F63B78, slice-by-8.
    # Implemented here because the stdlib only ships the IEEE CRC-32.
    base = []
    for i in range(256):
        crc = i
        for _ in range(8):
            crc = (crc >> 1) ^ 0x82F63B78 if crc & 1 else crc >> 1
        base.append(crc)
    tables = [base]
    for k in range(1, 8):
        prev = tables[k - 1]
        tables.append([base[prev[i] & 0xFF] ^ (prev[i] >> 8) for i in range(256)])
    return tables


_T = _make_tables()


def crc32c(data: bytes, crc: int = 0) -> int:
    """CRC-32C of data, continuing from a previous value."""
    t0, t1, t2, t3, t4, t5, t6, t7 = _T[0], _T[1], _T[2], _T[3], _T[4], _T[5], _T[6], _T[7]
    crc ^= 0xFFFFFFFF
    n8 = len(data) // 8
    if n8:
        words = struct.unpack_from(f"<{n8 * 2}I", data)
        for i in range(0, n8 * 2, 2):
            lo = words[i] ^ crc
            hi = words[i + 1]
            crc = (
                t7[lo & 0xFF]
                ^ t6[(lo >> 8) & 0xFF]
                ^ t5[(lo >> 16) & 0xFF]
                ^ t4[lo >> 24]
                ^ t3[hi & 0xFF]
                ^ t2[(hi >> 8) & 0xFF]
                ^ t1[(hi >> 16) & 0xFF]
                ^ t0[hi >> 24]
            )
    for b in data[n8 * 8 :]:
        crc = (crc >> 8) ^ t0[(crc ^ b) & 0xFF]
    return crc ^ 0xFFFFFFFF


@dataclass(frozen=True)
class EmbeddingTensor:
    """Row-major patch-token embedding block.

    shape is (tokens, dim); data holds exactly tokens * dim elements of the
    declared dtype.  scale only applies to i8_scaled payloads.
    """

    encoder_id: str
    dtype: str
    shape: tuple[int, int]
    data: bytes
    scale: float = 1.0

    def __post_init__(self) -> None:
        if self.dtype not in DTYPE_WIDTHS:
            raise ValueError(f"unknown dtype {self.dtype!r}")
        tokens, dim = self.shape
        expected = tokens * dim * DTYPE_WIDTHS[self.dtype]
        if len(self.data) != expected:
            raise ValueError(
                f"data is {len(self.data)} bytes, expected {expected} "
                f"for {tokens}x{dim} {self.dtype}"
            )

    def to_array(self) -> np.ndarray:
        arr = np.frombuffer(self.data, dtype=_NUMPY_DTYPES[self.dtype]).reshape(self.shape)
        if self.dtype == "i8_scaled":
            return arr.astype(np.float32) * self.scale
        return arr


def tensor_from_array(
    arr: np.ndarray, encoder_id: str, dtype: str = "f16", scale: float = 1.0
) -> EmbeddingTensor:
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-d array, got shape {arr.shape}")
    if dtype == "i8_scaled":
        data = np.clip(np.rint(arr / scale), -128, 127).astype(np.int8).tobytes()
    else:
        data = arr.astype(_NUMPY_DTYPES[dtype]).tobytes()
    return EmbeddingTensor(
        encoder_id=encoder_id,
        dtype=dtype,
        shape=(arr.shape[0], arr.shape[1]),
        data=data,
        scale=scale,
    )


def _canonical_meta(meta: dict) -> bytes:
    return json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")


def encode_envelope(msg_type: int, meta: dict, body: bytes) -> bytes:
    meta_bytes = _canonical_meta(meta)
    crc = crc32c(body, crc32c(meta_bytes))
    return b"".join(
        (
            _HEADER.pack(MAGIC, VERSION, msg_type, len(meta_bytes)),
            meta_bytes,
            _BODY_LEN.pack(len(body)),
            body,
            _CRC.pack(crc),
        )
    )


def decode_envelope(data: bytes) -> tuple[int, dict, bytes]:
    """Decode and verify an envelope; returns (msg_type, meta, body)."""
    if len(data) < _HEADER.size:
        raise LengthMismatch(f"envelope truncated at {len(data)} bytes")
    magic, version, msg_type, meta_len = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BadMagic(f"bad magic {magic!r}")
    if version != VERSION:
        raise UnsupportedVersion(f"unsupported version {version}")
    pos = _HEADER.size
    if len(data) < pos + meta_len + _BODY_LEN.size:
        raise LengthMismatch("envelope shorter than declared meta length")
    meta_bytes = data[pos : pos + meta_len]
    pos += meta_len
    (body_len,) = _BODY_LEN.unpack_from(data, pos)
    pos += _BODY_LEN.size
    expected_total = pos + body_len + _CRC.size
    if len(data) != expected_total:
        raise LengthMismatch(
            f"envelope is {len(data)} bytes, declared lengths give {expected_total}"
        )
    body = data[pos : pos + body_len]
    (stored_crc,) = _CRC.unpack_from(data, pos + body_len)
    actual_crc = crc32c(body, crc32c(meta_bytes))
    if stored_crc != actual_crc:
        raise ChecksumMismatch(
            f"crc32c mismatch: stored {stored_crc:#010x}, computed {actual_crc:#010x}"
        )
    try:
        meta = json.loads(meta_bytes.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise LengthMismatch(f"meta is not valid UTF-8 JSON: {exc}") from exc
    return msg_type, meta, body


def embedding_meta_fields(
    frame_id: str,
    encoder_id: str,
    dtype: str,
    shape: tuple[int, int],
    prompt_version: str,
    scale: float = 1.0,
) -> dict:
    meta = {
        "frame_id": frame_id,
        "encoder_id": encoder_id,
        "dtype": dtype,
        "shape": list(shape),
        "prompt_version": prompt_version,
    }
    if dtype == "i8_scaled":
        meta["scale"] = scale
    return meta


def embedding_meta(
    tensor: EmbeddingTensor, frame_id: str, prompt_version: str
) -> dict:
    return embedding_meta_fields(
        frame_id, tensor.encoder_id, tensor.dtype, tensor.shape,
        prompt_version, tensor.scale,
    )


def encode_embedding_message(
    tensor: EmbeddingTensor, frame_id: str, prompt_version: str
) -> bytes:
    """Envelope an embedding; bit-exact for identical inputs."""
    return encode_envelope(
        MSG_EMBEDDING_UPLOAD,
        embedding_meta(tensor, frame_id, prompt_version),
        tensor.data,
    )


def decode_embedding_message(data: bytes) -> tuple[EmbeddingTensor, dict]:
    msg_type, meta, body = decode_envelope(data)
    if msg_type != MSG_EMBEDDING_UPLOAD:
        raise LengthMismatch(f"expected embedding upload, got msg_type {msg_type}")
    try:
        shape = (int(meta["shape"][0]), int(meta["shape"][1]))
        tensor = EmbeddingTensor(
            encoder_id=str(meta["encoder_id"]),
            dtype=str(meta["dtype"]),
            shape=shape,
            data=body,
            scale=float(meta.get("scale", 1.0)),
        )
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise LengthMismatch(f"embedding meta invalid: {exc}") from exc
    return tensor, meta


def envelope_size(meta: dict, body_len: int) -> int:
    """Exact encoded size without building the body."""
    return _HEADER.size + len(_canonical_meta(meta)) + _BODY_LEN.size + body_len + _CRC.size
