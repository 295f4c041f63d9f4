"""Independent implementation of the split-protocol envelope.

Written against contracts/README.md in the evaluation package, not against
its code; the contract fixture tests keep the two codecs interoperable.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

MAGIC = b"ODAL"
VERSION = 1
MSG_EMBEDDING = 1

_HEADER = struct.Struct("<4sBBI")
_BODY_LEN = struct.Struct("<Q")
_CRC = struct.Struct("<I")

DTYPE_WIDTHS = {"f32": 4, "f16": 2, "i8_scaled": 1}


class ProtocolError(ValueError):
    """Any envelope that cannot be decoded safely."""


def _crc_table() -> list[int]:
    table = []
    for i in range(256):
        crc = i
        for _ in range(8):
            crc = (crc >> 1) ^ 0x82F63B78 if crc & 1 else crc >> 1
        table.append(crc)
    return table


_TABLE = _crc_table()


def crc32c(data: bytes, crc: int = 0) -> int:
    # byte-at-a-time CRC-32C (Castagnoli); fine for adapter-sized payloads
    crc ^= 0xFFFFFFFF
    for b in data:
        crc = (crc >> 8) ^ _TABLE[(crc ^ b) & 0xFF]
    return crc ^ 0xFFFFFFFF


@dataclass(frozen=True)
class WireEnvelope:
    msg_type: int
    meta: dict
    body: bytes


def encode(envelope: WireEnvelope) -> bytes:
    meta_bytes = json.dumps(
        envelope.meta, sort_keys=True, separators=(",", ":")
    ).encode("utf-8")
    crc = crc32c(envelope.body, crc32c(meta_bytes))
    return b"".join(
        (
            _HEADER.pack(MAGIC, VERSION, envelope.msg_type, len(meta_bytes)),
            meta_bytes,
            _BODY_LEN.pack(len(envelope.body)),
            envelope.body,
            _CRC.pack(crc),
        )
    )


def decode(data: bytes) -> WireEnvelope:
    if len(data) < _HEADER.size:
        raise ProtocolError(f"envelope truncated at {len(data)} bytes")
    magic, version, msg_type, meta_len = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ProtocolError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ProtocolError(f"unsupported version {version}")
    pos = _HEADER.size
    if len(data) < pos + meta_len + _BODY_LEN.size:
        raise ProtocolError("envelope shorter than declared meta length")
    meta_bytes = data[pos : pos + meta_len]
    pos += meta_len
    (body_len,) = _BODY_LEN.unpack_from(data, pos)
    pos += _BODY_LEN.size
    if len(data) != pos + body_len + _CRC.size:
        raise ProtocolError("envelope length does not match declared sizes")
    body = data[pos : pos + body_len]
    (stored,) = _CRC.unpack_from(data, pos + body_len)
    computed = crc32c(body, crc32c(meta_bytes))
    if stored != computed:
        raise ProtocolError(
            f"crc32c mismatch: stored {stored:#010x}, computed {computed:#010x}"
        )
    try:
        meta = json.loads(meta_bytes.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"meta is not valid JSON: {exc}") from exc
    if not isinstance(meta, dict):
        raise ProtocolError("meta must be a JSON object")
    return WireEnvelope(msg_type=msg_type, meta=meta, body=body)


def embedding_envelope(
    frame_id: str,
    encoder_id: str,
    dtype: str,
    shape: tuple[int, int],
    body: bytes,
    prompt_version: str,
    scale: float = 1.0,
) -> bytes:
    if dtype not in DTYPE_WIDTHS:
        raise ProtocolError(f"unknown dtype {dtype!r}")
    expected = shape[0] * shape[1] * DTYPE_WIDTHS[dtype]
    if len(body) != expected:
        raise ProtocolError(
            f"body is {len(body)} bytes, expected {expected} for {shape} {dtype}"
        )
    meta = {
        "frame_id": frame_id,
        "encoder_id": encoder_id,
        "dtype": dtype,
        "shape": list(shape),
        "prompt_version": prompt_version,
    }
    if dtype == "i8_scaled":
        meta["scale"] = scale
    return encode(WireEnvelope(msg_type=MSG_EMBEDDING, meta=meta, body=body))
