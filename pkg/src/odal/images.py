"""Raw RGB image buffers and binary PPM (P6) input/output.

PPM keeps the core pipeline free of image codec dependencies; other capture
formats are expected to be transcoded before they reach this package.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import OdalError


@dataclass(frozen=True)
class RgbImage:
    width: int
    height: int
    pixels: bytes  # row-major RGB8, len == width * height * 3

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise OdalError(f"bad image size {self.width}x{self.height}")
        if len(self.pixels) != self.width * self.height * 3:
            raise OdalError(
                f"pixel buffer is {len(self.pixels)} bytes, "
                f"expected {self.width * self.height * 3}"
            )

    def to_array(self) -> np.ndarray:
        """View as (height, width, 3) uint8; copy before mutating."""
        return np.frombuffer(self.pixels, dtype=np.uint8).reshape(
            self.height, self.width, 3
        )


def image_from_array(arr: np.ndarray) -> RgbImage:
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.dtype != np.uint8:
        raise OdalError(f"expected (h, w, 3) uint8 array, got {arr.shape} {arr.dtype}")
    h, w = arr.shape[:2]
    return RgbImage(width=w, height=h, pixels=arr.tobytes())


def write_ppm(path: str | Path, image: RgbImage) -> None:
    header = f"P6\n{image.width} {image.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + image.pixels)


def read_ppm(path: str | Path) -> RgbImage:
    data = Path(path).read_bytes()
    return decode_ppm(data, source=str(path))


def decode_ppm(data: bytes, source: str = "<bytes>") -> RgbImage:
    """Decode binary PPM.  Comments and flexible whitespace are tolerated."""
    if not data.startswith(b"P6"):
        raise OdalError(f"{source}: not a binary PPM (P6)")
    fields: list[int] = []
    pos = 2
    while len(fields) < 3:
        if pos >= len(data):
            raise OdalError(f"{source}: truncated PPM header")
        ch = data[pos : pos + 1]
        if ch.isspace():
            pos += 1
        elif ch == b"#":
            pos = data.index(b"\n", pos) + 1
        elif ch.isdigit():
            end = pos
            while end < len(data) and data[end : end + 1].isdigit():
                end += 1
            fields.append(int(data[pos:end]))
            pos = end
        else:
            raise OdalError(f"{source}: bad PPM header byte {ch!r}")
    width, height, maxval = fields
    if maxval != 255:
        raise OdalError(f"{source}: only maxval 255 supported, got {maxval}")
    pos += 1  # single whitespace separates header from raster
    raster = data[pos : pos + width * height * 3]
    if len(raster) != width * height * 3:
        raise OdalError(f"{source}: raster truncated")
    return RgbImage(width=width, height=height, pixels=raster)
