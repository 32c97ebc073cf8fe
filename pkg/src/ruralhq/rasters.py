"""Raster file IO.

Two formats are supported: binary PPM (P6), which round-trips without any
imaging dependency and is what the synthetic generator writes, and PNG via
Pillow for real photographs. Every decode yields an 8-bit RGB array of
shape (height, width, 3).
"""

from __future__ import annotations

import io
import os

import numpy as np

from .errors import UnreadableRaster


def read_raster(path: str | os.PathLike) -> np.ndarray:
    """Decode ``path`` into a uint8 RGB array, raising UnreadableRaster on failure."""
    path = os.fspath(path)
    try:
        with open(path, "rb") as fh:
            head = fh.read(2)
            fh.seek(0)
            data = fh.read()
    except OSError as exc:
        raise UnreadableRaster(f"cannot open raster {path!r}: {exc}") from exc
    if head == b"P6":
        return _decode_ppm(data, path)
    return _decode_with_pillow(data, path)


def _decode_with_pillow(data: bytes, path: str) -> np.ndarray:
    try:
        from PIL import Image

        with Image.open(io.BytesIO(data)) as img:
            rgb = img.convert("RGB")
            return np.asarray(rgb, dtype=np.uint8)
    except Exception as exc:
        raise UnreadableRaster(f"cannot decode raster {path!r}: {exc}") from exc


def _decode_ppm(data: bytes, path: str) -> np.ndarray:
    try:
        fields: list[bytes] = []
        pos = 0
        # Header is magic, width, height, maxval separated by whitespace;
        # '#' starts a comment running to end of line.
        while len(fields) < 4:
            while pos < len(data) and data[pos : pos + 1].isspace():
                pos += 1
            if data[pos : pos + 1] == b"#":
                while pos < len(data) and data[pos] != 0x0A:
                    pos += 1
                continue
            start = pos
            while pos < len(data) and not data[pos : pos + 1].isspace():
                pos += 1
            fields.append(data[start:pos])
        pos += 1  # single whitespace byte after maxval
        magic, w, h, maxval = fields[0], int(fields[1]), int(fields[2]), int(fields[3])
        if magic != b"P6" or w <= 0 or h <= 0 or not 0 < maxval < 65536:
            raise ValueError("bad PPM header")
        n = w * h * 3
        if maxval < 256:
            raw = np.frombuffer(data, dtype=np.uint8, count=n, offset=pos)
        else:
            raw = np.frombuffer(data, dtype=">u2", count=n, offset=pos)
        pixels = raw.reshape(h, w, 3).astype(np.float64)
        if maxval != 255:
            pixels = pixels * (255.0 / maxval)
        return np.round(pixels).astype(np.uint8)
    except (ValueError, IndexError) as exc:
        raise UnreadableRaster(f"cannot decode PPM raster {path!r}: {exc}") from exc


def write_ppm(path: str | os.PathLike, pixels: np.ndarray) -> None:
    """Write a uint8 RGB array as binary PPM."""
    pixels = np.ascontiguousarray(pixels, dtype=np.uint8)
    if pixels.ndim != 3 or pixels.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) uint8 array, got shape {pixels.shape}")
    h, w, _ = pixels.shape
    with open(path, "wb") as fh:
        fh.write(b"P6\n%d %d\n255\n" % (w, h))
        fh.write(pixels.tobytes())


def png_bytes(pixels: np.ndarray) -> bytes:
    """Encode a uint8 RGB array as PNG (used by the HTTP image endpoint)."""
    from PIL import Image

    buf = io.BytesIO()
    Image.fromarray(np.ascontiguousarray(pixels, dtype=np.uint8), mode="RGB").save(buf, format="PNG")
    return buf.getvalue()
