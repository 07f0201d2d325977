"""Binary PGM (P5) and PPM (P6) images, 8 bits per sample."""
from __future__ import annotations

from pathlib import Path

import numpy as np


def _to_bytes(values: np.ndarray) -> np.ndarray:
    return np.round(255.0 * np.clip(values, 0.0, 1.0)).astype(np.uint8)


def write_pgm(path, values) -> None:
    v = np.asarray(values, dtype=np.float64)
    h, w = v.shape
    Path(path).write_bytes(b"P5\n%d %d\n255\n" % (w, h) + _to_bytes(v).tobytes())


def write_ppm(path, rgb) -> None:
    v = np.asarray(rgb, dtype=np.float64)
    h, w, _ = v.shape
    Path(path).write_bytes(b"P6\n%d %d\n255\n" % (w, h) + _to_bytes(v).tobytes())


def _tokens(data: bytes, count: int):
    """First ``count`` header tokens and the offset just past the single whitespace after them."""
    out, pos = [], 0
    while len(out) < count:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        end = pos
        while end < len(data) and not data[end:end + 1].isspace():
            end += 1
        out.append(data[pos:end])
        pos = end
    return out, pos + 1


def read_netpbm(path) -> np.ndarray:
    """Values in [0, 1]; (h, w) for P5 and (h, w, 3) for P6."""
    data = Path(path).read_bytes()
    (magic, w, h, maxval), pos = _tokens(data, 4)
    w, h, maxval = int(w), int(h), int(maxval)
    if maxval != 255:
        raise ValueError(f"{path}: only 8-bit images are supported")
    channels = {b"P5": 1, b"P6": 3}.get(magic)
    if channels is None:
        raise ValueError(f"{path}: unsupported format {magic!r}")
    n = w * h * channels
    body = np.frombuffer(data, dtype=np.uint8, count=n, offset=pos)
    shape = (h, w) if channels == 1 else (h, w, 3)
    return body.reshape(shape).astype(np.float64) / 255.0
