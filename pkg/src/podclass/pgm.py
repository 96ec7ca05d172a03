"""Binary PGM (P5) reading and writing.

8-bit single channel only. PGM keeps frame storage bit-exact and parseable
without any imaging dependency.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import DataError, DataFormatError


def _read_token(data: bytes, pos: int) -> tuple[bytes, int]:
    # skip whitespace and '#' comment lines between header fields
    n = len(data)
    while pos < n:
        c = data[pos : pos + 1]
        if c == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not data[pos : pos + 1].isspace():
        pos += 1
    if start == pos:
        raise DataFormatError("unexpected end of PGM header")
    return data[start:pos], pos


def read_pgm(path: str | Path) -> np.ndarray:
    """Read a binary (P5) PGM file into a uint8 array of shape (height, width)."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    try:
        magic, pos = _read_token(data, 0)
        if magic != b"P5":
            raise DataFormatError(f"{path}: not a binary PGM (magic {magic!r})")
        width_tok, pos = _read_token(data, pos)
        height_tok, pos = _read_token(data, pos)
        maxval_tok, pos = _read_token(data, pos)
        width, height, maxval = int(width_tok), int(height_tok), int(maxval_tok)
    except (ValueError, DataFormatError) as exc:
        raise DataFormatError(f"{path}: malformed PGM header ({exc})") from exc
    if not (0 < maxval <= 255):
        raise DataFormatError(f"{path}: unsupported maxval {maxval}, need 8-bit")
    if width <= 0 or height <= 0:
        raise DataFormatError(f"{path}: bad dimensions {width}x{height}")
    pos += 1  # single whitespace byte separates header from raster
    raster = data[pos : pos + width * height]
    if len(raster) != width * height:
        raise DataFormatError(f"{path}: truncated raster, got {len(raster)} bytes")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width).copy()


def write_pgm(path: str | Path, gray: np.ndarray) -> None:
    """Write a uint8 array of shape (height, width) as a binary PGM file."""
    gray = np.asarray(gray)
    if gray.ndim != 2 or gray.dtype != np.uint8:
        raise DataFormatError("write_pgm expects a 2-D uint8 array")
    height, width = gray.shape
    header = f"P5\n{width} {height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + gray.tobytes())


def to_unit(gray: np.ndarray) -> np.ndarray:
    """Rescale stored 8-bit intensities to float64 in [0, 1] (divide by 255)."""
    return np.asarray(gray, dtype=np.float64) / 255.0


def from_unit(image: np.ndarray) -> np.ndarray:
    """Quantize a float image to uint8, clamping to [0, 1] first.

    Clamping happens only here, at export time; in-memory images may hold
    values outside [0, 1] (e.g. after projection).
    """
    clipped = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    return np.rint(clipped * 255.0).astype(np.uint8)
