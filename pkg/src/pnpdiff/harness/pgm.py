"""Binary PGM (P5) grayscale image I/O."""

from __future__ import annotations

from pathlib import Path

import numpy as np

__all__ = ["export_image", "import_image", "MalformedImageError"]


class MalformedImageError(ValueError):
    pass


def export_image(grid, path):
    """Write ``grid`` as a 16-bit P5 PGM (maxval 65535, big-endian samples).

    Values are clamped to [0, 1] and rounded to the nearest level.
    """
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 2:
        raise ValueError(f"expected a 2D grid, got shape {grid.shape}")
    if not np.all(np.isfinite(grid)):
        raise ValueError("cannot export non-finite values")
    q = np.rint(np.clip(grid, 0.0, 1.0) * 65535.0).astype(">u2")
    rows, cols = grid.shape
    header = f"P5\n{cols} {rows}\n65535\n".encode("ascii")
    Path(path).write_bytes(header + q.tobytes())


def _tokens(data):
    """Yield ``(token, end_offset)`` for the four header fields, skipping comments."""
    i, n = 0, len(data)
    found = 0
    while found < 4:
        while i < n and data[i:i + 1].isspace():
            i += 1
        if i < n and data[i:i + 1] == b"#":
            while i < n and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        start = i
        while i < n and not data[i:i + 1].isspace() and data[i:i + 1] != b"#":
            i += 1
        if start == i:
            raise MalformedImageError("truncated PGM header")
        found += 1
        yield data[start:i], i


def import_image(path):
    """Read a P5 PGM with maxval 255 or 65535 into a float grid in [0, 1]."""
    data = Path(path).read_bytes()
    fields = list(_tokens(data))
    magic, width, height, maxval = (f[0] for f in fields)
    if magic != b"P5":
        raise MalformedImageError(f"{path}: unsupported format {magic[:8]!r}, expected P5")
    try:
        cols, rows, maxval = int(width), int(height), int(maxval)
    except ValueError as exc:
        raise MalformedImageError(f"{path}: non-numeric PGM header field") from exc
    if cols < 1 or rows < 1:
        raise MalformedImageError(f"{path}: bad image size {cols}x{rows}")
    if maxval not in (255, 65535):
        raise MalformedImageError(f"{path}: unsupported maxval {maxval}")
    # exactly one whitespace byte separates the header from the raster
    offset = fields[-1][1] + 1
    dtype = np.dtype("u1") if maxval == 255 else np.dtype(">u2")
    expected = rows * cols * dtype.itemsize
    if len(data) - offset != expected:
        raise MalformedImageError(
            f"{path}: raster has {len(data) - offset} bytes, expected {expected}")
    raster = np.frombuffer(data, dtype=dtype, count=rows * cols, offset=offset)
    return raster.reshape(rows, cols).astype(np.float64) / maxval
