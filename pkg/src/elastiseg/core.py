"""Field containers, portable graymap/pixmap I/O and mask metrics.

Scalar fields are plain 2-D float64 arrays of shape (H, W).  Vector fields
are arrays of shape (2, H, W) where index 0 holds the x-component
(horizontal differences) and index 1 the y-component.  Multichannel images
are arrays of shape (m, H, W) and binary masks are boolean (H, W) arrays.
All fields are treated as immutable value objects: functions return fresh
arrays and never mutate their inputs.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "MalformedImageError",
    "load_image",
    "save_field",
    "threshold",
    "dice",
    "clamp_positive",
]

# Floor applied to intensities when a noise model needs log(f) to stay finite.
INTENSITY_FLOOR = 1e-6


class MalformedImageError(ValueError):
    """Raised when a PGM/PPM file cannot be parsed."""


def _read_tokens(data: bytes, count: int, pos: int):
    """Read `count` whitespace-separated ASCII tokens starting at `pos`,
    skipping '#' comments.  Returns (tokens, new_pos)."""
    tokens = []
    n = len(data)
    while len(tokens) < count:
        while pos < n and data[pos : pos + 1].isspace():
            pos += 1
        if pos >= n:
            raise MalformedImageError("unexpected end of header")
        if data[pos : pos + 1] == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    return tokens, pos


def load_image(path) -> np.ndarray:
    """Load a P2/P5 graymap or P3/P6 pixmap as a (m, H, W) float array.

    Values are scaled to [0, 1] by the declared maxval.  Graymaps give one
    channel, pixmaps three.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 2:
        raise MalformedImageError(f"{path}: not a PGM/PPM file")
    magic = data[:2]
    if magic not in (b"P2", b"P3", b"P5", b"P6"):
        raise MalformedImageError(f"{path}: unsupported format {magic!r}")
    channels = 3 if magic in (b"P3", b"P6") else 1
    ascii_pixels = magic in (b"P2", b"P3")

    (w_tok, h_tok, max_tok), pos = _read_tokens(data, 3, 2)
    try:
        width, height, maxval = int(w_tok), int(h_tok), int(max_tok)
    except ValueError as exc:
        raise MalformedImageError(f"{path}: bad header") from exc
    if width <= 0 or height <= 0 or not (0 < maxval < 65536):
        raise MalformedImageError(f"{path}: bad dimensions or maxval")

    count = width * height * channels
    if ascii_pixels:
        try:
            tokens, _ = _read_tokens(data, count, pos)
        except MalformedImageError as exc:
            raise MalformedImageError(f"{path}: truncated pixel data") from exc
        try:
            raw = np.array([int(t) for t in tokens], dtype=np.float64)
        except ValueError as exc:
            raise MalformedImageError(f"{path}: non-numeric pixel") from exc
    else:
        pos += 1  # single whitespace byte after maxval
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        need = count * dtype.itemsize
        payload = data[pos : pos + need]
        if len(payload) < need:
            raise MalformedImageError(f"{path}: truncated pixel data")
        raw = np.frombuffer(payload, dtype=dtype).astype(np.float64)

    if raw.min() < 0 or raw.max() > maxval:
        raise MalformedImageError(f"{path}: pixel value outside [0, maxval]")
    img = raw.reshape(height, width, channels) / maxval
    return np.ascontiguousarray(np.moveaxis(img, 2, 0))


def save_field(field: np.ndarray, path) -> None:
    """Write a scalar field in [0, 1] as an 8-bit P5 graymap (v -> round(255 v))."""
    field = np.asarray(field, dtype=np.float64)
    if field.ndim != 2:
        raise ValueError("save_field expects a 2-D field")
    if field.min() < 0.0 or field.max() > 1.0:
        raise ValueError("field values must lie in [0, 1]")
    height, width = field.shape
    payload = np.rint(field * 255.0).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(payload.tobytes())


def threshold(phi: np.ndarray, eta: float) -> np.ndarray:
    """Binarize a relaxed label field: 1 where phi >= eta."""
    if not 0.0 < eta < 1.0:
        raise ValueError("eta must lie in (0, 1)")
    return np.asarray(phi) >= eta


def dice(a: np.ndarray, b: np.ndarray) -> float:
    """Dice overlap 2|a&b| / (|a|+|b|); 1.0 when both masks are empty."""
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise ValueError(f"mask shapes differ: {a.shape} vs {b.shape}")
    total = int(a.sum()) + int(b.sum())
    if total == 0:
        return 1.0
    return 2.0 * int((a & b).sum()) / total


def clamp_positive(f: np.ndarray, floor: float = INTENSITY_FLOOR) -> np.ndarray:
    """Clamp intensities to [floor, 1] so log-based potentials stay finite."""
    return np.clip(f, floor, 1.0)
