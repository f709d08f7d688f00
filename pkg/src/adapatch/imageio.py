"""Image decoding, grayscale conversion, and bilinear resampling.

All pixel data lives in float32 arrays of shape (height, width, channels)
with intensities in [0, 1] (8-bit sources divided by 255). Supported input
formats are 8-bit PNG (RGB or grayscale; alpha dropped with a warning) and
binary PPM (P6, maxval 255).
"""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage
from PIL import UnidentifiedImageError

from .errors import (
    CorruptDataError,
    InvalidDimensionsError,
    UnsupportedFormatError,
)

_log = logging.getLogger(__name__)

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"

# BT.601 luma weights.
_LUMA = np.array([0.299, 0.587, 0.114], dtype=np.float32)


@dataclass(frozen=True)
class Image:
    """Decoded raster image: float32 (height, width, channels) in [0, 1]."""

    data: np.ndarray

    def __post_init__(self) -> None:
        d = self.data
        if not isinstance(d, np.ndarray) or d.ndim != 3:
            raise InvalidDimensionsError("image data must be a (h, w, c) array")
        h, w, c = d.shape
        if h < 1 or w < 1:
            raise InvalidDimensionsError(f"image dimensions must be >= 1, got {w}x{h}")
        if c not in (1, 3):
            raise InvalidDimensionsError(f"channels must be 1 or 3, got {c}")
        if d.dtype != np.float32:
            raise InvalidDimensionsError(f"image data must be float32, got {d.dtype}")
        if not np.isfinite(d).all():
            raise InvalidDimensionsError("image data contains non-finite values")
        if d.size and (d.min() < 0.0 or d.max() > 1.0):
            raise InvalidDimensionsError("image intensities must lie in [0, 1]")

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @classmethod
    def from_uint8(cls, arr: np.ndarray) -> "Image":
        """Build an Image from 8-bit data of shape (h, w), (h, w, 1) or (h, w, 3)."""
        a = np.asarray(arr, dtype=np.uint8)
        if a.ndim == 2:
            a = a[:, :, None]
        return cls((a.astype(np.float32) / 255.0))


def load_image(path: str | Path) -> Image:
    """Decode a PNG or binary PPM (P6) file.

    Raises FileNotFoundError, UnsupportedFormatError, or CorruptDataError.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(str(path))
    raw = path.read_bytes()
    if raw.startswith(_PNG_MAGIC):
        return _decode_png(raw, path)
    if raw[:2] == b"P6":
        return _decode_ppm(raw, path)
    raise UnsupportedFormatError(f"{path}: not a PNG or binary PPM (P6) file")


def _decode_png(raw: bytes, path: Path) -> Image:
    try:
        with PILImage.open(io.BytesIO(raw)) as im:
            im.load()
            mode = im.mode
            if mode in ("RGBA", "LA"):
                _log.warning("%s: dropping alpha channel", path)
                im = im.convert("RGB" if mode == "RGBA" else "L")
            elif mode == "P":
                im = im.convert("RGB")
            mode = im.mode
            if mode == "L":
                arr = np.asarray(im, dtype=np.uint8)[:, :, None]
            elif mode == "RGB":
                arr = np.asarray(im, dtype=np.uint8)
            else:
                raise UnsupportedFormatError(
                    f"{path}: unsupported PNG mode {mode!r} (8-bit RGB/grayscale only)"
                )
    except UnsupportedFormatError:
        raise
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise CorruptDataError(f"{path}: PNG decode failed: {exc}") from exc
    return Image(arr.astype(np.float32) / 255.0)


def _decode_ppm(raw: bytes, path: Path) -> Image:
    try:
        width, height, maxval, offset = _parse_ppm_header(raw)
    except CorruptDataError:
        raise CorruptDataError(f"{path}: malformed PPM header") from None
    if maxval != 255:
        raise UnsupportedFormatError(f"{path}: PPM maxval {maxval} unsupported (8-bit only)")
    if width < 1 or height < 1:
        raise CorruptDataError(f"{path}: invalid PPM dimensions {width}x{height}")
    n = width * height * 3
    pixels = raw[offset : offset + n]
    if len(pixels) < n:
        raise CorruptDataError(f"{path}: truncated PPM pixel data")
    arr = np.frombuffer(pixels, dtype=np.uint8).reshape(height, width, 3)
    return Image(arr.astype(np.float32) / 255.0)


def _parse_ppm_header(raw: bytes) -> tuple[int, int, int, int]:
    """Return (width, height, maxval, pixel_offset) for a P6 header."""
    pos = 2  # past the "P6" magic
    fields: list[int] = []
    while len(fields) < 3:
        # skip whitespace and comments
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if pos < len(raw) and raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        token = raw[start:pos]
        if not token.isdigit():
            raise CorruptDataError("bad header token")
        fields.append(int(token))
    if pos >= len(raw):
        raise CorruptDataError("header ends before pixel data")
    pos += 1  # exactly one whitespace byte after maxval
    return fields[0], fields[1], fields[2], pos


def to_grayscale(img: Image) -> Image:
    """BT.601 luma conversion; single-channel inputs are returned unchanged."""
    if img.channels == 1:
        return img
    y = img.data @ _LUMA
    np.clip(y, 0.0, 1.0, out=y)
    return Image(y[:, :, None])


def resize_bilinear(img: Image, out_w: int, out_h: int) -> Image:
    """Bilinear resample with half-pixel center alignment.

    Resizing to the input dimensions returns a bit-identical copy; constant
    images stay exactly constant (single-lerp form a + t*(b - a)).
    """
    if out_w < 1 or out_h < 1:
        raise InvalidDimensionsError(f"resize target must be >= 1x1, got {out_w}x{out_h}")
    if out_w == img.width and out_h == img.height:
        return Image(img.data.copy())

    data = img.data
    y0, y1, ty = _sample_coords(img.height, out_h)
    x0, x1, tx = _sample_coords(img.width, out_w)

    top = data[y0]
    rows = top + ty[:, None, None] * (data[y1] - top)
    left = rows[:, x0]
    out = left + tx[None, :, None] * (rows[:, x1] - left)
    np.clip(out, 0.0, 1.0, out=out)
    return Image(np.ascontiguousarray(out, dtype=np.float32))


def _sample_coords(in_size: int, out_size: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    src = (np.arange(out_size, dtype=np.float64) + 0.5) * (in_size / out_size) - 0.5
    lo = np.floor(src)
    t = (src - lo).astype(np.float32)
    lo = lo.astype(np.int64)
    hi = np.clip(lo + 1, 0, in_size - 1)
    lo = np.clip(lo, 0, in_size - 1)
    return lo, hi, t
