"""Binary mask representation, file I/O, set algebra, and raw moments.

Masks are immutable 2-D foreground/background rasters with the origin at
the top-left corner, x growing rightward and y downward. All arithmetic
(intersection, union, moments) is exact integer counting; a ratio is
formed by a single floating-point division at the end.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DecodeError, DimensionMismatch, UnsupportedFormat

FORMAT_PNG = "png"
FORMAT_PGM = "pgm"

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"
_PGM_MAGIC = b"P5"

# Single-channel PIL modes we accept when decoding. Anything else (RGB,
# palette, ...) is rejected rather than silently collapsed.
_GRAY_MODES = ("1", "L", "I", "I;16")


class BinaryMask:
    """Fixed-size binary raster. Immutable once constructed."""

    __slots__ = ("_data",)

    def __init__(self, data) -> None:
        arr = np.array(data, dtype=bool, copy=True)
        if arr.ndim != 2:
            raise ValueError(f"mask data must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"mask must be at least 1x1, got shape {arr.shape}")
        arr.setflags(write=False)
        self._data = arr

    @classmethod
    def zeros(cls, width: int, height: int) -> "BinaryMask":
        return cls(np.zeros((height, width), dtype=bool))

    @classmethod
    def full(cls, width: int, height: int) -> "BinaryMask":
        return cls(np.ones((height, width), dtype=bool))

    @classmethod
    def from_pixels(cls, width: int, height: int, pixels) -> "BinaryMask":
        """Build a mask from an iterable of foreground (x, y) coordinates."""
        arr = np.zeros((height, width), dtype=bool)
        for x, y in pixels:
            arr[y, x] = True
        return cls(arr)

    @property
    def data(self) -> np.ndarray:
        """Read-only (height, width) boolean array."""
        return self._data

    @property
    def width(self) -> int:
        return self._data.shape[1]

    @property
    def height(self) -> int:
        return self._data.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        """(width, height)."""
        return self.width, self.height

    @property
    def foreground_count(self) -> int:
        return int(np.count_nonzero(self._data))

    def complement(self) -> "BinaryMask":
        return BinaryMask(~self._data)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return self._data.shape == other._data.shape and bool(
            np.array_equal(self._data, other._data)
        )

    def __hash__(self) -> int:
        return hash((self._data.shape, self._data.tobytes()))

    def __repr__(self) -> str:
        return (
            f"BinaryMask({self.width}x{self.height}, "
            f"foreground={self.foreground_count})"
        )


@dataclass(frozen=True)
class RawMoments:
    """Zeroth and first raw moments of the foreground, as exact integers."""

    m00: int
    m10: int
    m01: int


def raw_moments(mask: BinaryMask) -> RawMoments:
    """Foreground pixel count and coordinate sums.

    m00 = |F|, m10 = sum of x over F, m01 = sum of y over F. An empty
    foreground yields (0, 0, 0).
    """
    ys, xs = np.nonzero(mask.data)
    return RawMoments(m00=int(len(xs)), m10=int(xs.sum()), m01=int(ys.sum()))


def intersection_count(a: BinaryMask, b: BinaryMask) -> int:
    _check_same_shape(a, b)
    return int(np.count_nonzero(a.data & b.data))


def union_count(a: BinaryMask, b: BinaryMask) -> int:
    _check_same_shape(a, b)
    return int(np.count_nonzero(a.data | b.data))


def iou(a: BinaryMask, b: BinaryMask) -> float:
    """Intersection over union of two same-shaped masks, in [0, 1].

    Counts are exact integers; a single division produces the ratio.
    Two all-background masks are identical sets, so their IoU is 1.0.
    """
    _check_same_shape(a, b)
    inter = int(np.count_nonzero(a.data & b.data))
    union = int(np.count_nonzero(a.data | b.data))
    if union == 0:
        return 1.0
    return inter / union


def _check_same_shape(a: BinaryMask, b: BinaryMask) -> None:
    if a.data.shape != b.data.shape:
        raise DimensionMismatch(
            f"mask shapes differ: {a.width}x{a.height} vs {b.width}x{b.height}"
        )


def sniff_format(data: bytes) -> str:
    if data.startswith(_PNG_MAGIC):
        return FORMAT_PNG
    if data.startswith(_PGM_MAGIC):
        return FORMAT_PGM
    raise UnsupportedFormat("bytes are neither PNG nor binary PGM (P5)")


def load_mask(data: bytes, fmt: str | None = None) -> BinaryMask:
    """Decode a single-channel PNG or binary PGM into a mask.

    Pixel value 0 is background; any nonzero value is foreground, so both
    {0, 1} and {0, 255} encodings load identically.
    """
    detected = sniff_format(data)
    if fmt is not None:
        fmt = fmt.lower()
        if fmt not in (FORMAT_PNG, FORMAT_PGM):
            raise UnsupportedFormat(f"unsupported mask format {fmt!r}")
        if fmt != detected:
            raise UnsupportedFormat(f"bytes look like {detected}, not {fmt}")
    try:
        with Image.open(io.BytesIO(data)) as im:
            if im.mode not in _GRAY_MODES:
                raise UnsupportedFormat(
                    f"expected a single-channel raster, got mode {im.mode!r}"
                )
            arr = np.asarray(im)
    except UnsupportedFormat:
        raise
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise DecodeError(f"could not decode {detected} mask bytes: {exc}") from exc
    return BinaryMask(arr != 0)


def save_mask(mask: BinaryMask, fmt: str = FORMAT_PNG) -> bytes:
    """Encode a mask with background 0 and foreground 255.

    The round trip load_mask(save_mask(m)) reproduces m bit-exactly for
    both formats.
    """
    fmt = fmt.lower()
    gray = mask.data.astype(np.uint8) * 255
    if fmt == FORMAT_PNG:
        buf = io.BytesIO()
        Image.fromarray(gray, mode="L").save(buf, format="PNG")
        return buf.getvalue()
    if fmt == FORMAT_PGM:
        header = f"P5\n{mask.width} {mask.height}\n255\n".encode("ascii")
        return header + gray.tobytes()
    raise UnsupportedFormat(f"unsupported mask format {fmt!r}")


def load_mask_file(path) -> BinaryMask:
    with open(path, "rb") as fh:
        return load_mask(fh.read())


def save_mask_file(mask: BinaryMask, path) -> None:
    name = str(path).lower()
    fmt = FORMAT_PGM if name.endswith(".pgm") else FORMAT_PNG
    with open(path, "wb") as fh:
        fh.write(save_mask(mask, fmt))
