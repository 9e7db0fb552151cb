"""Pixel raster carrier type and image file I/O.

Every pipeline stage consumes and produces :class:`RasterImage` values.  The
pixel buffer is a locked (read-only) numpy array, so images behave as values:
they can be shared between threads and reused across stages without defensive
copies.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import FormatMismatch, InvalidInput


class PixelFormat(Enum):
    RGB8 = "rgb8"
    HSVF = "hsvf"
    GRAY8 = "gray8"
    BINARY = "binary"


_CHANNELS = {
    PixelFormat.RGB8: 3,
    PixelFormat.HSVF: 3,
    PixelFormat.GRAY8: 1,
    PixelFormat.BINARY: 1,
}


@dataclass(frozen=True, eq=False)
class RasterImage:
    """A width x height pixel raster in one of four formats.

    ``pixels`` is shaped ``(h, w)`` for single-channel formats and
    ``(h, w, 3)`` otherwise.  Byte formats use uint8; HSVF uses float64 with
    H in [0, 1), S and V in [0, 1].  Binary samples are exactly 0 or 1.
    """

    pixels: np.ndarray
    format: PixelFormat

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        channels = _CHANNELS[self.format]
        if channels == 1:
            if arr.ndim != 2:
                raise InvalidInput(f"{self.format.value} image must be 2-D, got shape {arr.shape}")
        else:
            if arr.ndim != 3 or arr.shape[2] != 3:
                raise InvalidInput(f"{self.format.value} image must be (h, w, 3), got shape {arr.shape}")
        if self.format is PixelFormat.HSVF:
            arr = arr.astype(np.float64, copy=True)
            if arr.size:
                h, s, v = arr[..., 0], arr[..., 1], arr[..., 2]
                if h.min(initial=0.0) < 0.0 or h.max(initial=0.0) >= 1.0:
                    raise InvalidInput("HSVf hue must lie in [0, 1)")
                if s.min(initial=0.0) < 0.0 or max(s.max(initial=0.0), v.max(initial=0.0)) > 1.0 or v.min(initial=0.0) < 0.0:
                    raise InvalidInput("HSVf saturation/value must lie in [0, 1]")
        else:
            arr = arr.astype(np.uint8, copy=True)
            if self.format is PixelFormat.BINARY and arr.size and arr.max() > 1:
                raise InvalidInput("binary image samples must be 0 or 1")
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def channels(self) -> int:
        return _CHANNELS[self.format]

    @property
    def data(self) -> np.ndarray:
        """Flat row-major, channel-interleaved view of the buffer."""
        return self.pixels.reshape(-1)

    def is_empty(self) -> bool:
        return self.width == 0 or self.height == 0

    def require(self, *formats: PixelFormat) -> None:
        if self.format not in formats:
            wanted = "|".join(f.value for f in formats)
            raise FormatMismatch(f"expected {wanted} image, got {self.format.value}")


def rgb8(pixels: np.ndarray) -> RasterImage:
    return RasterImage(pixels, PixelFormat.RGB8)


def gray8(pixels: np.ndarray) -> RasterImage:
    return RasterImage(pixels, PixelFormat.GRAY8)


def hsvf(pixels: np.ndarray) -> RasterImage:
    return RasterImage(pixels, PixelFormat.HSVF)


def binary(pixels: np.ndarray) -> RasterImage:
    return RasterImage(np.asarray(pixels).astype(np.uint8), PixelFormat.BINARY)


def read_image(path: str | Path) -> RasterImage:
    """Read a PNG, BMP or binary PPM (P6) file.

    Grayscale files load as GRAY8; anything with color (including palette
    images) loads as RGB8, alpha dropped.
    """
    with Image.open(path) as im:
        if im.mode == "L":
            return gray8(np.asarray(im))
        return rgb8(np.asarray(im.convert("RGB")))


def write_png(img: RasterImage, path: str | Path) -> None:
    """Write any raster as a PNG file.

    Binary masks are scaled to 0/255 for visibility; HSVf images are
    converted back to RGB bytes first.
    """
    if img.format is PixelFormat.BINARY:
        arr = img.pixels * np.uint8(255)
        mode = "L"
    elif img.format is PixelFormat.HSVF:
        from .imaging import hsv_to_rgb  # local import avoids a cycle

        arr = hsv_to_rgb(img).pixels
        mode = "RGB"
    elif img.format is PixelFormat.GRAY8:
        arr, mode = img.pixels, "L"
    else:
        arr, mode = img.pixels, "RGB"
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.asarray(arr), mode=mode).save(path, format="PNG")
