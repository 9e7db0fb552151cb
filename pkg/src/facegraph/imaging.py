"""Contrast enhancement and color-space conversion.

All functions are pure: they take immutable rasters and return new ones.
Float-to-byte conversions round half away from zero everywhere so results
are bit-exact across platforms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfig, InvalidInput
from .raster import PixelFormat, RasterImage, gray8, hsvf, rgb8

DEFAULT_VARIANCE_CUTOFF = 400.0  # gray-levels^2
DEFAULT_LO_PERCENTILE = 2.0
DEFAULT_HI_PERCENTILE = 98.0

# Rec. 601 luma weights
_LUMA = np.array([0.299, 0.587, 0.114])


def round_half_away(x: np.ndarray | float) -> np.ndarray:
    """Round half away from zero (numpy rounds half to even)."""
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def _to_u8(x: np.ndarray) -> np.ndarray:
    return np.clip(round_half_away(x), 0, 255).astype(np.uint8)


@dataclass(frozen=True)
class ContrastParams:
    """Piecewise-linear transfer curve plus the variance gate that enables it.

    ``breakpoints`` maps input gray levels to output levels; input levels must
    be strictly increasing, starting at 0 and ending at 255.  When ``None``,
    :func:`normalize_illumination` derives a full-range stretch between the
    2nd and 98th percentile of the image's luminance.
    """

    breakpoints: tuple[tuple[float, float], ...] | None = None
    variance_cutoff: float = DEFAULT_VARIANCE_CUTOFF
    lo_percentile: float = DEFAULT_LO_PERCENTILE
    hi_percentile: float = DEFAULT_HI_PERCENTILE


def _validated_breakpoints(breakpoints) -> tuple[np.ndarray, np.ndarray]:
    if breakpoints is None or len(breakpoints) < 2:
        raise InvalidConfig("need at least two contrast breakpoints")
    xs = np.array([float(p[0]) for p in breakpoints])
    ys = np.array([float(p[1]) for p in breakpoints])
    if np.any(np.diff(xs) <= 0):
        raise InvalidConfig("breakpoint input levels must be strictly increasing")
    if xs[0] != 0.0 or xs[-1] != 255.0:
        raise InvalidConfig("breakpoints must start at input 0 and end at input 255")
    if ys.min() < 0.0 or ys.max() > 255.0:
        raise InvalidConfig("breakpoint output levels must lie in [0, 255]")
    return xs, ys


def stretch_contrast(img: RasterImage, params: ContrastParams) -> RasterImage:
    """Map every sample of a byte image through the piecewise-linear curve."""
    img.require(PixelFormat.RGB8, PixelFormat.GRAY8)
    xs, ys = _validated_breakpoints(params.breakpoints)
    mapped = np.interp(img.pixels.astype(np.float64), xs, ys)
    return RasterImage(_to_u8(mapped), img.format)


def to_grayscale(img: RasterImage) -> RasterImage:
    """Project to Rec. 601 luminance, Y = 0.299 R + 0.587 G + 0.114 B."""
    if img.format is PixelFormat.GRAY8:
        return img
    img.require(PixelFormat.RGB8, PixelFormat.HSVF)
    if img.format is PixelFormat.HSVF:
        rgb = hsv_to_rgb(img).pixels
    else:
        rgb = img.pixels
    y = rgb.astype(np.float64) @ _LUMA
    return gray8(_to_u8(y))


def luminance_variance(img: RasterImage) -> float:
    """Population variance of the Gray8 projection, in gray-levels squared."""
    gray = to_grayscale(img) if img.format is not PixelFormat.GRAY8 else img
    return float(np.var(gray.pixels.astype(np.float64)))


def percentile_breakpoints(
    img: RasterImage, lo: float = DEFAULT_LO_PERCENTILE, hi: float = DEFAULT_HI_PERCENTILE
) -> tuple[tuple[float, float], ...]:
    """Full-range stretch curve anchored at the lo/hi luminance percentiles.

    Degenerates to the identity curve when the percentiles coincide (e.g. on a
    constant image), which makes constant images fixed points of
    :func:`normalize_illumination`.
    """
    gray = to_grayscale(img)
    p_lo, p_hi = np.percentile(gray.pixels.astype(np.float64), [lo, hi])
    if p_hi <= p_lo:
        return ((0.0, 0.0), (255.0, 255.0))
    pts: list[tuple[float, float]] = [(0.0, 0.0)]
    if p_lo > 0.0:
        pts.append((float(p_lo), 0.0))
    if p_hi < 255.0:
        pts.append((float(p_hi), 255.0))
    pts.append((255.0, 255.0))
    return tuple(pts)


def normalize_illumination(img: RasterImage, params: ContrastParams | None = None) -> RasterImage:
    """Stretch contrast only when the image is flat.

    The luminance variance is compared against ``params.variance_cutoff``; a
    well-lit image (variance at or above the cutoff) is returned unchanged.
    """
    if img.is_empty():
        raise InvalidInput("cannot normalize an empty image")
    img.require(PixelFormat.RGB8, PixelFormat.GRAY8)
    params = params or ContrastParams()
    if luminance_variance(img) >= params.variance_cutoff:
        return img
    breakpoints = params.breakpoints
    if breakpoints is None:
        breakpoints = percentile_breakpoints(img, params.lo_percentile, params.hi_percentile)
        params = ContrastParams(breakpoints, params.variance_cutoff)
    return stretch_contrast(img, params)


def stretch_full_range(img: RasterImage) -> RasterImage:
    """Linearly stretch a Gray8 image so its samples span [0, 255].

    Constant images are returned unchanged (there is no range to stretch).
    """
    img.require(PixelFormat.GRAY8)
    arr = img.pixels.astype(np.float64)
    lo, hi = float(arr.min()), float(arr.max())
    if hi <= lo:
        return img
    return gray8(_to_u8((arr - lo) * (255.0 / (hi - lo))))


def rgb_to_hsv(img: RasterImage) -> RasterImage:
    """Hexcone RGB -> HSV with hue normalized to [0, 1)."""
    img.require(PixelFormat.RGB8)
    rgb = img.pixels.astype(np.float64) / 255.0
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    v = rgb.max(axis=-1)
    delta = v - rgb.min(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(v > 0.0, delta / np.where(v > 0.0, v, 1.0), 0.0)
        hr = np.mod((g - b) / delta, 6.0)
        hg = (b - r) / delta + 2.0
        hb = (r - g) / delta + 4.0
    h6 = np.select([delta == 0.0, v == r, v == g], [np.zeros_like(v), hr, hg], default=hb)
    h = h6 / 6.0
    # guard against h == 1.0 from float residue in the mod
    h = np.where(h >= 1.0, 0.0, h)
    return hsvf(np.stack([h, s, v], axis=-1))


def hsv_to_rgb(img: RasterImage) -> RasterImage:
    """Inverse hexcone conversion back to RGB bytes."""
    img.require(PixelFormat.HSVF)
    h, s, v = img.pixels[..., 0], img.pixels[..., 1], img.pixels[..., 2]
    h6 = h * 6.0
    i = np.floor(h6).astype(np.int64) % 6
    f = h6 - np.floor(h6)
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    r = np.choose(i, [v, q, p, p, t, v])
    g = np.choose(i, [t, v, v, q, p, p])
    b = np.choose(i, [p, p, t, v, v, q])
    return rgb8(_to_u8(np.stack([r, g, b], axis=-1) * 255.0))
