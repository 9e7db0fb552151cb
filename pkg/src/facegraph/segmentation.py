"""Skin-chroma modeling, binary morphology and face-like region classification.

The skin model is a pair of hue/saturation histograms whose peak bins define
a Gaussian-style acceptance band.  Masks produced from it are cleaned with
square-window morphology, labeled, and classified per region: a facial region
re-binarized on intensity exposes at least two holes (the eyes), i.e. an
Euler number below zero.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import AlignmentError, InvalidConfig, InvalidInput, OutOfBounds
from .raster import PixelFormat, RasterImage, binary

DEFAULT_BIN_COUNT = 64
DEFAULT_DEV_FACTOR = 0.5   # deviation = factor * histogram-peak mean
DEFAULT_BAND = 2.0         # acceptance band = mean +/- band * deviation
SMALL_WINDOW = 3
LARGE_WINDOW = 17
DEFAULT_R_CRIT = 4.0       # mean/stddev ratio above which the mean rule applies
DEFAULT_F_MEAN = 0.6       # threshold = f_mean * mean under the ratio rule

_FOUR_CONN = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=np.uint8)
_EIGHT_CONN = np.ones((3, 3), dtype=np.uint8)


# ---------------------------------------------------------------------------
# skin model

@dataclass(frozen=True)
class SkinModel:
    """H/S histograms with their fitted peak means and deviations."""

    bin_count: int
    hue_hist: np.ndarray
    sat_hist: np.ndarray
    hue_mean: float
    sat_mean: float
    hue_dev: float
    sat_dev: float

    def to_json(self) -> str:
        doc = {
            "version": 1,
            "bin_count": self.bin_count,
            "hue_hist": [float(x) for x in self.hue_hist],
            "sat_hist": [float(x) for x in self.sat_hist],
            "hue_mean": self.hue_mean,
            "sat_mean": self.sat_mean,
            "hue_dev": self.hue_dev,
            "sat_dev": self.sat_dev,
        }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"

    @staticmethod
    def from_json(text: str) -> "SkinModel":
        doc = json.loads(text)
        return SkinModel(
            bin_count=int(doc["bin_count"]),
            hue_hist=np.asarray(doc["hue_hist"], dtype=np.float64),
            sat_hist=np.asarray(doc["sat_hist"], dtype=np.float64),
            hue_mean=float(doc["hue_mean"]),
            sat_mean=float(doc["sat_mean"]),
            hue_dev=float(doc["hue_dev"]),
            sat_dev=float(doc["sat_dev"]),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @staticmethod
    def load(path: str | Path) -> "SkinModel":
        return SkinModel.from_json(Path(path).read_text(encoding="utf-8"))


def _channel_hist(values: np.ndarray, bins: int) -> np.ndarray:
    idx = np.minimum((values * bins).astype(np.int64), bins - 1)
    counts = np.bincount(idx, minlength=bins).astype(np.float64)
    return counts / counts.sum()


def build_skin_model(
    training: list[RasterImage],
    masks: list[RasterImage] | None = None,
    bin_count: int = DEFAULT_BIN_COUNT,
    dev_factor: float = DEFAULT_DEV_FACTOR,
) -> SkinModel:
    """Accumulate per-image H and S histograms and average them.

    Each image contributes one normalized histogram per channel; masks, when
    given, restrict which pixels are counted.  The model mean is the center of
    the peak bin (ties resolved to the lower bin) and the deviation is
    ``dev_factor`` times that mean.
    """
    if not training:
        raise InvalidInput("need at least one training image")
    if masks is not None and len(masks) != len(training):
        raise AlignmentError(f"{len(training)} images but {len(masks)} masks")
    hue_acc = np.zeros(bin_count)
    sat_acc = np.zeros(bin_count)
    for i, img in enumerate(training):
        img.require(PixelFormat.HSVF)
        h = img.pixels[..., 0]
        s = img.pixels[..., 1]
        if masks is not None:
            mask = masks[i]
            mask.require(PixelFormat.BINARY)
            if mask.pixels.shape != h.shape:
                raise AlignmentError(f"mask {i} is {mask.pixels.shape}, image is {h.shape}")
            keep = mask.pixels.astype(bool)
            h, s = h[keep], s[keep]
        else:
            h, s = h.reshape(-1), s.reshape(-1)
        if h.size == 0:
            raise InvalidInput(f"training image {i} contributes no pixels")
        hue_acc += _channel_hist(h, bin_count)
        sat_acc += _channel_hist(s, bin_count)
    hue_hist = hue_acc / hue_acc.sum()
    sat_hist = sat_acc / sat_acc.sum()
    hue_mean = (int(np.argmax(hue_hist)) + 0.5) / bin_count
    sat_mean = (int(np.argmax(sat_hist)) + 0.5) / bin_count
    return SkinModel(
        bin_count=bin_count,
        hue_hist=hue_hist,
        sat_hist=sat_hist,
        hue_mean=hue_mean,
        sat_mean=sat_mean,
        hue_dev=dev_factor * hue_mean,
        sat_dev=dev_factor * sat_mean,
    )


def classify_skin(img: RasterImage, model: SkinModel, band: float = DEFAULT_BAND) -> RasterImage:
    """Threshold an HSVf image into a skin mask.

    A pixel is skin iff its hue lies within ``band * hue_dev`` of the model
    hue mean (distance taken on the hue circle) and its saturation within
    ``band * sat_dev`` of the saturation mean.  Value is ignored.
    """
    img.require(PixelFormat.HSVF)
    h = img.pixels[..., 0]
    s = img.pixels[..., 1]
    dh = np.abs(h - model.hue_mean)
    dh = np.minimum(dh, 1.0 - dh)
    keep = (dh <= band * model.hue_dev) & (np.abs(s - model.sat_mean) <= band * model.sat_dev)
    return binary(keep.astype(np.uint8))


# ---------------------------------------------------------------------------
# morphology

@dataclass(frozen=True)
class StructuringWindow:
    """All-ones square structuring element with odd side length."""

    side: int = SMALL_WINDOW

    def __post_init__(self):
        if self.side < 3 or self.side % 2 == 0:
            raise InvalidConfig(f"structuring window side must be odd and >= 3, got {self.side}")


def _window(w: StructuringWindow | int) -> StructuringWindow:
    return w if isinstance(w, StructuringWindow) else StructuringWindow(w)


def _check_fit(mask: RasterImage, side: int) -> None:
    if side > mask.height or side > mask.width:
        raise InvalidConfig(f"{side}x{side} window does not fit a {mask.width}x{mask.height} mask")


def _separable(arr: np.ndarray, side: int, reduce_fn) -> np.ndarray:
    """Apply a square min/max filter with zero padding outside the image."""
    r = side // 2
    padded = np.pad(arr, r, mode="constant", constant_values=0)
    cols = reduce_fn(np.lib.stride_tricks.sliding_window_view(padded, side, axis=1), axis=-1)
    return reduce_fn(np.lib.stride_tricks.sliding_window_view(cols, side, axis=0), axis=-1)


def erode(mask: RasterImage, w: StructuringWindow | int) -> RasterImage:
    """Binary erosion; neighborhoods beyond the border count as background."""
    mask.require(PixelFormat.BINARY)
    w = _window(w)
    _check_fit(mask, w.side)
    return binary(_separable(mask.pixels, w.side, np.min))


def dilate(mask: RasterImage, w: StructuringWindow | int) -> RasterImage:
    """Binary dilation with the same square window."""
    mask.require(PixelFormat.BINARY)
    w = _window(w)
    _check_fit(mask, w.side)
    return binary(_separable(mask.pixels, w.side, np.max))


def open_mask(mask: RasterImage, w: StructuringWindow | int) -> RasterImage:
    """Opening: erosion followed by dilation; removes sub-window features."""
    return dilate(erode(mask, w), w)


def fill_holes(mask: RasterImage) -> RasterImage:
    """Set background components not 4-connected to the border to foreground."""
    mask.require(PixelFormat.BINARY)
    fg = mask.pixels.astype(bool)
    labels, n = ndimage.label(~fg, structure=_FOUR_CONN)
    if n == 0:
        return mask
    border = np.zeros(n + 1, dtype=bool)
    for edge in (labels[0, :], labels[-1, :], labels[:, 0], labels[:, -1]):
        border[np.unique(edge)] = True
    border[0] = True
    return binary((fg | ~border[labels]).astype(np.uint8))


def cleanup(
    mask: RasterImage,
    small: int = SMALL_WINDOW,
    large: int = LARGE_WINDOW,
) -> RasterImage:
    """Noise removal sequence: small opening, hole filling, large opening."""
    return open_mask(fill_holes(open_mask(mask, small)), large)


# ---------------------------------------------------------------------------
# regions and Euler numbers

def euler_number(mask: RasterImage | np.ndarray) -> int:
    """Euler number (components minus holes) via 2x2 quad counting.

    Foreground is 8-connected and holes 4-connected, so e = C - H.  Works on
    any mask; for a single region this is 1 minus its hole count.
    """
    arr = mask.pixels if isinstance(mask, RasterImage) else np.asarray(mask)
    m = np.pad(arr.astype(np.int64), 1)
    a, b = m[:-1, :-1], m[:-1, 1:]
    c, d = m[1:, :-1], m[1:, 1:]
    s = a + b + c + d
    n1 = int(np.count_nonzero(s == 1))
    n3 = int(np.count_nonzero(s == 3))
    diag = ((a == 1) & (d == 1) & (b == 0) & (c == 0)) | ((b == 1) & (c == 1) & (a == 0) & (d == 0))
    nd = int(np.count_nonzero(diag))
    return (n1 - n3 - 2 * nd) // 4


@dataclass(frozen=True, eq=False)
class Region:
    """One 8-connected foreground component of a mask.

    ``bbox`` is (x0, y0, x1, y1) with exclusive upper bounds; ``mask`` is the
    component cropped to that box.
    """

    label: int
    bbox: tuple[int, int, int, int]
    area: int
    euler: int
    holes: int
    mask: np.ndarray = field(repr=False)

    @property
    def pixels(self) -> set[tuple[int, int]]:
        ys, xs = np.nonzero(self.mask)
        x0, y0 = self.bbox[0], self.bbox[1]
        return {(int(x) + x0, int(y) + y0) for x, y in zip(xs, ys)}

    def full_mask(self, height: int, width: int) -> RasterImage:
        out = np.zeros((height, width), dtype=np.uint8)
        x0, y0, x1, y1 = self.bbox
        out[y0:y1, x0:x1] = self.mask
        return binary(out)


def connected_components(mask: RasterImage) -> list[Region]:
    """Label 8-connected foreground components, largest area first."""
    mask.require(PixelFormat.BINARY)
    labels, n = ndimage.label(mask.pixels, structure=_EIGHT_CONN)
    regions: list[Region] = []
    for lbl, slc in enumerate(ndimage.find_objects(labels), start=1):
        if slc is None:
            continue
        sub = (labels[slc] == lbl).astype(np.uint8)
        e = euler_number(sub)
        regions.append(
            Region(
                label=lbl,
                bbox=(slc[1].start, slc[0].start, slc[1].stop, slc[0].stop),
                area=int(sub.sum()),
                euler=e,
                holes=1 - e,
                mask=sub,
            )
        )
    regions.sort(key=lambda r: (-r.area, r.label))
    return regions


# ---------------------------------------------------------------------------
# adaptive re-binarization and face classification

def otsu_threshold(values: np.ndarray) -> int:
    """Exhaustive Otsu threshold over byte values; classes are < t and >= t.

    Returns the smallest t maximizing the between-class variance.
    """
    hist = np.bincount(np.asarray(values, dtype=np.int64).reshape(-1), minlength=256).astype(np.float64)
    total = hist.sum()
    cum_n = np.cumsum(hist)
    cum_v = np.cumsum(hist * np.arange(256))
    best_t, best_score = 1, -1.0
    for t in range(1, 256):
        w0 = cum_n[t - 1]
        w1 = total - w0
        if w0 == 0.0 or w1 == 0.0:
            continue
        mu0 = cum_v[t - 1] / w0
        mu1 = (cum_v[255] - cum_v[t - 1]) / w1
        score = w0 * w1 * (mu0 - mu1) ** 2
        if score > best_score:
            best_t, best_score = t, score
    return best_t


def adaptive_region_threshold(
    gray: RasterImage,
    region: Region,
    r_crit: float = DEFAULT_R_CRIT,
    f_mean: float = DEFAULT_F_MEAN,
) -> RasterImage:
    """Re-binarize one region of a grayscale image on intensity.

    Bright regions with low spread (mean/stddev above ``r_crit``) use the
    fixed fraction ``f_mean`` of the mean as threshold, which keeps darker
    faces from splintering; otherwise Otsu over the region's pixels decides.
    Output is 1 where the region's pixel is at or above the threshold.
    """
    gray.require(PixelFormat.GRAY8)
    x0, y0, x1, y1 = region.bbox
    if x0 < 0 or y0 < 0 or x1 > gray.width or y1 > gray.height:
        raise OutOfBounds(f"region bbox {region.bbox} exceeds {gray.width}x{gray.height} image")
    crop = gray.pixels[y0:y1, x0:x1]
    inside = region.mask.astype(bool)
    values = crop[inside]
    if values.size == 0:
        raise InvalidInput("region has zero area")
    mean = float(values.mean())
    std = float(values.std())
    if std == 0.0 or mean / std > r_crit:
        threshold = f_mean * mean
    else:
        threshold = float(otsu_threshold(values))
    out = np.zeros((gray.height, gray.width), dtype=np.uint8)
    out[y0:y1, x0:x1] = (inside & (crop >= threshold)).astype(np.uint8)
    return binary(out)


def filter_face_regions(
    regions: list[Region],
    gray: RasterImage,
    r_crit: float = DEFAULT_R_CRIT,
    f_mean: float = DEFAULT_F_MEAN,
) -> list[Region]:
    """Keep regions whose re-binarization has at least two holes (e < 0).

    The eyes of a face do not match skin intensity, so a genuine facial
    region exposes two or more holes after thresholding.
    """
    kept = []
    for region in regions:
        rebinarized = adaptive_region_threshold(gray, region, r_crit, f_mean)
        x0, y0, x1, y1 = region.bbox
        if euler_number(rebinarized.pixels[y0:y1, x0:x1]) < 0:
            kept.append(region)
    return kept
