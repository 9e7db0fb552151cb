"""Average-face template matching and candidate extraction.

Matching uses zero-mean normalized cross-correlation so one threshold works
across images; peaks are pulled off the correlation surface one at a time,
each suppressing a template-sized neighborhood around itself.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.signal import fftconvolve

from .errors import DegenerateTemplate, InvalidConfig, InvalidInput
from .imaging import round_half_away, stretch_full_range, to_grayscale
from .raster import PixelFormat, RasterImage, gray8, read_image, write_png

TEMPLATE_SIZE = (64, 64)   # T_W, T_H
FACE_SIZE = (128, 128)     # S_W, S_H
DEFAULT_NCC_THRESHOLD = 0.5
DEFAULT_MAX_PEAKS = 16


def resample_bilinear(img: RasterImage, width: int, height: int) -> RasterImage:
    """Bilinear resampling of a Gray8 image using half-pixel-center mapping."""
    img.require(PixelFormat.GRAY8)
    if width < 1 or height < 1 or img.is_empty():
        raise InvalidInput("cannot resample to or from an empty image")
    src = img.pixels.astype(np.float64)
    h, w = src.shape
    xs = np.clip((np.arange(width) + 0.5) * (w / width) - 0.5, 0.0, w - 1.0)
    ys = np.clip((np.arange(height) + 0.5) * (h / height) - 0.5, 0.0, h - 1.0)
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = (ys - y0)[:, None]
    top = src[y0][:, x0] * (1.0 - fx) + src[y0][:, x1] * fx
    bottom = src[y1][:, x0] * (1.0 - fx) + src[y1][:, x1] * fx
    out = top * (1.0 - fy) + bottom * fy
    return gray8(np.clip(round_half_away(out), 0, 255).astype(np.uint8))


@dataclass(frozen=True, eq=False)
class FaceTemplate:
    """Zero-mean gray template; ``raw`` keeps the quantized average face."""

    raw: np.ndarray
    mean: float

    def __post_init__(self):
        arr = np.asarray(self.raw, dtype=np.uint8).copy()
        arr.setflags(write=False)
        object.__setattr__(self, "raw", arr)
        if float(arr.std()) == 0.0:
            raise DegenerateTemplate("template is constant")

    @property
    def width(self) -> int:
        return self.raw.shape[1]

    @property
    def height(self) -> int:
        return self.raw.shape[0]

    @property
    def pixels(self) -> np.ndarray:
        return self.raw.astype(np.float64) - self.mean

    def save(self, png_path: str | Path) -> None:
        png_path = Path(png_path)
        write_png(gray8(self.raw), png_path)
        sidecar = {"mean": self.mean, "width": self.width, "height": self.height}
        png_path.with_suffix(".json").write_text(
            json.dumps(sidecar, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )

    @staticmethod
    def load(png_path: str | Path) -> "FaceTemplate":
        raw = read_image(png_path)
        raw = to_grayscale(raw)
        return FaceTemplate(raw.pixels, float(raw.pixels.astype(np.float64).mean()))


def build_average_template(
    faces: list[RasterImage],
    width: int = TEMPLATE_SIZE[0],
    height: int = TEMPLATE_SIZE[1],
) -> FaceTemplate:
    """Pixel-wise mean of face crops, resampled to template size, zero-meaned."""
    if not faces:
        raise InvalidInput("need at least one face crop")
    acc = np.zeros((height, width), dtype=np.float64)
    for face in faces:
        acc += resample_bilinear(to_grayscale(face), width, height).pixels
    raw = np.clip(round_half_away(acc / len(faces)), 0, 255).astype(np.uint8)
    return FaceTemplate(raw, float(raw.astype(np.float64).mean()))


@dataclass(frozen=True)
class FaceCandidate:
    """A face hypothesis: its box in the source image and the NCC peak score.

    ``face`` carries the normalized crop once :func:`extract_candidates` has
    run; ``clipped`` marks boxes that had to be cut at the image border.
    """

    bbox: tuple[int, int, int, int]  # x0, y0, x1, y1 (exclusive)
    center: tuple[int, int]
    score: float
    face: RasterImage | None = field(default=None, compare=False)
    clipped: bool = False

    def to_dict(self) -> dict:
        return {
            "bbox": list(self.bbox),
            "center": list(self.center),
            "score": self.score,
        }


def _box_sums(values: np.ndarray, th: int, tw: int) -> np.ndarray:
    """Exact sliding-window sums of an integer array (valid positions)."""
    h, w = values.shape
    c = np.zeros((h + 1, w + 1), dtype=np.int64)
    np.cumsum(values, axis=0, out=c[1:, 1:])
    np.cumsum(c[1:, 1:], axis=1, out=c[1:, 1:])
    return c[th:, tw:] - c[:-th, tw:] - c[th:, :-tw] + c[:-th, :-tw]


def ncc_map(gray: RasterImage, tmpl: FaceTemplate) -> np.ndarray:
    """Normalized cross-correlation at every valid template offset.

    Windows with exactly zero variance (detected in integer arithmetic, so
    no float residue can fake texture) score 0.
    """
    gray.require(PixelFormat.GRAY8)
    th, tw = tmpl.raw.shape
    if th > gray.height or tw > gray.width:
        raise InvalidConfig(
            f"{tw}x{th} template larger than {gray.width}x{gray.height} image"
        )
    img = gray.pixels.astype(np.float64)
    t = tmpl.pixels
    t_norm = float(np.sqrt(np.sum(t * t)))
    # cross-correlation == convolution with the flipped template
    numerator = fftconvolve(img, t[::-1, ::-1], mode="valid")
    n = th * tw
    ints = gray.pixels.astype(np.int64)
    s1 = _box_sums(ints, th, tw)
    s2 = _box_sums(ints * ints, th, tw)
    energy_n = n * s2 - s1 * s1  # n * window variance sum, exact integer
    out = np.zeros_like(numerator)
    live = energy_n > 0
    out[live] = numerator[live] / (np.sqrt(energy_n[live] / n) * t_norm)
    return out


def match_template(
    gray: RasterImage,
    tmpl: FaceTemplate,
    ncc_threshold: float = DEFAULT_NCC_THRESHOLD,
    max_peaks: int = DEFAULT_MAX_PEAKS,
) -> list[FaceCandidate]:
    """Iterative peak extraction from the NCC surface.

    The global maximum becomes a candidate, a template-sized neighborhood
    around it is suppressed, and the process repeats until the best remaining
    peak drops below ``ncc_threshold`` or ``max_peaks`` were taken.
    """
    surface = ncc_map(gray, tmpl)
    th, tw = tmpl.raw.shape
    candidates: list[FaceCandidate] = []
    work = surface.copy()
    while len(candidates) < max_peaks:
        flat = int(np.argmax(work))
        py, px = np.unravel_index(flat, work.shape)
        score = float(work[py, px])
        if score < ncc_threshold:
            break
        candidates.append(
            FaceCandidate(
                bbox=(int(px), int(py), int(px) + tw, int(py) + th),
                center=(int(px) + tw // 2, int(py) + th // 2),
                score=score,
            )
        )
        y0 = max(0, py - th // 2)
        x0 = max(0, px - tw // 2)
        work[y0 : py + th // 2 + 1, x0 : px + tw // 2 + 1] = -np.inf
    return candidates


def extract_candidates(
    src: RasterImage,
    candidates: list[FaceCandidate],
    face_width: int = FACE_SIZE[0],
    face_height: int = FACE_SIZE[1],
) -> list[FaceCandidate]:
    """Crop, resample and contrast-normalize each candidate's box.

    Boxes reaching beyond the image are clipped and flagged; the output crop
    is always exactly face_width x face_height.
    """
    gray = to_grayscale(src)
    out = []
    for cand in candidates:
        x0, y0, x1, y1 = cand.bbox
        cx0, cy0 = max(0, x0), max(0, y0)
        cx1, cy1 = min(gray.width, x1), min(gray.height, y1)
        if cx0 >= cx1 or cy0 >= cy1:
            raise InvalidInput(f"candidate bbox {cand.bbox} lies outside the image")
        clipped = (cx0, cy0, cx1, cy1) != (x0, y0, x1, y1)
        crop = gray8(gray.pixels[cy0:cy1, cx0:cx1])
        face = stretch_full_range(resample_bilinear(crop, face_width, face_height))
        out.append(
            replace(
                cand,
                bbox=(cx0, cy0, cx1, cy1),
                face=face,
                clipped=cand.clipped or clipped,
            )
        )
    return out
