"""Deterministic synthetic face data for demos and repeatable tests.

Each subject is a procedural 128x128 face crop: a skin-toned base with a
person-specific mixture of sinusoidal gratings and smoothed noise, dark
blue-gray eyes at the iris fiducials (non-skin chroma, so they punch holes in
skin masks), and value-only nose/lip/chin shading (chroma-invisible).  Within
a person only brightness, contrast and a small translation vary, so the same
subject yields near-identical jets after contrast normalization while
different subjects stay far apart.

Rendering happens once per subject on an oversized canvas; variants are pure
crops of it, which makes translated probes exact pixel shifts.
"""

from __future__ import annotations

import argparse
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .raster import RasterImage, rgb8, write_png

CROP = 128
MARGIN = 16
_BIG = CROP + 2 * MARGIN

ELLIPSE_AXES = (56.0, 60.0)
BACKGROUND_RGB = (30, 60, 150)  # blue: far from skin hue, inside no skin band

FIDUCIAL_ORDER = ("left_iris", "right_iris", "nose_tip", "upper_lip_tip", "chin_tip")


@dataclass(frozen=True)
class Subject:
    name: str
    seed: int
    base_v: float
    skin_ratios: tuple[float, float]            # green, blue channel fractions of V
    fiducials: dict[str, tuple[int, int]]
    waves: tuple[tuple[float, float, float], ...]  # (wavelength px, orientation deg, amplitude)
    noise_amp: float
    eye_axes: tuple[float, float]


SUBJECTS = {
    "person_a": Subject(
        name="person_a",
        seed=11,
        base_v=182.0,
        skin_ratios=(0.72, 0.57),
        fiducials={
            "left_iris": (42, 46),
            "right_iris": (86, 46),
            "nose_tip": (64, 78),
            "upper_lip_tip": (64, 96),
            "chin_tip": (64, 114),
        },
        waves=((6.0, 0.0, 22.0), (13.0, 45.0, 17.0), (23.0, 100.0, 13.0)),
        noise_amp=9.0,
        eye_axes=(7.0, 5.0),
    ),
    "person_b": Subject(
        name="person_b",
        seed=22,
        base_v=188.0,
        skin_ratios=(0.70, 0.55),
        fiducials={
            "left_iris": (38, 42),
            "right_iris": (90, 42),
            "nose_tip": (64, 74),
            "upper_lip_tip": (64, 92),
            "chin_tip": (64, 117),
        },
        waves=((8.0, 90.0, 22.0), (17.0, 135.0, 17.0), (27.0, 20.0, 13.0)),
        noise_amp=9.0,
        eye_axes=(8.0, 5.0),
    ),
    "person_c": Subject(
        name="person_c",
        seed=33,
        base_v=178.0,
        skin_ratios=(0.74, 0.59),
        fiducials={
            "left_iris": (45, 50),
            "right_iris": (83, 50),
            "nose_tip": (66, 82),
            "upper_lip_tip": (63, 99),
            "chin_tip": (65, 112),
        },
        waves=((5.0, 30.0, 22.0), (11.0, 120.0, 17.0), (19.0, 75.0, 13.0)),
        noise_amp=9.0,
        eye_axes=(6.0, 4.5),
    ),
    # not part of the shipped dataset: an unenrolled probe subject for tests
    "person_d": Subject(
        name="person_d",
        seed=44,
        base_v=185.0,
        skin_ratios=(0.71, 0.56),
        fiducials={
            "left_iris": (40, 48),
            "right_iris": (87, 44),
            "nose_tip": (62, 80),
            "upper_lip_tip": (65, 95),
            "chin_tip": (63, 115),
        },
        waves=((7.0, 60.0, 22.0), (15.0, 150.0, 17.0), (25.0, 10.0, 13.0)),
        noise_amp=9.0,
        eye_axes=(7.0, 4.5),
    ),
}

DATASET_SUBJECTS = ("person_a", "person_b", "person_c")

# per-image (gain, offset, shift); images 1-3 ship annotated, 4 is probe-only
VARIANTS = {
    1: (1.0, 0.0, (0, 0)),
    2: (0.94, 10.0, (0, 0)),
    3: (1.06, -8.0, (0, 0)),
    4: (0.97, 4.0, (3, 2)),
}
ANNOTATED_VARIANTS = (1, 2, 3)


def _smooth(noise: np.ndarray) -> np.ndarray:
    out = noise
    for _ in range(2):
        padded = np.pad(out, 1, mode="edge")
        out = (
            padded[:-2, :-2] + padded[:-2, 1:-1] + padded[:-2, 2:]
            + padded[1:-1, :-2] + padded[1:-1, 1:-1] + padded[1:-1, 2:]
            + padded[2:, :-2] + padded[2:, 1:-1] + padded[2:, 2:]
        ) / 9.0
    return out


_RENDER_CACHE: dict[str, tuple[np.ndarray, np.ndarray]] = {}


def _render_big(subject: Subject) -> tuple[np.ndarray, np.ndarray]:
    """Value map plus eye mask on the oversized canvas (crop coords + MARGIN)."""
    if subject.name in _RENDER_CACHE:
        return _RENDER_CACHE[subject.name]
    yy, xx = np.mgrid[0:_BIG, 0:_BIG].astype(np.float64)
    x = xx - MARGIN  # crop coordinates
    y = yy - MARGIN
    v = np.full((_BIG, _BIG), subject.base_v)
    rng = np.random.default_rng(subject.seed)
    for wavelength, orient_deg, amp in subject.waves:
        theta = math.radians(orient_deg)
        phase = rng.uniform(0.0, 2.0 * math.pi)
        v += amp * np.sin(2.0 * math.pi * (math.cos(theta) * x + math.sin(theta) * y) / wavelength + phase)
    v += subject.noise_amp * _smooth(rng.normal(0.0, 1.0, (_BIG, _BIG)))

    def disk(cx, cy, rx, ry):
        return ((x - cx) / rx) ** 2 + ((y - cy) / ry) ** 2 <= 1.0

    lx, ly = subject.fiducials["left_iris"]
    rx_, ry_ = subject.fiducials["right_iris"]
    nx, ny = subject.fiducials["nose_tip"]
    ux, uy = subject.fiducials["upper_lip_tip"]
    cx, cy = subject.fiducials["chin_tip"]

    # value-only features keep skin chroma intact
    for ex, ey in ((lx, ly), (rx_, ry_)):
        v[(np.abs(x - ex) <= 9) & (np.abs(y - (ey - 10)) <= 2)] *= 0.72   # brow
    ridge = (np.abs(x - nx) <= 2) & (y >= ny - 16) & (y <= ny)
    v[ridge] *= 0.80
    v[disk(nx - 4, ny, 2.5, 2.0) | disk(nx + 4, ny, 2.5, 2.0)] *= 0.55    # nostrils
    v[(np.abs(x - ux) <= 14) & (np.abs(y - uy) <= 2.5)] *= 0.55           # lip
    rr = np.sqrt((x - cx) ** 2 + (y - (cy - 8)) ** 2)
    v[(np.abs(rr - 10.0) <= 2.5) & (y > cy - 8)] *= 0.70                  # chin arc

    eye_mask = np.zeros((_BIG, _BIG), dtype=bool)
    for ex, ey in ((lx, ly), (rx_, ry_)):
        eye_mask |= disk(ex, ey, subject.eye_axes[0], subject.eye_axes[1])
    v[eye_mask] = 0.30 * subject.base_v
    for ex, ey in ((lx, ly), (rx_, ry_)):
        v[disk(ex, ey, 2.5, 2.5)] = 0.18 * subject.base_v                 # pupil

    v = np.clip(v, 25.0, 252.0)
    _RENDER_CACHE[subject.name] = (v, eye_mask)
    return v, eye_mask


def render_crop(
    subject: Subject,
    gain: float = 1.0,
    offset: float = 0.0,
    shift: tuple[int, int] = (0, 0),
) -> tuple[RasterImage, dict[str, tuple[int, int]]]:
    """One 128x128 RGB face crop and its fiducial positions.

    ``shift`` moves the whole face within the crop (pure translation);
    ``gain``/``offset`` rescale the value channel, leaving chroma alone.
    """
    v_big, eyes_big = _render_big(subject)
    sx, sy = shift
    if abs(sx) > MARGIN or abs(sy) > MARGIN:
        raise ValueError(f"shift {shift} exceeds render margin {MARGIN}")
    oy, ox = MARGIN - sy, MARGIN - sx
    v = np.clip(gain * v_big[oy : oy + CROP, ox : ox + CROP] + offset, 0.0, 255.0)
    eyes = eyes_big[oy : oy + CROP, ox : ox + CROP]
    g_ratio, b_ratio = subject.skin_ratios
    rgb = np.stack([v, g_ratio * v, b_ratio * v], axis=-1)
    eye_v = v[eyes]
    rgb[eyes] = np.stack([0.55 * eye_v, 0.62 * eye_v, 0.95 * eye_v], axis=-1)
    img = rgb8(np.floor(np.clip(rgb, 0.0, 255.0) + 0.5).astype(np.uint8))
    fiducials = {
        name: (px + sx, py + sy) for name, (px, py) in subject.fiducials.items()
    }
    return img, fiducials


def ellipse_mask() -> np.ndarray:
    yy, xx = np.mgrid[0:CROP, 0:CROP].astype(np.float64)
    a, b = ELLIPSE_AXES
    return ((xx - CROP / 2) / a) ** 2 + ((yy - CROP / 2) / b) ** 2 <= 1.0


def plain_face_crop(base_v: float = 200.0) -> RasterImage:
    """A uniform skin ellipse with two dark eye holes on blue background.

    The minimal pattern every detection stage accepts: skin chroma inside the
    ellipse, non-skin eye chroma punching two holes, and dark-on-bright
    intensity contrast for the Euler test.
    """
    yy, xx = np.mgrid[0:CROP, 0:CROP].astype(np.float64)
    face = ellipse_mask()
    v = np.full((CROP, CROP), base_v)
    rgb = np.empty((CROP, CROP, 3))
    rgb[...] = BACKGROUND_RGB
    rgb[face] = np.stack([v[face], 0.72 * v[face], 0.57 * v[face]], axis=-1)
    eyes = np.zeros((CROP, CROP), dtype=bool)
    for ex in (44, 84):
        eyes |= ((xx - ex) / 7.0) ** 2 + ((yy - 48) / 5.0) ** 2 <= 1.0
    ev = 0.28 * base_v
    rgb[eyes & face] = (0.55 * ev, 0.62 * ev, 0.95 * ev)
    # a faint mouth line adds intensity structure without touching chroma
    mouth = (np.abs(xx - 64) <= 12) & (np.abs(yy - 96) <= 2)
    rgb[mouth & face & ~eyes] *= 0.6
    return rgb8(np.floor(rgb + 0.5).astype(np.uint8))


def make_scene(
    entries: list[tuple[RasterImage, tuple[int, int]]],
    size: tuple[int, int] = (256, 256),
    elliptical: bool = False,
) -> RasterImage:
    """Paste face crops onto a blue background at the given top-left corners."""
    w, h = size
    canvas = np.empty((h, w, 3), dtype=np.uint8)
    canvas[...] = BACKGROUND_RGB
    mask = ellipse_mask()
    for crop, (px, py) in entries:
        tile = crop.pixels
        if elliptical:
            region = canvas[py : py + CROP, px : px + CROP]
            region[mask] = tile[mask]
        else:
            canvas[py : py + CROP, px : px + CROP] = tile
    return rgb8(canvas)


def write_toyset(out_dir: str | Path) -> None:
    """Write the bundled dataset: three subjects, four images each, CSV."""
    out_dir = Path(out_dir)
    rows = []
    for pid in DATASET_SUBJECTS:
        subject = SUBJECTS[pid]
        person_dir = out_dir / pid
        person_dir.mkdir(parents=True, exist_ok=True)
        for index, (gain, offset, shift) in VARIANTS.items():
            img, fiducials = render_crop(subject, gain, offset, shift)
            name = f"{index:02d}.png"
            write_png(img, person_dir / name)
            if index in ANNOTATED_VARIANTS:
                coords = []
                for fname in FIDUCIAL_ORDER:
                    coords.extend(fiducials[fname])
                rows.append(f"{pid}/{name}," + ",".join(str(c) for c in coords))
    (out_dir / "fiducials.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")


def write_demo_scenes(out_dir: str | Path) -> None:
    """Scenes for the detection demo: one toy face, and two side by side."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    face_a, _ = render_crop(SUBJECTS["person_a"])
    face_b, _ = render_crop(SUBJECTS["person_b"])
    write_png(make_scene([(face_a, (64, 64))]), out_dir / "one_face.png")
    write_png(
        make_scene([(face_a, (24, 32)), (face_b, (168, 32))], size=(320, 192)),
        out_dir / "two_faces.png",
    )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="regenerate the bundled toy dataset")
    parser.add_argument("--out", default="data/toyset", help="dataset output directory")
    parser.add_argument("--scenes", default=None, help="also write demo scenes here")
    args = parser.parse_args(argv)
    write_toyset(args.out)
    print(f"wrote toy dataset to {args.out}")
    if args.scenes:
        write_demo_scenes(args.scenes)
        print(f"wrote demo scenes to {args.scenes}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
