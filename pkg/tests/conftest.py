import sys
from pathlib import Path

import numpy as np
import pytest

REPO_ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO_ROOT / "src"))

from facegraph import gabor, toyset  # noqa: E402
from facegraph.config import PipelineConfig  # noqa: E402
from facegraph.imaging import stretch_full_range, to_grayscale  # noqa: E402
from facegraph.pipeline import cmd_enroll, ingest_dataset  # noqa: E402
from facegraph.raster import gray8  # noqa: E402

TOYSET_DIR = REPO_ROOT / "data" / "toyset"
SCENES_DIR = REPO_ROOT / "data" / "scenes"


@pytest.fixture(scope="session")
def bank():
    return gabor.make_bank()


@pytest.fixture(scope="session")
def restricted_bank():
    return gabor.make_bank(restrict_frequency=True)


def textured_image(size: int = 256, even: bool = False) -> "gray8":
    """Deterministic broadband texture covering every filter band.

    With ``even`` the samples are even values at most 168, so +50 offsets and
    x1.5 gains stay exact in uint8.
    """
    rng = np.random.default_rng(42)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    val = (
        30.0 * np.sin(2 * np.pi * (xx * 0.9 + yy * 0.2) / 4.5)
        + 26.0 * np.sin(2 * np.pi * (xx * 0.3 - yy * 0.8) / 9.0 + 1.2)
        + 22.0 * np.sin(2 * np.pi * (xx * 0.7 + yy * 0.7) / 16.0 + 0.4)
        + 18.0 * np.sin(2 * np.pi * (yy) / 28.0 + 2.2)
    )
    noise = rng.normal(0.0, 1.0, (size, size))
    padded = np.pad(noise, 1, mode="edge")
    smooth = sum(
        padded[dy : dy + size, dx : dx + size] for dy in range(3) for dx in range(3)
    ) / 9.0
    val += 12.0 * noise + 10.0 * smooth
    if even:
        lo, hi = val.min(), val.max()
        scaled = (val - lo) / (hi - lo) * 84.0  # 0..84, doubled below
        return gray8((2 * np.floor(scaled + 0.5)).astype(np.uint8))
    lo, hi = val.min(), val.max()
    scaled = (val - lo) / (hi - lo) * 255.0
    return gray8(np.floor(scaled + 0.5).astype(np.uint8))


@pytest.fixture(scope="session")
def texture():
    return textured_image()


@pytest.fixture(scope="session")
def toy_dataset():
    return ingest_dataset(TOYSET_DIR)


@pytest.fixture(scope="session")
def toy_models(toy_dataset, tmp_path_factory):
    """Enroll the bundled toy dataset once per session."""
    out = tmp_path_factory.mktemp("models")
    bunches = cmd_enroll(toy_dataset, out, PipelineConfig())
    return out, bunches


def normalized_crop(pid: str, index: int):
    """A toy crop normalized the way enrollment/recognition sees it."""
    gain, offset, shift = toyset.VARIANTS[index]
    img, fiducials = toyset.render_crop(toyset.SUBJECTS[pid], gain, offset, shift)
    return stretch_full_range(to_grayscale(img)), fiducials
