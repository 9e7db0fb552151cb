"""End-to-end commands: skin training, enrollment, detection, recognition
and the evaluation harness.

Everything here is deterministic: directory listings are sorted, JSON is
written with sorted keys, and tie-breaks in the underlying stages are fixed,
so repeated runs on identical inputs produce byte-identical outputs.
"""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from . import detection, segmentation
from .config import PipelineConfig
from .errors import BankMismatch, DataError, EmptyDataset, FaceGraphError
from .gabor import GaborBank, make_bank
from .graph import (
    FaceBunchGraph,
    FiducialSet,
    build_bunch_graph,
    build_face_graph,
    load_bunch_graph,
    load_fiducials,
    save_bunch_graph,
)
from .imaging import ContrastParams, normalize_illumination, rgb_to_hsv, stretch_full_range, to_grayscale
from .raster import PixelFormat, RasterImage, gray8, read_image, rgb8, write_png
from .recognition import OVER_RECOGNITION, RecognitionConfig, RecognitionOutcome, recognize
from .segmentation import SkinModel

log = logging.getLogger(__name__)

IMAGE_EXTENSIONS = (".png", ".bmp", ".ppm")
FIDUCIAL_FILE = "fiducials.csv"
TEMPLATE_BASENAME = "template.png"


def worker_count() -> int:
    """Worker pool size; FACEGRAPH_THREADS caps it, default is serial."""
    try:
        return max(1, int(os.environ.get("FACEGRAPH_THREADS", "1")))
    except ValueError:
        return 1


def _map_ordered(fn, items):
    n = worker_count()
    if n <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# dataset ingestion

@dataclass(frozen=True)
class PersonEntry:
    id: str
    images: tuple[Path, ...]


@dataclass(frozen=True)
class Dataset:
    root: Path
    persons: tuple[PersonEntry, ...]
    annotations: dict[str, FiducialSet] = field(default_factory=dict)

    def annotation_for(self, image: Path) -> FiducialSet | None:
        return self.annotations.get(str(image.resolve()))


def _readable(path: Path) -> bool:
    try:
        with Image.open(path) as im:
            im.verify()
        return True
    except (UnidentifiedImageError, OSError):
        return False


def ingest_dataset(root: str | Path) -> Dataset:
    """One person per subdirectory; images sorted lexicographically.

    Annotation files named ``fiducials.csv`` at the root or inside person
    directories are merged, with image paths resolved relative to the CSV.
    """
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"dataset root {root} does not exist")
    persons = []
    annotations: dict[str, FiducialSet] = {}
    root_csv = root / FIDUCIAL_FILE
    if root_csv.is_file():
        for rel, fid in load_fiducials(root_csv).items():
            annotations[str((root / rel).resolve())] = fid
    for sub in sorted(p for p in root.iterdir() if p.is_dir()):
        images = []
        for path in sorted(sub.iterdir()):
            if path.suffix.lower() not in IMAGE_EXTENSIONS:
                continue
            if not _readable(path):
                log.warning("skipping unreadable image %s", path)
                continue
            images.append(path)
        person_csv = sub / FIDUCIAL_FILE
        if person_csv.is_file():
            for rel, fid in load_fiducials(person_csv).items():
                annotations[str((sub / rel).resolve())] = fid
        if images:
            persons.append(PersonEntry(sub.name, tuple(images)))
        else:
            log.warning("person directory %s has no images", sub)
    if not persons:
        raise EmptyDataset(f"no persons with images under {root}")
    return Dataset(root=root, persons=tuple(persons), annotations=annotations)


# ---------------------------------------------------------------------------
# face normalization shared by enrollment and recognition

def normalize_face(img: RasterImage, config: PipelineConfig):
    """Standard-size, standard-contrast gray crop plus the coordinate mapper.

    Returns (face, map_point) where map_point translates source-image pixel
    coordinates into crop coordinates through the same resampling geometry.
    """
    det = config.detection
    gray = to_grayscale(img)
    face = stretch_full_range(detection.resample_bilinear(gray, det.face_width, det.face_height))
    sx = det.face_width / gray.width
    sy = det.face_height / gray.height

    def map_point(pt: tuple[int, int]) -> tuple[int, int]:
        x = (pt[0] + 0.5) * sx - 0.5
        y = (pt[1] + 0.5) * sy - 0.5
        xi = min(max(int(np.floor(x + 0.5)), 0), det.face_width - 1)
        yi = min(max(int(np.floor(y + 0.5)), 0), det.face_height - 1)
        return (xi, yi)

    return face, map_point


def _contrast_params(config: PipelineConfig) -> ContrastParams:
    im = config.imaging
    return ContrastParams(
        breakpoints=None,
        variance_cutoff=im.variance_cutoff,
        lo_percentile=im.lo_percentile,
        hi_percentile=im.hi_percentile,
    )


def _write_json(doc, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# commands

def cmd_train_skin(dataset: Dataset, out_path: str | Path, config: PipelineConfig | None = None) -> SkinModel:
    """Build the hue/saturation skin model from every dataset image."""
    config = config or PipelineConfig()
    params = _contrast_params(config)
    hsv_images = []
    for person in dataset.persons:
        for path in person.images:
            img = read_image(path)
            if img.format is not PixelFormat.RGB8:
                log.warning("skipping non-color image %s for skin training", path)
                continue
            hsv_images.append(rgb_to_hsv(normalize_illumination(img, params)))
    if not hsv_images:
        raise EmptyDataset("no color images available for skin training")
    model = segmentation.build_skin_model(
        hsv_images,
        bin_count=config.segmentation.bin_count,
        dev_factor=config.segmentation.dev_factor,
    )
    model.save(out_path)
    hue_bin = int(model.hue_mean * model.bin_count)
    sat_bin = int(model.sat_mean * model.bin_count)
    print(f"skin model: hue peak bin {hue_bin} (mean {model.hue_mean:.4f}), "
          f"sat peak bin {sat_bin} (mean {model.sat_mean:.4f})")
    return model


def bank_from_config(config: PipelineConfig, restrict_frequency: bool | None = None) -> GaborBank:
    g = config.gabor
    restrict = g.restrict_frequency if restrict_frequency is None else restrict_frequency
    return make_bank(g.sigma, g.n_freq, g.n_orient, g.radius, restrict)


def cmd_enroll(
    dataset: Dataset,
    out_dir: str | Path,
    config: PipelineConfig | None = None,
    restrict_frequency: bool | None = None,
) -> list[FaceBunchGraph]:
    """Build one bunch graph per person from its annotated images.

    Only annotated images enroll; annotations pointing at files missing from
    the dataset abort with the full list.  The average-face template used by
    detection is written next to the model files.
    """
    config = config or PipelineConfig()
    out_dir = Path(out_dir)
    known = {str(p.resolve()) for person in dataset.persons for p in person.images}
    missing = sorted(p for p in dataset.annotations if p not in known)
    if missing:
        raise DataError("annotations reference missing images:\n" + "\n".join(missing))
    bank = bank_from_config(config, restrict_frequency)
    bunches = []
    crops = []
    for person in dataset.persons:
        graphs = []
        for path in person.images:
            fiducials = dataset.annotation_for(path)
            if fiducials is None:
                continue
            face, map_point = normalize_face(read_image(path), config)
            mapped = FiducialSet({name: map_point(fiducials[name]) for name in fiducials.points})
            graphs.append(build_face_graph(face, mapped, bank))
            crops.append(face)
        if not graphs:
            log.warning("person %s has no annotated images; skipped", person.id)
            continue
        bunch = build_bunch_graph(person.id, graphs)
        out_dir.mkdir(parents=True, exist_ok=True)
        save_bunch_graph(bunch, out_dir / f"{person.id}.json")
        bunches.append(bunch)
        print(f"enrolled {person.id}: {len(graphs)} model graph(s)")
    if not bunches:
        raise EmptyDataset("no annotated images found; nothing to enroll")
    template = detection.build_average_template(
        crops, config.detection.template_width, config.detection.template_height
    )
    template.save(out_dir / TEMPLATE_BASENAME)
    return bunches


def load_models(models_dir: str | Path) -> list[FaceBunchGraph]:
    """Load every bunch-graph JSON in a directory, sorted by file name."""
    models_dir = Path(models_dir)
    if not models_dir.is_dir():
        raise DataError(f"models directory {models_dir} does not exist")
    models = []
    for path in sorted(models_dir.glob("*.json")):
        if path.name == Path(TEMPLATE_BASENAME).with_suffix(".json").name:
            continue
        models.append(load_bunch_graph(path))
    if not models:
        raise DataError(f"no bunch graphs found in {models_dir}")
    fingerprint = models[0].bank_params
    for m in models[1:]:
        if m.bank_params != fingerprint:
            raise BankMismatch(f"model {m.person_id} uses different bank parameters")
    return models


def _draw_box(pixels: np.ndarray, bbox, color=(0, 255, 0), thickness: int = 2) -> None:
    x0, y0, x1, y1 = bbox
    h, w = pixels.shape[:2]
    x0, y0 = max(0, x0), max(0, y0)
    x1, y1 = min(w, x1), min(h, y1)
    for t in range(thickness):
        if y0 + t < h:
            pixels[y0 + t, x0:x1] = color
        if 0 <= y1 - 1 - t:
            pixels[y1 - 1 - t, x0:x1] = color
        if x0 + t < w:
            pixels[y0:y1, x0 + t] = color
        if 0 <= x1 - 1 - t:
            pixels[y0:y1, x1 - 1 - t] = color


def detect_faces(
    img: RasterImage,
    skin_model: SkinModel,
    template: detection.FaceTemplate,
    config: PipelineConfig | None = None,
) -> list[detection.FaceCandidate]:
    """Full detection chain on a color image.

    Illumination is normalized, skin is segmented and cleaned, surviving
    regions are Euler-classified, and the average-face template confirms the
    candidates.  Matching runs at template scale: the grayscale is resampled
    by template_size/face_size so a standard-size face spans the template,
    and accepted centers are mapped back to source coordinates with a
    face-sized box around them.
    """
    config = config or PipelineConfig()
    det, seg = config.detection, config.segmentation
    if img.format is not PixelFormat.RGB8:
        raise DataError("detection needs a color image")
    normalized = normalize_illumination(img, _contrast_params(config))
    hsv = rgb_to_hsv(normalized)
    gray = to_grayscale(normalized)
    mask = segmentation.classify_skin(hsv, skin_model, seg.band)
    cleaned = segmentation.cleanup(mask, seg.small_window, seg.large_window)
    regions = segmentation.connected_components(cleaned)
    faces = segmentation.filter_face_regions(regions, gray, seg.r_crit, seg.f_mean)

    scale_x = det.template_width / det.face_width
    scale_y = det.template_height / det.face_height
    sw = max(det.template_width, int(round(gray.width * scale_x)))
    sh = max(det.template_height, int(round(gray.height * scale_y)))
    scaled = detection.resample_bilinear(gray, sw, sh)
    fx, fy = sw / gray.width, sh / gray.height

    candidates: list[detection.FaceCandidate] = []
    for region in faces:
        x0, y0, x1, y1 = region.bbox
        sx0, sy0 = int(np.floor(x0 * fx)), int(np.floor(y0 * fy))
        sx1, sy1 = int(np.ceil(x1 * fx)), int(np.ceil(y1 * fy))
        # grow the box symmetrically until the template fits
        while sx1 - sx0 < det.template_width:
            sx0, sx1 = max(0, sx0 - 1), min(sw, sx1 + 1)
            if sx0 == 0 and sx1 == sw:
                break
        while sy1 - sy0 < det.template_height:
            sy0, sy1 = max(0, sy0 - 1), min(sh, sy1 + 1)
            if sy0 == 0 and sy1 == sh:
                break
        if sx1 - sx0 < det.template_width or sy1 - sy0 < det.template_height:
            log.warning("region %s too small for template matching; skipped", region.bbox)
            continue
        crop = gray8(scaled.pixels[sy0:sy1, sx0:sx1])
        for peak in detection.match_template(crop, template, det.ncc_threshold, det.max_peaks):
            # float center of the matched window, mapped back to source scale
            wx = peak.bbox[0] + sx0 + (det.template_width - 1) / 2.0
            wy = peak.bbox[1] + sy0 + (det.template_height - 1) / 2.0
            cx = (wx + 0.5) / fx - 0.5
            cy = (wy + 0.5) / fy - 0.5
            cxi, cyi = int(np.floor(cx + 0.5)), int(np.floor(cy + 0.5))
            bx0 = cxi - det.face_width // 2
            by0 = cyi - det.face_height // 2
            candidates.append(
                detection.FaceCandidate(
                    bbox=(bx0, by0, bx0 + det.face_width, by0 + det.face_height),
                    center=(cxi, cyi),
                    score=peak.score,
                )
            )
    candidates.sort(key=lambda c: (-c.score, c.center[1], c.center[0]))
    candidates = candidates[: det.max_peaks]
    return detection.extract_candidates(img, candidates, det.face_width, det.face_height)


def cmd_detect(
    image_path: str | Path,
    skin_model: SkinModel,
    template: detection.FaceTemplate,
    out_prefix: str | Path,
    config: PipelineConfig | None = None,
) -> list[detection.FaceCandidate]:
    """Detect faces in one image; writes <prefix>.json and <prefix>.png."""
    img = read_image(image_path)
    candidates = detect_faces(img, skin_model, template, config)
    out_prefix = Path(out_prefix)
    _write_json([c.to_dict() for c in candidates], out_prefix.with_suffix(".json"))
    annotated = img.pixels.copy()
    for cand in candidates:
        _draw_box(annotated, cand.bbox)
    write_png(rgb8(annotated), out_prefix.with_suffix(".png"))
    return candidates


def _whole_image_candidate(img: RasterImage, config: PipelineConfig) -> detection.FaceCandidate:
    face, _ = normalize_face(img, config)
    return detection.FaceCandidate(
        bbox=(0, 0, img.width, img.height),
        center=(img.width // 2, img.height // 2),
        score=1.0,
        face=face,
    )


def recognize_image(
    image_path: str | Path,
    models: list[FaceBunchGraph],
    config: PipelineConfig | None = None,
    pre_cropped: bool = False,
    skin_model: SkinModel | None = None,
    template: detection.FaceTemplate | None = None,
) -> list[tuple[detection.FaceCandidate, RecognitionOutcome]]:
    """Recognize every face of one image against the enrolled models."""
    config = config or PipelineConfig()
    img = read_image(image_path)
    if pre_cropped:
        candidates = [_whole_image_candidate(img, config)]
    else:
        if skin_model is None or template is None:
            raise DataError("full-chain recognition needs a skin model and a template")
        candidates = detect_faces(img, skin_model, template, config)
    bank = make_bank(**models[0].bank_params)
    rec = RecognitionConfig(
        threshold=config.recognition.threshold,
        weights=config.recognition.weights,
        lam=config.recognition.lam,
        window=config.recognition.window,
    )
    return [(cand, recognize(cand, models, bank, rec)) for cand in candidates]


def cmd_recognize(
    image_path: str | Path,
    models_dir: str | Path,
    out_path: str | Path,
    config: PipelineConfig | None = None,
    pre_cropped: bool = False,
    skin_model: SkinModel | None = None,
    template: detection.FaceTemplate | None = None,
) -> int:
    """Write one outcome JSON per detected face; returns the exit code."""
    models = load_models(models_dir)
    results = recognize_image(image_path, models, config, pre_cropped, skin_model, template)
    doc = []
    over = False
    for cand, outcome in results:
        entry = outcome.to_dict()
        entry["candidate"] = cand.to_dict()
        doc.append(entry)
        over = over or outcome.decision.kind == OVER_RECOGNITION
    _write_json(doc, Path(out_path))
    return 2 if over else 0


@dataclass(frozen=True)
class EvaluationReport:
    per_person: dict[str, dict[str, int]]
    total: int
    correct: int
    accuracy: float
    training_counts: dict[str, int]
    config: dict

    def to_dict(self) -> dict:
        return {
            "per_person": self.per_person,
            "total": self.total,
            "correct": self.correct,
            "accuracy": self.accuracy,
            "training_counts": self.training_counts,
            "config": self.config,
        }

    def table(self) -> str:
        lines = [f"{'person':<20}{'correct':>8}{'wrong':>8}{'no_match':>10}{'over':>8}"]
        for person in sorted(self.per_person):
            c = self.per_person[person]
            lines.append(
                f"{person:<20}{c['correct']:>8}{c['wrong']:>8}{c['no_match']:>10}"
                f"{c['over_recognition']:>8}"
            )
        lines.append(f"matching accuracy: {100.0 * self.accuracy:.2f}% ({self.correct}/{self.total})")
        return "\n".join(lines)


def cmd_evaluate(
    dataset: Dataset,
    models_dir: str | Path,
    config: PipelineConfig | None = None,
    pre_cropped: bool = False,
    skin_model: SkinModel | None = None,
    template: detection.FaceTemplate | None = None,
    out_path: str | Path | None = None,
) -> EvaluationReport:
    """Run recognition over every probe image and tally the decisions.

    A probe counts as correct when its top candidate's decision matches the
    directory label; detection or recognition failures count as wrong.
    """
    config = config or PipelineConfig()
    models = load_models(models_dir)
    probes = [(person.id, path) for person in dataset.persons for path in person.images]

    def run(item):
        label, path = item
        try:
            results = recognize_image(path, models, config, pre_cropped, skin_model, template)
        except FaceGraphError as exc:
            log.warning("probe %s failed: %s", path, exc)
            return label, "error"
        if not results:
            return label, "error"
        decision = results[0][1].decision
        if decision.kind == OVER_RECOGNITION:
            return label, "over_recognition"
        if decision.kind == "match":
            return label, "correct" if decision.persons[0] == label else "wrong"
        return label, "no_match"

    outcomes = _map_ordered(run, probes)
    per_person: dict[str, dict[str, int]] = {
        person.id: {"correct": 0, "wrong": 0, "no_match": 0, "over_recognition": 0}
        for person in dataset.persons
    }
    correct = 0
    for label, result in outcomes:
        key = "wrong" if result == "error" else result
        per_person[label][key] += 1
        if result == "correct":
            correct += 1
    report = EvaluationReport(
        per_person=per_person,
        total=len(probes),
        correct=correct,
        accuracy=correct / len(probes) if probes else 0.0,
        training_counts={m.person_id: m.stack_height for m in models},
        config=config.to_dict(),
    )
    if out_path is not None:
        _write_json(report.to_dict(), Path(out_path))
    print(report.table())
    return report
