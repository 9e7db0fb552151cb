"""Pipeline configuration: one JSON file with a section per stage.

Every tunable constant named in the module defaults lives here so a single
config file reproduces a run exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import InvalidConfig


@dataclass(frozen=True)
class ImagingSection:
    variance_cutoff: float = 400.0
    lo_percentile: float = 2.0
    hi_percentile: float = 98.0


@dataclass(frozen=True)
class SegmentationSection:
    bin_count: int = 64
    dev_factor: float = 0.5
    band: float = 2.0
    small_window: int = 3
    large_window: int = 17
    r_crit: float = 4.0
    f_mean: float = 0.6


@dataclass(frozen=True)
class DetectionSection:
    template_width: int = 64
    template_height: int = 64
    face_width: int = 128
    face_height: int = 128
    ncc_threshold: float = 0.5
    max_peaks: int = 16


@dataclass(frozen=True)
class GaborSection:
    sigma: float = 2.0 * math.pi
    n_freq: int = 5
    n_orient: int = 8
    radius: int | None = None
    restrict_frequency: bool = False


@dataclass(frozen=True)
class RecognitionSection:
    threshold: float = 0.9984
    weights: tuple[float, ...] | None = None
    lam: float = 1.0
    window: int = 5


_SECTIONS = {
    "imaging": ImagingSection,
    "segmentation": SegmentationSection,
    "detection": DetectionSection,
    "gabor": GaborSection,
    "recognition": RecognitionSection,
}

# JSON spelling differs from the attribute for the reserved word
_JSON_KEYS = {"lam": "lambda"}
_ATTR_KEYS = {v: k for k, v in _JSON_KEYS.items()}


@dataclass(frozen=True)
class PipelineConfig:
    imaging: ImagingSection = field(default_factory=ImagingSection)
    segmentation: SegmentationSection = field(default_factory=SegmentationSection)
    detection: DetectionSection = field(default_factory=DetectionSection)
    gabor: GaborSection = field(default_factory=GaborSection)
    recognition: RecognitionSection = field(default_factory=RecognitionSection)

    def to_dict(self) -> dict:
        out = {}
        for section_name in _SECTIONS:
            section = asdict(getattr(self, section_name))
            out[section_name] = {
                _JSON_KEYS.get(k, k): (list(v) if isinstance(v, tuple) else v)
                for k, v in section.items()
            }
        return out

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )

    @staticmethod
    def from_dict(doc: dict) -> "PipelineConfig":
        kwargs = {}
        for section_name, cls in _SECTIONS.items():
            given = doc.get(section_name, {})
            if not isinstance(given, dict):
                raise InvalidConfig(f"config section {section_name!r} must be an object")
            fields = {f for f in cls.__dataclass_fields__}
            values = {}
            for key, value in given.items():
                attr = _ATTR_KEYS.get(key, key)
                if attr not in fields:
                    raise InvalidConfig(f"unknown key {key!r} in config section {section_name!r}")
                if attr == "weights" and value is not None:
                    value = tuple(value)
                values[attr] = value
            kwargs[section_name] = cls(**values)
        unknown = set(doc) - set(_SECTIONS)
        if unknown:
            raise InvalidConfig(f"unknown config sections: {sorted(unknown)}")
        return PipelineConfig(**kwargs)

    @staticmethod
    def load(path: str | Path) -> "PipelineConfig":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise InvalidConfig(f"{path} is not valid JSON: {exc}") from exc
        return PipelineConfig.from_dict(doc)
