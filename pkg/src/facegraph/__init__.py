"""Face detection by skin segmentation plus recognition by elastic bunch
graph matching over Gabor wavelet jets."""

from .config import PipelineConfig
from .detection import FaceCandidate, FaceTemplate, build_average_template, match_template
from .gabor import GaborBank, Jet, extract_jet, jet_similarity, make_bank
from .graph import FaceBunchGraph, FaceGraph, FiducialSet, build_bunch_graph, build_face_graph
from .raster import PixelFormat, RasterImage, read_image, write_png
from .recognition import RecognitionConfig, RecognitionOutcome, recognize
from .segmentation import SkinModel, build_skin_model, classify_skin

__version__ = "0.1.0"

__all__ = [
    "PipelineConfig",
    "FaceCandidate",
    "FaceTemplate",
    "build_average_template",
    "match_template",
    "GaborBank",
    "Jet",
    "extract_jet",
    "jet_similarity",
    "make_bank",
    "FaceBunchGraph",
    "FaceGraph",
    "FiducialSet",
    "build_bunch_graph",
    "build_face_graph",
    "PixelFormat",
    "RasterImage",
    "read_image",
    "write_png",
    "RecognitionConfig",
    "RecognitionOutcome",
    "recognize",
    "SkinModel",
    "build_skin_model",
    "classify_skin",
    "__version__",
]
