"""Instance segmentation evaluation with attribute localization."""

__version__ = "0.1.0"

from .attributes import attribute_f1, confusion_counts
from .dataset import EvalDataset, load_ground_truth, load_predictions
from .engine import EvalParams, EvalResult, error_breakdown, evaluate, f1_sweep, summarize
from .errors import AttrSegError, ContractError, DataError, GeometryError, OntologyError
from .geometry import BinaryMask, PolygonSet, decode, encode, mask_iou, rasterize
from .ontology import Ontology, load_ontology, validate
from .stats import bootstrap_ci, dataset_statistics

__all__ = [
    "AttrSegError", "BinaryMask", "ContractError", "DataError", "EvalDataset", "EvalParams",
    "EvalResult", "GeometryError", "Ontology", "OntologyError", "PolygonSet", "attribute_f1",
    "bootstrap_ci", "confusion_counts", "dataset_statistics", "decode", "encode",
    "error_breakdown", "evaluate", "f1_sweep", "load_ground_truth", "load_ontology",
    "load_predictions", "mask_iou", "rasterize", "summarize", "validate",
]
