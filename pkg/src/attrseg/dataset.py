"""Reading, indexing and writing ground truth and predictions."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Union

from .errors import DataError, GeometryError
from .geometry import (
    BBox,
    BinaryMask,
    PolygonSet,
    mask_to_bbox,
    polygon_bbox,
    rasterize,
)
from .ontology import Ontology, Violation, ViolationKind

logger = logging.getLogger(__name__)

Segmentation = Union[PolygonSet, BinaryMask]

DEFAULT_ATTR_THRESHOLD = 0.5


@dataclass(frozen=True)
class ImageInfo:
    id: int
    height: int
    width: int
    file_name: str = ""


@dataclass(frozen=True)
class GroundTruthInstance:
    id: int
    image_id: int
    category_id: int
    segmentation: Optional[Segmentation]
    area: float
    bbox: BBox
    attributes: frozenset[int] = frozenset()
    ignore: bool = False
    # attribute superclasses the annotator marked "not sure"
    not_sure: frozenset[str] = frozenset()


@dataclass(frozen=True)
class DetectionInstance:
    image_id: int
    category_id: int
    segmentation: Optional[Segmentation]
    bbox: BBox
    score: float
    attributes: frozenset[int] = frozenset()
    index: int = 0  # position in the prediction file, used to break score ties


@dataclass(frozen=True)
class EvalDataset:
    images: Mapping[int, ImageInfo]
    ontology: Ontology
    ground_truth: tuple[GroundTruthInstance, ...] = ()
    detections: tuple[DetectionInstance, ...] = ()
    gt_index: Mapping[tuple[int, int], tuple[GroundTruthInstance, ...]] = field(
        default_factory=dict, compare=False, repr=False)
    det_index: Mapping[tuple[int, int], tuple[DetectionInstance, ...]] = field(
        default_factory=dict, compare=False, repr=False)

    def gts(self, image_id: int, category_id: int) -> tuple[GroundTruthInstance, ...]:
        return self.gt_index.get((image_id, category_id), ())

    def dets(self, image_id: int, category_id: int) -> tuple[DetectionInstance, ...]:
        return self.det_index.get((image_id, category_id), ())

    def instances_by_image(self) -> dict[int, list[GroundTruthInstance]]:
        out: dict[int, list[GroundTruthInstance]] = {i: [] for i in self.images}
        for g in self.ground_truth:
            out[g.image_id].append(g)
        return out


def _index(items: Iterable, key) -> dict:
    out: dict = {}
    for it in items:
        out.setdefault((it.image_id, it.category_id), []).append(it)
    return {k: tuple(sorted(v, key=key)) for k, v in sorted(out.items())}


def _det_order(d: DetectionInstance):
    return (-d.score, d.index)


def build_dataset(images: Mapping[int, ImageInfo], ontology: Ontology,
                  ground_truth: Iterable[GroundTruthInstance] = (),
                  detections: Iterable[DetectionInstance] = ()) -> EvalDataset:
    """Assemble an indexed dataset. Ground truth is kept sorted by id."""
    gts = tuple(sorted(ground_truth, key=lambda g: g.id))
    dets = tuple(detections)
    return EvalDataset(
        dict(sorted(images.items())), ontology, gts, dets,
        _index(gts, key=lambda g: g.id),
        _index(dets, key=_det_order),
    )


def with_detections(ds: EvalDataset, detections: Iterable[DetectionInstance]) -> EvalDataset:
    return build_dataset(ds.images, ds.ontology, ds.ground_truth, detections)


# -- segmentation helpers -----------------------------------------------------


def parse_segmentation(raw: Any) -> Optional[Segmentation]:
    if raw is None or raw == []:
        return None if raw is None else PolygonSet(())
    if isinstance(raw, dict):
        counts = raw.get("counts")
        if isinstance(counts, str):
            raise GeometryError("compressed RLE strings are not supported; use uncompressed counts")
        try:
            h, w = (int(v) for v in raw["size"])
        except (KeyError, TypeError, ValueError):
            raise GeometryError(f"RLE object needs size [h, w]: {raw!r}") from None
        return BinaryMask(h, w, tuple(counts or ()))
    if isinstance(raw, list):
        return PolygonSet.from_flat(raw)
    raise GeometryError(f"unrecognized segmentation {type(raw).__name__}")


def segmentation_to_json(seg: Optional[Segmentation]) -> Any:
    if seg is None:
        return None
    if isinstance(seg, BinaryMask):
        return {"size": [seg.height, seg.width], "counts": list(seg.runs)}
    return seg.to_flat()


def to_mask(seg: Segmentation, image: ImageInfo) -> BinaryMask:
    if isinstance(seg, BinaryMask):
        return seg
    return rasterize(seg, image.height, image.width)


def seg_bbox(seg: Segmentation) -> BBox:
    return mask_to_bbox(seg) if isinstance(seg, BinaryMask) else polygon_bbox(seg)


def check_instance_geometry(inst, image: Optional[ImageInfo]) -> None:
    """Raise GeometryError when an instance's geometry is unusable."""
    seg = inst.segmentation
    if isinstance(seg, BinaryMask) and image is not None:
        if (seg.height, seg.width) != (image.height, image.width):
            raise GeometryError(
                f"mask size {seg.height}x{seg.width} differs from image "
                f"{image.height}x{image.width}"
            )
    if getattr(inst, "ignore", False):
        return
    if seg is None and inst.bbox.area <= 0:
        raise GeometryError("instance has neither segmentation nor box")
    if getattr(inst, "area", 1) <= 0:
        raise GeometryError("instance has zero area")


def convert_segmentation(inst: GroundTruthInstance, image: ImageInfo) -> GroundTruthInstance:
    """Rasterize a polygon instance; the area becomes the mask pixel count."""
    seg = inst.segmentation
    if seg is None or isinstance(seg, BinaryMask):
        return inst
    mask = rasterize(seg, image.height, image.width)
    return replace(inst, segmentation=mask, area=float(mask.area))


def convert_dataset(ds: EvalDataset) -> EvalDataset:
    return build_dataset(
        ds.images, ds.ontology,
        [convert_segmentation(g, ds.images[g.image_id]) for g in ds.ground_truth],
        ds.detections,
    )


# -- ground truth ---------------------------------------------------------------


def _read_json(path) -> Any:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


def _parse_bbox(raw) -> Optional[BBox]:
    if raw is None:
        return None
    if len(raw) != 4:
        raise GeometryError(f"bbox needs 4 numbers, got {raw!r}")
    return BBox(*(float(v) for v in raw))


def parse_images(doc: Mapping) -> dict[int, ImageInfo]:
    images = {}
    for raw in doc.get("images", []):
        img = ImageInfo(int(raw["id"]), int(raw["height"]), int(raw["width"]),
                        raw.get("file_name", ""))
        if img.id in images:
            raise DataError(f"duplicate image id {img.id}")
        if img.height <= 0 or img.width <= 0:
            raise DataError(f"image {img.id} has invalid size {img.height}x{img.width}")
        images[img.id] = img
    return images


def parse_annotation(raw: Mapping, image: Optional[ImageInfo]) -> GroundTruthInstance:
    """Build one instance; geometry problems raise GeometryError."""
    seg = parse_segmentation(raw.get("segmentation"))
    bbox = _parse_bbox(raw.get("bbox"))
    area = raw.get("area")
    if area is None:
        if seg is None:
            area = bbox.area if bbox is not None else 0.0
        elif isinstance(seg, BinaryMask):
            area = seg.area
        elif image is not None:
            area = rasterize(seg, image.height, image.width).area
        else:
            raise GeometryError("cannot compute polygon area without image size")
    if bbox is None:
        bbox = seg_bbox(seg) if seg is not None else BBox(0.0, 0.0, 0.0, 0.0)
    return GroundTruthInstance(
        id=int(raw["id"]),
        image_id=int(raw["image_id"]),
        category_id=int(raw["category_id"]),
        segmentation=seg,
        area=float(area),
        bbox=bbox,
        attributes=frozenset(int(a) for a in raw.get("attribute_ids", ())),
        ignore=bool(raw.get("iscrowd", 0)) or bool(raw.get("ignore", False)),
        not_sure=frozenset(raw.get("not_sure", ())),
    )


def read_ground_truth(source) -> tuple[dict[int, ImageInfo], list[GroundTruthInstance], list[Violation]]:
    """Lenient reader used for auditing.

    Annotations with unusable geometry are kept without segmentation and
    reported as geometry violations instead of aborting.
    """
    doc = source if isinstance(source, Mapping) else _read_json(source)
    try:
        images = parse_images(doc)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, DataError):
            raise
        raise DataError(f"malformed image entry: {exc!r}") from exc
    instances, issues = [], []
    for raw in doc.get("annotations", []):
        try:
            ann_id = int(raw["id"])
            image = images.get(int(raw["image_id"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed annotation {raw!r}: {exc!r}") from exc
        try:
            inst = parse_annotation(raw, image)
        except GeometryError as exc:
            issues.append(Violation(ann_id, ViolationKind.GEOMETRY_ERROR, str(exc)))
            inst = GroundTruthInstance(
                ann_id, int(raw["image_id"]), int(raw["category_id"]), None, 0.0,
                BBox(0.0, 0.0, 0.0, 0.0),
                frozenset(int(a) for a in raw.get("attribute_ids", ())),
                ignore=True,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed annotation {ann_id}: {exc!r}") from exc
        instances.append(inst)
    return images, instances, issues


def ground_truth_from_json(doc: Mapping, o: Ontology) -> EvalDataset:
    images, instances, issues = read_ground_truth(doc)
    geometry = {v.instance_id: v for v in issues}
    seen: set[int] = set()
    checked = []
    for g in instances:
        if g.id in seen:
            raise DataError(f"duplicate annotation id {g.id}")
        seen.add(g.id)
        if g.image_id not in images:
            raise DataError(f"annotation {g.id} references missing image {g.image_id}")
        if g.category_id not in o.categories:
            raise DataError(f"annotation {g.id} references unknown category {g.category_id}")
        if g.id in geometry:
            raise DataError(str(geometry[g.id]))
        try:
            check_instance_geometry(g, images[g.image_id])
        except GeometryError as exc:
            if g.area > 0:
                raise DataError(f"annotation {g.id}: {exc}") from exc
            # zero-area masks carry no pixels to match; evaluate them as ignored
            logger.warning("annotation %d has zero area; marking it ignored", g.id)
            g = replace(g, ignore=True)
        checked.append(g)
    return build_dataset(images, o, checked)


def load_ground_truth(path, o: Ontology) -> EvalDataset:
    """Read and index a ground-truth file.

    Raises:
        DataError: unreadable file, dangling image/category reference,
            duplicate annotation id, or bad geometry.
    """
    return ground_truth_from_json(_read_json(path), o)


def dump_ground_truth(ds: EvalDataset) -> dict:
    images = [
        {"id": i.id, "width": i.width, "height": i.height, "file_name": i.file_name}
        for i in ds.images.values()
    ]
    annotations = []
    for g in ds.ground_truth:
        ann = {
            "id": g.id,
            "image_id": g.image_id,
            "category_id": g.category_id,
            "segmentation": segmentation_to_json(g.segmentation),
            "area": g.area,
            "bbox": g.bbox.as_list(),
            "iscrowd": int(g.ignore),
            "attribute_ids": sorted(g.attributes),
        }
        if g.not_sure:
            ann["not_sure"] = sorted(g.not_sure)
        annotations.append(ann)
    onto = ds.ontology.to_json()
    return {
        "images": images,
        "annotations": annotations,
        "categories": onto["categories"],
        "attributes": onto["attributes"],
    }


# -- predictions --------------------------------------------------------------


def _score(value, what: str) -> float:
    s = float(value)
    if not math.isfinite(s) or not 0.0 <= s <= 1.0:
        raise DataError(f"{what} {value!r} outside [0, 1]")
    return s


def parse_detection(raw: Mapping, index: int, ds: EvalDataset,
                    attr_threshold: float = DEFAULT_ATTR_THRESHOLD) -> DetectionInstance:
    image_id, category_id = int(raw["image_id"]), int(raw["category_id"])
    if image_id not in ds.images:
        raise DataError(f"prediction {index} references unknown image {image_id}")
    if category_id not in ds.ontology.categories:
        raise DataError(f"prediction {index} references unknown category {category_id}")
    score = _score(raw.get("score"), f"prediction {index} score")
    try:
        seg = parse_segmentation(raw.get("segmentation"))
        bbox = _parse_bbox(raw.get("bbox"))
    except GeometryError as exc:
        raise DataError(f"prediction {index}: {exc}") from exc
    if bbox is None:
        if seg is None:
            raise DataError(f"prediction {index} has neither segmentation nor bbox")
        bbox = seg_bbox(seg)
    if "attribute_ids" in raw:
        attrs = frozenset(int(a) for a in raw["attribute_ids"])
    else:
        attrs = frozenset(
            int(a) for a, p in raw.get("attribute_scores", {}).items()
            if _score(p, f"prediction {index} attribute score") >= attr_threshold
        )
    unknown = sorted(attrs - ds.ontology.attributes.keys())
    if unknown:
        raise DataError(f"prediction {index} has unknown attribute ids {unknown}")
    return DetectionInstance(image_id, category_id, seg, bbox, score, attrs, index)


def predictions_from_json(items, ds: EvalDataset,
                          attr_threshold: float = DEFAULT_ATTR_THRESHOLD) -> EvalDataset:
    if not isinstance(items, list):
        raise DataError("predictions file must hold a JSON array")
    try:
        dets = [parse_detection(raw, i, ds, attr_threshold) for i, raw in enumerate(items)]
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, DataError):
            raise
        raise DataError(f"malformed prediction: {exc!r}") from exc
    return with_detections(ds, dets)


def load_predictions(path, ds: EvalDataset,
                     attr_threshold: float = DEFAULT_ATTR_THRESHOLD) -> EvalDataset:
    """Attach detections from a prediction file to a ground-truth dataset.

    Detections given with ``attribute_scores`` keep attribute ``a`` iff its
    score is at least ``attr_threshold``.
    """
    return predictions_from_json(_read_json(path), ds, attr_threshold)


def dump_predictions(ds: EvalDataset) -> list[dict]:
    out = []
    for d in sorted(ds.detections, key=lambda d: d.index):
        item = {
            "image_id": d.image_id,
            "category_id": d.category_id,
            "bbox": d.bbox.as_list(),
            "score": d.score,
            "attribute_ids": sorted(d.attributes),
        }
        if d.segmentation is not None:
            item["segmentation"] = segmentation_to_json(d.segmentation)
        out.append(item)
    return out
