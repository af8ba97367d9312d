"""Fixture builders shared by the test modules."""

from __future__ import annotations

import numpy as np

from attrseg.dataset import (
    DetectionInstance,
    GroundTruthInstance,
    ImageInfo,
    build_dataset,
)
from attrseg.geometry import BinaryMask, encode, mask_to_bbox
from attrseg.ontology import load_ontology

BUNDLED = load_ontology()

# category ids in the bundled ontology
JACKET = BUNDLED.category_by_name("jacket").id
DRESS = BUNDLED.category_by_name("dress").id
SHOE = BUNDLED.category_by_name("shoe").id
SLEEVE = BUNDLED.category_by_name("sleeve").id


def rect(h: int, w: int, y0: int, x0: int, y1: int, x1: int) -> BinaryMask:
    """Mask of the half-open pixel rectangle rows [y0, y1), columns [x0, x1)."""
    grid = np.zeros((h, w), dtype=bool)
    grid[y0:y1, x0:x1] = True
    return encode(grid)


def gt(id, image_id, category_id, mask: BinaryMask, attributes=(), ignore=False):
    return GroundTruthInstance(id, image_id, category_id, mask, float(mask.area),
                               mask_to_bbox(mask), frozenset(attributes), ignore)


def det(image_id, category_id, mask: BinaryMask, score, attributes=(), index=0):
    return DetectionInstance(image_id, category_id, mask, mask_to_bbox(mask), score,
                             frozenset(attributes), index)


def dataset(images: dict, gts=(), dets=(), ontology=BUNDLED):
    """``images`` maps id -> (height, width). Detection indices follow list order."""
    infos = {i: ImageInfo(i, h, w) for i, (h, w) in images.items()}
    dets = [DetectionInstance(d.image_id, d.category_id, d.segmentation, d.bbox, d.score,
                              d.attributes, k) for k, d in enumerate(dets)]
    return build_dataset(infos, ontology, gts, dets)


def clone_detections(gts, score=1.0):
    return [det(g.image_id, g.category_id, g.segmentation, score, g.attributes) for g in gts]
