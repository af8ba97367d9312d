"""Matching, precision/recall accumulation and summaries.

A detection is a true positive at a threshold pair ``(t_iou, t_f1)`` when it
is greedily matched, in descending score order, to an unmatched ground truth
with ``IoU >= t_iou`` and attribute ``F1 >= t_f1``. Among eligible ground
truths the one with the highest IoU wins (ties: smallest id). A candidate
that fails either test is skipped and the ground truth stays available.

Matching is vectorized over every (area range, IoU threshold, F1 threshold)
configuration of a cell at once; one cell is one (image, category) pair.
The F1 axis of every tensor starts with a "constraint off" entry.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .attributes import MODES, ConfusionCounts, f1_from_counts
from .dataset import DetectionInstance, EvalDataset, GroundTruthInstance, ImageInfo, to_mask
from .errors import ContractError, DataError
from .geometry import BinaryMask, bbox_iou, intersection_area
from .ontology import SUPERCATEGORIES, applicable_attributes

TP, FP, IGNORED = 1, 0, -1
OUTCOMES = {TP: "TP", FP: "FP", IGNORED: "ignored"}


def threshold_grid(lo: float, hi: float, step: float) -> tuple[float, ...]:
    n = int(round((hi - lo) / step)) + 1
    return tuple(round(lo + i * step, 10) for i in range(n))


@dataclass(frozen=True)
class AreaRange:
    name: str
    lo: float
    hi: float

    def contains(self, area: float) -> bool:
        return self.lo <= area < self.hi


DEFAULT_AREA_RANGES = (
    AreaRange("all", 0.0, math.inf),
    AreaRange("small", 0.0, 32.0 ** 2),
    AreaRange("medium", 32.0 ** 2, 96.0 ** 2),
    AreaRange("large", 96.0 ** 2, math.inf),
)

ALL_AREAS = (DEFAULT_AREA_RANGES[0],)


@dataclass(frozen=True)
class EvalParams:
    iou_thresholds: tuple[float, ...] = threshold_grid(0.5, 0.95, 0.05)
    f1_thresholds: tuple[float, ...] = threshold_grid(0.5, 0.95, 0.05)
    f1_mode: str = "binary-macro"
    recall_points: tuple[float, ...] = threshold_grid(0.0, 1.0, 0.01)
    max_detections: tuple[int, ...] = (1, 10, 100)
    area_ranges: tuple[AreaRange, ...] = DEFAULT_AREA_RANGES
    eval_kind: str = "mask"
    f1_constraint_enabled: bool = True
    exclude_not_sure: bool = False

    def __post_init__(self):
        for name in ("iou_thresholds", "f1_thresholds", "recall_points", "max_detections"):
            vals = tuple(getattr(self, name))
            object.__setattr__(self, name, vals)
            if list(vals) != sorted(vals) or not vals:
                raise ContractError(f"{name} must be non-empty and sorted ascending")
        if self.recall_points[0] != 0.0 or self.recall_points[-1] != 1.0:
            raise ContractError("recall points must start at 0 and end at 1")
        if self.f1_mode not in MODES:
            raise ContractError(f"unknown F1 mode {self.f1_mode!r}")
        if self.eval_kind not in ("mask", "box"):
            raise ContractError(f"eval_kind must be 'mask' or 'box', got {self.eval_kind!r}")
        if not self.area_ranges:
            raise ContractError("at least one area range is required")

    @property
    def f1_axis(self) -> tuple[Optional[float], ...]:
        """F1 thresholds as evaluated; ``None`` is the constraint-off slot."""
        if self.f1_constraint_enabled:
            return (None,) + self.f1_thresholds
        return (None,)

    def to_json(self) -> dict:
        return {
            "iou_thresholds": list(self.iou_thresholds),
            "f1_thresholds": list(self.f1_thresholds) if self.f1_constraint_enabled else None,
            "f1_mode": self.f1_mode,
            "recall_points": len(self.recall_points),
            "max_detections": list(self.max_detections),
            "area_ranges": [[a.name, a.lo, None if math.isinf(a.hi) else a.hi]
                            for a in self.area_ranges],
            "eval_kind": self.eval_kind,
            "exclude_not_sure": self.exclude_not_sure,
        }


# -- per-cell preparation ----------------------------------------------------


@dataclass
class Cell:
    """Everything matching needs for one (image, category) pair."""

    image_id: int
    category_id: int
    scores: np.ndarray  # (D,) descending
    det_area: np.ndarray  # (D,)
    gt_ids: np.ndarray  # (G,) ascending
    gt_area: np.ndarray  # (G,)
    gt_flag_ignore: np.ndarray  # (G,) bool
    iou: np.ndarray  # (D, G)
    f1: np.ndarray  # (D, G); +inf where the category carries no attributes


class _MaskCache:
    def __init__(self, images: Mapping[int, ImageInfo]):
        self.images = images
        self._gt: dict[int, BinaryMask] = {}

    def gt_mask(self, g: GroundTruthInstance) -> Optional[BinaryMask]:
        if g.segmentation is None:
            return None
        m = self._gt.get(g.id)
        if m is None:
            m = self._gt[g.id] = to_mask(g.segmentation, self.images[g.image_id])
        return m

    def det_mask(self, d: DetectionInstance) -> BinaryMask:
        if d.segmentation is None:
            raise DataError(
                f"detection {d.index} has no segmentation; use box evaluation"
            )
        return to_mask(d.segmentation, self.images[d.image_id])


def _iou_matrix(dets, gts, kind: str, cache: _MaskCache) -> np.ndarray:
    out = np.zeros((len(dets), len(gts)))
    if kind == "box":
        for i, d in enumerate(dets):
            for j, g in enumerate(gts):
                out[i, j] = bbox_iou(d.bbox, g.bbox)
        return out
    gmasks = [cache.gt_mask(g) for g in gts]
    for i, d in enumerate(dets):
        dm = cache.det_mask(d)
        for j, (g, gm) in enumerate(zip(gts, gmasks)):
            if gm is None:
                out[i, j] = bbox_iou(d.bbox, g.bbox)
                continue
            inter = intersection_area(dm, gm)
            union = dm.area + gm.area - inter
            out[i, j] = inter / union if union else 0.0
    return out


def _attribute_f1(g: GroundTruthInstance, pred: frozenset, universe: int, mode: str,
                  exclude_not_sure: bool, ontology) -> float:
    gt_attrs = g.attributes
    if exclude_not_sure and g.not_sure:
        drop = frozenset().union(*(ontology.attributes_of_superclass(s) for s in g.not_sure))
        gt_attrs, pred = gt_attrs - drop, pred - drop
    tp = len(gt_attrs & pred)
    fp, fn = len(pred) - tp, len(gt_attrs) - tp
    return f1_from_counts(ConfusionCounts(tp, fp, fn, universe - tp - fp - fn), mode)


def prepare_cell(ds: EvalDataset, image_id: int, category_id: int, params: EvalParams,
                 cache: _MaskCache, max_det: Optional[int] = None,
                 bearing: Optional[bool] = None) -> Cell:
    dets = ds.dets(image_id, category_id)[: max_det or max(params.max_detections)]
    gts = ds.gts(image_id, category_id)
    if bearing is None:
        bearing = bool(applicable_attributes(ds.ontology, category_id))
    iou = _iou_matrix(dets, gts, params.eval_kind, cache)
    f1 = np.full((len(dets), len(gts)), np.inf)
    if bearing and params.f1_constraint_enabled:
        universe = ds.ontology.num_attributes
        for i, d in enumerate(dets):
            for j, g in enumerate(gts):
                f1[i, j] = _attribute_f1(g, d.attributes, universe, params.f1_mode,
                                         params.exclude_not_sure, ds.ontology)
    if params.eval_kind == "box":
        det_area = [d.bbox.area for d in dets]
    else:
        det_area = [cache.det_mask(d).area for d in dets]
    return Cell(
        image_id, category_id,
        np.array([d.score for d in dets], dtype=np.float64),
        np.array(det_area, dtype=np.float64),
        np.array([g.id for g in gts], dtype=np.int64),
        np.array([g.area for g in gts], dtype=np.float64),
        np.array([g.ignore for g in gts], dtype=bool),
        iou, f1,
    )


# -- matching ------------------------------------------------------------------


def _area_masks(values: np.ndarray, areas: Sequence[AreaRange]) -> np.ndarray:
    """(A, n) bool: value inside each area range."""
    return np.array([[a.contains(v) for v in values] for a in areas], dtype=bool).reshape(
        len(areas), len(values))


def match_cell(cell: Cell, iou_thresholds: Sequence[float], f1_axis: Sequence[Optional[float]],
               areas: Sequence[AreaRange]) -> tuple[np.ndarray, np.ndarray]:
    """Greedy matching for every configuration of one cell.

    Returns:
        ``status`` with shape (A, T, F, D) holding TP/FP/IGNORED, and
        ``matched`` with the same shape holding the matched column of
        ``cell.gt_ids`` or -1.
    """
    n_det, n_gt = cell.iou.shape
    n_area, n_iou, n_f1 = len(areas), len(iou_thresholds), len(f1_axis)
    shape = (n_area, n_iou, n_f1, n_det)
    matched = np.full(shape, -1, dtype=np.int64)
    det_out = ~_area_masks(cell.det_area, areas)  # (A, D)
    if n_gt == 0:
        status = np.where(det_out[:, None, None, :], IGNORED, FP).astype(np.int8)
        return np.broadcast_to(status, shape).copy(), matched
    status = np.empty(shape, dtype=np.int8)
    gt_ignore = cell.gt_flag_ignore[None, :] | ~_area_masks(cell.gt_area, areas)  # (A, G)
    ign = gt_ignore[:, None, None, :]
    tau_iou = np.asarray(iou_thresholds, dtype=np.float64)
    tau_f1 = np.array([-np.inf if t is None else t for t in f1_axis], dtype=np.float64)
    iou_ok = cell.iou[None, :, :] >= tau_iou[:, None, None]  # (T, D, G)
    f1_ok = cell.f1[None, :, :] >= tau_f1[:, None, None]  # (F, D, G)
    taken = np.zeros((n_area, n_iou, n_f1, n_gt), dtype=bool)
    for d in range(n_det):
        elig = (iou_ok[:, None, d, :] & f1_ok[None, :, d, :])[None] & ~taken
        row = cell.iou[d]
        real = elig & ~ign
        has_real = real.any(-1)
        best_real = np.where(real, row, -1.0).argmax(-1)
        cand_ign = elig & ign
        has_ign = cand_ign.any(-1) & ~has_real
        best_ign = np.where(cand_ign, row, -1.0).argmax(-1)
        hit = has_real | has_ign
        best = np.where(has_real, best_real, best_ign)
        np.put_along_axis(taken, best[..., None], hit[..., None] | np.take_along_axis(
            taken, best[..., None], -1), -1)
        matched[..., d] = np.where(hit, best, -1)
        unmatched = np.where(det_out[:, d, None, None], IGNORED, FP)
        status[..., d] = np.where(has_real, TP, np.where(has_ign, IGNORED, unmatched))
    return status, matched


@dataclass(frozen=True)
class MatchRecord:
    detection: DetectionInstance
    score: float
    matched_gt: Optional[int]
    best_iou: float
    attribute_f1: Optional[float]
    outcome: str

    def __post_init__(self):
        if (self.outcome == "TP") != (self.matched_gt is not None):
            raise ContractError("TP records must name their ground truth and only they may")


def match(dets: Sequence[DetectionInstance], gts: Sequence[GroundTruthInstance],
          iou_threshold: float, f1_threshold: Optional[float], area_range: AreaRange,
          max_det: int, ds: EvalDataset, params: Optional[EvalParams] = None) -> list[MatchRecord]:
    """Match one (image, category) cell at a single threshold pair.

    ``f1_threshold=None`` disables the attribute constraint.
    """
    params = params or EvalParams()
    for a, b in zip(dets, dets[1:]):
        if (a.score, -a.index) < (b.score, -b.index):
            raise ContractError("detections must be sorted by descending score")
    dets = list(dets)[:max_det]
    sub = replace(params, f1_constraint_enabled=f1_threshold is not None)
    keys = {(d.image_id, d.category_id) for d in dets} | {(g.image_id, g.category_id) for g in gts}
    if len(keys) > 1:
        raise ContractError("detections and ground truths must share image and category")
    if not keys:
        return []
    ((image_id, category_id),) = keys
    view = EvalDataset(ds.images, ds.ontology, tuple(gts), tuple(dets),
                       {(image_id, category_id): tuple(sorted(gts, key=lambda g: g.id))},
                       {(image_id, category_id): tuple(dets)})
    cell = prepare_cell(view, image_id, category_id, sub, _MaskCache(ds.images), max_det=max_det)
    status, matched = match_cell(cell, (iou_threshold,), (f1_threshold,), (area_range,))
    records = []
    for i, d in enumerate(dets):
        col = int(matched[0, 0, 0, i])
        outcome = OUTCOMES[int(status[0, 0, 0, i])]
        gt_id = int(cell.gt_ids[col]) if outcome == "TP" else None
        f1 = None
        if col >= 0 and np.isfinite(cell.f1[i, col]):
            f1 = float(cell.f1[i, col])
        best = float(cell.iou[i].max()) if cell.iou.shape[1] else 0.0
        records.append(MatchRecord(d, d.score, gt_id, best, f1, outcome))
    return records


# -- accumulation ----------------------------------------------------------------


@dataclass
class CellResult:
    image_id: int
    category_id: int
    scores: np.ndarray  # (D,)
    status: np.ndarray  # (A, T, F, D)
    n_gt: np.ndarray  # (A,) ground truths counted (not ignored) per area range


def _sample_curves(tps: np.ndarray, fps: np.ndarray, n_gt: np.ndarray,
                   recall_points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Interpolated precision at the recall points plus final recall, per row.

    ``tps``/``fps`` are cumulative counts of shape (rows, n) and ``n_gt`` the
    positive count of each row (all > 0). Recall can only take the values
    k / n_gt, so "first rank with recall >= r" becomes "first rank with
    tp >= k_min(r)", an exact integer search instead of a float one.
    """
    rows, n = tps.shape
    out = np.zeros((rows, recall_points.size))
    if n == 0:
        return out, np.zeros(rows)
    denom = tps + fps
    pr = np.divide(tps, denom, out=np.zeros(tps.shape), where=denom > 0)
    pr = np.maximum.accumulate(pr[:, ::-1], axis=1)[:, ::-1]
    k_min = np.empty((rows, recall_points.size), dtype=np.int64)
    for g in np.unique(n_gt):
        levels = np.arange(g + 1) / g
        k_min[n_gt == g] = np.searchsorted(levels, recall_points, side="left")
    # offset rows so one sorted search covers all of them
    stride = int(n_gt.max()) + 2
    offset = np.arange(rows, dtype=np.int64)[:, None] * stride
    pos = np.searchsorted((tps + offset).ravel(), (k_min + offset).ravel(), side="left")
    row = np.repeat(np.arange(rows), recall_points.size)
    col = pos - row * n
    ok = col < n
    out.ravel()[ok] = pr[row[ok], col[ok]]
    return out, tps[:, -1] / n_gt


def accumulate_category(results: Sequence[CellResult], max_detections: Sequence[int],
                        recall_points: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Pool one category's cells (in image order) into PR samples.

    Returns:
        precision (A, T, F, R, M) and recall (A, T, F, M); -1 marks area
        ranges without counted ground truth.
    """
    rp = np.asarray(recall_points, dtype=np.float64)
    head = results[0].status.shape[:3]
    n_gt = np.sum([r.n_gt for r in results], axis=0)
    precision = np.full(head + (rp.size, len(max_detections)), -1.0)
    recall = np.full(head + (len(max_detections),), -1.0)
    scores = np.concatenate([r.scores for r in results])
    status = np.concatenate([r.status for r in results], axis=-1)
    ranks = np.concatenate([np.arange(r.scores.size) for r in results])
    rows = int(np.prod(head))
    row_gt = np.repeat(n_gt, rows // head[0])
    defined = row_gt > 0
    for m_i, m in enumerate(max_detections):
        keep = ranks < m
        order = np.argsort(-scores[keep], kind="stable")
        st = status[..., keep][..., order].reshape(rows, -1)[defined]
        tps = np.cumsum(st == TP, axis=1)
        fps = np.cumsum(st == FP, axis=1)
        prec = precision[..., m_i].reshape(rows, rp.size)
        rec = recall[..., m_i].reshape(rows)
        if defined.any():
            prec[defined], rec[defined] = _sample_curves(tps, fps, row_gt[defined], rp)
        precision[..., m_i] = prec.reshape(head + (rp.size,))
        recall[..., m_i] = rec.reshape(head)
    return precision, recall


@dataclass
class EvalResult:
    """Precision ``[T, F, R, K, A, M]`` and recall ``[T, F, K, A, M]`` tensors.

    The F axis follows ``params.f1_axis``; entry 0 has the F1 constraint off.
    Cells without ground truth hold -1.
    """

    params: EvalParams
    category_ids: tuple[int, ...]
    attribute_bearing: np.ndarray  # (K,) bool
    precision: np.ndarray
    recall: np.ndarray
    category_names: tuple[str, ...] = ()
    supercategories: tuple[str, ...] = ()


def _evaluate_cells(ds: EvalDataset, params: EvalParams, keys, bearing, iou_thresholds,
                    f1_axis, areas, workers: int) -> list[CellResult]:
    cache = _MaskCache(ds.images)

    def run(key) -> CellResult:
        image_id, category_id = key
        cell = prepare_cell(ds, image_id, category_id, params, cache, bearing=bearing[category_id])
        status, _ = match_cell(cell, iou_thresholds, f1_axis, areas)
        counted = ~cell.gt_flag_ignore[None, :] & _area_masks(cell.gt_area, areas)
        return CellResult(image_id, category_id, cell.scores, status, counted.sum(axis=1))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run, keys, chunksize=64))
    return [run(k) for k in keys]


def _cell_keys(ds: EvalDataset, category_ids) -> list[tuple[int, int]]:
    wanted = set(category_ids)
    keys = set(ds.gt_index) | set(ds.det_index)
    return sorted(k for k in keys if k[1] in wanted)


def evaluate(ds: EvalDataset, params: Optional[EvalParams] = None,
             category_ids: Optional[Iterable[int]] = None, workers: int = 1) -> EvalResult:
    """Run matching and accumulation over the whole dataset.

    Results do not depend on ``workers``: cells are matched independently
    and merged in (category, image) order.
    """
    params = params or EvalParams()
    o = ds.ontology
    cats = tuple(sorted(category_ids if category_ids is not None else o.categories))
    bearing = {c: bool(applicable_attributes(o, c)) for c in cats}
    f1_axis = params.f1_axis
    n_iou, n_f1, n_rec = len(params.iou_thresholds), len(f1_axis), len(params.recall_points)
    n_area, n_det = len(params.area_ranges), len(params.max_detections)
    precision = np.full((n_iou, n_f1, n_rec, len(cats), n_area, n_det), -1.0)
    recall = np.full((n_iou, n_f1, len(cats), n_area, n_det), -1.0)

    cells = _evaluate_cells(ds, params, _cell_keys(ds, cats), bearing,
                            params.iou_thresholds, f1_axis, params.area_ranges, workers)
    by_cat: dict[int, list[CellResult]] = {}
    for c in cells:
        by_cat.setdefault(c.category_id, []).append(c)
    for k, cat in enumerate(cats):
        if cat not in by_cat:
            continue
        p, r = accumulate_category(by_cat[cat], params.max_detections, params.recall_points)
        # (A, T, F, R, M) -> (T, F, R, A, M)
        precision[:, :, :, k] = p.transpose(1, 2, 3, 0, 4)
        recall[:, :, k] = r.transpose(1, 2, 0, 3)
    return EvalResult(
        params, cats, np.array([bearing[c] for c in cats], dtype=bool), precision, recall,
        tuple(o.categories[c].name for c in cats),
        tuple(o.categories[c].supercategory for c in cats),
    )


# -- summaries -------------------------------------------------------------------


def mean_defined(values: np.ndarray) -> float:
    """Mean over entries > -1, or -1 if none; exact and order-independent."""
    vals = np.asarray(values)[np.asarray(values) > -1]
    if vals.size == 0:
        return -1.0
    return math.fsum(vals.tolist()) / vals.size


def _pick(values: Sequence, wanted, what: str) -> list[int]:
    for i, v in enumerate(values):
        if v is not None and abs(v - wanted) < 1e-9:
            return [i]
    raise ContractError(f"{what} {wanted} was not evaluated (have {list(values)})")


def summarize(r: EvalResult, metric: str = "AP", iou: Optional[float] = None, f1="off",
              area: str = "all", max_det: Optional[int] = None,
              categories: Optional[Iterable[int]] = None) -> float:
    """Average a slice of an EvalResult.

    Args:
        metric: ``"AP"`` (mean interpolated precision) or ``"AR"`` (mean recall).
        iou: a single evaluated IoU threshold, or ``None`` for all of them.
        f1: ``"off"`` (constraint disabled), ``"all"`` (average over every F1
            threshold) or a single evaluated F1 threshold. Anything but
            ``"off"`` restricts the average to attribute-bearing categories.
        area: area-range name.
        max_det: detection budget; defaults to the largest evaluated.
        categories: category ids to include; defaults to all.
    """
    p = r.params
    if metric not in ("AP", "AR"):
        raise ContractError(f"metric must be AP or AR, got {metric!r}")
    t_idx = list(range(len(p.iou_thresholds))) if iou is None else _pick(
        p.iou_thresholds, iou, "IoU threshold")
    axis = p.f1_axis
    if f1 == "off":
        f_idx = [0]
    elif len(axis) == 1:
        raise ContractError("the F1 constraint was not evaluated")
    elif f1 == "all":
        f_idx = list(range(1, len(axis)))
    else:
        f_idx = _pick(axis, f1, "F1 threshold")
    names = [a.name for a in p.area_ranges]
    if area not in names:
        raise ContractError(f"area range {area!r} was not evaluated (have {names})")
    a_idx = names.index(area)
    max_det = max(p.max_detections) if max_det is None else max_det
    if max_det not in p.max_detections:
        raise ContractError(f"max_det {max_det} was not evaluated")
    m_idx = p.max_detections.index(max_det)
    wanted = set(r.category_ids if categories is None else categories)
    unknown = wanted - set(r.category_ids)
    if unknown:
        raise ContractError(f"categories {sorted(unknown)} were not evaluated")
    k_idx = [k for k, c in enumerate(r.category_ids)
             if c in wanted and (f1 == "off" or r.attribute_bearing[k])]
    if not k_idx:
        return -1.0
    if metric == "AP":
        s = r.precision[np.ix_(t_idx, f_idx, range(len(p.recall_points)), k_idx, [a_idx], [m_idx])]
    else:
        s = r.recall[np.ix_(t_idx, f_idx, k_idx, [a_idx], [m_idx])]
    return mean_defined(s)


def _metric_block(r: EvalResult, categories=None, with_f1: bool = True) -> dict:
    p = r.params
    names = [a.name for a in p.area_ranges]
    top = max(p.max_detections)
    modes = [("off", "")]
    if p.f1_constraint_enabled:
        modes.append(("all", "_F1"))
    out = {}

    for f1, suffix in modes:
        def put(key, value, blank=bool(suffix) and not with_f1):
            out[key] = None if blank or value == -1.0 else value

        put("AP_IoU" if not suffix else "AP_IoU_F1", summarize(r, "AP", f1=f1, categories=categories))
        for t, label in ((0.5, "AP50"), (0.75, "AP75")):
            if any(abs(v - t) < 1e-9 for v in p.iou_thresholds):
                put(label + suffix, summarize(r, "AP", iou=t, f1=f1, categories=categories))
        for area, label in (("small", "APs"), ("medium", "APm"), ("large", "APl")):
            if area in names:
                put(label + suffix, summarize(r, "AP", f1=f1, area=area, categories=categories))
        for k in p.max_detections:
            put(f"AR@{k}{suffix}", summarize(r, "AR", f1=f1, max_det=k, categories=categories))
        for area, label in (("small", "ARs@"), ("medium", "ARm@"), ("large", "ARl@")):
            if area in names:
                put(f"{label}{top}{suffix}",
                    summarize(r, "AR", f1=f1, area=area, categories=categories))
    return out


def metrics_table(r: EvalResult) -> dict:
    """Headline metrics plus per-category and per-supercategory breakdowns.

    Categories without applicable attributes get ``None`` for every
    F1-constrained value.
    """
    out = _metric_block(r)
    out["per_category"] = []
    for k, cat in enumerate(r.category_ids):
        block = {"id": cat, "name": r.category_names[k], "supercategory": r.supercategories[k]}
        block.update(_metric_block(r, [cat], with_f1=bool(r.attribute_bearing[k])))
        out["per_category"].append(block)
    out["per_supercategory"] = []
    for sc in SUPERCATEGORIES:
        members = [c for c, s in zip(r.category_ids, r.supercategories) if s == sc]
        if not members:
            continue
        bearing = any(r.attribute_bearing[r.category_ids.index(c)] for c in members)
        block = {"supercategory": sc}
        block.update(_metric_block(r, members, with_f1=bearing))
        out["per_supercategory"].append(block)
    return out


# -- F1 threshold sweep ------------------------------------------------------------


def f1_sweep(ds: EvalDataset, params: Optional[EvalParams] = None,
             grid: Optional[Sequence[float]] = None, mode: Optional[str] = None,
             workers: int = 1) -> list[tuple[float, float]]:
    """AP for each F1 threshold, averaged over IoU thresholds and attribute-bearing categories."""
    params = params or EvalParams()
    grid = tuple(threshold_grid(0.0, 1.0, 0.01) if grid is None else grid)
    sub = replace(params, f1_thresholds=grid, f1_mode=mode or params.f1_mode,
                  f1_constraint_enabled=True, area_ranges=ALL_AREAS,
                  max_detections=(max(params.max_detections),))
    r = evaluate(ds, sub, workers=workers)
    return [(t, summarize(r, "AP", f1=t)) for t in grid]


# -- error breakdown ---------------------------------------------------------------

BREAKDOWN_SETTINGS = ("C75", "C50", "Loc", "Sim", "Oth", "BG", "FN")
LOC_IOU = 0.1


@dataclass
class PRBreakdown:
    """Seven PR curves, each setting more permissive than the one before."""

    recall_points: tuple[float, ...]
    curves: dict[str, np.ndarray] = field(default_factory=dict)
    n_categories: int = 0

    @property
    def auc(self) -> dict[str, float]:
        return {s: mean_defined(self.curves[s]) for s in BREAKDOWN_SETTINGS}

    def to_json(self) -> dict:
        return {
            "n_categories": self.n_categories,
            "auc": self.auc,
            "curves": {s: self.curves[s].tolist() for s in BREAKDOWN_SETTINGS},
        }


def _other_category_overlap(ds: EvalDataset, cache: _MaskCache, params: EvalParams,
                            det: DetectionInstance) -> tuple[bool, bool]:
    """Whether a detection overlaps (IoU >= 0.1) ground truth of another category,
    first within its own supercategory, then of any category."""
    o = ds.ontology
    own = o.categories[det.category_id].supercategory
    sim = oth = False
    for cat in o.categories:
        if cat == det.category_id:
            continue
        gts = ds.gts(det.image_id, cat)
        if not gts:
            continue
        iou = _iou_matrix([det], gts, params.eval_kind, cache)
        if (iou >= LOC_IOU).any():
            oth = True
            if o.categories[cat].supercategory == own:
                sim = True
                break
    return sim, oth


def error_breakdown(ds: EvalDataset, scope: str = "overall", params: Optional[EvalParams] = None,
                    f1_threshold: Optional[float] = None, workers: int = 1) -> dict[str, PRBreakdown]:
    """False-positive breakdown into the seven cumulative settings.

    C75/C50/Loc match at IoU 0.75/0.5/0.1. On top of Loc, Sim ignores false
    positives overlapping ground truth of another category in the same
    supercategory, Oth those overlapping any other category, BG ignores all
    false positives and FN additionally forgives misses (precision 1).

    Args:
        scope: ``"overall"``, ``"supercategory"`` or ``"category"``; keys of
            the returned mapping are ``"overall"``, supercategory names or
            category names.
        f1_threshold: apply the attribute constraint at this threshold;
            ``None`` (default) matches on IoU only.
    """
    if scope not in ("overall", "supercategory", "category"):
        raise ContractError(f"unknown scope {scope!r}")
    params = params or EvalParams()
    o = ds.ontology
    cats = tuple(sorted(o.categories))
    bearing = {c: bool(applicable_attributes(o, c)) for c in cats}
    top = max(params.max_detections)
    f1_axis = (f1_threshold,)
    sub = replace(params, f1_constraint_enabled=f1_threshold is not None, area_ranges=ALL_AREAS,
                  max_detections=(top,),
                  f1_thresholds=(f1_threshold,) if f1_threshold is not None else params.f1_thresholds)
    cells = _evaluate_cells(ds, sub, _cell_keys(ds, cats), bearing, (0.75, 0.5, LOC_IOU),
                            f1_axis, ALL_AREAS, workers)
    cache = _MaskCache(ds.images)
    rp = np.asarray(params.recall_points)
    per_cat: dict[int, dict[str, np.ndarray]] = {}
    by_cat: dict[int, list[CellResult]] = {}
    for c in cells:
        by_cat.setdefault(c.category_id, []).append(c)
    for cat, results in by_cat.items():
        variants = []
        for res in results:
            dets = ds.dets(res.image_id, res.category_id)[:top]
            loc = res.status[0, 2, 0]
            sim = loc.copy()
            oth = loc.copy()
            for i in np.flatnonzero(loc == FP):
                s_hit, o_hit = _other_category_overlap(ds, cache, sub, dets[i])
                if s_hit:
                    sim[i] = IGNORED
                if o_hit:
                    oth[i] = IGNORED
            bg = np.where(loc == FP, IGNORED, loc)
            st = np.stack([res.status[0, 0, 0], res.status[0, 1, 0], loc, sim, oth, bg])
            variants.append(CellResult(res.image_id, cat, res.scores, st[None, :, None, :], res.n_gt))
        prec, _ = accumulate_category(variants, (top,), params.recall_points)
        if prec[0, 0, 0, 0, 0] == -1.0:
            continue
        curves = {s: prec[0, i, 0, :, 0] for i, s in enumerate(BREAKDOWN_SETTINGS[:6])}
        curves["FN"] = np.ones(rp.size)
        per_cat[cat] = curves

    groups: dict[str, list[int]] = {}
    for cat in sorted(per_cat):
        if scope == "overall":
            key = "overall"
        elif scope == "supercategory":
            key = o.categories[cat].supercategory
        else:
            key = o.categories[cat].name
        groups.setdefault(key, []).append(cat)
    out = {}
    for key, members in groups.items():
        curves = {}
        for s in BREAKDOWN_SETTINGS:
            stack = np.stack([per_cat[c][s] for c in members])
            curves[s] = np.array([math.fsum(col) / len(members) for col in stack.T.tolist()])
        out[key] = PRBreakdown(tuple(params.recall_points), curves, len(members))
    return out
