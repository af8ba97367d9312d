"""Dataset statistics with percentile-bootstrap confidence intervals."""

from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .dataset import EvalDataset
from .errors import ContractError, ZeroAreaError
from .geometry import PolygonSet, boundary_complexity, relative_size, vertices_per_polygon

STATISTICS = ("mean", "median")


def _replicate_stats(x: np.ndarray, statistic: str, seed: int, start: int, stop: int) -> np.ndarray:
    out = np.empty(stop - start)
    fn = np.mean if statistic == "mean" else np.median
    for i, r in enumerate(range(start, stop)):
        rng = np.random.default_rng([seed, r])
        out[i] = fn(x[rng.integers(0, x.size, x.size)])
    return out


def bootstrap_replicates(samples: Sequence[float], statistic: str = "mean",
                         replicates: int = 10_000, seed: int = 0, workers: int = 1) -> np.ndarray:
    """Statistic of each resample; replicate ``r`` draws from a generator seeded by ``(seed, r)``."""
    x = np.asarray(samples, dtype=np.float64)
    if x.size == 0:
        raise ContractError("bootstrap needs at least one sample")
    if replicates < 1:
        raise ContractError("replicates must be >= 1")
    if statistic not in STATISTICS:
        raise ContractError(f"statistic must be one of {STATISTICS}")
    if workers <= 1:
        return _replicate_stats(x, statistic, seed, 0, replicates)
    bounds = np.linspace(0, replicates, workers + 1).astype(int)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = pool.map(lambda ab: _replicate_stats(x, statistic, seed, *ab),
                         zip(bounds[:-1], bounds[1:]))
        return np.concatenate(list(parts))


def bootstrap_ci(samples: Sequence[float], statistic: str = "mean", replicates: int = 10_000,
                 confidence: float = 0.95, seed: int = 0, workers: int = 1) -> tuple[float, float]:
    """Percentile bootstrap interval; both ends are replicate values."""
    if not 0 < confidence < 1:
        raise ContractError("confidence must be in (0, 1)")
    reps = bootstrap_replicates(samples, statistic, replicates, seed, workers)
    alpha = (1 - confidence) / 2
    lo, hi = np.quantile(reps, [alpha, 1 - alpha], method="inverted_cdf")
    return float(lo), float(hi)


@dataclass(frozen=True)
class StatSummary:
    metric: str
    n: int
    mean: float
    median: float
    ci_mean: tuple[float, float]
    ci_median: tuple[float, float]
    bin_edges: tuple[float, ...]
    counts: tuple[int, ...]

    def to_json(self) -> dict:
        return {
            "metric": self.metric,
            "n": self.n,
            "mean": self.mean,
            "median": self.median,
            "ci_mean": list(self.ci_mean),
            "ci_median": list(self.ci_median),
            "histogram": {"bin_edges": list(self.bin_edges), "counts": list(self.counts)},
        }

    def histogram_rows(self) -> list[tuple[float, float, int]]:
        return [(lo, hi, c) for lo, hi, c in zip(self.bin_edges, self.bin_edges[1:], self.counts)]


def _integer_edges(x: np.ndarray) -> np.ndarray:
    return np.arange(0, int(x.max()) + 2, dtype=np.float64)


def _unit_interval_edges(x: np.ndarray) -> np.ndarray:
    # values already rounded to 2 decimals; one bin per hundredth
    return np.round(np.arange(0, 102) / 100 - 0.005, 3).clip(min=0)


def _complexity_edges(x: np.ndarray) -> np.ndarray:
    lo = min(1.0, math.floor(x.min() * 4) / 4)
    return np.arange(lo, max(math.ceil(x.max()), 2) + 0.25, 0.25)


def summarize_samples(metric: str, samples: Sequence[float], edges_rule, replicates: int,
                      confidence: float, seed: int, workers: int = 1) -> StatSummary:
    x = np.asarray(samples, dtype=np.float64)
    edges = edges_rule(x)
    counts, _ = np.histogram(x, bins=edges)
    return StatSummary(
        metric=metric,
        n=int(x.size),
        mean=float(np.mean(x)),
        median=float(np.median(x)),
        ci_mean=bootstrap_ci(x, "mean", replicates, confidence, seed, workers),
        ci_median=bootstrap_ci(x, "median", replicates, confidence, seed, workers),
        bin_edges=tuple(float(e) for e in edges),
        counts=tuple(int(c) for c in counts),
    )


def dataset_samples(ds: EvalDataset) -> dict[str, list[float]]:
    """Raw per-image / per-mask / per-polygon samples behind each statistic."""
    by_image = ds.instances_by_image()
    masks = [g for g in ds.ground_truth if not g.ignore]
    samples: dict[str, list[float]] = {
        "masks_per_image": [sum(not g.ignore for g in v) for v in by_image.values()],
        "categories_per_image": [len({g.category_id for g in v if not g.ignore})
                                 for v in by_image.values()],
        "relative_mask_size": [],
        "boundary_complexity": [],
        "vertices_per_polygon": [],
        "attributes_per_mask": [],
    }
    bearing = {c: ds.ontology.has_attributes(c) for c in ds.ontology.categories}
    for g in masks:
        img = ds.images[g.image_id]
        samples["relative_mask_size"].append(
            round(relative_size(min(g.area, img.height * img.width), img.height, img.width), 2))
        if bearing.get(g.category_id, False):
            samples["attributes_per_mask"].append(len(g.attributes))
        if isinstance(g.segmentation, PolygonSet):
            try:
                samples["boundary_complexity"].append(boundary_complexity(g.segmentation))
            except ZeroAreaError:
                pass
            samples["vertices_per_polygon"].extend(vertices_per_polygon(g.segmentation))
    return samples


_EDGES = {
    "masks_per_image": _integer_edges,
    "categories_per_image": _integer_edges,
    "relative_mask_size": _unit_interval_edges,
    "boundary_complexity": _complexity_edges,
    "vertices_per_polygon": _integer_edges,
    "attributes_per_mask": _integer_edges,
}


def dataset_statistics(ds: EvalDataset, seed: int = 0, replicates: int = 10_000,
                       confidence: float = 0.95, workers: int = 1) -> list[StatSummary]:
    """Mask-complexity and annotation-density summaries.

    Bootstrap resampling is over the unit each statistic is measured on
    (images for per-image counts, masks or polygons otherwise). Metrics with
    no samples are left out; an empty dataset yields an empty list.
    """
    out = []
    for name, values in dataset_samples(ds).items():
        if values:
            out.append(summarize_samples(name, values, _EDGES[name], replicates, confidence,
                                         seed, workers))
    return out


def instance_counts(ds: EvalDataset) -> dict[str, dict[int, int]]:
    """Mask counts per category and per attribute (long-tail distributions)."""
    cats = Counter(g.category_id for g in ds.ground_truth if not g.ignore)
    attrs = Counter(a for g in ds.ground_truth if not g.ignore for a in g.attributes)
    return {
        "category": {c: cats.get(c, 0) for c in ds.ontology.categories},
        "attribute": {a: attrs.get(a, 0) for a in ds.ontology.attributes},
    }
