"""End-to-end acceptance checks, one test per criterion."""

import json
import math
import time

import numpy as np

from attrseg.cli import main
from attrseg.engine import BREAKDOWN_SETTINGS, EvalParams, error_breakdown, evaluate, f1_sweep, summarize
from attrseg.geometry import PolygonSet, boundary_complexity, decode, encode, mask_iou, relative_size
from attrseg.ontology import applicable_attributes
from attrseg.dataset import load_ground_truth, load_predictions
from attrseg.stats import bootstrap_ci

import naive
from golden import DATA
from helpers import BUNDLED, DRESS, JACKET, SHOE, SLEEVE, clone_detections, dataset, det, gt, rect
from random_cases import random_problem
from synthetic import write_corpus

A = len(BUNDLED.attributes)
JACKET_ATTRS = sorted(applicable_attributes(BUNDLED, JACKET))


def test_oracle_equivalence(criterion):
    with criterion(1, "1,000 random instances equal the naive evaluator exactly, < 60 s"):
        start = time.perf_counter()
        mismatches = []
        for seed in range(1000):
            ds, prob, mode = random_problem(seed)
            p = EvalParams(f1_mode=mode)
            r = evaluate(ds, p)
            got = (summarize(r, "AP"), summarize(r, "AP", f1="all"))
            want = naive.average_precision(prob, p.iou_thresholds, p.f1_thresholds, mode,
                                           list(p.recall_points))
            if got != want:
                mismatches.append(seed)
        elapsed = time.perf_counter() - start
        assert not mismatches, f"seeds {mismatches[:10]}"
        assert elapsed < 60, f"{elapsed:.1f} s"


def test_threshold_semantics(criterion):
    with criterion(2, "IoU 0.60 detection: AP_IoU 0.3, AP50 1, AP75 0"):
        attrs = frozenset(JACKET_ATTRS[:4])
        g = gt(1, 1, JACKET, rect(40, 40, 0, 0, 20, 10), attrs)
        m = rect(40, 40, 5, 0, 25, 10)  # 15 shared rows of 25
        assert mask_iou(g.segmentation, m) == 0.6
        r = evaluate(dataset({1: (40, 40)}, [g], [det(1, JACKET, m, 0.9, attrs)]))
        assert summarize(r, "AP") == 0.3
        assert summarize(r, "AP", f1="all") == 0.3
        assert summarize(r, "AP", iou=0.5) == 1.0
        assert summarize(r, "AP", iou=0.75) == 0.0


def _perfect_dataset():
    sleeve = sorted(applicable_attributes(BUNDLED, SLEEVE))
    dress = sorted(applicable_attributes(BUNDLED, DRESS))
    gts = [
        gt(1, 1, JACKET, rect(64, 64, 0, 0, 30, 20), JACKET_ATTRS[:4]),
        gt(2, 1, SLEEVE, rect(64, 64, 30, 30, 40, 40), sleeve[:1]),
        gt(3, 1, SHOE, rect(64, 64, 50, 50, 60, 60)),
        gt(4, 2, DRESS, rect(64, 64, 0, 0, 64, 40), dress[2:5]),
        gt(5, 2, JACKET, rect(64, 64, 10, 45, 30, 60), JACKET_ATTRS[5:7]),
        gt(6, 3, SHOE, rect(64, 64, 0, 0, 5, 5)),
    ]
    return dataset({1: (64, 64), 2: (64, 64), 3: (64, 64)}, gts, clone_detections(gts)), gts


def test_perfect_predictions(criterion):
    with criterion(3, "cloned ground truth scores 1.0 everywhere in all four F1 modes"):
        ds, gts = _perfect_dataset()
        min_share = min(len(g.attributes) for g in gts if g.attributes) / A
        for mode in ("micro", "macro", "binary-micro", "binary-macro"):
            thrs = (min_share,) if mode == "macro" else EvalParams().f1_thresholds
            r = evaluate(ds, EvalParams(f1_mode=mode, f1_thresholds=thrs))
            assert summarize(r, "AP") == 1.0, mode
            assert summarize(r, "AP", f1="all") == 1.0, mode
            assert summarize(r, "AR") == 1.0, mode
            assert summarize(r, "AR", f1="all") == 1.0, mode
            assert (r.precision[r.precision > -1] == 1.0).all(), mode
            assert (r.recall[r.recall > -1] == 1.0).all(), mode


def _sweep(ds, mode):
    return dict(f1_sweep(ds, EvalParams(f1_mode=mode)))


def _flip_dataset():
    """Perfect masks; every detection differs from its ground truth in exactly one bit.

    Odd gts carry 4 attributes and the detection adds a fifth; even gts carry 3
    and the detection drops one of them.
    """
    gts, dets = [], []
    for i in range(1, 9):
        m = rect(32, 32, 0, 0, 8 + 2 * i, 16)
        if i % 2:
            g_attrs = JACKET_ATTRS[:4]
            p_attrs = JACKET_ATTRS[:5]
        else:
            g_attrs = JACKET_ATTRS[10:13]
            p_attrs = JACKET_ATTRS[10:12]
        gts.append(gt(i, i, JACKET, m, g_attrs))
        dets.append(det(i, JACKET, m, 1.0 - i / 20, p_attrs))
    return dataset({i: (32, 32) for i in range(1, 9)}, gts, dets)


def _drop(curve):
    """First grid threshold whose AP falls below the value at 0."""
    base = curve[0.0]
    return next((t for t, v in sorted(curve.items()) if v < base), None)


def test_f1_mode_curves(criterion):
    with criterion(4, "binary-micro drop near 0.993, macro collapse near 0.0102, "
                      "micro < binary-macro < binary-micro at 0.9"):
        flips = _flip_dataset()
        bm = _sweep(flips, "binary-micro")
        assert all(v == bm[0.0] == 1.0 for t, v in bm.items() if t <= 0.99)
        drop = _drop(bm)
        assert drop is not None and abs(drop - 0.9932) <= 0.01 + 1e-9, drop

        attrs = frozenset(JACKET_ATTRS[:3])
        g = gt(1, 1, JACKET, rect(32, 32, 0, 0, 16, 16), attrs)
        three = dataset({1: (32, 32)}, [g], clone_detections([g]))
        macro = _sweep(three, "macro")
        drop = _drop(macro)
        assert macro[0.01] == 1.0 and drop is not None
        assert abs(drop - 3 / A) <= 0.01 + 1e-9, drop
        assert 0.01 <= drop <= 0.03

        at = {mode: _sweep(flips, mode)[0.9] for mode in ("micro", "binary-macro", "binary-micro")}
        assert at["micro"] < at["binary-macro"] < at["binary-micro"], at


def _ordered(b):
    auc = [b.auc[s] for s in BREAKDOWN_SETTINGS]
    return all(x <= y for x, y in zip(auc, auc[1:])) and auc[-1] == 1.0


def test_breakdown_ordering(criterion):
    with criterion(5, "error-breakdown AUCs are non-decreasing and FN = 1"):
        fixture = load_predictions(DATA / "fixture_pred.json",
                                   load_ground_truth(DATA / "fixture_gt.json", BUNDLED))
        fixtures = [fixture, _flip_dataset(), _perfect_dataset()[0]]
        for ds in fixtures:
            for scope in ("overall", "supercategory", "category"):
                for f1 in (None, 0.9):
                    out = error_breakdown(ds, scope, f1_threshold=f1)
                    assert out and all(_ordered(b) for b in out.values())
        for seed in range(100):
            ds, _, _ = random_problem(seed)
            for b in error_breakdown(ds, "category").values():
                assert _ordered(b), seed


def test_geometry_suite(criterion):
    with criterion(6, "RLE round trip, offset-square IoU 1/3, boundary complexity, relative size"):
        rng = np.random.default_rng(0)
        for _ in range(10_000):
            h, w = (int(v) for v in rng.integers(1, 17, 2))
            grid = rng.random((h, w)) < rng.random()
            m = encode(grid)
            assert np.array_equal(decode(m), grid) and encode(decode(m)) == m
        a = np.zeros((20, 20), bool)
        a[0:10, 0:10] = True
        b = np.zeros((20, 20), bool)
        b[0:10, 5:15] = True
        assert mask_iou(encode(a), encode(b)) == 1 / 3
        k = np.arange(3600) * 2 * np.pi / 3600
        circle = PolygonSet((tuple(zip(100 * np.cos(k), 100 * np.sin(k))),))
        assert 0.99 <= boundary_complexity(circle) <= 1.01
        square = PolygonSet((((0, 0), (4, 0), (4, 4), (0, 4)),))
        assert abs(boundary_complexity(square) - 2 / math.sqrt(math.pi)) <= 1e-6
        assert relative_size(100 * 100, 100, 100) == 1.0
        assert relative_size(0, 100, 100) == 0.0
        assert relative_size(2500, 100, 100) == 0.5
        assert relative_size(16, 8, 8) == 0.5


SUPERCLASS_SIZES = {
    "Length": 15, "Nickname": 153, "Opening Type": 10, "Silhouettes": 25,
    "Textile finishing, Manufacturing techniques": 21, "Textile Pattern": 24,
    "Non-Textile Type": 14, "Neckline": 25, "Waistline": 7,
}


def test_ontology_accounting(criterion):
    with criterion(7, "bundled ontology: 46 categories, 294 attributes, superclass sizes"):
        assert len(BUNDLED.categories) == 46 and A == 294
        sizes = {}
        for a in BUNDLED.attributes.values():
            sizes[a.superclass] = sizes.get(a.superclass, 0) + 1
        assert sizes == SUPERCLASS_SIZES


def test_determinism_and_speed(criterion, tmp_path):
    with criterion(8, "synthetic 1,000 x 10 corpus: byte-identical at 1 and 4 threads, < 10 s"):
        gt_path, pred_path = write_corpus(tmp_path / "corpus")
        reports = []
        for threads in (1, 4):
            out = tmp_path / f"report_{threads}.json"
            start = time.perf_counter()
            assert main(["evaluate", "--gt", str(gt_path), "--pred", str(pred_path),
                         "--out", str(out), "--threads", str(threads)]) == 0
            elapsed = time.perf_counter() - start
            assert elapsed < 10, f"{threads} threads: {elapsed:.1f} s"
            reports.append(out.read_bytes())
        assert reports[0] == reports[1]
        assert json.loads(reports[0])["metrics"]["AP_IoU"] > 0


def test_bootstrap(criterion):
    with criterion(9, "bootstrap: degenerate, normal approximation, determinism, coverage"):
        assert bootstrap_ci([7.0] * 50, "mean") == (7.0, 7.0)
        assert bootstrap_ci([7.0] * 50, "median") == (7.0, 7.0)
        x = np.arange(1, 1001)
        lo, hi = bootstrap_ci(x, "mean", seed=0)
        half = 1.96 * np.std(x) / math.sqrt(x.size)
        assert abs(lo - (x.mean() - half)) <= 2.5 and abs(hi - (x.mean() + half)) <= 2.5
        assert bootstrap_ci(x, "mean", seed=11) == bootstrap_ci(x, "mean", seed=11)
        hits = 0
        for seed in range(200):
            sample = np.random.default_rng(50_000 + seed).integers(1, 1001, 200)
            lo, hi = bootstrap_ci(sample, "mean", replicates=2000, seed=seed)
            hits += lo <= 500.5 <= hi
        assert hits >= 180, hits
