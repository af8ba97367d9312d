"""Reference values for the bundled fixture, computed by the naive evaluator."""

from __future__ import annotations

import json
from pathlib import Path

import naive

DATA = Path(__file__).parent / "data"
IOU = [round(0.5 + 0.05 * i, 10) for i in range(10)]
F1 = IOU
RECALL = [round(k / 100, 10) for k in range(101)]
AREAS = {"s": (0.0, 32.0**2), "m": (32.0**2, 96.0**2), "l": (96.0**2, float("inf"))}


def fixture_problem() -> naive.NaiveProblem:
    load = lambda name: json.loads((DATA / name).read_text())
    return naive.problem_from_json(load("fixture_gt.json"), load("fixture_pred.json"),
                                   load("fixture_ontology.json"))


def golden_metrics(mode: str = "binary-macro") -> dict:
    prob = fixture_problem()
    out = {}
    for suffix, f1 in (("", [None]), ("_F1", F1)):
        def m(kind, ious=IOU, **kw):
            v = naive.metric(prob, kind, ious, f1, mode, RECALL, **kw)
            return None if v == -1.0 else v
        out["AP_IoU" + suffix] = m("AP")
        out["AP50" + suffix] = m("AP", [0.5])
        out["AP75" + suffix] = m("AP", [0.75])
        for key, (lo, hi) in AREAS.items():
            out[f"AP{key}{suffix}"] = m("AP", lo=lo, hi=hi)
            out[f"AR{key}@100{suffix}"] = m("AR", lo=lo, hi=hi)
        for k in (1, 10, 100):
            out[f"AR@{k}{suffix}"] = m("AR", max_det=k)
    return out


if __name__ == "__main__":
    (DATA / "fixture_golden.json").write_text(json.dumps(golden_metrics(), indent=2, sort_keys=True) + "\n")
