"""JSON / CSV serialization of evaluation and statistics outputs."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Mapping, Optional

from .engine import BREAKDOWN_SETTINGS, EvalResult, PRBreakdown, metrics_table
from .stats import StatSummary

FORMAT_VERSION = "1"


def dumps(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def evaluation_report(result: EvalResult, sweep: Optional[list] = None,
                      breakdown: Optional[Mapping[str, PRBreakdown]] = None) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "params": result.params.to_json(),
        "metrics": metrics_table(result),
        "f1_sweep": [list(p) for p in sweep] if sweep is not None else None,
        "error_breakdown": ({k: v.to_json() for k, v in breakdown.items()}
                            if breakdown is not None else None),
    }


def _csv(header: Iterable[str], rows: Iterable[Iterable]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def breakdown_csv(b: PRBreakdown) -> str:
    rows = [(s, r, float(p)) for s in BREAKDOWN_SETTINGS
            for r, p in zip(b.recall_points, b.curves[s])]
    return _csv(("setting", "recall", "precision"), rows)


def breakdown_auc_csv(breakdowns: Mapping[str, PRBreakdown]) -> str:
    rows = [(scope, s, auc) for scope, b in breakdowns.items() for s, auc in b.auc.items()]
    return _csv(("scope", "setting", "auc"), rows)


def sweep_csv(sweep, mode: str) -> str:
    return _csv(("f1_mode", "f1_threshold", "ap"), [(mode, t, ap) for t, ap in sweep])


def stats_report(summaries: Iterable[StatSummary], counts: Mapping, seed: int,
                 replicates: int) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "seed": seed,
        "replicates": replicates,
        "summaries": [s.to_json() for s in summaries],
        "instance_counts": {k: {str(i): c for i, c in v.items()} for k, v in counts.items()},
    }


def stats_csv(summaries: Iterable[StatSummary]) -> str:
    rows = [(s.metric, s.n, s.mean, s.median, *s.ci_mean, *s.ci_median) for s in summaries]
    return _csv(("metric", "n", "mean", "median", "mean_lo", "mean_hi", "median_lo",
                 "median_hi"), rows)


def histogram_csv(summary: StatSummary) -> str:
    return _csv(("bin_lo", "bin_hi", "count"), summary.histogram_rows())


def write_files(files: Mapping[Path, str]) -> list[Path]:
    """Write every file or none: contents go to temporaries, then are renamed."""
    staged = []
    try:
        for path, text in files.items():
            path = Path(path)
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
            with os.fdopen(fd, "w") as fh:
                fh.write(text)
            staged.append((tmp, path))
    except BaseException:
        for tmp, _ in staged:
            os.unlink(tmp)
        raise
    for tmp, path in staged:
        os.replace(tmp, path)
    return [p for _, p in staged]
