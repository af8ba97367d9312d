"""Command-line front end.

Exit codes: 0 success, 1 validation findings, 2 usage error, 3 data error.
Reports are only written when a command succeeds.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .attributes import MODES
from .dataset import (
    DEFAULT_ATTR_THRESHOLD,
    convert_dataset,
    dump_ground_truth,
    load_ground_truth,
    load_predictions,
    read_ground_truth,
)
from .engine import EvalParams, error_breakdown, evaluate, f1_sweep, threshold_grid
from .errors import AttrSegError
from .ontology import load_ontology, sort_violations, validate
from .report import (
    FORMAT_VERSION,
    breakdown_auc_csv,
    breakdown_csv,
    dumps,
    evaluation_report,
    histogram_csv,
    stats_csv,
    stats_report,
    sweep_csv,
    write_files,
)
from .stats import dataset_statistics, instance_counts

THREADS_ENV = "ATTRSEG_THREADS"

EXIT_OK, EXIT_FINDINGS, EXIT_USAGE, EXIT_DATA = 0, 1, 2, 3

log = logging.getLogger("attrseg")


@dataclass
class CommandOutcome:
    exit_code: int
    written: list[Path] = field(default_factory=list)


def default_threads() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _thresholds(text: str) -> tuple[float, ...]:
    try:
        if ":" in text:
            lo, step, hi = (float(v) for v in text.split(":"))
            return threshold_grid(lo, hi, step)
        return tuple(sorted(float(v) for v in text.split(",")))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:step:hi or a comma list, got {text!r}")


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(sorted(int(v) for v in text.split(",")))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _add_common(p: argparse.ArgumentParser, pred: bool = True) -> None:
    p.add_argument("--gt", required=True, type=Path, help="ground-truth JSON")
    if pred:
        p.add_argument("--pred", required=True, type=Path, help="predictions JSON")
    p.add_argument("--ontology", type=Path, default=None,
                   help="ontology JSON (default: bundled Fashionpedia ontology)")


def _add_eval_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kind", choices=("box", "mask"), default="mask")
    p.add_argument("--attr-threshold", type=float, default=DEFAULT_ATTR_THRESHOLD,
                   help="keep predicted attributes with score >= this")
    p.add_argument("--max-dets", type=_ints, default=(1, 10, 100))
    p.add_argument("--iou-thrs", type=_thresholds, default=threshold_grid(0.5, 0.95, 0.05))
    p.add_argument("--exclude-not-sure", action="store_true",
                   help="drop attribute superclasses marked 'not sure' from F1")
    p.add_argument("--threads", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="attrseg",
        description="Evaluate instance segmentation with attribute localization.",
    )
    parser.add_argument("--version", action="version",
                        version=f"attrseg {__version__} (report format {FORMAT_VERSION})")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    p = sub.add_parser("evaluate", help="AP_IoU and AP_IoU+F1 report")
    _add_common(p)
    _add_eval_flags(p)
    p.add_argument("--out", required=True, type=Path, help="report JSON")
    p.add_argument("--f1-mode", choices=MODES, default="binary-macro")
    p.add_argument("--no-f1", action="store_true", help="IoU-only evaluation")
    p.add_argument("--f1-thrs", type=_thresholds, default=threshold_grid(0.5, 0.95, 0.05))
    p.add_argument("--sweep", action="store_true", help="include the F1 threshold sweep")
    p.add_argument("--breakdown", action="store_true", help="include the error breakdown")

    p = sub.add_parser("analyze", help="false-positive breakdown PR curves")
    _add_common(p)
    _add_eval_flags(p)
    p.add_argument("--scope", choices=("overall", "supercategory", "category"), default="overall")
    p.add_argument("--f1-thr", type=float, default=None,
                   help="also require attribute F1 >= this (default: IoU only)")
    p.add_argument("--f1-mode", choices=MODES, default="binary-macro")
    p.add_argument("--out", required=True, type=Path, help="output directory")

    p = sub.add_parser("sweep", help="AP as a function of the F1 threshold")
    _add_common(p)
    _add_eval_flags(p)
    p.add_argument("--grid-step", type=float, default=0.01)
    p.add_argument("--f1-mode", choices=MODES, default="binary-macro")
    p.add_argument("--out", required=True, type=Path, help="CSV file")

    p = sub.add_parser("stats", help="dataset statistics with bootstrap intervals")
    _add_common(p, pred=False)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--replicates", type=int, default=10_000)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", required=True, type=Path, help="output directory")

    p = sub.add_parser("validate", help="check annotations against the ontology")
    _add_common(p, pred=False)
    p.add_argument("--max-violations", type=int, default=None,
                   help="print at most this many violations")

    p = sub.add_parser("convert", help="convert polygon segmentations")
    _add_common(p, pred=False)
    p.add_argument("--to", choices=("mask", "polygon-passthrough"), required=True)
    p.add_argument("--out", required=True, type=Path)
    return parser


def _params(args, **extra) -> EvalParams:
    return EvalParams(
        iou_thresholds=args.iou_thrs,
        max_detections=args.max_dets,
        eval_kind=args.kind,
        exclude_not_sure=args.exclude_not_sure,
        **extra,
    )


def _load_eval(args):
    o = load_ontology(args.ontology)
    ds = load_ground_truth(args.gt, o)
    return load_predictions(args.pred, ds, args.attr_threshold)


def _threads(args) -> int:
    return args.threads if args.threads is not None else default_threads()


def cmd_evaluate(args) -> CommandOutcome:
    ds = _load_eval(args)
    params = _params(args, f1_mode=args.f1_mode, f1_thresholds=args.f1_thrs,
                     f1_constraint_enabled=not args.no_f1)
    workers = _threads(args)
    result = evaluate(ds, params, workers=workers)
    sweep = f1_sweep(ds, params, workers=workers) if args.sweep else None
    breakdown = error_breakdown(ds, "overall", params, workers=workers) if args.breakdown else None
    text = dumps(evaluation_report(result, sweep, breakdown))
    return CommandOutcome(EXIT_OK, write_files({args.out: text}))


def cmd_analyze(args) -> CommandOutcome:
    ds = _load_eval(args)
    params = _params(args, f1_mode=args.f1_mode)
    out = error_breakdown(ds, args.scope, params, f1_threshold=args.f1_thr,
                          workers=_threads(args))
    files = {args.out / "auc.csv": breakdown_auc_csv(out),
             args.out / "breakdown.json": dumps({k: v.to_json() for k, v in out.items()})}
    for i, (scope, b) in enumerate(out.items()):
        files[args.out / f"pr_{i:02d}_{_slug(scope)}.csv"] = breakdown_csv(b)
    return CommandOutcome(EXIT_OK, write_files(files))


def _slug(text: str) -> str:
    return "".join(c if c.isalnum() else "_" for c in text).strip("_")


def cmd_sweep(args) -> CommandOutcome:
    ds = _load_eval(args)
    params = _params(args, f1_mode=args.f1_mode)
    grid = threshold_grid(0.0, 1.0, args.grid_step)
    curve = f1_sweep(ds, params, grid=grid, workers=_threads(args))
    return CommandOutcome(EXIT_OK, write_files({args.out: sweep_csv(curve, args.f1_mode)}))


def cmd_stats(args) -> CommandOutcome:
    o = load_ontology(args.ontology)
    ds = load_ground_truth(args.gt, o)
    summaries = dataset_statistics(ds, seed=args.seed, replicates=args.replicates,
                                   workers=_threads(args))
    files = {
        args.out / "stats.json": dumps(stats_report(summaries, instance_counts(ds),
                                                    args.seed, args.replicates)),
        args.out / "stats.csv": stats_csv(summaries),
    }
    for s in summaries:
        files[args.out / f"hist_{s.metric}.csv"] = histogram_csv(s)
    return CommandOutcome(EXIT_OK, write_files(files))


def cmd_validate(args) -> CommandOutcome:
    o = load_ontology(args.ontology)
    images, instances, issues = read_ground_truth(args.gt)
    unique = sort_violations(issues + validate(instances, o, images))
    shown = unique if args.max_violations is None else unique[: args.max_violations]
    for v in shown:
        print(v)
    if len(shown) < len(unique):
        print(f"... {len(unique) - len(shown)} more", file=sys.stderr)
    return CommandOutcome(EXIT_FINDINGS if unique else EXIT_OK)


def cmd_convert(args) -> CommandOutcome:
    o = load_ontology(args.ontology)
    ds = load_ground_truth(args.gt, o)
    if args.to == "mask":
        ds = convert_dataset(ds)
    return CommandOutcome(EXIT_OK, write_files({args.out: dumps(dump_ground_truth(ds))}))


COMMANDS = {
    "evaluate": cmd_evaluate,
    "analyze": cmd_analyze,
    "sweep": cmd_sweep,
    "stats": cmd_stats,
    "validate": cmd_validate,
    "convert": cmd_convert,
}


def run(argv: Optional[Sequence[str]] = None) -> CommandOutcome:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return CommandOutcome(int(exc.code or 0))
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (AttrSegError, OSError) as exc:
        print(f"attrseg {args.command}: error: {exc}", file=sys.stderr)
        return CommandOutcome(EXIT_DATA)


def main(argv: Optional[Sequence[str]] = None) -> int:
    return run(argv).exit_code


if __name__ == "__main__":
    sys.exit(main())
