"""Per-instance attribute F1 in four averaging modes.

Attribute sets are compared as multi-hot vectors over a universe of ``A``
attribute slots. ``micro`` and ``macro`` treat the comparison as one
multi-label problem over ``A`` classes; the ``binary-*`` modes treat each
slot as a two-class prediction with 1 and 0 as the two classes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .errors import ContractError

MODES = ("micro", "macro", "binary-micro", "binary-macro")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int


def _check_ids(ids: frozenset, universe: int) -> None:
    for i in ids:
        if not 0 <= i < universe:
            raise ContractError(f"attribute id {i} outside [0, {universe})")


def confusion_counts(gt: Iterable[int], pred: Iterable[int], universe: int) -> ConfusionCounts:
    gt, pred = frozenset(gt), frozenset(pred)
    _check_ids(gt, universe)
    _check_ids(pred, universe)
    tp = len(gt & pred)
    fp = len(pred) - tp
    fn = len(gt) - tp
    return ConfusionCounts(tp, fp, fn, universe - tp - fp - fn)


def _f1(tp: int, fp: int, fn: int) -> float:
    # no support on either side counts as perfect agreement
    denom = 2 * tp + fp + fn
    return 1.0 if denom == 0 else 2 * tp / denom


def f1_from_counts(c: ConfusionCounts, mode: str) -> float:
    universe = c.tp + c.fp + c.fn + c.tn
    if mode == "micro":
        return _f1(c.tp, c.fp, c.fn)
    if mode == "macro":
        # per-class F1 is 1 only where both bits are set; zero-support classes score 0
        return c.tp / universe
    if mode == "binary-micro":
        return (c.tp + c.tn) / universe
    if mode == "binary-macro":
        return (_f1(c.tp, c.fp, c.fn) + _f1(c.tn, c.fn, c.fp)) / 2
    raise ContractError(f"unknown F1 mode {mode!r}; expected one of {MODES}")


def attribute_f1(gt: Iterable[int], pred: Iterable[int], universe: int,
                 mode: str = "binary-macro") -> float:
    """F1 agreement between a ground-truth and a predicted attribute set.

    Args:
        gt: ground-truth attribute ids.
        pred: predicted attribute ids.
        universe: number of attribute slots ``A``; ids must lie in ``[0, A)``.
        mode: ``micro``, ``macro``, ``binary-micro`` or ``binary-macro``.

    Returns:
        A score in ``[0, 1]``.
    """
    if mode not in MODES:
        raise ContractError(f"unknown F1 mode {mode!r}; expected one of {MODES}")
    if universe <= 0:
        raise ContractError("attribute universe must be positive")
    return f1_from_counts(confusion_counts(gt, pred, universe), mode)
