"""Label-quality metrics between two labelings of a corpus."""

import logging
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, Mapping, Optional, Sequence, Set, Tuple

from .align import Alignment, OpKind
from .codec import interruption_points
from .exceptions import LengthMismatchError
from .model import BioLabel, Conversation

logger = logging.getLogger(__name__)

Labeling = Mapping[str, Sequence[BioLabel]]


@dataclass(frozen=True)
class PRF:
    """Micro-averaged precision, recall and F1 from confusion counts.

    A 0/0 ratio is reported as 0 and flagged in ``undefined``.
    """

    tp: int
    fp: int
    fn: int

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0

    @property
    def undefined(self) -> Tuple[str, ...]:
        names = []
        if self.tp + self.fp == 0:
            names.append("precision")
        if self.tp + self.fn == 0:
            names.append("recall")
        return tuple(names)

    def __add__(self, other: "PRF") -> "PRF":
        return PRF(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)

    @classmethod
    def from_sets(cls, gold: Set, pred: Set) -> "PRF":
        shared = len(gold & pred)
        return cls(tp=shared, fp=len(pred) - shared, fn=len(gold) - shared)

    def as_dict(self) -> Dict[str, object]:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "undefined": list(self.undefined),
        }


def unlabeled_units(conversations: Iterable[Conversation]) -> FrozenSet[str]:
    """Ids of units still carrying a missing label, e.g. unsatisfiable ones."""
    return frozenset(
        unit.unit_id
        for conversation in conversations
        for unit in conversation.units
        if not unit.is_labeled
    )


def labels_by_unit(
    conversations: Iterable[Conversation], skip: FrozenSet[str] = frozenset()
) -> Dict[str, Tuple[BioLabel, ...]]:
    """Unit id -> labels for every labeled unit not in ``skip``."""
    labeled: Dict[str, Tuple[BioLabel, ...]] = {}
    for conversation in conversations:
        for unit in conversation.units:
            if unit.unit_id in skip:
                continue
            if not unit.is_labeled:
                logger.warning(f"Skipping unlabeled unit {unit.unit_id}")
                continue
            labeled[unit.unit_id] = tuple(unit.labels)
    return labeled


def _paired(
    gold: Labeling, pred: Labeling
) -> Iterable[Tuple[str, Sequence[BioLabel], Sequence[BioLabel]]]:
    for unit in sorted(set(gold) | set(pred)):
        if unit not in gold or unit not in pred:
            logger.error(f"Unit {unit} present in only one labeling")
            raise LengthMismatchError(unit)
        yield unit, gold[unit], pred[unit]


def reparandum_prf(gold: Labeling, pred: Labeling) -> PRF:
    """Token-level P/R/F1 of the reparandum class (B_RM, I_RM).

    Raises:
        LengthMismatchError: If a unit is missing from one side or has a
            different length
    """
    total = PRF(0, 0, 0)
    for unit, gold_labels, pred_labels in _paired(gold, pred):
        if len(gold_labels) != len(pred_labels):
            raise LengthMismatchError(unit)
        gold_positive = {p for p, label in enumerate(gold_labels) if label.is_reparandum}
        pred_positive = {p for p, label in enumerate(pred_labels) if label.is_reparandum}
        total = total + PRF.from_sets(gold_positive, pred_positive)
    return total


def project_interruption_points(
    points: Iterable[int], alignment: Alignment
) -> FrozenSet[int]:
    """Move interruption points after source words onto the target side.

    A point after source word p lands after the last target word emitted up
    to and including p's alignment op; points before every target word are
    dropped.
    """
    points = set(points)
    emitted = 0
    projected = set()
    for op in alignment.ops:
        if op.tgt is not None:
            emitted += 1
        if op.kind is not OpKind.INS and op.src in points and emitted > 0:
            projected.add(emitted - 1)
    return frozenset(projected)


def ip_prf(
    gold: Labeling,
    pred: Labeling,
    alignments: Optional[Mapping[str, Alignment]] = None,
) -> PRF:
    """Set P/R/F1 over (unit, position) interruption points.

    Args:
        gold: Gold labels per unit
        pred: Predicted labels per unit
        alignments: Per-unit alignment of the predicted word sequence (source
            side) onto the gold one (target side); when given, predicted
            points are projected onto gold positions before comparison
    """
    gold_points: Set[Tuple[str, int]] = set()
    pred_points: Set[Tuple[str, int]] = set()
    for unit, gold_labels, pred_labels in _paired(gold, pred):
        alignment = alignments.get(unit) if alignments is not None else None
        if alignment is None:
            if len(gold_labels) != len(pred_labels):
                raise LengthMismatchError(unit)
            predicted = interruption_points(pred_labels)
        else:
            if len(alignment.src) != len(pred_labels) or len(alignment.tgt) != len(gold_labels):
                raise LengthMismatchError(unit)
            predicted = project_interruption_points(interruption_points(pred_labels), alignment)
        gold_points.update((unit, p) for p in interruption_points(gold_labels))
        pred_points.update((unit, p) for p in predicted)
    return PRF.from_sets(gold_points, pred_points)
