"""Transfer of disfluency labels from source units onto revised target units.

Edited regions of a unit are opened up with temporary constraints (``D``:
must be disfluent, ``A``: anything, ``Fixed(O)``: must be fluent) and the
unit is re-labeled by an exact constrained decoder. Words away from any
edit keep their source labels.
"""

import csv
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .align import Alignment, OpKind, align_units
from .codec import reparandum_chains, validate_labels
from .exceptions import (
    IngestError,
    MismatchedAlignmentError,
    UnsatisfiableConstraintsError,
)
from .model import (
    ANY,
    DISFLUENT,
    LABELS,
    BioLabel,
    ConstraintLabel,
    Conversation,
    SlashUnit,
    Token,
    UnitKey,
    is_valid_transition,
)

logger = logging.getLogger(__name__)

ConstraintSequence = Tuple[ConstraintLabel, ...]

_FIXED_O = ConstraintLabel.fixed(BioLabel.O)
_RANK = {"O": 0, "A": 1, "D": 2}
_BY_RANK = {0: _FIXED_O, 1: ANY, 2: DISFLUENT}
_LABEL_INDEX = {label: k for k, label in enumerate(LABELS)}


def assign_constraints(
    src_labels: Sequence[BioLabel],
    alignment: Alignment,
    window: int = 2,
    sub_policy: str = "A",
) -> ConstraintSequence:
    """Per-target-word decoding constraints for one aligned unit pair.

    Args:
        src_labels: Labels of the source unit
        alignment: Alignment of the source unit onto the target unit
        window: Neighbors on each side opened up around an edit
        sub_policy: "A" leaves a substituted word free; "D" forces it
            disfluent when its source word was disfluent

    Returns:
        One ConstraintLabel per target word
    """
    if len(src_labels) != len(alignment.src):
        raise MismatchedAlignmentError(
            f"{len(src_labels)} source labels for {len(alignment.src)} aligned words"
        )
    n = len(alignment.tgt)
    base: List[ConstraintLabel] = [ANY] * n
    aligned_labels: Dict[int, BioLabel] = {}
    deletions: List[Tuple[int, BioLabel]] = []
    edits: List[Tuple[OpKind, int, Optional[BioLabel]]] = []

    position = 0
    for op in alignment.ops:
        if op.kind is OpKind.DEL:
            deletions.append((position, src_labels[op.src]))
            continue
        if op.kind is OpKind.MATCH:
            base[op.tgt] = ConstraintLabel.fixed(src_labels[op.src])
            aligned_labels[op.tgt] = src_labels[op.src]
        elif op.kind is OpKind.SUB:
            aligned_labels[op.tgt] = src_labels[op.src]
            edits.append((op.kind, op.tgt, src_labels[op.src]))
        else:
            edits.append((op.kind, op.tgt, None))
        position += 1

    proposals: List[List[int]] = [[] for _ in range(n)]

    def propose(lo: int, hi: int, rank: int) -> None:
        for t in range(max(lo, 0), min(hi, n - 1) + 1):
            proposals[t].append(rank)

    for kind, j, source_label in edits:
        lo, hi = j - window, j + window
        disfluent_deletion = any(
            label.is_disfluent for p, label in deletions if lo <= p <= hi + 1
        )
        if disfluent_deletion:
            propose(lo, hi, _RANK["D"])
            continue
        if kind is OpKind.INS:
            context = [
                aligned_labels[t]
                for t in range(max(lo, 0), min(hi, n - 1) + 1)
                if t in aligned_labels
            ]
            context += [label for p, label in deletions if lo <= p <= hi + 1]
            fluent = all(not label.is_disfluent for label in context)
            propose(lo, hi, _RANK["O"] if fluent else _RANK["A"])
        else:
            propose(lo, hi, _RANK["A"])
            if sub_policy == "D" and source_label is not None and source_label.is_disfluent:
                proposals[j].append(_RANK["D"])

    for p, label in deletions:
        propose(p - window, p + window - 1, _RANK["D"] if label.is_disfluent else _RANK["A"])

    return tuple(
        _BY_RANK[max(ranks)] if ranks else base[t] for t, ranks in enumerate(proposals)
    )


def satisfies(labels: Sequence[BioLabel], constraints: Sequence[ConstraintLabel]) -> bool:
    return len(labels) == len(constraints) and all(
        c.admits(label) for label, c in zip(labels, constraints)
    )


@dataclass(frozen=True)
class DecodeContext:
    """Everything a scorer may look at for one unit."""

    tokens: Tuple[Token, ...]
    constraints: ConstraintSequence
    reference: Tuple[Optional[BioLabel], ...] = ()
    unit_key: Optional[UnitKey] = None

    def reference_label(self, position: int) -> Optional[BioLabel]:
        if position < len(self.reference):
            return self.reference[position]
        return None


class Scorer(ABC):
    """Scores a labeling as unary terms plus one term per reparandum chain.

    A chain is a reparandum run with its immediately following repair run
    (empty for restarts). Scorers without chain terms decode with a
    first-order lattice; the rest with an exact segment lattice.
    """

    has_chain_terms: bool = False

    @abstractmethod
    def unary(self, context: DecodeContext, position: int, label: BioLabel) -> float:
        """Score of ``label`` at ``position``."""

    def chain(
        self, context: DecodeContext, rm_start: int, rm_end: int, rp_end: int
    ) -> float:
        return 0.0

    def unary_matrix(self, context: DecodeContext) -> np.ndarray:
        n = len(context.tokens)
        matrix = np.zeros((n, len(LABELS)), dtype=np.float64)
        for i in range(n):
            for k, label in enumerate(LABELS):
                matrix[i, k] = self.unary(context, i, label)
        return matrix

    def score(self, context: DecodeContext, labels: Sequence[BioLabel]) -> float:
        total = sum(self.unary(context, i, label) for i, label in enumerate(labels))
        for rm_start, rm_end, rp_end in reparandum_chains(labels):
            total += self.chain(context, rm_start, rm_end, rp_end)
        return float(total)


@dataclass(frozen=True)
class PatternWeights:
    copy: float = 2.0
    orphan: float = 0.5
    deviation: float = 1.0


def greedy_copies(reparandum: Sequence[Token], repair: Sequence[Token]) -> int:
    """Reparandum words found again, in order, in the repair."""
    words = [t.normalized for t in repair if not t.is_filler]
    copies, cursor = 0, 0
    for token in reparandum:
        if token.is_filler:
            continue
        for k in range(cursor, len(words)):
            if words[k] == token.normalized:
                copies += 1
                cursor = k + 1
                break
    return copies


@dataclass(frozen=True)
class PatternScorer(Scorer):
    """Rewards repairs that copy their reparandum.

    Score = copy * copied pairs - orphan * uncopied reparandum words
    - deviation * A-constrained words whose role (outside, reparandum,
    repair) differs from their source label.
    """

    weights: PatternWeights = field(default_factory=PatternWeights)
    has_chain_terms = True

    def unary(self, context: DecodeContext, position: int, label: BioLabel) -> float:
        constraint = context.constraints[position] if context.constraints else ANY
        reference = context.reference_label(position)
        if constraint == ANY and reference is not None and reference.role != label.role:
            return -self.weights.deviation
        return 0.0

    def chain(
        self, context: DecodeContext, rm_start: int, rm_end: int, rp_end: int
    ) -> float:
        reparandum = context.tokens[rm_start:rm_end]
        copies = greedy_copies(reparandum, context.tokens[rm_end:rp_end])
        orphans = sum(1 for t in reparandum if not t.is_filler) - copies
        return self.weights.copy * copies - self.weights.orphan * orphans


def pattern_score(
    tokens: Sequence[Token],
    labels: Sequence[BioLabel],
    constraints: Optional[Sequence[ConstraintLabel]] = None,
    reference: Optional[Sequence[Optional[BioLabel]]] = None,
    weights: Optional[PatternWeights] = None,
) -> float:
    """Default scorer applied to a complete labeling."""
    validate_labels(labels)
    context = DecodeContext(
        tokens=tuple(tokens),
        constraints=tuple(constraints) if constraints is not None else (),
        reference=tuple(reference) if reference is not None else (),
    )
    return PatternScorer(weights or PatternWeights()).score(context, labels)


class ScoreTableScorer(Scorer):
    """Unary scores read from an external per-token table.

    Units missing from the table score zero everywhere, so constraints and
    the label grammar alone decide them.
    """

    def __init__(self, tables: Mapping[UnitKey, np.ndarray]) -> None:
        self.tables = {key: np.asarray(value, dtype=np.float64) for key, value in tables.items()}

    def _table(self, context: DecodeContext) -> Optional[np.ndarray]:
        if context.unit_key is None:
            return None
        return self.tables.get(context.unit_key)

    def unary(self, context: DecodeContext, position: int, label: BioLabel) -> float:
        table = self._table(context)
        if table is None:
            return 0.0
        return float(table[position, _LABEL_INDEX[label]])

    def unary_matrix(self, context: DecodeContext) -> np.ndarray:
        table = self._table(context)
        n = len(context.tokens)
        if table is None:
            logger.debug(f"No score table for unit {context.unit_key}")
            return np.zeros((n, len(LABELS)))
        if table.shape != (n, len(LABELS)):
            raise MismatchedAlignmentError(
                f"score table for {context.unit_key} has shape {table.shape}, "
                f"expected {(n, len(LABELS))}"
            )
        return table

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ScoreTableScorer":
        """Read ``conv channel unit position O B_RM I_RM B_RP I_RP`` TSV."""
        rows: Dict[UnitKey, Dict[int, List[float]]] = {}
        with open(path, encoding="utf-8", newline="") as handle:
            reader = csv.reader(handle, delimiter="\t")
            header = next(reader, None)
            expected = ["conv", "channel", "unit", "position", *[l.value for l in LABELS]]
            if header != expected:
                raise IngestError(f"unexpected score-table header {header}", 1, str(path))
            for line_no, row in enumerate(reader, start=2):
                try:
                    key = (row[0], row[1], int(row[2]))
                    rows.setdefault(key, {})[int(row[3])] = [float(v) for v in row[4:9]]
                except (ValueError, IndexError) as e:
                    raise IngestError(f"bad score record: {e}", line_no, str(path)) from e
        tables = {}
        for key, by_position in rows.items():
            if sorted(by_position) != list(range(len(by_position))):
                raise IngestError(f"positions of {key} are not contiguous", None, str(path))
            tables[key] = np.array([by_position[p] for p in range(len(by_position))])
        return cls(tables)


@dataclass(frozen=True)
class DecodeResult:
    labels: Tuple[BioLabel, ...]
    score: float


def _allowed(constraints: Sequence[ConstraintLabel]) -> np.ndarray:
    mask = np.zeros((len(constraints), len(LABELS)), dtype=bool)
    for i, constraint in enumerate(constraints):
        for k, label in enumerate(LABELS):
            mask[i, k] = constraint.admits(label)
    return mask


def transition_mask() -> Tuple[np.ndarray, np.ndarray]:
    """(start, transitions) scores: 0 where allowed, -inf where not."""
    start = np.array(
        [0.0 if is_valid_transition(None, label) else -math.inf for label in LABELS]
    )
    transitions = np.array(
        [
            [0.0 if is_valid_transition(prev, label) else -math.inf for label in LABELS]
            for prev in LABELS
        ]
    )
    return start, transitions


def _viterbi(unary: np.ndarray, allowed: np.ndarray) -> Tuple[List[int], float]:
    scores = np.where(allowed, unary, -math.inf)
    start, transitions = transition_mask()
    n = scores.shape[0]
    trellis = np.full_like(scores, -math.inf)
    backpointers = np.zeros(scores.shape, dtype=np.int64)
    trellis[0] = start + scores[0]
    if not np.isfinite(trellis[0]).any():
        raise UnsatisfiableConstraintsError(0)
    for t in range(1, n):
        v = trellis[t - 1][:, None] + transitions
        backpointers[t] = np.argmax(v, axis=0)
        trellis[t] = scores[t] + np.max(v, axis=0)
        if not np.isfinite(trellis[t]).any():
            raise UnsatisfiableConstraintsError(t)
    path = [int(np.argmax(trellis[-1]))]
    for t in range(n - 1, 0, -1):
        path.append(int(backpointers[t][path[-1]]))
    path.reverse()
    return path, float(np.max(trellis[-1]))


_O, _B_RM, _I_RM, _B_RP, _I_RP = range(5)


def _segment_lattice(
    scorer: Scorer, context: DecodeContext, unary: np.ndarray, allowed: np.ndarray
) -> Tuple[List[int], float]:
    # States at a boundary: 0 = free, 1 = after a repair run of length >= 2
    # (a chained repair may follow).
    n = unary.shape[0]
    best = np.full((2, n + 1), -math.inf)
    best[0, 0] = 0.0
    back: Dict[Tuple[int, int], Tuple[int, int, Tuple[int, ...]]] = {}

    def relax(
        state: int,
        end: int,
        value: float,
        origin: Tuple[int, int],
        labels: Tuple[int, ...],
    ) -> None:
        if value > best[state, end]:
            best[state, end] = value
            back[(state, end)] = (origin[0], origin[1], labels)

    def run(start: int, first: int, rest: int):
        """Yield (end, score, labels) for runs first rest* starting at start."""
        if not allowed[start, first]:
            return
        total = unary[start, first]
        labels: Tuple[int, ...] = (first,)
        yield start + 1, total, labels
        for k in range(start + 1, n):
            if not allowed[k, rest]:
                return
            total += unary[k, rest]
            labels = labels + (rest,)
            yield k + 1, total, labels

    for i in range(n):
        for state in (0, 1):
            here = best[state, i]
            if not np.isfinite(here):
                continue
            if allowed[i, _O]:
                relax(0, i + 1, here + unary[i, _O], (state, i), (_O,))
            for j, rm_score, rm_labels in run(i, _B_RM, _I_RM):
                relax(
                    0,
                    j,
                    here + rm_score + scorer.chain(context, i, j, j),
                    (state, i),
                    rm_labels,
                )
                if j >= n:
                    continue
                for k, rp_score, rp_labels in run(j, _B_RP, _I_RP):
                    relax(
                        1 if k - j >= 2 else 0,
                        k,
                        here + rm_score + rp_score + scorer.chain(context, i, j, k),
                        (state, i),
                        rm_labels + rp_labels,
                    )
            if state == 1:
                for k, rp_score, rp_labels in run(i, _B_RP, _I_RP):
                    relax(1 if k - i >= 2 else 0, k, here + rp_score, (state, i), rp_labels)

    final_state = 0 if best[0, n] >= best[1, n] else 1
    if not np.isfinite(best[final_state, n]):
        reached = max(
            (i for i in range(n + 1) if np.isfinite(best[:, i]).any()), default=0
        )
        raise UnsatisfiableConstraintsError(reached)

    path: List[int] = []
    state, end = final_state, n
    while end > 0:
        prev_state, prev_end, labels = back[(state, end)]
        path[:0] = labels
        state, end = prev_state, prev_end
    return path, float(best[final_state, n])


def decode_unit(
    tokens: Sequence[Token],
    constraints: Sequence[ConstraintLabel],
    scorer: Scorer,
    reference: Optional[Sequence[Optional[BioLabel]]] = None,
    unit_key: Optional[UnitKey] = None,
) -> DecodeResult:
    """Best grammar-valid labeling that satisfies every constraint."""
    if len(tokens) != len(constraints):
        raise MismatchedAlignmentError(
            f"{len(constraints)} constraints for {len(tokens)} tokens"
        )
    if not tokens:
        return DecodeResult((), 0.0)
    context = DecodeContext(
        tokens=tuple(tokens),
        constraints=tuple(constraints),
        reference=tuple(reference) if reference is not None else (),
        unit_key=unit_key,
    )
    unary = np.asarray(scorer.unary_matrix(context), dtype=np.float64)
    allowed = _allowed(constraints)
    unit = "/".join(map(str, unit_key)) if unit_key else None
    try:
        if scorer.has_chain_terms:
            path, score = _segment_lattice(scorer, context, unary, allowed)
        else:
            path, score = _viterbi(unary, allowed)
    except UnsatisfiableConstraintsError as e:
        logger.error(f"No valid labeling for unit {unit or '?'} at position {e.position}")
        raise UnsatisfiableConstraintsError(e.position, unit) from e
    return DecodeResult(tuple(LABELS[k] for k in path), score)


def constrained_decode(
    tokens: Sequence[Token],
    constraints: Sequence[ConstraintLabel],
    scorer: Scorer,
    reference: Optional[Sequence[Optional[BioLabel]]] = None,
    unit_key: Optional[UnitKey] = None,
) -> List[BioLabel]:
    return list(decode_unit(tokens, constraints, scorer, reference, unit_key).labels)


@dataclass
class MappingResult:
    """Silver-labeled target conversation with decode traces and failures."""

    conversation: Conversation
    traces: List[Dict[str, object]] = field(default_factory=list)
    failures: List[UnsatisfiableConstraintsError] = field(default_factory=list)
    decoded_units: int = 0


def map_unit(
    source: Optional[SlashUnit],
    target: SlashUnit,
    scorer: Scorer,
    alignment: Optional[Alignment] = None,
    window: int = 2,
    sub_policy: str = "A",
) -> Tuple[SlashUnit, Optional[Dict[str, object]]]:
    """Label one target unit; returns the unit and its decode trace."""
    src_tokens = source.tokens if source is not None else ()
    src_labels = source.labels if source is not None else ()
    if alignment is None:
        alignment = align_units(src_tokens, target.tokens)
    if len(alignment.src) != len(src_tokens) or len(alignment.tgt) != len(target.tokens):
        raise MismatchedAlignmentError(
            f"alignment for {target.unit_id} covers {len(alignment.src)}x"
            f"{len(alignment.tgt)} words, unit pair has {len(src_tokens)}x{len(target.tokens)}"
        )
    if not alignment.has_edits:
        return target.with_labels(src_labels), None

    constraints = assign_constraints(src_labels, alignment, window, sub_policy)
    reference: List[Optional[BioLabel]] = [None] * len(target.tokens)
    for j, i in alignment.target_to_source().items():
        reference[j] = src_labels[i]
    result = decode_unit(target.tokens, constraints, scorer, reference, target.key)
    trace = {
        "unit": target.unit_id,
        "edits": alignment.cost,
        "tokens": [t.surface for t in target.tokens],
        "constraints": [str(c) for c in constraints],
        "labels": [label.value for label in result.labels],
        "score": result.score,
    }
    logger.debug(f"Decoded {target.unit_id}: {' '.join(trace['labels'])}")
    return target.with_labels(result.labels), trace


def map_annotations(
    source: Conversation,
    target: Conversation,
    alignments: Optional[Mapping[Tuple[str, int], Alignment]] = None,
    scorer: Optional[Scorer] = None,
    window: int = 2,
    sub_policy: str = "A",
    strict: bool = True,
) -> MappingResult:
    """Silver labels for every target unit of a paired conversation.

    Target units must already carry the (speaker, index) of the source unit
    they pair with. Units without edits copy their source labels.

    Args:
        source: Labeled source conversation
        target: Paired, unlabeled target conversation
        alignments: Unit alignments keyed by (speaker, index); missing
            entries are aligned on the fly
        scorer: Decoding scorer (defaults to PatternScorer)
        window: Constraint window
        sub_policy: Constraint policy for substituted words
        strict: Raise on the first unsatisfiable unit instead of collecting

    Returns:
        MappingResult with the silver conversation
    """
    scorer = scorer or PatternScorer()
    alignments = alignments or {}
    result = MappingResult(conversation=target)
    units: List[SlashUnit] = []
    for unit in target.units:
        source_unit = source.unit(unit.speaker, unit.index)
        try:
            mapped, trace = map_unit(
                source_unit,
                unit,
                scorer,
                alignments.get((unit.speaker, unit.index)),
                window,
                sub_policy,
            )
        except UnsatisfiableConstraintsError as e:
            if strict:
                raise
            result.failures.append(e)
            units.append(unit)
            continue
        if trace is not None:
            result.traces.append(trace)
            result.decoded_units += 1
        units.append(mapped)
    result.conversation = Conversation(target.id, tuple(units))
    logger.info(
        f"Mapped {target.id}: {len(units)} units, {result.decoded_units} decoded, "
        f"{len(result.failures)} unsatisfiable"
    )
    return result
