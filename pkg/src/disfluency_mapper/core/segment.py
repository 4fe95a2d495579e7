"""Pairing of target words with source slash units.

A target channel arrives as one long word stream. It is aligned against the
concatenated source units of the same channel; aligned words follow their
source word into its unit, and target-only words at a unit boundary go to
the following unit. Two reassignment rules then pull boundary words back
into the preceding unit:

* ``U``: the preceding unit ends in (or next to) an unintelligible region
* ``B``: the boundary words and the whole preceding unit are backchannels
"""

import logging
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import AbstractSet, Dict, List, Mapping, Optional, Sequence, Tuple

from .align import Alignment, AlignOp, align_units
from .exceptions import MismatchedAlignmentError, OrphanWordError
from .model import Conversation, SlashUnit, Token

logger = logging.getLogger(__name__)

AUDIT_COLUMNS = ("conv", "channel", "boundary", "rule", "words")


@dataclass(frozen=True)
class ChannelPairing:
    """Unit ordinal of every target word of one channel.

    ``boundary_words`` maps a unit ordinal to the target positions that were
    attached to it because they sat on its leading boundary.
    """

    assignment: Tuple[int, ...]
    boundary_words: Mapping[int, Tuple[int, ...]] = field(default_factory=dict)

    def positions(self, ordinal: int) -> List[int]:
        return [p for p, unit in enumerate(self.assignment) if unit == ordinal]


@dataclass(frozen=True)
class AuditEntry:
    """One boundary reassignment."""

    conversation_id: str
    channel: str
    boundary: int
    rule: str
    words: Tuple[str, ...]

    def as_row(self) -> Tuple[str, str, str, str, str]:
        return (
            self.conversation_id,
            self.channel,
            str(self.boundary),
            self.rule,
            " ".join(self.words),
        )


def unit_offsets(units: Sequence[SlashUnit]) -> List[int]:
    """Start offset of each unit in the concatenated channel, plus the total."""
    offsets = [0]
    for unit in units:
        offsets.append(offsets[-1] + len(unit.tokens))
    return offsets


def _unit_of(offsets: Sequence[int], src_index: int) -> int:
    return bisect_right(offsets, src_index) - 1


def attach_deletions(
    target_tokens: Sequence[Token], offsets: Sequence[int], alignment: Alignment
) -> ChannelPairing:
    """Assign every target word of a channel to a source unit ordinal.

    Args:
        target_tokens: Target words of the channel, in order
        offsets: Unit start offsets into the concatenated source channel,
            followed by the channel length (see ``unit_offsets``)
        alignment: Alignment of the whole source channel onto the target

    Returns:
        ChannelPairing with boundary-attached words recorded per unit
    """
    if len(alignment.tgt) != len(target_tokens) or len(alignment.src) != offsets[-1]:
        raise MismatchedAlignmentError("channel alignment does not cover the channel")
    n_units = len(offsets) - 1
    if target_tokens and n_units == 0:
        raise OrphanWordError(0)

    following: List[Optional[int]] = [None] * len(alignment.ops)
    upcoming: Optional[int] = None
    for k in range(len(alignment.ops) - 1, -1, -1):
        following[k] = upcoming
        op = alignment.ops[k]
        if op.src is not None:
            upcoming = _unit_of(offsets, op.src)

    assignment: List[int] = [0] * len(target_tokens)
    boundary: Dict[int, List[int]] = {}
    previous: Optional[int] = None
    for k, op in enumerate(alignment.ops):
        if op.src is not None:
            previous = _unit_of(offsets, op.src)
            if op.tgt is not None:
                assignment[op.tgt] = previous
            continue
        nxt = following[k]
        if previous is None:
            assignment[op.tgt] = nxt if nxt is not None else 0
        elif nxt is None or nxt == previous:
            assignment[op.tgt] = previous
        else:
            assignment[op.tgt] = nxt
            boundary.setdefault(nxt, []).append(op.tgt)
    return ChannelPairing(
        assignment=tuple(assignment),
        boundary_words={unit: tuple(positions) for unit, positions in boundary.items()},
    )


def _rule_unintelligible(
    previous_target: Sequence[Token], previous_source: SlashUnit, moved: Sequence[Token]
) -> bool:
    if previous_target and previous_target[-1].is_unintelligible:
        return True
    if previous_source.tokens and previous_source.tokens[-1].is_unintelligible:
        return True
    return any(token.is_unintelligible for token in moved)


def _rule_backchannel(
    previous_target: Sequence[Token], moved: Sequence[Token], backchannels: AbstractSet[str]
) -> bool:
    return bool(previous_target) and all(
        token.normalized in backchannels for token in (*moved, *previous_target)
    )


def reassign_boundaries(
    pairing: ChannelPairing,
    source_units: Sequence[SlashUnit],
    target_tokens: Sequence[Token],
    backchannels: AbstractSet[str] = frozenset(),
    rule_unintelligible: bool = True,
    rule_backchannel: bool = True,
) -> Tuple[ChannelPairing, List[AuditEntry]]:
    """Move boundary-attached words back to the preceding unit when a rule fires.

    Boundaries are visited left to right; moved words stay in channel order.
    Applying the rules to their own output changes nothing.
    """
    assignment = list(pairing.assignment)
    remaining: Dict[int, Tuple[int, ...]] = {}
    audit: List[AuditEntry] = []
    for ordinal in sorted(pairing.boundary_words):
        positions = pairing.boundary_words[ordinal]
        if ordinal == 0 or not positions:
            remaining[ordinal] = positions
            continue
        moved = [target_tokens[p] for p in positions]
        previous_target = [
            target_tokens[p] for p, unit in enumerate(assignment) if unit == ordinal - 1
        ]
        rule = None
        if rule_unintelligible and _rule_unintelligible(
            previous_target, source_units[ordinal - 1], moved
        ):
            rule = "U"
        elif rule_backchannel and _rule_backchannel(previous_target, moved, backchannels):
            rule = "B"
        if rule is None:
            remaining[ordinal] = positions
            continue
        for p in positions:
            assignment[p] = ordinal - 1
        unit = source_units[ordinal]
        audit.append(
            AuditEntry(
                unit.conversation_id,
                unit.speaker,
                unit.index,
                rule,
                tuple(token.surface for token in moved),
            )
        )
        logger.debug(f"Rule {rule} moved {len(positions)} words before {unit.unit_id}")
    return ChannelPairing(tuple(assignment), remaining), audit


def _unit_alignment(
    alignment: Alignment,
    ordinal: int,
    offsets: Sequence[int],
    pairing: ChannelPairing,
    source: SlashUnit,
    target_positions: Sequence[int],
    target_tokens: Sequence[Token],
) -> Alignment:
    """Restrict the channel alignment to one paired unit."""
    first_target = target_positions[0] if target_positions else 0
    ops = []
    for op in alignment.ops:
        if op.src is not None:
            if _unit_of(offsets, op.src) != ordinal:
                continue
            if op.tgt is not None and pairing.assignment[op.tgt] != ordinal:
                raise MismatchedAlignmentError(f"word {op.tgt} split from its source unit")
        elif pairing.assignment[op.tgt] != ordinal:
            continue
        src = op.src - offsets[ordinal] if op.src is not None else None
        tgt = op.tgt - first_target if op.tgt is not None else None
        ops.append(AlignOp(op.kind, src, tgt))
    return Alignment(
        tuple(ops), source.tokens, tuple(target_tokens[p] for p in target_positions)
    )


@dataclass
class SegmentResult:
    """Target conversation paired unit-for-unit with its source."""

    conversation: Conversation
    alignments: Dict[Tuple[str, int], Alignment] = field(default_factory=dict)
    channel_alignments: Dict[str, Alignment] = field(default_factory=dict)
    audit: List[AuditEntry] = field(default_factory=list)


def pair_channel(
    source_units: Sequence[SlashUnit],
    target_tokens: Sequence[Token],
    backchannels: AbstractSet[str] = frozenset(),
    rule_unintelligible: bool = True,
    rule_backchannel: bool = True,
    alignment: Optional[Alignment] = None,
) -> Tuple[List[SlashUnit], Dict[Tuple[str, int], Alignment], Alignment, List[AuditEntry]]:
    """Align, attach and reassign one channel.

    Returns:
        (target units, per-unit alignments, channel alignment, audit entries)
    """
    source_tokens = tuple(token for unit in source_units for token in unit.tokens)
    if alignment is None:
        alignment = align_units(source_tokens, target_tokens)
    offsets = unit_offsets(source_units)
    pairing = attach_deletions(target_tokens, offsets, alignment)
    pairing, audit = reassign_boundaries(
        pairing,
        source_units,
        target_tokens,
        backchannels,
        rule_unintelligible,
        rule_backchannel,
    )

    units: List[SlashUnit] = []
    alignments: Dict[Tuple[str, int], Alignment] = {}
    for ordinal, source in enumerate(source_units):
        positions = pairing.positions(ordinal)
        tokens = tuple(target_tokens[p] for p in positions)
        units.append(
            SlashUnit(
                conversation_id=source.conversation_id,
                speaker=source.speaker,
                index=source.index,
                tokens=tokens,
                labels=(None,) * len(tokens),
                boundary_kind=source.boundary_kind,
            )
        )
        alignments[(source.speaker, source.index)] = _unit_alignment(
            alignment, ordinal, offsets, pairing, source, positions, target_tokens
        )
    return units, alignments, alignment, audit


def _pair_from_alignments(
    source_units: Sequence[SlashUnit],
    target_tokens: Sequence[Token],
    unit_alignments: Mapping[Tuple[str, int], Alignment],
) -> Tuple[List[SlashUnit], Dict[Tuple[str, int], Alignment], Alignment]:
    """Segment a channel exactly as given per-unit alignments say."""
    units: List[SlashUnit] = []
    alignments: Dict[Tuple[str, int], Alignment] = {}
    channel_ops: List[AlignOp] = []
    src_offset = tgt_offset = 0
    for source in source_units:
        given = unit_alignments.get((source.speaker, source.index))
        if given is None:
            if source.tokens:
                raise MismatchedAlignmentError(f"no alignment for unit {source.unit_id}")
            given = Alignment((), (), ())
        if len(given.src) != len(source.tokens):
            raise MismatchedAlignmentError(
                f"alignment for {source.unit_id} covers {len(given.src)} of "
                f"{len(source.tokens)} source words"
            )
        tokens = tuple(target_tokens[tgt_offset : tgt_offset + len(given.tgt)])
        if len(tokens) != len(given.tgt):
            raise MismatchedAlignmentError(
                f"alignments overrun the target channel at {source.unit_id}"
            )
        units.append(
            SlashUnit(
                conversation_id=source.conversation_id,
                speaker=source.speaker,
                index=source.index,
                tokens=tokens,
                labels=(None,) * len(tokens),
                boundary_kind=source.boundary_kind,
            )
        )
        alignments[(source.speaker, source.index)] = Alignment(given.ops, source.tokens, tokens)
        for op in given.ops:
            channel_ops.append(
                AlignOp(
                    op.kind,
                    op.src + src_offset if op.src is not None else None,
                    op.tgt + tgt_offset if op.tgt is not None else None,
                )
            )
        src_offset += len(source.tokens)
        tgt_offset += len(tokens)
    if tgt_offset != len(target_tokens):
        raise MismatchedAlignmentError(
            f"alignments cover {tgt_offset} of {len(target_tokens)} target words"
        )
    source_tokens = tuple(token for unit in source_units for token in unit.tokens)
    return units, alignments, Alignment(tuple(channel_ops), source_tokens, tuple(target_tokens))


def pair_conversation(
    source: Conversation,
    target: Conversation,
    backchannels: AbstractSet[str] = frozenset(),
    rule_unintelligible: bool = True,
    rule_backchannel: bool = True,
    unit_alignments: Optional[Mapping[Tuple[str, int], Alignment]] = None,
) -> SegmentResult:
    """Split every target channel along the source slash units.

    Args:
        source: Labeled source conversation
        target: Target conversation (one or more units per channel)
        backchannels: Normalized backchannel words for rule B
        rule_unintelligible: Enable rule U
        rule_backchannel: Enable rule B
        unit_alignments: Released per-unit alignments keyed by (speaker,
            index); when given they fix the segmentation and no rule runs

    Returns:
        SegmentResult with unlabeled target units keyed like the source
    """
    if source.id != target.id:
        logger.warning(f"Pairing source {source.id} with target {target.id}")
    result = SegmentResult(conversation=Conversation(source.id))
    units: List[SlashUnit] = []
    for speaker in sorted(set(source.speakers) | set(target.speakers)):
        source_units = source.channel(speaker)
        target_tokens = target.channel_tokens(speaker)
        if target_tokens and not source_units:
            logger.error(f"{target.id}/{speaker}: target words but no source units")
            raise OrphanWordError(0)
        if unit_alignments is not None:
            channel_units, alignments, alignment = _pair_from_alignments(
                source_units, target_tokens, unit_alignments
            )
        else:
            channel_units, alignments, alignment, audit = pair_channel(
                source_units,
                target_tokens,
                backchannels,
                rule_unintelligible,
                rule_backchannel,
            )
            result.audit.extend(audit)
        units.extend(channel_units)
        result.alignments.update(alignments)
        result.channel_alignments[speaker] = alignment
    result.conversation = Conversation(source.id, tuple(units))
    if result.audit:
        logger.info(f"{source.id}: {len(result.audit)} boundary reassignments")
    return result
