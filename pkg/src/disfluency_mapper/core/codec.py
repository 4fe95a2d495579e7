"""Bracket annotation <-> BIO label codec.

Bracket streams follow the Switchboard disfluency markup: ``[`` opens a
disfluency, ``+`` separates reparandum from repair, ``]`` closes it, and
curly codes (``{F uh }``, ``{E I mean }``, ``{D well }``, ...) wrap
non-sentential words. Nested disfluencies are flattened in label space;
their depth survives only on the :class:`DisflSpan` records of a parse.
"""

import logging
import re
from dataclasses import dataclass, field
from typing import Callable, Iterable, List, Optional, Sequence, Tuple, Union

from .exceptions import (
    IndexOutOfRangeError,
    InvalidLabelSequenceError,
    StrayPlusError,
    UnbalancedBracketsError,
)
from .model import BioLabel, DisflSpan, DisfluencyType, Token, is_valid_transition

logger = logging.getLogger(__name__)

Normalizer = Callable[[str], str]

FILLER_CODES = frozenset({"F", "E"})
CURLY_CODES = frozenset({"F", "E", "D", "C", "A"})
TERMINATORS = frozenset({"./", "-/", "/"})

_NONSPEECH = re.compile(r"^(<.*>|#+|E_S|N_S|\*.*)$")
_PUNCTUATION = re.compile(r"^[^\w']+$")
_UNINTELLIGIBLE_WORD = re.compile(r"^\(\((.+)\)\)$")
_TRAILING_PUNCT = re.compile(r"[,;?!]+$")


@dataclass
class _Frame:
    start: int
    depth: int
    plus_positions: List[int] = field(default_factory=list)
    words: int = 0
    segment_words: int = 0

    @property
    def in_reparandum(self) -> bool:
        return not self.plus_positions


@dataclass(frozen=True)
class BracketParse:
    """Result of reading one bracket-annotated word stream."""

    tokens: Tuple[Token, ...]
    labels: Tuple[BioLabel, ...]
    spans: Tuple[DisflSpan, ...]


def _split(annotated: Union[str, Sequence[str]]) -> List[str]:
    if isinstance(annotated, str):
        return annotated.split()
    return list(annotated)


def _clean_word(item: str) -> str:
    word = _TRAILING_PUNCT.sub("", item)
    if word.endswith(".") and word.count(".") == 1 and len(word) > 1:
        word = word[:-1]
    return word


def parse_brackets(
    annotated: Union[str, Sequence[str]], normalize: Optional[Normalizer] = None
) -> BracketParse:
    """Read a bracket stream into tokens, flat BIO labels and spans.

    Args:
        annotated: Whitespace-separated markup string or pre-split items
        normalize: Surface normalizer (defaults to lowercasing)

    Returns:
        BracketParse with one label per real word
    """
    items = _split(annotated)
    tokens: List[Token] = []
    labels: List[BioLabel] = []
    spans: List[DisflSpan] = []
    frames: List[_Frame] = []
    curly: List[Tuple[str, int]] = []
    unintelligible_region = False

    for position, item in enumerate(items):
        if item == "[":
            frames.append(_Frame(start=len(tokens), depth=len(frames)))
            continue
        if item == "+":
            if not frames:
                raise StrayPlusError("'+' outside brackets", position)
            top = frames[-1]
            top.plus_positions.append(len(tokens))
            top.segment_words = 0
            continue
        if item == "]":
            if not frames:
                raise UnbalancedBracketsError("unmatched ']'", position)
            top = frames.pop()
            if not top.plus_positions:
                raise UnbalancedBracketsError("bracket closed without '+'", position)
            spans.extend(_frame_spans(top, len(tokens)))
            continue
        if item.startswith("{") and item[1:] in CURLY_CODES:
            curly.append((item[1:], position))
            continue
        if item == "}":
            if not curly:
                raise UnbalancedBracketsError("unmatched '}'", position)
            curly.pop()
            continue
        if item == "((":
            unintelligible_region = True
            continue
        if item == "))":
            unintelligible_region = False
            continue
        if item in TERMINATORS or _NONSPEECH.match(item) or _PUNCTUATION.match(item):
            continue

        unintelligible = unintelligible_region
        match = _UNINTELLIGIBLE_WORD.match(item)
        if match:
            item, unintelligible = match.group(1), True
        word = _clean_word(item)
        if not word:
            continue
        is_filler = any(code in FILLER_CODES for code, _ in curly)
        token = Token.from_surface(
            word, normalize, is_unintelligible=unintelligible, is_filler=is_filler
        )
        previous = labels[-1] if labels else None
        labels.append(_next_label(frames, previous))
        tokens.append(token)
        for frame in frames:
            frame.words += 1
            frame.segment_words += 1

    if frames:
        raise UnbalancedBracketsError("unclosed '['", len(items))
    if curly:
        raise UnbalancedBracketsError(f"unclosed '{{{curly[-1][0]}'", curly[-1][1])

    spans.sort(key=lambda span: (span.reparandum, span.nesting_depth))
    return BracketParse(tuple(tokens), tuple(labels), tuple(spans))


def _next_label(frames: List[_Frame], previous: Optional[BioLabel]) -> BioLabel:
    if not frames:
        return BioLabel.O
    reparandum_frames = [frame for frame in frames if frame.in_reparandum]
    if reparandum_frames:
        outer = reparandum_frames[0]
        return BioLabel.B_RM if outer.words == 0 else BioLabel.I_RM

    top = frames[-1]
    chained = len(top.plus_positions) > 1 and top.segment_words == 0
    if previous is not None and previous.is_reparandum:
        return BioLabel.B_RP
    if previous is BioLabel.I_RP and chained:
        return BioLabel.B_RP
    if previous is not None and previous.is_repair:
        return BioLabel.I_RP
    # Repair words with no reparandum before them cannot form a disfluency.
    return BioLabel.O


def _frame_spans(frame: _Frame, end: int) -> List[DisflSpan]:
    bounds = [frame.start, *frame.plus_positions, end]
    spans = []
    for k in range(len(bounds) - 2):
        reparandum = (bounds[k], bounds[k + 1])
        repair = (bounds[k + 1], bounds[k + 2])
        if reparandum[1] <= reparandum[0]:
            logger.debug(f"Skipping empty reparandum at token {reparandum[0]}")
            continue
        spans.append(
            DisflSpan(
                reparandum=reparandum,
                repair=repair if repair[1] > repair[0] else None,
                nesting_depth=frame.depth,
            )
        )
    return spans


def brackets_to_bio(
    annotated: Union[str, Sequence[str]], normalize: Optional[Normalizer] = None
) -> Tuple[List[Token], List[BioLabel]]:
    """Convert bracket markup to tokens and flat BIO labels."""
    parse = parse_brackets(annotated, normalize)
    return list(parse.tokens), list(parse.labels)


def validate_labels(labels: Iterable[Optional[BioLabel]]) -> None:
    """Raise InvalidLabelSequenceError at the first grammar violation."""
    previous: Optional[BioLabel] = None
    for position, label in enumerate(labels):
        if label is None:
            raise InvalidLabelSequenceError("unlabeled token", position)
        if not is_valid_transition(previous, label):
            raise InvalidLabelSequenceError(
                f"{label} cannot follow {previous or 'start'}", position
            )
        previous = label


def is_valid_sequence(labels: Iterable[Optional[BioLabel]]) -> bool:
    try:
        validate_labels(labels)
    except InvalidLabelSequenceError:
        return False
    return True


def _render(token: Token) -> List[str]:
    surface = f"(({token.surface}))" if token.is_unintelligible else token.surface
    if token.is_filler:
        return ["{F", surface, "}"]
    return [surface]


def bio_to_brackets(tokens: Sequence[Token], labels: Sequence[BioLabel]) -> List[str]:
    """Render tokens and flat BIO labels as a bracket stream.

    Chained repairs (B_RP after I_RP) are written as a second "+" inside
    the same bracket. Nesting is not reconstructed.
    """
    if len(tokens) != len(labels):
        raise InvalidLabelSequenceError("token/label length mismatch", len(labels))
    validate_labels(labels)

    out: List[str] = []
    state: Optional[str] = None
    for token, label in zip(tokens, labels):
        if label is BioLabel.O:
            if state == "rm":
                out += ["+", "]"]
            elif state == "rp":
                out.append("]")
            state = None
        elif label is BioLabel.B_RM:
            if state == "rm":
                out += ["+", "]"]
            elif state == "rp":
                out.append("]")
            out.append("[")
            state = "rm"
        elif label is BioLabel.B_RP:
            out.append("+")
            state = "rp"
        out.extend(_render(token))

    if state == "rm":
        out += ["+", "]"]
    elif state == "rp":
        out.append("]")
    return out


def format_brackets(tokens: Sequence[Token], labels: Sequence[BioLabel]) -> str:
    return " ".join(bio_to_brackets(tokens, labels))


def interruption_points(labels: Sequence[BioLabel]) -> frozenset:
    """Indices p such that an interruption point follows word p."""
    points = set()
    for p, label in enumerate(labels):
        if not label.is_reparandum:
            continue
        if p == len(labels) - 1 or labels[p + 1] is not BioLabel.I_RM:
            points.add(p)
    return frozenset(points)


def reparandum_chains(labels: Sequence[BioLabel]) -> List[Tuple[int, int, int]]:
    """(rm_start, rm_end, rp_end) for each reparandum run and its first repair.

    ``rp_end == rm_end`` when the reparandum has no repair (restart).
    """
    chains = []
    n = len(labels)
    i = 0
    while i < n:
        if labels[i] is not BioLabel.B_RM:
            i += 1
            continue
        rm_start = i
        i += 1
        while i < n and labels[i] is BioLabel.I_RM:
            i += 1
        rm_end = i
        if i < n and labels[i] is BioLabel.B_RP:
            i += 1
            while i < n and labels[i] is BioLabel.I_RP:
                i += 1
        chains.append((rm_start, rm_end, i))
    return chains


def spans_from_labels(labels: Sequence[BioLabel]) -> List[DisflSpan]:
    """Recover flat spans from labels; chained repairs become extra spans."""
    spans = []
    n = len(labels)
    for rm_start, rm_end, rp_end in reparandum_chains(labels):
        repair = (rm_end, rp_end) if rp_end > rm_end else None
        spans.append(DisflSpan(reparandum=(rm_start, rm_end), repair=repair))
        segment_start, i = rm_end, rp_end
        while (
            i < n
            and labels[i] is BioLabel.B_RP
            and i - segment_start >= 2
            and labels[i - 1] is BioLabel.I_RP
        ):
            k = i + 1
            while k < n and labels[k] is BioLabel.I_RP:
                k += 1
            spans.append(DisflSpan(reparandum=(segment_start, i), repair=(i, k)))
            segment_start, i = i, k
    return spans


def _content(tokens: Sequence[Token], bounds: Optional[Tuple[int, int]]) -> List[str]:
    if bounds is None:
        return []
    return [t.normalized for t in tokens[bounds[0] : bounds[1]] if not t.is_filler]


def _touches(a: DisflSpan, b: DisflSpan) -> bool:
    """A restart directly followed by another reparandum, in either order."""
    return (not a.has_repair and a.end == b.reparandum[0]) or (
        not b.has_repair and b.end == a.reparandum[0]
    )


def classify_disfluency_type(
    span: DisflSpan,
    tokens: Sequence[Token],
    others: Sequence[DisflSpan] = (),
    adjacent_is_overlap: bool = False,
) -> DisfluencyType:
    """Type of one disfluency span.

    Args:
        span: Span to classify
        tokens: Tokens of the unit the span indexes into
        others: Remaining spans of the unit, for overlap detection
        adjacent_is_overlap: Treat a restart that runs straight into the
            next reparandum as overlapping it (label space, where nesting
            only shows up as that adjacency)
    """
    if span.end > len(tokens) or span.reparandum[0] < 0:
        raise IndexOutOfRangeError(
            f"span {span.reparandum}-{span.end} outside {len(tokens)} tokens",
            span.end,
        )
    for other in others:
        if other == span:
            continue
        if span.overlaps(other) or (adjacent_is_overlap and _touches(span, other)):
            return DisfluencyType.COMPLEX
    if span.nesting_depth > 0:
        return DisfluencyType.COMPLEX

    repair = _content(tokens, span.repair)
    if not repair:
        return DisfluencyType.RESTART
    if _content(tokens, span.reparandum) == repair:
        return DisfluencyType.REPETITION
    return DisfluencyType.REPAIR


def token_disfluency_types(
    tokens: Sequence[Token], labels: Sequence[BioLabel]
) -> List[Optional[DisfluencyType]]:
    """Disfluency type per token from labels.

    Reparandum words get their span's type and fluent words get FLUENT.
    Repair-region words and fillers get None.
    """
    validate_labels(labels)
    spans = spans_from_labels(labels)
    types: List[Optional[DisfluencyType]] = [None] * len(tokens)
    for position, (token, label) in enumerate(zip(tokens, labels)):
        if label is BioLabel.O and not token.is_filler:
            types[position] = DisfluencyType.FLUENT
    for span in spans:
        start, end = span.reparandum
        if any(label.is_repair for label in labels[start:end]):
            continue  # chained segment: its words are repair-region words
        kind = classify_disfluency_type(span, tokens, spans, adjacent_is_overlap=True)
        for position in range(start, end):
            if not tokens[position].is_filler:
                types[position] = kind
    return types
