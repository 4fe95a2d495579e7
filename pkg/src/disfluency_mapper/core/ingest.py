"""Readers and writers for transcripts and the canonical record format.

Source files hold one bracket-annotated slash unit per line::

    A.1: and also the [ whole + whole ] thing ./

Target files hold one word per line::

    sw2005 A 17 gonna

Canonical files hold one JSON record per slash unit with the fields
``conv, speaker, index, boundary, tokens, labels, flags``.
"""

import logging
import re
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, TextIO, Tuple, Union

import jsonlines

from .align import ConventionTable, normalize_token
from .codec import TERMINATORS, parse_brackets
from .exceptions import (
    AnnotationError,
    IngestError,
    MalformedLineError,
    MalformedRecordError,
    SchemaViolationError,
)
from .model import BioLabel, BoundaryKind, Conversation, SlashUnit, Token

logger = logging.getLogger(__name__)

CANONICAL_FIELDS = ("conv", "speaker", "index", "boundary", "tokens", "labels", "flags")
KNOWN_FLAGS = frozenset({"filler", "fragment", "unintelligible"})

_SOURCE_LINE = re.compile(
    r"^(?P<speaker>[AB])\.(?P<index>\d+)(?:\s+utt\d+)?:\s*(?P<body>.*?)\s*$"
)
_SKIPPED_LINE = re.compile(r"^(#.*|=+|\s*)$")
_NONSPEECH_WORD = re.compile(r"^\[(silence|noise|laughter|vocalized-noise)\]$", re.I)
_UNINTELLIGIBLE_MARKER = re.compile(r"^(\[unintelligible\]|<+unintelligible>+)$", re.I)
_UNINTELLIGIBLE_WORD = re.compile(r"^\(\((.+)\)\)$")

Source = Union[str, Path, TextIO]


def _read_text(source: Source) -> Tuple[str, str]:
    """Return (text, name) for a path or an open stream."""
    if isinstance(source, Path) or (
        isinstance(source, str) and "\n" not in source and Path(source).is_file()
    ):
        path = Path(source)
        return path.read_text(encoding="utf-8"), str(path)
    if isinstance(source, str):
        return source, "<string>"
    return source.read(), getattr(source, "name", "<stream>")


def _stem(name: str) -> str:
    return Path(name).name.split(".")[0] if not name.startswith("<") else "unknown"


def _normalizer(table: Optional[ConventionTable]):
    return lambda surface: normalize_token(surface, table)


def parse_source(
    source: Source,
    conversation_id: Optional[str] = None,
    table: Optional[ConventionTable] = None,
) -> Conversation:
    """Parse a bracket-annotated source transcript into a Conversation.

    Args:
        source: Path, file contents or open stream
        conversation_id: Conversation id (defaults to the file name stem)
        table: Convention table for normalized forms

    Returns:
        Conversation with BIO labels on every unit
    """
    text, name = _read_text(source)
    conversation_id = conversation_id or _stem(name)
    normalize = _normalizer(table)
    units: Dict[Tuple[str, int], SlashUnit] = {}

    for line_no, line in enumerate(text.splitlines(), start=1):
        if _SKIPPED_LINE.match(line):
            continue
        match = _SOURCE_LINE.match(line)
        if not match:
            raise MalformedLineError("expected 'speaker.index: words ./'", line_no, name)
        items = match.group("body").split()
        if not items or items[-1] not in TERMINATORS:
            raise MalformedLineError("missing slash-unit terminator", line_no, name)
        speaker, index = match.group("speaker"), int(match.group("index"))
        if (speaker, index) in units:
            raise MalformedLineError(f"duplicate unit {speaker}.{index}", line_no, name)
        try:
            parse = parse_brackets(items[:-1], normalize)
        except AnnotationError as e:
            error = type(e)(f"{name}:{line_no}: {e.reason}", e.position)
            error.line_no = line_no
            raise error from e
        boundary = BoundaryKind.INTERRUPTED if items[-1] == "-/" else BoundaryKind.COMPLETE
        units[(speaker, index)] = SlashUnit(
            conversation_id=conversation_id,
            speaker=speaker,
            index=index,
            tokens=parse.tokens,
            labels=parse.labels,
            boundary_kind=boundary,
        )

    conversation = Conversation(conversation_id, tuple(units.values()))
    logger.info(
        f"Parsed source {conversation_id}: {len(units)} units, "
        f"{conversation.token_count} tokens"
    )
    return conversation


def _sort_key(value: str) -> float:
    return float(value)


def parse_target(
    source: Source,
    conversation_id: Optional[str] = None,
    table: Optional[ConventionTable] = None,
) -> Conversation:
    """Parse a word-per-line target transcript.

    Each channel becomes a single unlabeled unit (index 0); module
    ``segment`` later splits it along the source slash units.
    Non-speech markers are dropped; an unintelligible marker flags the
    words on either side of it.
    """
    text, name = _read_text(source)
    normalize = _normalizer(table)
    records: Dict[str, List[Tuple[float, int, str]]] = {}
    marks: Dict[str, List[Tuple[float, int]]] = {}
    seen_conversation: Optional[str] = conversation_id

    for line_no, line in enumerate(text.splitlines(), start=1):
        if _SKIPPED_LINE.match(line):
            continue
        fields = line.split()
        if len(fields) != 4:
            raise MalformedRecordError("expected 'conv channel index word'", line_no, name)
        conv, channel, position, word = fields
        if channel not in ("A", "B"):
            raise MalformedRecordError(f"unknown channel '{channel}'", line_no, name)
        try:
            order = _sort_key(position)
        except ValueError as e:
            raise MalformedRecordError(f"bad index '{position}'", line_no, name) from e
        if seen_conversation is None:
            seen_conversation = conv
        elif conv != seen_conversation:
            raise MalformedRecordError(
                f"conversation '{conv}' differs from '{seen_conversation}'", line_no, name
            )
        if _NONSPEECH_WORD.match(word):
            continue
        if _UNINTELLIGIBLE_MARKER.match(word):
            marks.setdefault(channel, []).append((order, line_no))
            continue
        records.setdefault(channel, []).append((order, line_no, word))

    conversation_id = seen_conversation or _stem(name)
    units = []
    for channel in sorted(records):
        words = sorted(records[channel])
        flagged = set()
        for order, line_no in marks.get(channel, []):
            before = [k for k, w in enumerate(words) if (w[0], w[1]) < (order, line_no)]
            if before:
                flagged.add(before[-1])
            if len(before) < len(words):
                flagged.add(len(before))
        tokens = []
        for k, (_, _, word) in enumerate(words):
            unintelligible = k in flagged
            match = _UNINTELLIGIBLE_WORD.match(word)
            if match:
                word, unintelligible = match.group(1), True
            tokens.append(
                Token.from_surface(word, normalize, is_unintelligible=unintelligible)
            )
        units.append(
            SlashUnit(
                conversation_id=conversation_id,
                speaker=channel,
                index=0,
                tokens=tuple(tokens),
                labels=(None,) * len(tokens),
            )
        )
    if not units:
        logger.warning(f"No target words in {name}")
    return Conversation(conversation_id, tuple(units))


def merge_conversations(
    conversations: Iterable[Conversation],
    origins: Optional[Sequence[Union[str, Path]]] = None,
) -> List[Conversation]:
    """Merge per-channel files of the same conversation, sorted by id.

    Args:
        conversations: Parsed target files
        origins: File of each conversation, named when a channel repeats

    Raises:
        IngestError: If one channel of a conversation comes from two files
    """
    merged: Dict[str, List[SlashUnit]] = {}
    seen: Dict[Tuple[str, str], Optional[str]] = {}
    for position, conversation in enumerate(conversations):
        origin = str(origins[position]) if origins is not None else None
        for speaker in conversation.speakers:
            key = (conversation.id, speaker)
            if key in seen:
                first = seen[key]
                reason = f"channel {speaker} of {conversation.id} already read"
                message = f"{reason} from {first}" if first else reason
                raise IngestError(message, path=origin)
            seen[key] = origin
        merged.setdefault(conversation.id, []).extend(conversation.units)
    return [Conversation(conv_id, tuple(merged[conv_id])) for conv_id in sorted(merged)]


def unit_to_record(unit: SlashUnit) -> Dict[str, object]:
    return {
        "conv": unit.conversation_id,
        "speaker": unit.speaker,
        "index": unit.index,
        "boundary": unit.boundary_kind.value,
        "tokens": [token.surface for token in unit.tokens],
        "labels": [label.value if label is not None else None for label in unit.labels],
        "flags": [list(token.flags) for token in unit.tokens],
    }


def record_to_unit(
    record: Dict[str, object],
    table: Optional[ConventionTable] = None,
    line_no: Optional[int] = None,
) -> SlashUnit:
    """Validate one canonical record and build its SlashUnit."""
    for name in CANONICAL_FIELDS:
        if name not in record:
            raise SchemaViolationError(name, line_no)
    tokens, labels, flags = record["tokens"], record["labels"], record["flags"]
    if not isinstance(record["conv"], str) or not record["conv"]:
        raise SchemaViolationError("conv", line_no)
    if record["speaker"] not in ("A", "B"):
        raise SchemaViolationError("speaker", line_no)
    if not isinstance(record["index"], int) or isinstance(record["index"], bool):
        raise SchemaViolationError("index", line_no)
    if not isinstance(tokens, list) or not all(isinstance(t, str) and t for t in tokens):
        raise SchemaViolationError("tokens", line_no)
    if not isinstance(labels, list) or len(labels) != len(tokens):
        raise SchemaViolationError("labels", line_no)
    if not isinstance(flags, list) or len(flags) != len(tokens):
        raise SchemaViolationError("flags", line_no)
    try:
        boundary = BoundaryKind(record["boundary"])
        parsed_labels = tuple(BioLabel(l) if l is not None else None for l in labels)
    except ValueError as e:
        field = "boundary" if "boundary" in str(e).lower() else "labels"
        raise SchemaViolationError(field, line_no) from e

    normalize = _normalizer(table)
    built = []
    for surface, token_flags in zip(tokens, flags):
        if not isinstance(token_flags, list) or not set(token_flags) <= KNOWN_FLAGS:
            raise SchemaViolationError("flags", line_no)
        built.append(
            Token.from_surface(
                surface,
                normalize,
                is_unintelligible="unintelligible" in token_flags,
                is_filler="filler" in token_flags,
            )
        )
    return SlashUnit(
        conversation_id=record["conv"],
        speaker=record["speaker"],
        index=record["index"],
        tokens=tuple(built),
        labels=parsed_labels,
        boundary_kind=boundary,
    )


def write_canonical(conversations: Iterable[Conversation], stream: TextIO) -> int:
    """Write conversations as canonical records; returns the unit count."""
    written = 0
    with jsonlines.Writer(stream, compact=True) as writer:
        for conversation in sorted(conversations, key=lambda c: c.id):
            for unit in conversation.units:
                writer.write(unit_to_record(unit))
                written += 1
    return written


class _NumberedLines:
    """Line iterator that remembers the number of the last line handed out."""

    def __init__(self, stream: Iterable[str]) -> None:
        self._lines = iter(stream)
        self.line_no = 0

    def __iter__(self) -> "_NumberedLines":
        return self

    def __next__(self) -> str:
        line = next(self._lines)
        self.line_no += 1
        return line


def iter_canonical(
    stream: TextIO, table: Optional[ConventionTable] = None
) -> Iterator[SlashUnit]:
    """Stream SlashUnits from canonical records."""
    lines = _NumberedLines(stream)
    reader = jsonlines.Reader(lines)
    try:
        for record in reader.iter(type=dict, skip_empty=True):
            yield record_to_unit(record, table, lines.line_no)
    except jsonlines.InvalidLineError as e:
        raise SchemaViolationError("<record>", e.lineno) from e


def read_canonical(
    source: Source, table: Optional[ConventionTable] = None
) -> List[Conversation]:
    """Read canonical records grouped into conversations sorted by id."""
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as handle:
            return read_canonical(handle, table)
    grouped: Dict[str, List[SlashUnit]] = {}
    for unit in iter_canonical(source, table):
        grouped.setdefault(unit.conversation_id, []).append(unit)
    try:
        return [Conversation(conv_id, tuple(grouped[conv_id])) for conv_id in sorted(grouped)]
    except ValueError as e:
        raise SchemaViolationError("index") from e
