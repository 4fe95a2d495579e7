"""Domain types shared by every stage of the mapping pipeline."""

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Iterator, Optional, Sequence, Tuple

UnitKey = Tuple[str, str, int]
"""(conversation id, speaker channel, slash-unit index)."""


class BioLabel(str, Enum):
    """Disfluency tag of one word."""

    O = "O"
    B_RM = "B_RM"
    I_RM = "I_RM"
    B_RP = "B_RP"
    I_RP = "I_RP"

    @property
    def is_reparandum(self) -> bool:
        return self in (BioLabel.B_RM, BioLabel.I_RM)

    @property
    def is_repair(self) -> bool:
        return self in (BioLabel.B_RP, BioLabel.I_RP)

    @property
    def is_disfluent(self) -> bool:
        return self is not BioLabel.O

    @property
    def role(self) -> str:
        """Coarse role of the label: outside, reparandum or repair."""
        if self.is_reparandum:
            return "reparandum"
        if self.is_repair:
            return "repair"
        return "outside"

    def __str__(self) -> str:
        return self.value


LABELS: Tuple[BioLabel, ...] = tuple(BioLabel)
DISFLUENT_LABELS = frozenset(label for label in BioLabel if label.is_disfluent)

# Labels that may precede each label; None stands for the sequence start.
_PREDECESSORS = {
    BioLabel.O: None,
    BioLabel.B_RM: None,
    BioLabel.I_RM: frozenset({BioLabel.B_RM, BioLabel.I_RM}),
    BioLabel.I_RP: frozenset({BioLabel.B_RP, BioLabel.I_RP}),
    BioLabel.B_RP: frozenset({BioLabel.B_RM, BioLabel.I_RM, BioLabel.I_RP}),
}


def is_valid_transition(previous: Optional[BioLabel], label: BioLabel) -> bool:
    """Whether ``label`` may follow ``previous`` (None = sequence start)."""
    allowed = _PREDECESSORS[label]
    if allowed is None:
        return True
    return previous is not None and previous in allowed


class DisfluencyType(str, Enum):
    """Type of the disfluency a reparandum word belongs to."""

    RESTART = "restart"
    REPETITION = "repetition"
    REPAIR = "repair"
    COMPLEX = "complex"
    FLUENT = "fluent"

    def __str__(self) -> str:
        return self.value


class WordCategory(str, Enum):
    """Coarse lexical class used by the word-error analyses."""

    FUNCTION = "function"
    CONTENT = "content"
    FRAGMENT = "fragment"
    OTHER = "other"

    def __str__(self) -> str:
        return self.value


class BoundaryKind(str, Enum):
    """How a slash unit ends: "./" (complete) or "-/" (interrupted)."""

    COMPLETE = "complete"
    INTERRUPTED = "interrupted"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Token:
    """One transcribed word."""

    surface: str
    normalized: str
    is_fragment: bool = False
    is_unintelligible: bool = False
    is_filler: bool = False
    category: Optional[WordCategory] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.is_fragment != self.surface.endswith("-"):
            raise ValueError(f"Fragment flag inconsistent with surface '{self.surface}'")
        if self.surface and not self.normalized:
            raise ValueError(f"Empty normalized form for '{self.surface}'")

    @classmethod
    def from_surface(
        cls,
        surface: str,
        normalize: Optional[Callable[[str], str]] = None,
        is_unintelligible: bool = False,
        is_filler: bool = False,
    ) -> "Token":
        """Build a token, deriving the fragment flag and normalized form."""
        normalized = normalize(surface) if normalize else surface.lower()
        return cls(
            surface=surface,
            normalized=normalized or surface.lower(),
            is_fragment=surface.endswith("-"),
            is_unintelligible=is_unintelligible,
            is_filler=is_filler,
        )

    def with_category(self, category: WordCategory) -> "Token":
        return replace(self, category=category)

    @property
    def flags(self) -> Tuple[str, ...]:
        """Names of the boolean flags set on this token, sorted."""
        names = []
        if self.is_filler:
            names.append("filler")
        if self.is_fragment:
            names.append("fragment")
        if self.is_unintelligible:
            names.append("unintelligible")
        return tuple(names)


@dataclass(frozen=True)
class DisflSpan:
    """A reparandum with its optional repair, as half-open token ranges."""

    reparandum: Tuple[int, int]
    repair: Optional[Tuple[int, int]] = None
    nesting_depth: int = 0

    def __post_init__(self) -> None:
        start, end = self.reparandum
        if end <= start:
            raise ValueError(f"Empty reparandum {self.reparandum}")
        if self.repair is not None and self.repair[0] < end:
            raise ValueError(f"Repair {self.repair} starts inside reparandum")
        if self.nesting_depth < 0:
            raise ValueError("Negative nesting depth")

    @property
    def end(self) -> int:
        """Index just past the last word of the span."""
        if self.repair is not None and self.repair[1] > self.repair[0]:
            return self.repair[1]
        return self.reparandum[1]

    @property
    def has_repair(self) -> bool:
        return self.repair is not None and self.repair[1] > self.repair[0]

    def overlaps(self, other: "DisflSpan") -> bool:
        """True when the two spans share at least one word."""
        return self.reparandum[0] < other.end and other.reparandum[0] < self.end


class ConstraintKind(str, Enum):
    FIXED = "fixed"
    D = "D"
    A = "A"


@dataclass(frozen=True)
class ConstraintLabel:
    """Decoding constraint for one target word: Fixed(label), D or A."""

    kind: ConstraintKind
    label: Optional[BioLabel] = None

    def __post_init__(self) -> None:
        if (self.kind is ConstraintKind.FIXED) != (self.label is not None):
            raise ValueError("Only Fixed constraints carry a label")

    @classmethod
    def fixed(cls, label: BioLabel) -> "ConstraintLabel":
        return cls(ConstraintKind.FIXED, label)

    @property
    def allowed(self) -> frozenset:
        if self.kind is ConstraintKind.FIXED:
            return frozenset({self.label})
        if self.kind is ConstraintKind.D:
            return DISFLUENT_LABELS
        return frozenset(LABELS)

    def admits(self, label: BioLabel) -> bool:
        return label in self.allowed

    def __str__(self) -> str:
        if self.kind is ConstraintKind.FIXED:
            return f"Fixed({self.label})"
        return self.kind.value


DISFLUENT = ConstraintLabel(ConstraintKind.D)
ANY = ConstraintLabel(ConstraintKind.A)


@dataclass(frozen=True)
class SlashUnit:
    """A sentence-like unit with one label per token.

    Target units read before mapping carry ``None`` labels (unlabeled).
    """

    conversation_id: str
    speaker: str
    index: int
    tokens: Tuple[Token, ...]
    labels: Tuple[Optional[BioLabel], ...]
    boundary_kind: BoundaryKind = BoundaryKind.COMPLETE

    def __post_init__(self) -> None:
        if len(self.tokens) != len(self.labels):
            raise ValueError(
                f"Unit {self.unit_id}: {len(self.tokens)} tokens but "
                f"{len(self.labels)} labels"
            )

    @property
    def key(self) -> UnitKey:
        return (self.conversation_id, self.speaker, self.index)

    @property
    def unit_id(self) -> str:
        return f"{self.conversation_id}/{self.speaker}/{self.index}"

    @property
    def is_labeled(self) -> bool:
        return all(label is not None for label in self.labels)

    def __len__(self) -> int:
        return len(self.tokens)

    def with_labels(self, labels: Sequence[Optional[BioLabel]]) -> "SlashUnit":
        return replace(self, labels=tuple(labels))

    def with_tokens(
        self, tokens: Sequence[Token], labels: Sequence[Optional[BioLabel]]
    ) -> "SlashUnit":
        return replace(self, tokens=tuple(tokens), labels=tuple(labels))


@dataclass(frozen=True)
class Conversation:
    """All slash units of one conversation, ordered by (speaker, index)."""

    id: str
    units: Tuple[SlashUnit, ...] = ()

    def __post_init__(self) -> None:
        ordered = tuple(sorted(self.units, key=lambda unit: (unit.speaker, unit.index)))
        object.__setattr__(self, "units", ordered)
        last: dict = {}
        for unit in ordered:
            if unit.conversation_id != self.id:
                raise ValueError(f"Unit {unit.unit_id} does not belong to {self.id}")
            if unit.speaker in last and unit.index <= last[unit.speaker]:
                raise ValueError(f"Duplicate unit index {unit.unit_id}")
            last[unit.speaker] = unit.index

    @property
    def speakers(self) -> Tuple[str, ...]:
        return tuple(sorted({unit.speaker for unit in self.units}))

    def channel(self, speaker: str) -> Tuple[SlashUnit, ...]:
        return tuple(unit for unit in self.units if unit.speaker == speaker)

    def channel_tokens(self, speaker: str) -> Tuple[Token, ...]:
        return tuple(token for unit in self.channel(speaker) for token in unit.tokens)

    def unit(self, speaker: str, index: int) -> Optional[SlashUnit]:
        for unit in self.units:
            if unit.speaker == speaker and unit.index == index:
                return unit
        return None

    def __iter__(self) -> Iterator[SlashUnit]:
        return iter(self.units)

    @property
    def token_count(self) -> int:
        return sum(len(unit) for unit in self.units)
