"""Word alignment between an original and a careful transcription.

Alignments are minimum-edit scripts over normalized word forms. ``Del``
marks a word found only in the original (source) transcript, ``Ins`` a
word found only in the careful (target) transcript.
"""

import csv
import io
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import (
    Dict,
    FrozenSet,
    Iterable,
    List,
    Mapping,
    Optional,
    Sequence,
    TextIO,
    Tuple,
    Union,
)

import numpy as np

from .exceptions import EmptyCorpusError, IngestError, MismatchedAlignmentError
from .model import Token, UnitKey

logger = logging.getLogger(__name__)

_LAUGHTER_WORD = re.compile(r"^\[laughter-(.+)\]$")
_BRACKETED_PART = re.compile(r"\[[^\]]*\]")
_UNDERSCORE_ACRONYM = re.compile(r"^(?:[a-z]_)+[a-z]$")
_DOTTED_ACRONYM = re.compile(r"^(?:[a-z]\.){2,}$")
_CLITIC = re.compile(r"^(.+?)(n't|'s|'re|'ve|'ll|'d|'m)$")

ALIGNMENT_COLUMNS = ("conv", "channel", "unit", "op", "src_word", "tgt_word")


@dataclass(frozen=True)
class ConventionTable:
    """Transcription-convention equivalences and the contraction split map.

    Each equivalence class collapses onto its lexicographically smallest
    member, so the table is symmetric in the pairs it is built from.
    """

    canonical: Mapping[str, str] = field(default_factory=dict)
    contractions: Mapping[str, Tuple[str, ...]] = field(default_factory=dict)

    @classmethod
    def from_pairs(
        cls,
        pairs: Iterable[Tuple[str, str]],
        contractions: Optional[Mapping[str, Tuple[str, ...]]] = None,
    ) -> "ConventionTable":
        parent: Dict[str, str] = {}

        def find(word: str) -> str:
            parent.setdefault(word, word)
            while parent[word] != word:
                parent[word] = parent[parent[word]]
                word = parent[word]
            return word

        for left, right in pairs:
            a, b = find(left.lower()), find(right.lower())
            if a != b:
                parent[max(a, b)] = min(a, b)

        classes: Dict[str, List[str]] = {}
        for word in list(parent):
            classes.setdefault(find(word), []).append(word)
        canonical = {
            word: min(members) for members in classes.values() for word in members
        }
        return cls(canonical=canonical, contractions=dict(contractions or {}))

    @classmethod
    def load(cls, path: Union[str, Path, None] = None) -> "ConventionTable":
        """Load a table from TSV lines.

        ``pair<TAB>variant<TAB>canonical`` adds an equivalence and
        ``split<TAB>word<TAB>part part ...`` adds a contraction split.
        Without a path the packaged defaults are used.
        """
        if path is None:
            text = (
                resources.files("disfluency_mapper")
                .joinpath("data/conventions.tsv")
                .read_text(encoding="utf-8")
            )
            source = "<packaged conventions>"
        else:
            text = Path(path).read_text(encoding="utf-8")
            source = str(path)

        pairs: List[Tuple[str, str]] = []
        splits: Dict[str, Tuple[str, ...]] = {}
        for line_no, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 3 or fields[0] not in ("pair", "split"):
                raise IngestError("expected 'pair|split<TAB>a<TAB>b'", line_no, source)
            if fields[0] == "pair":
                pairs.append((fields[1], fields[2]))
            else:
                splits[fields[1].lower()] = tuple(fields[2].lower().split())
        logger.debug(f"Loaded {len(pairs)} convention pairs from {source}")
        return cls.from_pairs(pairs, splits)

    def lookup(self, word: str) -> str:
        return self.canonical.get(word, word)


_DEFAULT_TABLE: Optional[ConventionTable] = None


def default_table() -> ConventionTable:
    global _DEFAULT_TABLE
    if _DEFAULT_TABLE is None:
        _DEFAULT_TABLE = ConventionTable.load()
    return _DEFAULT_TABLE


def normalize_token(surface: str, table: Optional[ConventionTable] = None) -> str:
    """Case-fold a surface form and collapse transcription conventions.

    Idempotent: normalizing a normalized form returns it unchanged.
    """
    table = table if table is not None else default_table()
    word = surface.strip().lower()
    laughter = _LAUGHTER_WORD.match(word)
    if laughter:
        word = laughter.group(1)
    if "[" in word and not (word.startswith("[") and word.endswith("]")):
        stripped = _BRACKETED_PART.sub("", word)
        word = stripped or word
    if _UNDERSCORE_ACRONYM.match(word):
        word = word.replace("_", "")
    elif _DOTTED_ACRONYM.match(word):
        word = word.replace(".", "")
    word = table.lookup(word)
    return word or surface.lower()


def split_contraction(word: str, table: Optional[ConventionTable] = None) -> Tuple[str, ...]:
    """Split a normalized word into Treebank-style parts."""
    table = table if table is not None else default_table()
    if word in table.contractions:
        return table.contractions[word]
    clitic = _CLITIC.match(word)
    if clitic:
        return (clitic.group(1), clitic.group(2))
    return (word,)


def split_tokens(
    tokens: Sequence[Token], table: Optional[ConventionTable] = None
) -> List[Token]:
    table = table if table is not None else default_table()
    out: List[Token] = []
    for token in tokens:
        parts = split_contraction(token.normalized, table)
        if len(parts) == 1:
            out.append(token)
            continue
        for part in parts:
            out.append(
                Token.from_surface(
                    part,
                    lambda s: normalize_token(s, table),
                    is_unintelligible=token.is_unintelligible,
                    is_filler=token.is_filler,
                )
            )
    return out


def is_single_phone_fragment(token: Token, max_graphemes: int = 1) -> bool:
    """Approximate single-phone test: a fragment with a very short stem."""
    if not token.is_fragment:
        return False
    stem = _BRACKETED_PART.sub("", token.surface.lower()).rstrip("-")
    return len(stem) <= max_graphemes


class OpKind(str, Enum):
    MATCH = "match"
    SUB = "sub"
    INS = "ins"
    DEL = "del"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class AlignOp:
    """One edit-script step; ``src``/``tgt`` are token indices or None."""

    kind: OpKind
    src: Optional[int] = None
    tgt: Optional[int] = None

    @classmethod
    def match(cls, i: int, j: int) -> "AlignOp":
        return cls(OpKind.MATCH, i, j)

    @classmethod
    def sub(cls, i: int, j: int) -> "AlignOp":
        return cls(OpKind.SUB, i, j)

    @classmethod
    def ins(cls, j: int) -> "AlignOp":
        return cls(OpKind.INS, None, j)

    @classmethod
    def delete(cls, i: int) -> "AlignOp":
        return cls(OpKind.DEL, i, None)

    @property
    def is_edit(self) -> bool:
        return self.kind is not OpKind.MATCH


@dataclass(frozen=True)
class Alignment:
    """An edit script together with the token sequences it relates."""

    ops: Tuple[AlignOp, ...]
    src: Tuple[Token, ...]
    tgt: Tuple[Token, ...]

    @property
    def cost(self) -> int:
        return sum(1 for op in self.ops if op.is_edit)

    @property
    def counts(self) -> Counter:
        return Counter(op.kind for op in self.ops)

    @property
    def has_edits(self) -> bool:
        return any(op.is_edit for op in self.ops)

    def validate(self) -> None:
        """Check that ops cover each index exactly once, in order."""
        next_src, next_tgt = 0, 0
        for op in self.ops:
            if op.src is not None:
                if op.src != next_src or op.src >= len(self.src):
                    raise MismatchedAlignmentError(
                        f"source index {op.src} out of order or range"
                    )
                next_src += 1
            if op.tgt is not None:
                if op.tgt != next_tgt or op.tgt >= len(self.tgt):
                    raise MismatchedAlignmentError(
                        f"target index {op.tgt} out of order or range"
                    )
                next_tgt += 1
        if next_src != len(self.src) or next_tgt != len(self.tgt):
            raise MismatchedAlignmentError("alignment does not cover both sequences")

    def target_to_source(self) -> Dict[int, int]:
        """Target index -> source index for Match/Sub ops."""
        return {
            op.tgt: op.src
            for op in self.ops
            if op.src is not None and op.tgt is not None
        }


def _trellis(src_ids: np.ndarray, tgt_ids: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    n, m = len(src_ids), len(tgt_ids)
    equal = src_ids[:, None] == tgt_ids[None, :]
    sub_cost = np.where(equal, 0, 1).astype(np.int32)
    trellis = np.zeros((n + 1, m + 1), dtype=np.int32)
    cols = np.arange(m + 1, dtype=np.int32)
    trellis[0] = cols
    for i in range(1, n + 1):
        best = np.empty(m + 1, dtype=np.int32)
        best[0] = i
        best[1:] = np.minimum(trellis[i - 1, :-1] + sub_cost[i - 1], trellis[i - 1, 1:] + 1)
        # Insertions run along the row: row[j] = min_k<=j best[k] + (j - k)
        trellis[i] = np.minimum.accumulate(best - cols) + cols
    return trellis, equal


def align_units(
    src: Sequence[Token],
    tgt: Sequence[Token],
    table: Optional[ConventionTable] = None,
    split_contractions: bool = False,
) -> Alignment:
    """Minimum-edit alignment of two token sequences.

    Costs are Match=0, Sub=Ins=Del=1; Match needs equal normalized forms.
    Among equal-cost scripts the backtrace prefers Sub, then Ins, then Del
    at the latest position, so edits land as late as possible.

    Args:
        src: Original-transcript tokens
        tgt: Careful-transcript tokens
        table: Convention table used when splitting contractions
        split_contractions: Split clitics and gonna/wanna-style forms first

    Returns:
        Alignment over the (possibly split) sequences
    """
    if split_contractions:
        src, tgt = split_tokens(src, table), split_tokens(tgt, table)
    src, tgt = tuple(src), tuple(tgt)

    vocabulary: Dict[str, int] = {}
    src_ids = np.array(
        [vocabulary.setdefault(t.normalized, len(vocabulary)) for t in src], dtype=np.int64
    )
    tgt_ids = np.array(
        [vocabulary.setdefault(t.normalized, len(vocabulary)) for t in tgt], dtype=np.int64
    )
    trellis, equal = _trellis(src_ids, tgt_ids)

    ops: List[AlignOp] = []
    i, j = len(src), len(tgt)
    while i > 0 or j > 0:
        here = trellis[i, j]
        if i > 0 and j > 0 and not equal[i - 1, j - 1] and here == trellis[i - 1, j - 1] + 1:
            ops.append(AlignOp.sub(i - 1, j - 1))
            i, j = i - 1, j - 1
        elif j > 0 and here == trellis[i, j - 1] + 1:
            ops.append(AlignOp.ins(j - 1))
            j -= 1
        elif i > 0 and here == trellis[i - 1, j] + 1:
            ops.append(AlignOp.delete(i - 1))
            i -= 1
        else:
            ops.append(AlignOp.match(i - 1, j - 1))
            i, j = i - 1, j - 1
    ops.reverse()
    return Alignment(tuple(ops), src, tgt)


def replay(alignment: Alignment) -> List[str]:
    """Apply the edit script to the source; returns normalized target words."""
    out: List[str] = []
    for op in alignment.ops:
        if op.kind is OpKind.MATCH:
            out.append(alignment.src[op.src].normalized)
        elif op.kind in (OpKind.SUB, OpKind.INS):
            out.append(alignment.tgt[op.tgt].normalized)
    return out


class ErrorCategory(str, Enum):
    """Transcription error categories of a word instance."""

    M_STAR = "m_star"  # full miss: target-only word
    M = "m"  # miss: target word inserted or substituted
    H = "h"  # hallucination: source word deleted or substituted

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class ErrorAssignment:
    """Error categories per word instance on each side of an alignment."""

    target: Mapping[int, FrozenSet[ErrorCategory]]
    source: Mapping[int, FrozenSet[ErrorCategory]]

    def count(self, category: ErrorCategory) -> int:
        side = self.source if category is ErrorCategory.H else self.target
        return sum(1 for cats in side.values() if category in cats)

    @property
    def is_empty(self) -> bool:
        return not self.target and not self.source


_MISS_FULL = frozenset({ErrorCategory.M_STAR, ErrorCategory.M})
_MISS = frozenset({ErrorCategory.M})
_HALLUCINATION = frozenset({ErrorCategory.H})


def classify_errors(
    alignment: Alignment,
    src: Optional[Sequence[Token]] = None,
    tgt: Optional[Sequence[Token]] = None,
) -> ErrorAssignment:
    """Assign miss/hallucination categories to each edited word."""
    n_src = len(src) if src is not None else len(alignment.src)
    n_tgt = len(tgt) if tgt is not None else len(alignment.tgt)
    target: Dict[int, FrozenSet[ErrorCategory]] = {}
    source: Dict[int, FrozenSet[ErrorCategory]] = {}
    for op in alignment.ops:
        if (op.src is not None and op.src >= n_src) or (
            op.tgt is not None and op.tgt >= n_tgt
        ):
            raise MismatchedAlignmentError(f"{op} exceeds {n_src}x{n_tgt} sequences")
        if op.kind is OpKind.INS:
            target[op.tgt] = _MISS_FULL
        elif op.kind is OpKind.SUB:
            target[op.tgt] = _MISS
            source[op.src] = _HALLUCINATION
        elif op.kind is OpKind.DEL:
            source[op.src] = _HALLUCINATION
    return ErrorAssignment(target=target, source=source)


@dataclass(frozen=True)
class DifferenceOptions:
    split_contractions: bool = False
    exclude_single_phone_fragments: bool = False
    single_phone_max_graphemes: int = 1


@dataclass(frozen=True)
class DifferenceReport:
    """Word difference rate over a corpus of alignments."""

    insertions: int
    deletions: int
    substitutions: int
    n_target: int

    @property
    def rate(self) -> float:
        return (self.insertions + self.deletions + self.substitutions) / self.n_target

    @property
    def sub_rate(self) -> float:
        return self.substitutions / self.n_target

    def as_dict(self) -> Dict[str, Union[int, float]]:
        return {
            "rate": self.rate,
            "sub_rate": self.sub_rate,
            "ins": self.insertions,
            "del": self.deletions,
            "sub": self.substitutions,
            "n_target": self.n_target,
        }


def scoring_view(
    alignment: Alignment,
    options: DifferenceOptions,
    table: Optional[ConventionTable] = None,
) -> Alignment:
    """Re-align under the scoring options when they change either side."""
    if not options.split_contractions and not options.exclude_single_phone_fragments:
        return alignment
    src, tgt = list(alignment.src), list(alignment.tgt)
    if options.exclude_single_phone_fragments:
        limit = options.single_phone_max_graphemes
        src = [t for t in src if not is_single_phone_fragment(t, limit)]
        tgt = [t for t in tgt if not is_single_phone_fragment(t, limit)]
    if options.split_contractions:
        src, tgt = split_tokens(src, table), split_tokens(tgt, table)
    if tuple(src) == alignment.src and tuple(tgt) == alignment.tgt:
        return alignment
    return align_units(src, tgt, table)


def difference_rate(
    alignments: Iterable[Alignment],
    options: Optional[DifferenceOptions] = None,
    table: Optional[ConventionTable] = None,
) -> DifferenceReport:
    """(ins + del + sub) / target words over all alignments."""
    options = options or DifferenceOptions()
    counts: Counter = Counter()
    n_target = 0
    for alignment in alignments:
        view = scoring_view(alignment, options, table)
        counts.update(view.counts)
        n_target += len(view.tgt)
    if n_target == 0:
        raise EmptyCorpusError("No target words to compute a difference rate over")
    report = DifferenceReport(
        insertions=counts[OpKind.INS],
        deletions=counts[OpKind.DEL],
        substitutions=counts[OpKind.SUB],
        n_target=n_target,
    )
    logger.info(
        f"Difference rate {report.rate:.4f} (sub {report.sub_rate:.4f}) "
        f"over {n_target} target words"
    )
    return report


def write_alignments(
    rows: Iterable[Tuple[UnitKey, Alignment]], stream: TextIO
) -> int:
    """Write alignment TSV rows; returns the number of op records."""
    writer = csv.writer(stream, delimiter="\t", lineterminator="\n")
    writer.writerow(ALIGNMENT_COLUMNS)
    written = 0
    for (conv, channel, unit), alignment in rows:
        for op in alignment.ops:
            src_word = alignment.src[op.src].surface if op.src is not None else ""
            tgt_word = alignment.tgt[op.tgt].surface if op.tgt is not None else ""
            writer.writerow((conv, channel, unit, op.kind.value, src_word, tgt_word))
            written += 1
    return written


def read_alignments(
    stream: Union[TextIO, str, Path], table: Optional[ConventionTable] = None
) -> Dict[UnitKey, Alignment]:
    """Read alignment TSV into one Alignment per unit.

    Released alignments are trusted as given; only their internal
    consistency (op kinds and word presence) is checked.
    """
    if isinstance(stream, (str, Path)):
        with open(stream, encoding="utf-8", newline="") as handle:
            return read_alignments(handle, table)

    def normalize(surface: str) -> str:
        return normalize_token(surface, table)

    grouped: Dict[UnitKey, Tuple[List[AlignOp], List[Token], List[Token]]] = {}
    reader = csv.reader(stream, delimiter="\t")
    header = next(reader, None)
    if header is None:
        return {}
    if tuple(header) != ALIGNMENT_COLUMNS:
        raise IngestError(f"unexpected alignment header {header}", 1)
    for line_no, row in enumerate(reader, start=2):
        if len(row) != len(ALIGNMENT_COLUMNS):
            raise IngestError("expected 6 tab-separated fields", line_no)
        conv, channel, unit, op_name, src_word, tgt_word = row
        try:
            kind = OpKind(op_name)
            key = (conv, channel, int(unit))
        except ValueError as e:
            raise IngestError(f"bad alignment record: {e}", line_no) from e
        needs_src = kind is not OpKind.INS
        needs_tgt = kind is not OpKind.DEL
        if bool(src_word) != needs_src or bool(tgt_word) != needs_tgt:
            raise IngestError(f"word columns inconsistent with op '{kind}'", line_no)
        ops, src, tgt = grouped.setdefault(key, ([], [], []))
        src_index = tgt_index = None
        if needs_src:
            src_index = len(src)
            src.append(Token.from_surface(src_word, normalize))
        if needs_tgt:
            tgt_index = len(tgt)
            tgt.append(Token.from_surface(tgt_word, normalize))
        ops.append(AlignOp(kind, src_index, tgt_index))

    return {
        key: Alignment(tuple(ops), tuple(src), tuple(tgt))
        for key, (ops, src, tgt) in sorted(grouped.items())
    }


def alignments_to_text(rows: Iterable[Tuple[UnitKey, Alignment]]) -> str:
    buffer = io.StringIO()
    write_alignments(rows, buffer)
    return buffer.getvalue()
