"""Corpus statistics over aligned and silver-labeled transcripts.

Counting happens per unit into mergeable tables; reports are built from the
merged totals.
"""

import hashlib
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Optional, Tuple, Union

from .align import (
    Alignment,
    ConventionTable,
    ErrorCategory,
    classify_errors,
    is_single_phone_fragment,
    normalize_token,
)
from .codec import token_disfluency_types
from .exceptions import (
    EmptyCategoryError,
    EmptyCorpusError,
    FragmentDivisionError,
    LexiconError,
    MismatchedAlignmentError,
    PMIDomainError,
)
from .model import BioLabel, DisfluencyType, SlashUnit, Token, WordCategory

logger = logging.getLogger(__name__)

PMI_ROWS = (
    DisfluencyType.RESTART,
    DisfluencyType.REPETITION,
    DisfluencyType.REPAIR,
    DisfluencyType.COMPLEX,
    DisfluencyType.FLUENT,
)
EXCLUDED = "excluded"
"""Bucket for repair-region and filler tokens; counted in every denominator."""

ERROR_CATEGORIES = (ErrorCategory.M_STAR, ErrorCategory.M, ErrorCategory.H)
_BASES = {"e": math.log, "2": math.log2, "10": math.log10}


def _read_list(path: Union[str, Path, None], packaged: str) -> Tuple[List[str], str]:
    if path:
        return Path(path).read_text(encoding="utf-8").splitlines(), str(path)
    resource = resources.files("disfluency_mapper").joinpath(f"data/{packaged}")
    text = resource.read_text(encoding="utf-8")
    return text.splitlines(), f"<packaged {packaged}>"


@dataclass(frozen=True)
class Lexicons:
    """Word lists for categorization and boundary reassignment."""

    function_words: FrozenSet[str]
    other_words: FrozenSet[str]
    backchannels: FrozenSet[str]
    checksum: str = ""

    def __post_init__(self) -> None:
        overlap = self.function_words & self.other_words
        if overlap:
            raise LexiconError(f"function and other word lists overlap: {sorted(overlap)}")
        if not self.checksum:
            digest = hashlib.sha256()
            for name, words in (
                ("function", self.function_words),
                ("other", self.other_words),
                ("backchannel", self.backchannels),
            ):
                digest.update(f"{name}:{','.join(sorted(words))}\n".encode("utf-8"))
            object.__setattr__(self, "checksum", digest.hexdigest())

    @classmethod
    def load(
        cls,
        function_words: Union[str, Path, None] = None,
        other_words: Union[str, Path, None] = None,
        backchannels: Union[str, Path, None] = None,
        table: Optional[ConventionTable] = None,
    ) -> "Lexicons":
        """Read and normalize the three word lists (packaged defaults if unset)."""
        lists = []
        for path, packaged in (
            (function_words, "function_words.txt"),
            (other_words, "other_words.txt"),
            (backchannels, "backchannels.txt"),
        ):
            try:
                lines, source = _read_list(path, packaged)
            except OSError as e:
                raise LexiconError(f"cannot read word list {path}: {e}") from e
            words = frozenset(
                normalize_token(line.strip(), table)
                for line in lines
                if line.strip() and not line.lstrip().startswith("#")
            )
            logger.debug(f"Loaded {len(words)} words from {source}")
            lists.append(words)
        return cls(*lists)


def categorize_word(token: Token, lexicons: Lexicons) -> WordCategory:
    """Category by precedence fragment > other > function > content."""
    if token.is_fragment:
        return WordCategory.FRAGMENT
    if token.normalized in lexicons.other_words:
        return WordCategory.OTHER
    if token.normalized in lexicons.function_words:
        return WordCategory.FUNCTION
    return WordCategory.CONTENT


@dataclass
class CountTable:
    """Word counts per distribution; ``+`` merges two tables."""

    corpus: Counter = field(default_factory=Counter)
    source: Counter = field(default_factory=Counter)
    missed: Counter = field(default_factory=Counter)
    full_missed: Counter = field(default_factory=Counter)
    hallucinated: Counter = field(default_factory=Counter)
    categories: Dict[str, WordCategory] = field(default_factory=dict)

    def __add__(self, other: "CountTable") -> "CountTable":
        return CountTable(
            corpus=self.corpus + other.corpus,
            source=self.source + other.source,
            missed=self.missed + other.missed,
            full_missed=self.full_missed + other.full_missed,
            hallucinated=self.hallucinated + other.hallucinated,
            categories={**self.categories, **other.categories},
        )


def count_word_errors(alignment: Alignment, lexicons: Lexicons) -> CountTable:
    """Count corpus, miss and hallucination instances of each word."""
    errors = classify_errors(alignment)
    table = CountTable()
    for position, token in enumerate(alignment.tgt):
        word = token.normalized
        table.corpus[word] += 1
        table.categories.setdefault(word, categorize_word(token, lexicons))
        categories = errors.target.get(position, frozenset())
        if ErrorCategory.M in categories:
            table.missed[word] += 1
        if ErrorCategory.M_STAR in categories:
            table.full_missed[word] += 1
    for position, token in enumerate(alignment.src):
        word = token.normalized
        table.source[word] += 1
        table.categories.setdefault(word, categorize_word(token, lexicons))
        if ErrorCategory.H in errors.source.get(position, frozenset()):
            table.hallucinated[word] += 1
    return table


def merge_counts(tables: Iterable[CountTable]) -> CountTable:
    merged = CountTable()
    for table in tables:
        merged = merged + table
    return merged


@dataclass(frozen=True)
class ScatterRow:
    word: str
    category: WordCategory
    log_rel_freq_corpus: Optional[float]
    log_rel_freq_missed: Optional[float]
    log_rel_freq_hallucinated: Optional[float]


def _log_rel_freq(count: int, total: int) -> Optional[float]:
    return math.log10(count / total) if count and total else None


def word_error_scatter(table: CountTable) -> List[ScatterRow]:
    """Log10 relative frequency of each word in the corpus, miss and hallucination
    distributions. Words absent from a distribution get None in that column.
    """
    total = sum(table.corpus.values())
    if total == 0:
        raise EmptyCorpusError("No target words to compute relative frequencies over")
    n_missed = sum(table.missed.values())
    n_hallucinated = sum(table.hallucinated.values())
    words = sorted(set(table.corpus) | set(table.missed) | set(table.hallucinated))
    return [
        ScatterRow(
            word=word,
            category=table.categories.get(word, WordCategory.CONTENT),
            log_rel_freq_corpus=_log_rel_freq(table.corpus[word], total),
            log_rel_freq_missed=_log_rel_freq(table.missed[word], n_missed),
            log_rel_freq_hallucinated=_log_rel_freq(table.hallucinated[word], n_hallucinated),
        )
        for word in words
    ]


@dataclass(frozen=True)
class CategorySummary:
    category: WordCategory
    corpus: int
    missed: int
    hallucinated: int
    share_missed: float
    share_hallucinated: float


def category_summary(table: CountTable) -> List[CategorySummary]:
    """Share of all misses and hallucinations that falls in each word category."""
    totals = {name: Counter() for name in ("corpus", "missed", "hallucinated")}
    for name, counter in (
        ("corpus", table.corpus),
        ("missed", table.missed),
        ("hallucinated", table.hallucinated),
    ):
        for word, count in counter.items():
            totals[name][table.categories.get(word, WordCategory.CONTENT)] += count
    n_missed = sum(totals["missed"].values())
    n_hallucinated = sum(totals["hallucinated"].values())
    return [
        CategorySummary(
            category=category,
            corpus=totals["corpus"][category],
            missed=totals["missed"][category],
            hallucinated=totals["hallucinated"][category],
            share_missed=totals["missed"][category] / n_missed if n_missed else 0.0,
            share_hallucinated=(
                totals["hallucinated"][category] / n_hallucinated if n_hallucinated else 0.0
            ),
        )
        for category in WordCategory
    ]


def pmi(p_cond: float, p_marg: float, base: Union[str, int] = "e") -> float:
    """Pointwise mutual information log(p_cond / p_marg).

    Args:
        p_cond: P(x | c), in (0, 1]
        p_marg: P(x), in (0, 1]
        base: "e", 2 or 10

    Raises:
        PMIDomainError: If either probability is outside (0, 1] or the base
            is unknown
    """
    log = _BASES.get(str(base))
    if log is None:
        raise PMIDomainError(f"unsupported log base {base!r}")
    if not 0 < p_marg <= 1:
        raise PMIDomainError(f"marginal probability {p_marg} outside (0, 1]")
    if not 0 < p_cond <= 1:
        raise PMIDomainError(f"conditional probability {p_cond} outside (0, 1]")
    if p_cond == p_marg:
        return 0.0
    return log(p_cond / p_marg)


def _bucket(kind: Optional[DisfluencyType]) -> str:
    return kind.value if kind is not None else EXCLUDED


@dataclass
class DisfluencyErrorCounts:
    """Target tokens per disfluency bucket, overall and per error category."""

    marginal: Counter = field(default_factory=Counter)
    conditional: Dict[ErrorCategory, Counter] = field(
        default_factory=lambda: {c: Counter() for c in ERROR_CATEGORIES}
    )

    def __add__(self, other: "DisfluencyErrorCounts") -> "DisfluencyErrorCounts":
        return DisfluencyErrorCounts(
            marginal=self.marginal + other.marginal,
            conditional={
                c: self.conditional[c] + other.conditional[c] for c in ERROR_CATEGORIES
            },
        )

    @property
    def total(self) -> int:
        return sum(self.marginal.values())


def count_disfluency_errors(unit: SlashUnit, alignment: Alignment) -> DisfluencyErrorCounts:
    """Bucket every silver target token and every error instance of one unit.

    Hallucinated source words take the bucket of their aligned target word;
    a deleted word takes the bucket of the target word before the deletion
    point, or after it at the start of the unit.
    """
    if len(alignment.tgt) != len(unit.tokens):
        raise MismatchedAlignmentError(
            f"alignment of {unit.unit_id} covers {len(alignment.tgt)} of {len(unit.tokens)} words"
        )
    types = token_disfluency_types(unit.tokens, unit.labels)
    buckets = [_bucket(kind) for kind in types]
    counts = DisfluencyErrorCounts()
    counts.marginal.update(buckets)

    errors = classify_errors(alignment)
    for position, categories in errors.target.items():
        for category in categories:
            counts.conditional[category][buckets[position]] += 1

    position = 0
    for op in alignment.ops:
        if op.src is not None and op.src in errors.source:
            if op.tgt is not None:
                bucket = buckets[op.tgt]
            elif buckets:
                bucket = buckets[position - 1] if position > 0 else buckets[0]
            else:
                bucket = EXCLUDED
            counts.conditional[ErrorCategory.H][bucket] += 1
        if op.tgt is not None:
            position += 1
    return counts


@dataclass(frozen=True)
class PMIRow:
    kind: DisfluencyType
    p_marginal: float
    pmi: Dict[ErrorCategory, Optional[float]]


@dataclass(frozen=True)
class PMITable:
    rows: Tuple[PMIRow, ...]
    counts: DisfluencyErrorCounts
    base: str

    @property
    def excluded_share(self) -> float:
        return self.counts.marginal[EXCLUDED] / self.counts.total


def pmi_table(counts: DisfluencyErrorCounts, base: Union[str, int] = "e") -> PMITable:
    """PMI between disfluency buckets and error categories from merged counts.

    Raises:
        EmptyCategoryError: If an error category has no tokens
        EmptyCorpusError: If there are no target tokens
    """
    total = counts.total
    if total == 0:
        raise EmptyCorpusError("No silver target tokens")
    for category in ERROR_CATEGORIES:
        if not counts.conditional[category]:
            logger.error(f"No tokens in error category {category}")
            raise EmptyCategoryError(category.value)
    rows = []
    for kind in PMI_ROWS:
        p_marginal = counts.marginal[kind.value] / total
        values: Dict[ErrorCategory, Optional[float]] = {}
        for category in ERROR_CATEGORIES:
            conditional = counts.conditional[category]
            p_cond = conditional[kind.value] / sum(conditional.values())
            values[category] = pmi(p_cond, p_marginal, base) if p_cond and p_marginal else None
        rows.append(PMIRow(kind, p_marginal, values))
    return PMITable(tuple(rows), counts, str(base))


def disfluency_error_pmi_table(
    pairs: Iterable[Tuple[SlashUnit, Alignment]], base: Union[str, int] = "e"
) -> PMITable:
    """Disfluency-type x error-category PMI table over silver units.

    Args:
        pairs: (silver target unit, alignment of its source unit onto it)
        base: Log base of the PMI values
    """
    counts = DisfluencyErrorCounts()
    for unit, alignment in pairs:
        counts = counts + count_disfluency_errors(unit, alignment)
    return pmi_table(counts, base)


@dataclass(frozen=True)
class TokenRates:
    """Share of words inside disfluencies, reparandum-only and with repairs."""

    n_tokens: int
    reparandum: int
    disfluent: int

    @property
    def reparandum_rate(self) -> float:
        return self.reparandum / self.n_tokens if self.n_tokens else 0.0

    @property
    def disfluent_rate(self) -> float:
        return self.disfluent / self.n_tokens if self.n_tokens else 0.0


def token_rates(units: Iterable[SlashUnit]) -> TokenRates:
    n_tokens = reparandum = disfluent = 0
    for unit in units:
        for token, label in zip(unit.tokens, unit.labels):
            n_tokens += 1
            if label is None or label is BioLabel.O or token.is_filler:
                continue
            disfluent += 1
            if label.is_reparandum:
                reparandum += 1
    return TokenRates(n_tokens, reparandum, disfluent)


def disfluency_token_rates(
    source: Iterable[SlashUnit], silver: Iterable[SlashUnit]
) -> Dict[str, TokenRates]:
    """Disfluent-word rates of the source and the silver transcripts."""
    return {"source": token_rates(source), "silver": token_rates(silver)}


@dataclass(frozen=True)
class FragmentOptions:
    single_phone_max_graphemes: int = 1
    denominator: str = "fragments"


@dataclass(frozen=True)
class FragmentStats:
    source_fragments: int
    target_fragments: int
    added: int
    added_single_phone: int
    missed: int
    hallucinated: int
    miss_denominator: int
    halluc_denominator: int

    @property
    def ratio_target_to_source(self) -> float:
        return self.target_fragments / self.source_fragments

    @property
    def pct_single_phone_added(self) -> float:
        return 100.0 * self.added_single_phone / self.added if self.added else 0.0

    @property
    def miss_rate(self) -> float:
        return self.missed / self.miss_denominator if self.miss_denominator else 0.0

    @property
    def halluc_rate(self) -> float:
        return self.hallucinated / self.halluc_denominator if self.halluc_denominator else 0.0

    def as_dict(self) -> Dict[str, float]:
        return {
            "ratio_target_to_source": self.ratio_target_to_source,
            "pct_single_phone_added": self.pct_single_phone_added,
            "miss_rate": self.miss_rate,
            "halluc_rate": self.halluc_rate,
            "source_fragments": self.source_fragments,
            "target_fragments": self.target_fragments,
        }


def fragment_stats(
    alignments: Iterable[Alignment], options: Optional[FragmentOptions] = None
) -> FragmentStats:
    """Fragment counts and error rates over aligned units.

    With ``denominator="fragments"`` the miss (hallucination) rate is the
    share of target (source) fragments that were missed (hallucinated); with
    ``"errors"`` it is the share of all missed (hallucinated) words that are
    fragments.
    """
    options = options or FragmentOptions()
    if options.denominator not in ("fragments", "errors"):
        raise ValueError(f"unknown fragment denominator {options.denominator!r}")
    source = target = added = single = missed = hallucinated = 0
    all_missed = all_hallucinated = 0
    for alignment in alignments:
        errors = classify_errors(alignment)
        for position, token in enumerate(alignment.tgt):
            is_missed = ErrorCategory.M in errors.target.get(position, frozenset())
            all_missed += is_missed
            if not token.is_fragment:
                continue
            target += 1
            if is_missed:
                missed += 1
                added += 1
                single += is_single_phone_fragment(token, options.single_phone_max_graphemes)
        for position, token in enumerate(alignment.src):
            is_hallucinated = position in errors.source
            all_hallucinated += is_hallucinated
            if token.is_fragment:
                source += 1
                hallucinated += is_hallucinated
    if source == 0:
        raise FragmentDivisionError("source transcripts contain no fragments")
    by_errors = options.denominator == "errors"
    stats = FragmentStats(
        source_fragments=source,
        target_fragments=target,
        added=added,
        added_single_phone=single,
        missed=missed,
        hallucinated=hallucinated,
        miss_denominator=all_missed if by_errors else target,
        halluc_denominator=all_hallucinated if by_errors else source,
    )
    logger.info(
        f"Fragments: {target} target vs {source} source "
        f"(ratio {stats.ratio_target_to_source:.2f})"
    )
    return stats
