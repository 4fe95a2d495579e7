"""Corpus-level pipeline: pairing, mapping and counting per conversation.

Conversations are independent, so each stage is a map over conversations
followed by an ordered reduce. With more than one worker the map runs in a
``multiprocessing`` pool whose workers each build their own pipeline from
the (picklable) configuration; ``imap`` keeps results in input order.
"""

import logging
import multiprocessing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .config import Config
from .core.align import Alignment, DifferenceReport, difference_rate
from .core.analyze import (
    CategorySummary,
    CountTable,
    DisfluencyErrorCounts,
    FragmentStats,
    PMITable,
    ScatterRow,
    TokenRates,
    category_summary,
    count_disfluency_errors,
    count_word_errors,
    fragment_stats,
    pmi_table,
    token_rates,
    word_error_scatter,
)
from .core.exceptions import (
    AnalysisError,
    EmptyCorpusError,
    MismatchedAlignmentError,
    UnsatisfiableConstraintsError,
)
from .core.model import Conversation, UnitKey
from .core.project import PatternScorer, Scorer, ScoreTableScorer, map_annotations
from .core.segment import AuditEntry, pair_conversation
from .interfaces import reports

logger = logging.getLogger(__name__)

UnitAlignments = Dict[Tuple[str, int], Alignment]


@dataclass
class PairOutcome:
    """A target conversation segmented along its source."""

    conversation: Conversation
    alignments: Dict[UnitKey, Alignment] = field(default_factory=dict)
    audit: List[AuditEntry] = field(default_factory=list)


@dataclass
class MapOutcome(PairOutcome):
    """A silver-labeled target conversation."""

    traces: List[Dict[str, Any]] = field(default_factory=list)
    failures: List[UnsatisfiableConstraintsError] = field(default_factory=list)
    decoded_units: int = 0


@dataclass
class ConversationCounts:
    words: CountTable
    disfluency: DisfluencyErrorCounts
    alignments: List[Alignment]
    skipped_units: int = 0


@dataclass
class AnalysisReport:
    """Everything the ``analyze`` command writes."""

    scatter: List[ScatterRow]
    categories: List[CategorySummary]
    pmi: Optional[PMITable]
    fragments: Optional[FragmentStats]
    difference: Optional[DifferenceReport]
    rates: Dict[str, TokenRates]
    summary: Dict[str, Any]

    def write(self, directory: Path) -> List[Path]:
        """Write all report files into ``directory``; returns their paths."""
        directory.mkdir(parents=True, exist_ok=True)
        written = [directory / "scatter.tsv", directory / "categories.tsv"]
        reports.write_tsv(
            written[0], reports.SCATTER_COLUMNS, reports.scatter_rows(self.scatter)
        )
        reports.write_tsv(
            written[1], reports.CATEGORY_COLUMNS, reports.category_rows(self.categories)
        )
        if self.pmi is not None:
            path = directory / "pmi_table.tsv"
            reports.write_tsv(path, reports.PMI_COLUMNS, reports.pmi_rows(self.pmi))
            written.append(path)
        if self.fragments is not None:
            path = directory / "fragments.tsv"
            rows = self.fragments.as_dict().items()
            reports.write_tsv(path, ("statistic", "value"), rows)
            written.append(path)
        path = directory / "summary.json"
        reports.write_json(path, self.summary)
        written.append(path)
        return written


_worker: Optional["CorpusPipeline"] = None


def _init_worker(config: Config) -> None:
    global _worker
    _worker = CorpusPipeline(config)


def _dispatch(task: Tuple[str, tuple]) -> Any:
    method, args = task
    return getattr(_worker, method)(*args)


def _rates_dict(rates: TokenRates) -> Dict[str, Any]:
    return {
        "tokens": rates.n_tokens,
        "reparandum": rates.reparandum,
        "disfluent": rates.disfluent,
        "reparandum_rate": rates.reparandum_rate,
        "disfluent_rate": rates.disfluent_rate,
    }


class CorpusPipeline:
    """Runs the per-conversation stages for one resolved configuration."""

    def __init__(self, config: Config):
        self.config = config
        self.table = config.convention_table()
        self.lexicons = config.lexicons(self.table)
        self.scorer = self._build_scorer()

    def _build_scorer(self) -> Scorer:
        if self.config.score_table:
            logger.info(f"Scoring with table {self.config.score_table}")
            return ScoreTableScorer.load(self.config.score_table)
        return PatternScorer(self.config.weights)

    def _run(self, method: str, jobs: Sequence[tuple]) -> List[Any]:
        workers = min(self.config.workers, len(jobs))
        if workers <= 1:
            return [getattr(self, method)(*args) for args in jobs]
        logger.info(
            f"Running {method} over {len(jobs)} conversations with {workers} workers"
        )
        with multiprocessing.Pool(
            processes=workers, initializer=_init_worker, initargs=(self.config,)
        ) as pool:
            return list(pool.imap(_dispatch, [(method, args) for args in jobs]))

    @staticmethod
    def _pair_jobs(
        sources: Iterable[Conversation],
        targets: Iterable[Conversation],
        alignments: Optional[Mapping[UnitKey, Alignment]] = None,
    ) -> List[Tuple[Conversation, Conversation, Optional[UnitAlignments]]]:
        by_id = {conversation.id: conversation for conversation in targets}
        jobs = []
        for source in sorted(sources, key=lambda c: c.id):
            target = by_id.pop(source.id, None)
            if target is None:
                logger.warning(f"No target transcript for {source.id}; skipped")
                continue
            unit_alignments = None
            if alignments is not None:
                unit_alignments = {
                    (speaker, index): alignment
                    for (conv, speaker, index), alignment in alignments.items()
                    if conv == source.id
                }
            jobs.append((source, target, unit_alignments))
        for conv_id in sorted(by_id):
            logger.warning(f"No source transcript for {conv_id}; skipped")
        return jobs

    def pair_conversation(
        self,
        source: Conversation,
        target: Conversation,
        unit_alignments: Optional[UnitAlignments] = None,
    ) -> PairOutcome:
        segmented = pair_conversation(
            source,
            target,
            self.lexicons.backchannels,
            self.config.rule_unintelligible,
            self.config.rule_backchannel,
            unit_alignments,
        )
        return PairOutcome(
            conversation=segmented.conversation,
            alignments={
                (source.id, speaker, index): alignment
                for (speaker, index), alignment in sorted(segmented.alignments.items())
            },
            audit=segmented.audit,
        )

    def map_conversation(
        self,
        source: Conversation,
        target: Conversation,
        unit_alignments: Optional[UnitAlignments] = None,
    ) -> MapOutcome:
        paired = self.pair_conversation(source, target, unit_alignments)
        result = map_annotations(
            source,
            paired.conversation,
            {(speaker, index): a for (_, speaker, index), a in paired.alignments.items()},
            self.scorer,
            window=self.config.window,
            sub_policy=self.config.sub_policy,
            strict=False,
        )
        return MapOutcome(
            conversation=result.conversation,
            alignments=paired.alignments,
            audit=paired.audit,
            traces=result.traces,
            failures=result.failures,
            decoded_units=result.decoded_units,
        )

    def pair(
        self,
        sources: Iterable[Conversation],
        targets: Iterable[Conversation],
        alignments: Optional[Mapping[UnitKey, Alignment]] = None,
    ) -> List[PairOutcome]:
        """Segment every target conversation along its source."""
        jobs = self._pair_jobs(sources, targets, alignments)
        return self._run("pair_conversation", jobs)

    def map(
        self,
        sources: Iterable[Conversation],
        targets: Iterable[Conversation],
        alignments: Optional[Mapping[UnitKey, Alignment]] = None,
    ) -> List[MapOutcome]:
        """Silver-label every target conversation, in conversation-id order."""
        jobs = self._pair_jobs(sources, targets, alignments)
        return self._run("map_conversation", jobs)

    def count_conversation(
        self, silver: Conversation, alignments: UnitAlignments
    ) -> ConversationCounts:
        """Word and disfluency error counts of one silver conversation."""
        words = CountTable()
        disfluency = DisfluencyErrorCounts()
        aligned: List[Alignment] = []
        skipped = 0
        for unit in silver.units:
            given = alignments.get((unit.speaker, unit.index))
            if given is None:
                if unit.tokens:
                    raise MismatchedAlignmentError(
                        f"no alignment for unit {unit.unit_id}"
                    )
                continue
            if len(given.tgt) != len(unit.tokens):
                raise MismatchedAlignmentError(
                    f"alignment for {unit.unit_id} covers {len(given.tgt)} of "
                    f"{len(unit.tokens)} words"
                )
            alignment = Alignment(given.ops, given.src, unit.tokens)
            aligned.append(alignment)
            words = words + count_word_errors(alignment, self.lexicons)
            if not unit.is_labeled:
                skipped += 1
                continue
            disfluency = disfluency + count_disfluency_errors(unit, alignment)
        if skipped:
            logger.warning(
                f"{silver.id}: {skipped} unlabeled units left out of PMI counts"
            )
        return ConversationCounts(words, disfluency, aligned, skipped)

    def analyze(
        self,
        silver: Sequence[Conversation],
        alignments: Mapping[UnitKey, Alignment],
        source: Optional[Sequence[Conversation]] = None,
    ) -> AnalysisReport:
        """All corpus statistics of a silver corpus and its alignments."""
        jobs = [
            (
                conversation,
                {
                    (speaker, index): alignment
                    for (conv, speaker, index), alignment in alignments.items()
                    if conv == conversation.id
                },
            )
            for conversation in sorted(silver, key=lambda c: c.id)
        ]
        counted: List[ConversationCounts] = self._run("count_conversation", jobs)

        words = CountTable()
        disfluency = DisfluencyErrorCounts()
        all_alignments: List[Alignment] = []
        for counts in counted:
            words = words + counts.words
            disfluency = disfluency + counts.disfluency
            all_alignments.extend(counts.alignments)

        notes: Dict[str, str] = {}
        pmi: Optional[PMITable] = None
        try:
            pmi = pmi_table(disfluency, self.config.pmi_base)
        except (AnalysisError, EmptyCorpusError) as e:
            logger.warning(f"PMI table not computed: {e}")
            notes["pmi"] = str(e)
        fragments: Optional[FragmentStats] = None
        try:
            fragments = fragment_stats(all_alignments, self.config.fragment_options)
        except AnalysisError as e:
            logger.warning(f"Fragment statistics not computed: {e}")
            notes["fragments"] = str(e)
        difference: Optional[DifferenceReport] = None
        try:
            difference = difference_rate(
                all_alignments, self.config.difference_options, self.table
            )
        except EmptyCorpusError as e:
            notes["difference"] = str(e)

        scatter = word_error_scatter(words) if sum(words.corpus.values()) else []
        categories = category_summary(words)
        rates = {"silver": token_rates(u for c in silver for u in c.units)}
        if source is not None:
            rates["source"] = token_rates(u for c in source for u in c.units)

        summary: Dict[str, Any] = {
            "config": self.config.as_report_dict(),
            "lexicon_checksum": self.lexicons.checksum,
            "pmi_base": str(self.config.pmi_base),
            "conversations": len(jobs),
            "token_rates": {name: _rates_dict(r) for name, r in sorted(rates.items())},
            "difference": difference.as_dict() if difference is not None else None,
            "fragments": fragments.as_dict() if fragments is not None else None,
            "pmi": reports.pmi_summary(pmi) if pmi is not None else None,
            "notes": notes,
        }
        return AnalysisReport(
            scatter, categories, pmi, fragments, difference, rates, summary
        )

    def difference(self, alignments: Iterable[Alignment]) -> DifferenceReport:
        return difference_rate(alignments, self.config.difference_options, self.table)
