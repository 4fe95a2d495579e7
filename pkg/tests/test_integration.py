"""Full-corpus checks, run only against a real corpus checkout.

Set DISFL_CORPUS_DIR to a directory holding ``source/`` bracket transcripts
and ``target/`` word-per-line transcripts with matching conversation ids.
"""

import os
from pathlib import Path

import pytest

from disfluency_mapper.config import Config
from disfluency_mapper.core.ingest import merge_conversations, parse_source, parse_target
from disfluency_mapper.core.model import is_valid_transition
from disfluency_mapper.pipeline import CorpusPipeline

CORPUS_DIR = os.environ.get("DISFL_CORPUS_DIR")

pytestmark = [
    pytest.mark.integration,
    pytest.mark.slow,
    pytest.mark.skipif(not CORPUS_DIR, reason="DISFL_CORPUS_DIR not set"),
]


@pytest.fixture(scope="module")
def corpus():
    root = Path(CORPUS_DIR)
    pipeline = CorpusPipeline(Config(workers=max(1, (os.cpu_count() or 2) - 1)))
    sources = sorted(
        (parse_source(p, table=pipeline.table) for p in (root / "source").iterdir()),
        key=lambda c: c.id,
    )
    targets = merge_conversations(
        parse_target(p, table=pipeline.table) for p in (root / "target").iterdir()
    )
    return pipeline, sources, targets


@pytest.fixture(scope="module")
def mapped(corpus):
    pipeline, sources, targets = corpus
    return pipeline.map(sources, targets)


def test_every_target_word_is_kept(corpus, mapped):
    _, _, targets = corpus
    by_id = {c.id: c for c in targets}
    for outcome in mapped:
        silver = outcome.conversation
        assert silver.token_count == by_id[silver.id].token_count


def test_silver_labels_are_well_formed(mapped):
    for outcome in mapped:
        failed = {f.unit for f in outcome.failures}
        for unit in outcome.conversation.units:
            if unit.unit_id in failed:
                continue
            previous = None
            for label in unit.labels:
                assert is_valid_transition(previous, label), unit.unit_id
                previous = label


def test_few_units_are_unsatisfiable(mapped):
    units = sum(len(o.conversation.units) for o in mapped)
    failures = sum(len(o.failures) for o in mapped)
    assert failures <= 0.01 * units


def test_analysis_runs(corpus, mapped):
    pipeline, sources, _ = corpus
    silver = [o.conversation for o in mapped]
    alignments = {key: a for o in mapped for key, a in o.alignments.items()}
    report = pipeline.analyze(silver, alignments, sources)
    assert report.pmi is not None
    shares = sum(row.p_marginal for row in report.pmi.rows)
    assert shares + report.pmi.excluded_share == pytest.approx(1.0)
    assert 0.0 < report.difference.rate < 1.0
