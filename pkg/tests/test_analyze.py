"""Tests for word-error statistics, PMI tables and fragment rates."""

import math
import random
from collections import Counter

import pytest

from disfluency_mapper.core.align import AlignOp, Alignment, ErrorCategory, align_units
from disfluency_mapper.core.analyze import (
    EXCLUDED,
    PMI_ROWS,
    DisfluencyErrorCounts,
    FragmentOptions,
    Lexicons,
    categorize_word,
    category_summary,
    count_disfluency_errors,
    count_word_errors,
    disfluency_error_pmi_table,
    disfluency_token_rates,
    fragment_stats,
    merge_counts,
    pmi,
    pmi_table,
    token_rates,
    word_error_scatter,
)
from disfluency_mapper.core.exceptions import (
    EmptyCategoryError,
    EmptyCorpusError,
    FragmentDivisionError,
    LexiconError,
    MismatchedAlignmentError,
    PMIDomainError,
)
from disfluency_mapper.core.model import (
    BioLabel,
    DisfluencyType,
    SlashUnit,
    WordCategory,
)
from tests.conftest import labels, tok, toks


def _small_alignment():
    # the=the, +big, dog->cat, -uh
    ops = (AlignOp.match(0, 0), AlignOp.ins(1), AlignOp.sub(1, 2), AlignOp.delete(2))
    return Alignment(ops, tuple(toks("the dog uh")), tuple(toks("the big cat")))


class TestLexicons:
    def test_packaged_lists(self, lexicons):
        assert "uh-huh" in lexicons.backchannels
        assert lexicons.backchannels <= lexicons.other_words
        assert not lexicons.function_words & lexicons.other_words
        assert len(lexicons.checksum) == 64

    def test_overlap_rejected(self):
        with pytest.raises(LexiconError):
            Lexicons(frozenset({"a"}), frozenset({"a"}), frozenset())

    def test_custom_lists(self, tmp_path):
        paths = []
        for name, text in (("f", "# comment\nThe\nof\n"), ("o", "Uh\n"), ("b", "uh\n")):
            path = tmp_path / f"{name}.txt"
            path.write_text(text, encoding="utf-8")
            paths.append(path)
        lexicons = Lexicons.load(*paths)
        assert lexicons.function_words == {"the", "of"}
        assert lexicons.other_words == {"uh"}

    def test_checksum_tracks_content(self):
        a = Lexicons(frozenset({"the"}), frozenset({"uh"}), frozenset())
        b = Lexicons(frozenset({"the"}), frozenset({"uh"}), frozenset())
        c = Lexicons(frozenset({"of"}), frozenset({"uh"}), frozenset())
        assert a.checksum == b.checksum != c.checksum

    def test_missing_file(self, tmp_path):
        with pytest.raises(LexiconError):
            Lexicons.load(tmp_path / "missing.txt")

    @pytest.mark.parametrize(
        "word,category",
        [
            ("w-", WordCategory.FRAGMENT),
            ("uh-huh", WordCategory.OTHER),
            ("the", WordCategory.FUNCTION),
            ("dog", WordCategory.CONTENT),
        ],
    )
    def test_categorize(self, lexicons, word, category):
        assert categorize_word(tok(word), lexicons) is category


class TestWordErrors:
    def test_counts(self, lexicons):
        table = count_word_errors(_small_alignment(), lexicons)
        assert table.corpus == Counter({"the": 1, "big": 1, "cat": 1})
        assert table.missed == Counter({"big": 1, "cat": 1})
        assert table.full_missed == Counter({"big": 1})
        assert table.hallucinated == Counter({"dog": 1, "uh": 1})
        assert table.categories["uh"] is WordCategory.OTHER

    def test_merge(self, lexicons):
        table = count_word_errors(_small_alignment(), lexicons)
        merged = merge_counts([table, table])
        assert merged.corpus["the"] == 2
        assert merged.hallucinated["uh"] == 2

    def test_scatter(self, lexicons):
        table = count_word_errors(_small_alignment(), lexicons)
        rows = {row.word: row for row in word_error_scatter(table)}
        assert rows["the"].log_rel_freq_corpus == pytest.approx(math.log10(1 / 3))
        assert rows["the"].log_rel_freq_missed is None
        assert rows["big"].log_rel_freq_missed == pytest.approx(math.log10(0.5))
        assert rows["dog"].log_rel_freq_corpus is None
        assert rows["dog"].log_rel_freq_hallucinated == pytest.approx(math.log10(0.5))

    def test_scatter_needs_words(self, lexicons):
        table = count_word_errors(align_units(toks("a"), []), lexicons)
        with pytest.raises(EmptyCorpusError):
            word_error_scatter(table)

    def test_category_summary(self, lexicons):
        summary = {
            row.category: row
            for row in category_summary(count_word_errors(_small_alignment(), lexicons))
        }
        assert summary[WordCategory.CONTENT].share_missed == 1.0
        assert summary[WordCategory.CONTENT].share_hallucinated == 0.5
        assert summary[WordCategory.OTHER].share_hallucinated == 0.5
        assert summary[WordCategory.FUNCTION].corpus == 1


class TestPMI:
    def test_value(self):
        assert pmi(0.5, 0.25) == pytest.approx(math.log(2))
        assert pmi(0.5, 0.25, base=2) == pytest.approx(1.0)
        assert pmi(0.1, 0.01, base="10") == pytest.approx(1.0)

    def test_equal_probabilities(self):
        assert pmi(0.3, 0.3) == 0.0

    @pytest.mark.parametrize(
        "p_cond,p_marg,base",
        [(0.0, 0.5, "e"), (0.5, 0.0, "e"), (1.5, 0.5, "e"), (0.5, 0.5, 3)],
    )
    def test_domain(self, p_cond, p_marg, base):
        with pytest.raises(PMIDomainError):
            pmi(p_cond, p_marg, base)


def _plant_unit(rng: random.Random, index: int):
    """A silver unit built from known segments, with its planted buckets."""
    words, tags, buckets, fillers = [], [], [], []

    def add(word, tag, bucket, filler=False):
        words.append(word)
        tags.append(tag)
        buckets.append(bucket)
        fillers.append(filler)

    for _ in range(rng.randint(1, 5)):
        kind = rng.choice(["fluent", "repetition", "repair", "restart", "complex", "filler"])
        w, v = rng.sample(["a", "b", "c", "d"], 2)
        if kind == "repetition":
            add(w, "B_RM", "repetition")
            add(w, "B_RP", EXCLUDED)
        elif kind == "repair":
            add(w, "B_RM", "repair")
            add(v, "B_RP", EXCLUDED)
        elif kind == "restart":
            add(w, "B_RM", "restart")
        elif kind == "complex":
            # restart running into a repetition
            add(w, "B_RM", "complex")
            add(v, "B_RM", "complex")
            add(v, "B_RP", EXCLUDED)
        elif kind == "filler":
            add("uh", "O", EXCLUDED, filler=True)
        # a fluent word keeps planted spans apart
        add(w, "O", "fluent")

    tokens = tuple(tok(word, is_filler=filler) for word, filler in zip(words, fillers))
    unit = SlashUnit("sw1", "A", index, tokens, tuple(labels(" ".join(tags))))
    return unit, buckets


def _plant_alignment(rng: random.Random, unit: SlashUnit, buckets):
    """Random ops over the unit; returns the alignment and the planted errors."""
    ops, src = [], []
    errors = {category: Counter() for category in ErrorCategory}

    def delete(position):
        ops.append(AlignOp.delete(len(src)))
        src.append(tok("zz"))
        bucket = buckets[position - 1] if position > 0 else buckets[0]
        errors[ErrorCategory.H][bucket] += 1

    for j, token in enumerate(unit.tokens):
        if rng.random() < 0.1:
            delete(j)
        roll = rng.random()
        if roll < 0.7:
            ops.append(AlignOp.match(len(src), j))
            src.append(token)
        elif roll < 0.85:
            ops.append(AlignOp.sub(len(src), j))
            src.append(tok("qq"))
            errors[ErrorCategory.M][buckets[j]] += 1
            errors[ErrorCategory.H][buckets[j]] += 1
        else:
            ops.append(AlignOp.ins(j))
            errors[ErrorCategory.M][buckets[j]] += 1
            errors[ErrorCategory.M_STAR][buckets[j]] += 1
    if rng.random() < 0.1:
        delete(len(unit.tokens))
    return Alignment(tuple(ops), tuple(src), unit.tokens), errors


class TestDisfluencyErrorPMI:
    def test_planted_corpus_matches_oracle(self):
        rng = random.Random(41)
        pairs = []
        marginal = Counter()
        conditional = {category: Counter() for category in ErrorCategory}
        for index in range(300):
            unit, buckets = _plant_unit(rng, index)
            alignment, errors = _plant_alignment(rng, unit, buckets)
            alignment.validate()
            pairs.append((unit, alignment))
            marginal.update(buckets)
            for category in ErrorCategory:
                conditional[category].update(errors[category])

        table = disfluency_error_pmi_table(pairs)
        total = sum(marginal.values())
        assert table.counts.marginal == marginal
        for row in table.rows:
            p_marginal = marginal[row.kind.value] / total
            assert row.p_marginal == pytest.approx(p_marginal, abs=1e-9)
            for category in ErrorCategory:
                p_cond = conditional[category][row.kind.value] / sum(
                    conditional[category].values()
                )
                expected = math.log(p_cond / p_marginal) if p_cond else None
                if expected is None:
                    assert row.pmi[category] is None
                else:
                    assert row.pmi[category] == pytest.approx(expected, abs=1e-9)
        assert table.excluded_share == pytest.approx(marginal[EXCLUDED] / total)

        for category in ErrorCategory:
            counts = table.counts.conditional[category]
            shares = [counts[kind.value] / sum(counts.values()) for kind in PMI_ROWS]
            shares.append(counts[EXCLUDED] / sum(counts.values()))
            assert sum(shares) == pytest.approx(1.0)

    def test_rows_in_fixed_order(self):
        unit = SlashUnit("sw1", "A", 1, tuple(toks("a a b")), tuple(labels("B_RM B_RP O")))
        alignment = Alignment(
            (AlignOp.ins(0), AlignOp.sub(0, 1), AlignOp.match(1, 2)),
            tuple(toks("x b")),
            unit.tokens,
        )
        table = disfluency_error_pmi_table([(unit, alignment)])
        assert [row.kind for row in table.rows] == list(PMI_ROWS)
        assert table.rows[0].kind is DisfluencyType.RESTART
        assert table.rows[0].pmi[ErrorCategory.M] is None

    def test_deleted_word_at_unit_start(self):
        unit = SlashUnit("sw1", "A", 1, tuple(toks("a a")), tuple(labels("B_RM B_RP")))
        alignment = Alignment(
            (AlignOp.delete(0), AlignOp.match(1, 0), AlignOp.match(2, 1)),
            tuple(toks("z a a")),
            unit.tokens,
        )
        counts = count_disfluency_errors(unit, alignment)
        assert counts.conditional[ErrorCategory.H] == Counter({"repetition": 1})

    def test_empty_error_category(self):
        unit = SlashUnit("sw1", "A", 1, tuple(toks("a")), tuple(labels("O")))
        alignment = align_units(toks("a"), toks("a"))
        with pytest.raises(EmptyCategoryError) as info:
            disfluency_error_pmi_table([(unit, alignment)])
        assert info.value.category == "m_star"

    def test_empty_corpus(self):
        with pytest.raises(EmptyCorpusError):
            pmi_table(DisfluencyErrorCounts())

    def test_alignment_must_match_unit(self):
        unit = SlashUnit("sw1", "A", 1, tuple(toks("a b")), tuple(labels("O O")))
        with pytest.raises(MismatchedAlignmentError):
            count_disfluency_errors(unit, align_units(toks("a"), toks("a")))


class TestTokenRates:
    def test_rates(self):
        tokens = (tok("i"), tok("i"), tok("uh", is_filler=True), tok("think"))
        unit = SlashUnit("sw1", "A", 1, tokens, tuple(labels("B_RM B_RP O O")))
        rates = token_rates([unit])
        assert (rates.n_tokens, rates.reparandum, rates.disfluent) == (4, 1, 2)
        assert rates.reparandum_rate == 0.25
        assert rates.disfluent_rate == 0.5

    def test_source_and_silver(self):
        source = SlashUnit("sw1", "A", 1, tuple(toks("i i")), tuple(labels("B_RM B_RP")))
        silver = SlashUnit("sw1", "A", 1, tuple(toks("i")), (BioLabel.O,))
        rates = disfluency_token_rates([source], [silver])
        assert rates["source"].disfluent_rate == 1.0
        assert rates["silver"].disfluent_rate == 0.0


class TestFragments:
    def _alignment(self):
        return align_units(toks("a- b- c d"), toks("a- b- e- f- c d"))

    def test_default_denominator(self):
        stats = fragment_stats([self._alignment()])
        assert stats.ratio_target_to_source == 2.0
        assert stats.pct_single_phone_added == 100.0
        assert stats.miss_rate == 0.5
        assert stats.halluc_rate == 0.0

    def test_errors_denominator(self):
        stats = fragment_stats([self._alignment()], FragmentOptions(denominator="errors"))
        assert stats.miss_rate == 1.0

    def test_single_phone_threshold(self):
        alignment = align_units(toks("a- c"), toks("a- st- c"))
        assert fragment_stats([alignment]).pct_single_phone_added == 0.0
        options = FragmentOptions(single_phone_max_graphemes=2)
        assert fragment_stats([alignment], options).pct_single_phone_added == 100.0

    def test_no_source_fragments(self):
        with pytest.raises(FragmentDivisionError):
            fragment_stats([align_units(toks("a"), toks("a b-"))])

    def test_unknown_denominator(self):
        with pytest.raises(ValueError):
            fragment_stats([self._alignment()], FragmentOptions(denominator="words"))
