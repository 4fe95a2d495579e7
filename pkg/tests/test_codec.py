"""Tests for the bracket <-> BIO codec and disfluency typing."""

import random

import pytest

from disfluency_mapper.core.codec import (
    bio_to_brackets,
    brackets_to_bio,
    classify_disfluency_type,
    format_brackets,
    interruption_points,
    is_valid_sequence,
    parse_brackets,
    spans_from_labels,
    token_disfluency_types,
    validate_labels,
)
from disfluency_mapper.core.exceptions import (
    IndexOutOfRangeError,
    InvalidLabelSequenceError,
    StrayPlusError,
    UnbalancedBracketsError,
)
from disfluency_mapper.core.model import BioLabel, DisflSpan, DisfluencyType, Token
from tests.conftest import labels, random_labels

VOCABULARY = ["i", "the", "whole", "thing", "and", "know", "w-", "went"]


def _words(tokens):
    return [t.surface for t in tokens]


class TestBracketsToBio:
    def test_repeat_source_row(self):
        tokens, tags = brackets_to_bio("and also the [ whole + whole ] thing")
        assert _words(tokens) == ["and", "also", "the", "whole", "whole", "thing"]
        assert tags == labels("O O O B_RM B_RP O")

    def test_repeat_mapped_row(self):
        _, tags = brackets_to_bio("and also [ the whole + the whole ] thing")
        assert tags == labels("O O B_RM I_RM B_RP I_RP O")

    def test_no_brackets(self):
        _, tags = brackets_to_bio("yes it is")
        assert tags == labels("O O O")

    def test_restart_has_no_repair(self):
        parse = parse_brackets("[ i went + ] home")
        assert list(parse.labels) == labels("B_RM I_RM O")
        assert parse.spans == (DisflSpan(reparandum=(0, 2), repair=None),)

    def test_nested_reparandum_is_flattened(self):
        parse = parse_brackets("[ [ a + a ] b + c ]")
        assert list(parse.labels) == labels("B_RM I_RM I_RM B_RP")
        assert [span.nesting_depth for span in parse.spans] == [1, 0]

    def test_chained_repair(self):
        _, tags = brackets_to_bio("[ a + b c + d ]")
        assert tags == labels("B_RM B_RP I_RP B_RP")

    def test_fillers_are_flagged(self):
        tokens, tags = brackets_to_bio("{F uh } yeah")
        assert [t.is_filler for t in tokens] == [True, False]
        assert tags == labels("O O")

    def test_filler_inside_repair(self):
        tokens, tags = brackets_to_bio("[ i + {F uh } i ]")
        assert tags == labels("B_RM B_RP I_RP")
        assert tokens[1].is_filler

    def test_discourse_marker_is_not_a_filler(self):
        tokens, _ = brackets_to_bio("{D well } yes")
        assert not tokens[0].is_filler

    def test_markup_contributes_no_tokens(self):
        tokens, _ = brackets_to_bio("{C and } [ it + it ] <laughter> was , # fine")
        assert _words(tokens) == ["and", "it", "it", "was", "fine"]

    def test_unintelligible_word(self):
        tokens, _ = brackets_to_bio("it was ((great))")
        assert tokens[2].surface == "great"
        assert tokens[2].is_unintelligible

    @pytest.mark.parametrize(
        "stream,error",
        [
            ("a + b", StrayPlusError),
            ("[ a + b", UnbalancedBracketsError),
            ("a ] b", UnbalancedBracketsError),
            ("[ a b ]", UnbalancedBracketsError),
            ("{F uh", UnbalancedBracketsError),
            ("uh }", UnbalancedBracketsError),
        ],
    )
    def test_malformed_streams(self, stream, error):
        with pytest.raises(error):
            brackets_to_bio(stream)

    def test_error_carries_position(self):
        with pytest.raises(StrayPlusError) as info:
            brackets_to_bio("a b + c")
        assert info.value.position == 2


def _random_stream(rng: random.Random, depth: int = 0) -> list:
    items = []
    for _ in range(rng.randint(0, 3)):
        if depth < 2 and rng.random() < 0.4:
            items.append("[")
            items.extend(_random_stream(rng, depth + 1))
            for _ in range(rng.choice([1, 1, 2])):
                items.append("+")
                items.extend(_random_stream(rng, depth + 1))
            items.append("]")
        elif rng.random() < 0.15:
            items.extend(["{F", "uh", "}"])
        else:
            items.append(rng.choice(VOCABULARY))
    return items


def test_bracket_parse_always_emits_valid_labels():
    rng = random.Random(7)
    for _ in range(500):
        stream = _random_stream(rng)
        _, tags = brackets_to_bio(stream)
        validate_labels(tags)


def _random_token(rng: random.Random) -> Token:
    return Token.from_surface(
        rng.choice(VOCABULARY),
        is_unintelligible=rng.random() < 0.1,
        is_filler=rng.random() < 0.1,
    )


def test_round_trip_random_units():
    rng = random.Random(20240601)
    failures = 0
    for _ in range(1000):
        n = rng.randint(0, 12)
        tags = random_labels(rng, n)
        tokens = [_random_token(rng) for _ in range(n)]
        parsed_tokens, parsed_tags = brackets_to_bio(bio_to_brackets(tokens, tags))
        if parsed_tokens != tokens or parsed_tags != tags:
            failures += 1
    assert failures == 0


class TestBioToBrackets:
    def test_single_repetition(self):
        tokens = [Token.from_surface(w) for w in "the whole whole thing".split()]
        assert format_brackets(tokens, labels("O B_RM B_RP O")) == "the [ whole + whole ] thing"

    def test_leading_span(self):
        tokens = [Token.from_surface(w) for w in "i i think".split()]
        assert format_brackets(tokens, labels("B_RM B_RP O")) == "[ i + i ] think"

    def test_fluent_is_identity(self):
        tokens = [Token.from_surface(w) for w in "yes it is".split()]
        assert bio_to_brackets(tokens, labels("O O O")) == ["yes", "it", "is"]

    def test_restart(self):
        tokens = [Token.from_surface(w) for w in "a b".split()]
        assert format_brackets(tokens, labels("B_RM O")) == "[ a + ] b"

    def test_rejects_invalid_sequence(self):
        tokens = [Token.from_surface(w) for w in "a b".split()]
        with pytest.raises(InvalidLabelSequenceError) as info:
            bio_to_brackets(tokens, labels("O I_RP"))
        assert info.value.position == 1


class TestValidation:
    @pytest.mark.parametrize(
        "sequence,valid",
        [
            ("O B_RM I_RM B_RP I_RP O", True),
            ("B_RM B_RP I_RP B_RP", True),
            ("O I_RM", False),
            ("B_RP", False),
            ("B_RM B_RP B_RP", False),
            ("O I_RP", False),
        ],
    )
    def test_grammar(self, sequence, valid):
        assert is_valid_sequence(labels(sequence)) is valid

    def test_unlabeled_token_is_invalid(self):
        with pytest.raises(InvalidLabelSequenceError):
            validate_labels([BioLabel.O, None])


class TestInterruptionPoints:
    def test_single_reparandum(self):
        assert interruption_points(labels("O B_RM B_RP O")) == {1}

    def test_fluent(self):
        assert interruption_points(labels("O O O")) == frozenset()

    def test_two_disfluencies(self):
        assert interruption_points(labels("B_RM I_RM B_RP I_RP B_RM B_RP")) == {1, 4}

    def test_one_point_per_reparandum_run(self):
        rng = random.Random(3)
        for _ in range(200):
            tags = random_labels(rng, rng.randint(0, 15))
            assert len(interruption_points(tags)) == tags.count(BioLabel.B_RM)


class TestDisfluencyTypes:
    @pytest.mark.parametrize(
        "stream,expected",
        [
            ("[ whole + whole ]", DisfluencyType.REPETITION),
            ("[ the whole + the whole ]", DisfluencyType.REPETITION),
            ("[ i went + ]", DisfluencyType.RESTART),
            ("[ he + she ] left", DisfluencyType.REPAIR),
            ("[ I + {F uh } i ]", DisfluencyType.REPETITION),
        ],
    )
    def test_classify(self, stream, expected):
        parse = parse_brackets(stream)
        span = parse.spans[0]
        assert classify_disfluency_type(span, parse.tokens, parse.spans) is expected

    def test_nested_span_is_complex(self):
        parse = parse_brackets("[ [ a + a ] b + c ]")
        kinds = {classify_disfluency_type(s, parse.tokens, parse.spans) for s in parse.spans}
        assert kinds == {DisfluencyType.COMPLEX}

    def test_span_outside_tokens(self):
        tokens = [Token.from_surface("a")]
        with pytest.raises(IndexOutOfRangeError):
            classify_disfluency_type(DisflSpan(reparandum=(0, 2)), tokens)

    def test_token_types(self):
        tokens, tags = brackets_to_bio("[ he + she ] left")
        assert token_disfluency_types(tokens, tags) == [
            DisfluencyType.REPAIR,
            None,
            DisfluencyType.FLUENT,
        ]

    def test_restart_before_reparandum_is_complex(self):
        tokens, tags = brackets_to_bio("i [ i + ] [ the + the ] dog")
        types = token_disfluency_types(tokens, tags)
        assert types == [
            DisfluencyType.FLUENT,
            DisfluencyType.COMPLEX,
            DisfluencyType.COMPLEX,
            None,
            DisfluencyType.FLUENT,
        ]

    def test_sequential_disfluencies_keep_their_types(self):
        tokens, tags = brackets_to_bio("i [ it + it ] [ a + the ] dog")
        types = token_disfluency_types(tokens, tags)
        assert types == [
            DisfluencyType.FLUENT,
            DisfluencyType.REPETITION,
            None,
            DisfluencyType.REPAIR,
            None,
            DisfluencyType.FLUENT,
        ]

    def test_chained_segments_become_spans(self):
        spans = spans_from_labels(labels("B_RM B_RP I_RP B_RP"))
        assert spans == [
            DisflSpan(reparandum=(0, 1), repair=(1, 3)),
            DisflSpan(reparandum=(1, 3), repair=(3, 4)),
        ]
