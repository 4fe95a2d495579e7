"""Tests for transcript parsers and the canonical record format."""

import io
import json

import pytest

from disfluency_mapper.core.exceptions import (
    IngestError,
    MalformedLineError,
    MalformedRecordError,
    SchemaViolationError,
    UnbalancedBracketsError,
)
from disfluency_mapper.core.ingest import (
    CANONICAL_FIELDS,
    iter_canonical,
    merge_conversations,
    parse_source,
    parse_target,
    read_canonical,
    record_to_unit,
    unit_to_record,
    write_canonical,
)
from disfluency_mapper.core.model import BoundaryKind, Conversation
from tests.conftest import FIXTURES, REPEAT_SOURCE, labels, target_text


class TestParseSource:
    def test_repeat_line(self):
        conversation = parse_source(REPEAT_SOURCE, conversation_id="sw0001")
        (unit,) = conversation.units
        assert (unit.speaker, unit.index) == ("A", 1)
        assert len(unit.tokens) == 6
        assert list(unit.labels) == labels("O O O B_RM B_RP O")
        assert unit.boundary_kind is BoundaryKind.COMPLETE

    def test_filler_line(self):
        conversation = parse_source("B.4: {F uh } yeah ./\n", conversation_id="sw1")
        unit = conversation.unit("B", 4)
        assert [t.surface for t in unit.tokens] == ["uh", "yeah"]
        assert unit.tokens[0].is_filler
        assert list(unit.labels) == labels("O O")

    def test_interrupted_unit(self):
        conversation = parse_source("A.2: so i was -/\n", conversation_id="sw1")
        assert conversation.units[0].boundary_kind is BoundaryKind.INTERRUPTED

    def test_conversation_id_from_file_name(self):
        conversation = parse_source(FIXTURES / "corpus" / "source" / "sw1001.txt")
        assert conversation.id == "sw1001"
        assert [u.index for u in conversation.channel("A")] == [1, 3, 5, 6]
        assert [u.index for u in conversation.channel("B")] == [2, 4]

    def test_token_count_equals_real_words(self):
        conversation = parse_source(
            "A.1: {C and } [ it + it ] <laughter> was fine ./\n", conversation_id="sw1"
        )
        assert conversation.token_count == 5

    def test_malformed_line(self):
        with pytest.raises(MalformedLineError) as info:
            parse_source("A.1: fine ./\nnot a unit\n", conversation_id="sw1")
        assert info.value.line_no == 2

    def test_missing_terminator(self):
        with pytest.raises(MalformedLineError):
            parse_source("A.1: no terminator\n", conversation_id="sw1")

    def test_duplicate_unit(self):
        with pytest.raises(MalformedLineError):
            parse_source("A.1: one ./\nA.1: two ./\n", conversation_id="sw1")

    def test_bracket_error_has_line_context(self, tmp_path):
        path = tmp_path / "sw9.txt"
        path.write_text("A.1: fine ./\nA.2: [ oops + ./\n", encoding="utf-8")
        with pytest.raises(UnbalancedBracketsError) as info:
            parse_source(path)
        assert info.value.line_no == 2
        assert f"{path}:2" in str(info.value)


class TestParseTarget:
    def test_records(self):
        conversation = parse_target("sw2005 A 17 gonna\nsw2005 A 18 w-\n")
        assert conversation.id == "sw2005"
        (unit,) = conversation.units
        assert [t.surface for t in unit.tokens] == ["gonna", "w-"]
        assert not unit.tokens[0].is_fragment
        assert unit.tokens[1].is_fragment
        assert unit.labels == (None, None)
        assert not unit.is_labeled

    def test_empty_file(self):
        conversation = parse_target("")
        assert conversation.units == ()

    def test_words_sorted_by_index(self):
        conversation = parse_target("sw1 A 2.5 b\nsw1 A 1 a\nsw1 A 10 c\n")
        assert [t.surface for t in conversation.units[0].tokens] == ["a", "b", "c"]

    def test_nonspeech_dropped_and_unintelligible_flagged(self):
        text = "sw1 A 1 i\nsw1 A 2 [noise]\nsw1 A 3 [unintelligible]\nsw1 A 4 know\nsw1 A 5 it\n"
        tokens = parse_target(text).units[0].tokens
        assert [t.surface for t in tokens] == ["i", "know", "it"]
        assert [t.is_unintelligible for t in tokens] == [True, True, False]

    def test_channels_become_units(self):
        conversation = parse_target(FIXTURES / "corpus" / "target" / "sw1002.txt")
        assert conversation.speakers == ("A", "B")
        assert [t.surface for t in conversation.channel_tokens("B")] == ["oh", "really"]

    @pytest.mark.parametrize(
        "text",
        ["sw1 A gonna\n", "sw1 C 1 gonna\n", "sw1 A x gonna\n", "sw1 A 1 a\nsw2 A 2 b\n"],
    )
    def test_malformed_records(self, text):
        with pytest.raises(MalformedRecordError):
            parse_target(text)

    def test_merge_per_channel_files(self):
        a = parse_target(target_text("sw1", "A", ["hi"]))
        b = parse_target(target_text("sw1", "B", ["hello"]))
        (merged,) = merge_conversations([b, a])
        assert merged.speakers == ("A", "B")

    def test_repeated_channel_names_its_file(self):
        first = parse_target(target_text("sw1", "A", ["hi"]))
        again = parse_target(target_text("sw1", "A", ["hello"]))
        message = "channel A of sw1 already read from a.txt"
        with pytest.raises(IngestError, match=message) as info:
            merge_conversations([first, again], origins=["a.txt", "b.txt"])
        assert info.value.path == "b.txt"

    def test_repeated_channel_without_origins(self):
        first = parse_target(target_text("sw1", "B", ["hi"]))
        with pytest.raises(IngestError, match="channel B of sw1"):
            merge_conversations([first, first])


class TestCanonical:
    def _round_trip(self, conversations):
        buffer = io.StringIO()
        write_canonical(conversations, buffer)
        buffer.seek(0)
        return buffer.getvalue(), read_canonical(buffer)

    def test_source_round_trip(self):
        conversation = parse_source(FIXTURES / "corpus" / "source" / "sw1001.txt")
        _, restored = self._round_trip([conversation])
        assert restored == [conversation]

    def test_target_round_trip_keeps_unlabeled(self):
        conversation = parse_target(FIXTURES / "corpus" / "target" / "sw1001.txt")
        _, restored = self._round_trip([conversation])
        assert restored == [conversation]
        assert all(label is None for u in restored[0].units for label in u.labels)

    def test_write_is_stable(self):
        conversation = parse_source(FIXTURES / "corpus" / "source" / "sw1001.txt")
        first, restored = self._round_trip([conversation])
        second, _ = self._round_trip(restored)
        assert first == second

    def test_one_record_per_unit(self):
        conversation = parse_source(FIXTURES / "corpus" / "source" / "sw1001.txt")
        text, _ = self._round_trip([conversation])
        records = [json.loads(line) for line in text.splitlines()]
        assert len(records) == len(conversation.units)
        assert all(tuple(record) == CANONICAL_FIELDS for record in records)

    def test_mapped_repeat_record(self, repeat_target):
        unit = repeat_target.units[0].with_labels(labels("O O B_RM I_RM B_RP I_RP O"))
        record = unit_to_record(unit)
        assert record["labels"] == ["O", "O", "B_RM", "I_RM", "B_RP", "I_RP", "O"]
        assert record["tokens"] == ["and", "also", "the", "whole", "the", "whole", "thing"]

    def test_missing_labels_field(self):
        record = unit_to_record(parse_source(REPEAT_SOURCE, conversation_id="sw1").units[0])
        del record["labels"]
        with pytest.raises(SchemaViolationError) as info:
            record_to_unit(record)
        assert info.value.field == "labels"

    @pytest.mark.parametrize(
        "field,value",
        [
            ("speaker", "C"),
            ("index", "1"),
            ("labels", ["O"]),
            ("boundary", "sideways"),
            ("flags", [["loud"]] * 6),
        ],
    )
    def test_schema_violations(self, field, value):
        record = unit_to_record(parse_source(REPEAT_SOURCE, conversation_id="sw1").units[0])
        record[field] = value
        with pytest.raises(SchemaViolationError) as info:
            record_to_unit(record)
        assert info.value.field == field

    def test_invalid_json_line(self):
        stream = io.StringIO('{"conv": "sw1"\n')
        with pytest.raises(SchemaViolationError) as info:
            list(iter_canonical(stream))
        assert info.value.line_no == 1

    def test_blank_lines_skipped(self, repeat_source):
        buffer = io.StringIO()
        write_canonical([repeat_source], buffer)
        stream = io.StringIO("\n" + buffer.getvalue() + "\n")
        assert read_canonical(stream) == [repeat_source]

    def test_conversations_sorted_by_id(self):
        units = [
            parse_source("A.1: b ./\n", conversation_id="sw2"),
            parse_source("A.1: a ./\n", conversation_id="sw1"),
        ]
        _, restored = self._round_trip(units)
        assert [c.id for c in restored] == ["sw1", "sw2"]
        assert all(isinstance(c, Conversation) for c in restored)
