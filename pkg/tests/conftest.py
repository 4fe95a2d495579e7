"""Shared fixtures and helpers for the test suite."""

import random
from pathlib import Path
from typing import List, Optional, Sequence

import pytest

from disfluency_mapper.config import Config
from disfluency_mapper.core.align import normalize_token
from disfluency_mapper.core.analyze import Lexicons
from disfluency_mapper.core.ingest import parse_source, parse_target
from disfluency_mapper.core.model import (
    BioLabel,
    Conversation,
    SlashUnit,
    Token,
    is_valid_transition,
)

FIXTURES = Path(__file__).parent / "fixtures"

REPEAT_SOURCE = "A.1: and also the [ whole + whole ] thing ./\n"
REPEAT_TARGET_WORDS = "and also the whole the whole thing".split()
REPEAT_MAPPED = "and also [ the whole + the whole ] thing"


def tok(surface: str, **flags) -> Token:
    return Token.from_surface(surface, normalize_token, **flags)


def toks(text: str) -> List[Token]:
    return [tok(word) for word in text.split()]


def labels(text: str) -> List[BioLabel]:
    return [BioLabel(name) for name in text.split()]


def random_labels(rng: random.Random, length: int) -> List[BioLabel]:
    """A grammar-valid label sequence drawn uniformly step by step."""
    out: List[BioLabel] = []
    previous: Optional[BioLabel] = None
    for _ in range(length):
        choices = [label for label in BioLabel if is_valid_transition(previous, label)]
        previous = rng.choice(choices)
        out.append(previous)
    return out


def target_text(conv: str, channel: str, words: Sequence[str]) -> str:
    return "".join(f"{conv} {channel} {k} {w}\n" for k, w in enumerate(words, start=1))


def unlabeled(conversation_id: str, speaker: str, index: int, words: str) -> SlashUnit:
    tokens = tuple(toks(words))
    return SlashUnit(conversation_id, speaker, index, tokens, (None,) * len(tokens))


@pytest.fixture
def repeat_source() -> Conversation:
    return parse_source(REPEAT_SOURCE, conversation_id="sw0001")


@pytest.fixture
def repeat_target() -> Conversation:
    """The careful transcript of the repeat unit, already paired with A.1."""
    return Conversation("sw0001", (unlabeled("sw0001", "A", 1, " ".join(REPEAT_TARGET_WORDS)),))


@pytest.fixture
def repeat_target_stream() -> Conversation:
    return parse_target(target_text("sw0001", "A", REPEAT_TARGET_WORDS))


@pytest.fixture(scope="session")
def lexicons() -> Lexicons:
    return Lexicons.load()


@pytest.fixture
def config() -> Config:
    return Config()


@pytest.fixture
def corpus_dir() -> Path:
    return FIXTURES / "corpus"


@pytest.fixture
def repeat_dir() -> Path:
    return FIXTURES / "repeat"
