"""Basic setup tests to verify installation."""

import pytest


@pytest.mark.parametrize("module", ["click", "rich", "dotenv", "numpy", "jsonlines"])
def test_dependency_import(module):
    """Test that a runtime dependency can be imported."""
    try:
        __import__(module)
    except ImportError:
        pytest.fail(f"{module} not installed properly")


def test_core_imports():
    """Test that our core modules can be imported."""
    from disfluency_mapper import constrained_decode, map_annotations
    from disfluency_mapper.core import align_units, brackets_to_bio
    from disfluency_mapper.pipeline import CorpusPipeline

    assert constrained_decode is not None
    assert map_annotations is not None
    assert align_units is not None
    assert brackets_to_bio is not None
    assert CorpusPipeline is not None


def test_config_loading():
    """Test configuration loading."""
    from disfluency_mapper.config import load_config

    cfg = load_config(env={})
    assert cfg.sub_policy in ["A", "D"]
    assert cfg.window >= 0
    assert cfg.workers >= 1


def test_packaged_resources():
    """Test that the packaged lexicons and convention table load."""
    from disfluency_mapper.config import Config

    cfg = Config()
    table = cfg.convention_table()
    lexicons = cfg.lexicons(table)
    assert lexicons.function_words
    assert "uh-huh" in lexicons.backchannels
