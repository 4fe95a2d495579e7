"""
Disfluency Mapper

Transfers disfluency annotations from an original conversational transcript
onto an independent, more careful transcription of the same audio, and
relates transcription errors to disfluencies.
"""

__version__ = "0.1.0"

from .config import Config, load_config
from .core.model import BioLabel, Conversation, SlashUnit
from .core.project import PatternScorer, constrained_decode, map_annotations

__all__ = [
    "BioLabel",
    "Config",
    "Conversation",
    "PatternScorer",
    "SlashUnit",
    "constrained_decode",
    "load_config",
    "map_annotations",
]
