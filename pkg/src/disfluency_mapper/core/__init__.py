"""Core functionality: annotation model, alignment, projection and analysis."""

from .align import Alignment, align_units
from .codec import brackets_to_bio, interruption_points
from .exceptions import DisfluencyMapperError, UnsatisfiableConstraintsError
from .model import BioLabel, Conversation, SlashUnit

__all__ = [
    "Alignment",
    "BioLabel",
    "Conversation",
    "DisfluencyMapperError",
    "SlashUnit",
    "UnsatisfiableConstraintsError",
    "align_units",
    "brackets_to_bio",
    "interruption_points",
]
