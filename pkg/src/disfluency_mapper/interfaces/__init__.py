"""Interface implementations: terminal output and report files."""

from . import reports
from .terminal_interface import TerminalInterface

__all__ = ["TerminalInterface", "reports"]
