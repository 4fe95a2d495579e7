"""Terminal interface with Rich formatting for pipeline summaries."""

import logging
import sys
from typing import Any, Iterable, Mapping, Optional, Sequence

from rich import box
from rich.console import Console
from rich.panel import Panel
from rich.table import Table
from rich.text import Text

logger = logging.getLogger(__name__)


def _cell(value: Any) -> str:
    if value is None:
        return "-"
    return f"{value:.4f}" if isinstance(value, float) else str(value)


class TerminalInterface:
    """Rich summaries on standard error; standard output stays machine-readable."""

    def __init__(self, console: Optional[Console] = None, quiet: bool = False):
        """Initialize the terminal interface.

        Args:
            console: Console to print to (defaults to standard error)
            quiet: Suppress everything but errors and summary lines
        """
        self.console = console or Console(file=sys.stderr, highlight=False)
        self.quiet = quiet

    def show_summary_line(self, units: int, tokens: int) -> None:
        """Print the plain ``units=N tokens=M`` line."""
        line = f"units={units} tokens={tokens}"
        self.console.print(line, markup=False, highlight=False)

    def show_status(self, message: str, style: str = "white") -> None:
        """Show a status message.

        Args:
            message: Status message
            style: Rich style for the message
        """
        if not self.quiet:
            self.console.print(f"ℹ️  {message}", style=style)

    def show_warning(self, message: str) -> None:
        self.console.print(Text.assemble(("⚠️  ", "yellow"), (message, "yellow")))

    def show_error(self, error: str) -> None:
        """Display error message.

        Args:
            error: Error message to display
        """
        error_panel = Panel(
            Text.assemble(("❌ ", "bold red"), (error, "red")),
            title="Error",
            border_style="red",
            box=box.HEAVY,
        )
        self.console.print(error_panel)

    def show_failures(self, failures: Iterable[Any]) -> None:
        """List units whose constraints could not be satisfied."""
        table = Table(
            title="Unsatisfiable units", box=box.SIMPLE, header_style="bold red"
        )
        table.add_column("Unit", style="cyan")
        table.add_column("Position", justify="right")
        for failure in failures:
            table.add_row(str(failure.unit), str(failure.position))
        self.console.print(table)

    def show_key_values(self, title: str, values: Mapping[str, Any]) -> None:
        """Show a two-column property table in a panel."""
        if self.quiet:
            return
        table = Table(show_header=False, box=None, padding=(0, 1))
        table.add_column("Property", style="cyan")
        table.add_column("Value", style="white")
        for key, value in values.items():
            if isinstance(value, float):
                value = f"{value:.4f}"
            table.add_row(key, str(value))
        self.console.print(Panel(table, title=title, border_style="blue"))

    def show_table(
        self, title: str, header: Sequence[str], rows: Iterable[Sequence[Any]]
    ) -> None:
        """Show rows under a header, formatting floats to four places."""
        if self.quiet:
            return
        table = Table(title=title, box=box.ROUNDED, header_style="bold magenta")
        for name in header:
            table.add_column(name, justify="right" if name != header[0] else "left")
        for row in rows:
            table.add_row(*(_cell(v) for v in row))
        self.console.print(table)
