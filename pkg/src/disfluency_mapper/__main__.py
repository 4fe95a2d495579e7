"""Main entry point for disfluency-mapper."""

import logging
import sys
from typing import Union

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def configure_logging(level: Union[int, str] = logging.WARNING) -> None:
    """Send log records to stderr so stdout stays clean for data."""
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


def main():
    """Main entry point."""
    from .cli import cli

    try:
        cli()
    except KeyboardInterrupt:
        print("\n👋 Interrupted", file=sys.stderr)
        sys.exit(130)


if __name__ == "__main__":
    main()
