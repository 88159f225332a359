"""
Console logging through rich.
"""
import logging

from rich.console import Console
from rich.logging import RichHandler

console = Console(stderr=True)


def setup_logging(verbose: int = 0) -> None:
    """Route the ``cslnoise`` loggers to a RichHandler on stderr."""
    level = logging.WARNING
    if verbose == 1:
        level = logging.INFO
    elif verbose >= 2:
        level = logging.DEBUG
    handler = RichHandler(console=console, show_path=False, rich_tracebacks=True, markup=False)
    handler.setFormatter(logging.Formatter("%(name)s: %(message)s"))
    root = logging.getLogger("cslnoise")
    root.handlers[:] = [handler]
    root.setLevel(level)
    root.propagate = False
