"""Shared rich console for status lines and warnings."""

from rich.console import Console

console = Console(stderr=True, highlight=False)


def warn(message: str) -> None:
    """Print a warning line."""
    console.print(f"[yellow]Warning: {message}[/]")


def note(message: str) -> None:
    """Print a dimmed progress line."""
    console.print(f"[dim]{message}[/]")
