"""Entry point for python -m magtrap."""

from .cli import main

main()  # pragma: no cover
