"""Command-line front end.

- bitalloc: validate, enumerate, front, scalarize, sweep, check, compare, demo
"""

__all__ = []
