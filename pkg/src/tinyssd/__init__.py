"""Single-shot multibox detection in plain numpy."""

__version__ = "0.1.0"
