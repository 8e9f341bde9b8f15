"""Interactive face reconstruction from iterative ranking feedback."""

__version__ = "0.1.0"
