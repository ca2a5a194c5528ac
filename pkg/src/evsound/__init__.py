"""Eventually sound points-to analysis for programs that call unseen library code."""

__version__ = "0.1.0"
