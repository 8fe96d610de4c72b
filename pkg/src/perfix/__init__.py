"""perfix: knowledge-base driven performance-bug fix suggestions for C#."""

__version__ = "0.1.0"
