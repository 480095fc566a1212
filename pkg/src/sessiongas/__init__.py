"""Toolchain for a resource-aware session-typed contract language."""
__version__ = "0.1.0"
