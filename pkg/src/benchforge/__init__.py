"""Benchmark synthesis and evaluation for constraint-following tasks."""

__version__ = "1.0.0"
