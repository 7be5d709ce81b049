"""Restricted execution wrapper for generated drawing code."""

from .harness import HarnessResult, main, run_harness

__all__ = ["HarnessResult", "main", "run_harness"]
