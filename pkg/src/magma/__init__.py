"""Self-reflective multi-agent generation of multimodal math problems.

The package is organized around the pipeline's moving parts:

* ``model`` — shared domain types and scoring primitives
* ``prompts`` / ``runtime`` — agent roles, templates, record/replay calls
* ``parsing`` — structured parsing of free-form agent output
* ``stage1`` / ``stage2`` — the two generate/validate/reflect loops
* ``executors`` — the drawing-code execution port
* ``evaluation`` — per-question metrics and batch report shapes
* ``config`` / ``datasets`` / ``runstore`` / ``pipeline`` / ``cli`` — app shell
"""

from .model import (
    Category,
    InstructionalInput,
    MetricVector,
    PipelineConfig,
    QuestionDraft,
    RunRecord,
    TerminalState,
    compute_phi,
    itc_verdict,
    q_text_score,
)

__all__ = [
    "Category",
    "InstructionalInput",
    "MetricVector",
    "PipelineConfig",
    "QuestionDraft",
    "RunRecord",
    "TerminalState",
    "compute_phi",
    "itc_verdict",
    "q_text_score",
]

__version__ = "0.1.0"
