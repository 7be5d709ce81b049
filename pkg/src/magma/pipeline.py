"""End-to-end driver for one question: both stages, judging, persistence."""

from __future__ import annotations

from collections import Counter
from dataclasses import replace
from pathlib import Path
from typing import Any, Callable

from .evaluation import judge_metrics
from .executors import Executor
from .model import (
    InstructionalInput,
    MetricVector,
    PipelineConfig,
    RunRecord,
    StageTerminal,
    TerminalState,
    validate_run_record,
)
from .runstore import RunStore
from .runtime import AgentRuntime
from .stage1 import run_stage1
from .stage2 import Stage2Outcome, run_stage2


def default_instruction(knowledge_point: str, subject_grade: str, requirements: str) -> str:
    """Teacher-style instruction synthesized from the structured fields."""
    return (
        f"I am a {subject_grade} math teacher. Please create one problem on "
        f"{knowledge_point} that comes with a figure. Requirements: {requirements}. "
        "Provide the question, explanation, answer, and image description."
    )


def scrubbing_emit(
    store: RunStore, question_id: str
) -> Callable[[str, dict[str, Any]], None]:
    """Event sink that tags the question and relativizes run-dir paths.

    Keeping absolute paths out of the event log is what makes two replays
    of the same cassette byte-identical across different run directories.
    """
    root = store.root.resolve()

    def scrub(value: Any) -> Any:
        if isinstance(value, str):
            candidate = Path(value)
            if candidate.is_absolute():
                try:
                    return str(candidate.resolve().relative_to(root))
                except ValueError:
                    return value
            return value
        if isinstance(value, dict):
            return {key: scrub(item) for key, item in value.items()}
        if isinstance(value, list):
            return [scrub(item) for item in value]
        return value

    def emit(event: str, data: dict[str, Any]) -> None:
        payload = dict(scrub(data))
        payload["question_id"] = question_id
        store.emit(event, payload)

    return emit


def _terminal_state(stage1: StageTerminal, stage2: StageTerminal | None) -> TerminalState:
    if stage1 is StageTerminal.FAILED:
        return TerminalState.FAILED
    if stage1 is StageTerminal.ITERATION_CAP:
        return TerminalState.ITERATION_CAP_TEXT
    assert stage2 is not None
    if stage2 is StageTerminal.FAILED:
        return TerminalState.FAILED
    if stage2 is StageTerminal.ITERATION_CAP:
        return TerminalState.ITERATION_CAP_DIAGRAM
    return TerminalState.CONVERGED


def run_question(
    runtime: AgentRuntime,
    executor: Executor,
    input: InstructionalInput,
    config: PipelineConfig,
    store: RunStore,
    question_id: str,
    notes: Counter[str] | None = None,
) -> RunRecord:
    """Run one question through both stages, judge it, and persist it."""
    emit = scrubbing_emit(store, question_id)
    runtime.event_sink = emit
    workdir = store.question_dir(question_id)

    emit("run_started", {"run_id": question_id, "input": input.to_dict()})
    stage1 = run_stage1(runtime, input, config, emit=emit)

    stage2: Stage2Outcome | None = None
    if stage1.terminal is StageTerminal.CONVERGED:
        assert stage1.final is not None
        stage2 = run_stage2(
            runtime,
            executor,
            stage1.final,
            input.diagram_requirements,
            config,
            workdir,
            emit=emit,
        )

    terminal = _terminal_state(stage1.terminal, stage2.terminal if stage2 else None)
    provisional = RunRecord(
        run_id=question_id,
        input=input,
        stage1_trace=stage1.trace,
        final_text=stage1.final,
        stage2_trace=stage2.cycles if stage2 else (),
        final_diagram=stage2.final_artifact if stage2 else None,
        metrics=MetricVector.all_false(),
        terminal_state=terminal,
    )
    metrics = judge_metrics(runtime, provisional, notes=notes)
    record = replace(provisional, metrics=metrics)
    validate_run_record(record, config)

    emit("metrics", metrics.to_dict())
    emit("run_finished", {"terminal_state": terminal.value})
    store.write_question(question_id, record, config.artifact_format)
    return record
