"""Stage 2: code-mediated diagram generation with execute/validate/reflect.

Each cycle turns the verified text's image description into drawing code,
runs it through the executor port, and applies two checks: a code-level
review (always) and a multimodal image review (only when execution
succeeded). Failing cycles feed a reflection directive into the next one.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .errors import AgentUnavailable, ContractViolation, ParseError, SandboxUnavailable
from .executors import Executor
from .model import (
    CheckOutcome,
    DiagramCycle,
    DirectiveTarget,
    DrawingCode,
    ExecStatus,
    ExecutionOutcome,
    PipelineConfig,
    QuestionDraft,
    ReflectionDirective,
    StageTerminal,
)
from .parsing import extract_code, parse_verdict
from .prompts import AgentRole
from .runtime import AgentRuntime, Attachment, EventSink
from .stage1 import FORMAT_REMINDER

# Canonical artifact name inside a question directory. Keeping it relative
# makes recorded prompts and code independent of the run directory.
ARTIFACT_STEM = "diagram"

_MEDIA_TYPES = {"png": "image/png", "jpg": "image/jpeg", "svg": "image/svg+xml"}


def artifact_name(config: PipelineConfig) -> str:
    return f"{ARTIFACT_STEM}.{config.artifact_format}"


@dataclass(frozen=True)
class Stage2Outcome:
    """Result of the diagram loop: artifact path, cycles, and terminal."""

    final_artifact: str | None
    cycles: tuple[DiagramCycle, ...]
    terminal: StageTerminal


def _exec_summary(outcome: ExecutionOutcome) -> str:
    if outcome.status is ExecStatus.OK:
        return "success"
    return outcome.stderr_tail or outcome.status.value


def _check_summary(check: CheckOutcome | None) -> str:
    if check is None:
        return "not evaluated"
    return f"{check.verdict.value}. {check.reason}".strip()


def generate_code(
    runtime: AgentRuntime,
    final_text: QuestionDraft,
    requirements: str,
    save_path: str,
    prev_cycle: DiagramCycle | None = None,
) -> DrawingCode:
    """Produce the next drawing-code candidate.

    The first cycle asks the code generator from the image description
    alone; later cycles ask the reflector, handing it the previous cycle's
    exact code, a bounded execution excerpt, and both validator results
    (the recorded directive's revision notes summarize the same feedback).
    """
    if prev_cycle is None:
        bindings = {
            "image_description": final_text.image_description,
            "image_save_path": save_path,
        }
        role = AgentRole.CODE_GENERATOR
    else:
        bindings = {
            "cycle_code": prev_cycle.code.source,
            "last_exec_result": _exec_summary(prev_cycle.exec),
            "last_code_val_result": _check_summary(prev_cycle.code_check),
            "last_multimodal_val_result": _check_summary(prev_cycle.image_check),
            "image_description": final_text.image_description,
            "image_save_path": save_path,
        }
        role = AgentRole.IMAGE_REFLECTOR

    response = runtime.invoke(role, bindings)
    try:
        return extract_code(response.text, save_path)
    except ParseError:
        retry = runtime.invoke(role, bindings, extra=FORMAT_REMINDER)
        return extract_code(retry.text, save_path)


def execute_code(
    executor: Executor, code: DrawingCode, workdir: Path, config: PipelineConfig
) -> ExecutionOutcome:
    return executor.execute(code, workdir, config.sandbox_timeout)


def validate_cycle(
    runtime: AgentRuntime,
    code: DrawingCode,
    exec_outcome: ExecutionOutcome,
    description: str,
    artifact_bytes: bytes | None = None,
    media_type: str = "image/png",
) -> tuple[CheckOutcome, CheckOutcome | None]:
    """Run the code-level check, and the image check when execution passed."""
    code_response = runtime.invoke(
        AgentRole.IMAGE_VALIDATOR_CODE,
        {
            "image_description": description,
            "cycle_code": code.source,
            "last_exec_result": _exec_summary(exec_outcome),
        },
    )
    parsed = parse_verdict(code_response.text)
    code_check = CheckOutcome(verdict=parsed.reading.to_verdict(), reason=parsed.reason)

    if exec_outcome.status is not ExecStatus.OK:
        return code_check, None

    if artifact_bytes is None and exec_outcome.artifact_path:
        artifact_bytes = Path(exec_outcome.artifact_path).read_bytes()
    attachment = Attachment(data=artifact_bytes or b"", media_type=media_type)
    image_response = runtime.invoke(
        AgentRole.IMAGE_VALIDATOR_MULTIMODAL,
        {"image_description": description},
        attachment=attachment,
    )
    parsed = parse_verdict(image_response.text)
    image_check = CheckOutcome(verdict=parsed.reading.to_verdict(), reason=parsed.reason)
    return code_check, image_check


def _revision_notes(cycle: DiagramCycle) -> str:
    return (
        f"exec: {_exec_summary(cycle.exec)[:200]}\n"
        f"code_check: {_check_summary(cycle.code_check)}\n"
        f"image_check: {_check_summary(cycle.image_check)}"
    )


def run_stage2(
    runtime: AgentRuntime,
    executor: Executor,
    final_text: QuestionDraft,
    requirements: str,
    config: PipelineConfig,
    workdir: Path,
    emit: EventSink | None = None,
) -> Stage2Outcome:
    """Loop code generation, execution, and validation until a full pass."""
    if final_text is None:
        raise ContractViolation("stage 2 requires a converged stage-1 draft")

    save_path = artifact_name(config)
    media_type = _MEDIA_TYPES[config.artifact_format]
    cycles: list[DiagramCycle] = []
    prev_cycle: DiagramCycle | None = None
    try:
        for cycle_number in range(1, config.i_max_diagram + 1):
            code = generate_code(runtime, final_text, requirements, save_path, prev_cycle)
            exec_outcome = execute_code(executor, code, workdir, config)
            if emit is not None:
                emit(
                    "exec_result",
                    {
                        "iteration": cycle_number,
                        "status": exec_outcome.status.value,
                        "stderr_tail": exec_outcome.stderr_tail,
                        "duration_ms": exec_outcome.duration_ms,
                    },
                )
            code_check, image_check = validate_cycle(
                runtime,
                code,
                exec_outcome,
                final_text.image_description,
                media_type=media_type,
            )
            cycle = DiagramCycle(
                iteration=cycle_number,
                code=code,
                exec=exec_outcome,
                code_check=code_check,
                image_check=image_check,
                syntax_ok=exec_outcome.status is ExecStatus.OK,
            )

            if not cycle.full_pass and cycle_number < config.i_max_diagram:
                directive = ReflectionDirective(
                    target=DirectiveTarget.DIAGRAM, revision_notes=_revision_notes(cycle)
                )
                cycle = DiagramCycle(
                    iteration=cycle.iteration,
                    code=cycle.code,
                    exec=cycle.exec,
                    code_check=cycle.code_check,
                    image_check=cycle.image_check,
                    syntax_ok=cycle.syntax_ok,
                    directive=directive,
                )
            cycles.append(cycle)
            if emit is not None:
                emit("stage2_cycle", cycle.to_dict())

            if cycle.full_pass:
                outcome = Stage2Outcome(
                    final_artifact=exec_outcome.artifact_path,
                    cycles=tuple(cycles),
                    terminal=StageTerminal.CONVERGED,
                )
                break
            prev_cycle = cycle
        else:
            outcome = Stage2Outcome(
                final_artifact=None, cycles=tuple(cycles), terminal=StageTerminal.ITERATION_CAP
            )
    except (ParseError, AgentUnavailable, SandboxUnavailable):
        outcome = Stage2Outcome(
            final_artifact=None, cycles=tuple(cycles), terminal=StageTerminal.FAILED
        )

    if emit is not None:
        emit(
            "stage2_done",
            {"terminal": outcome.terminal.value, "cycles": len(outcome.cycles)},
        )
    return outcome
