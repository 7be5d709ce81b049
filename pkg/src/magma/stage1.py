"""Stage 1: iterative question-text generation, validation, and reflection.

One round generates (or adopts the reflector's revision of) a draft, runs
the six textual validators in fixed order, and either stops at the quality
threshold or asks the reflector for a revised draft. The loop is strictly
sequential so recorded runs replay deterministically.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import AgentUnavailable, ContractViolation, ParseError
from .model import (
    CHECK_ORDER,
    CheckId,
    CheckResult,
    DirectiveTarget,
    FeedbackItem,
    InstructionalInput,
    PipelineConfig,
    QuestionDraft,
    ReflectionDirective,
    ReportStatus,
    StageTerminal,
    Stage1Step,
    ValidationReport,
    q_text_score,
)
from .parsing import parse_stage1_output, parse_verdict
from .prompts import AgentRole
from .runtime import AgentRuntime, EventSink

FORMAT_REMINDER = (
    "\n\nReminder: output strictly in the required format with all required fields present."
)

_VALIDATOR_ROLES: dict[CheckId, AgentRole] = {
    CheckId.UO: AgentRole.TEXT_VALIDATOR_UO,
    CheckId.LR: AgentRole.TEXT_VALIDATOR_LR,
    CheckId.QF: AgentRole.TEXT_VALIDATOR_QF,
    CheckId.AA: AgentRole.TEXT_VALIDATOR_AA,
    CheckId.CA: AgentRole.TEXT_VALIDATOR_CA,
    CheckId.IDQ: AgentRole.TEXT_VALIDATOR_IDQ,
}


@dataclass(frozen=True)
class Stage1Outcome:
    """Result of the text loop: the verified draft, trace, and terminal."""

    final: QuestionDraft | None
    trace: tuple[Stage1Step, ...]
    terminal: StageTerminal


def _draft_bindings(draft: QuestionDraft, input: InstructionalInput) -> dict[str, str]:
    return {
        "question_stem": draft.question_stem,
        "analysis": draft.analysis,
        "answer": draft.answer,
        "image_description": draft.image_description,
        "user_input": input.raw_instruction,
    }


def generate_draft(
    runtime: AgentRuntime,
    input: InstructionalInput,
    directive: ReflectionDirective | None = None,
) -> QuestionDraft:
    """Produce the next draft.

    The first round asks the generator; later rounds adopt the reflector's
    revised draft unchanged, bumping its iteration number. A malformed
    generator reply is re-asked once with a format reminder before failing.
    """
    if directive is not None:
        if directive.revised_draft is None:
            raise ContractViolation("text directive must carry a revised draft")
        revised = directive.revised_draft
        return revised.with_iteration(revised.iteration + 1)

    bindings = {"user_input": input.raw_instruction}
    response = runtime.invoke(AgentRole.TEXT_GENERATOR, bindings)
    try:
        return parse_stage1_output(response.text, context=input, iteration=1)
    except ParseError:
        retry = runtime.invoke(AgentRole.TEXT_GENERATOR, bindings, extra=FORMAT_REMINDER)
        return parse_stage1_output(retry.text, context=input, iteration=1)


def validate_draft(
    runtime: AgentRuntime, draft: QuestionDraft, input: InstructionalInput
) -> ValidationReport:
    """Run the six validators in fixed order and assemble their report."""
    bindings = _draft_bindings(draft, input)
    checks: list[CheckResult] = []
    feedback: list[FeedbackItem] = []
    for check_id in CHECK_ORDER:
        response = runtime.invoke(_VALIDATOR_ROLES[check_id], bindings)
        parsed = parse_verdict(response.text)
        checks.append(
            CheckResult(check_id=check_id, verdict=parsed.reading.to_verdict(), reason=parsed.reason)
        )
        feedback.extend(parsed.feedback)
    return ValidationReport.from_checks(checks, feedback)


def _verification_summary(report: ValidationReport) -> str:
    lines = [
        f"{check.check_id.value}: {check.verdict.value} - {check.reason}".rstrip(" -")
        for check in report.checks
    ]
    for item in report.feedback:
        lines.append(f"Suggestion ({item.error_type}): {item.suggestion}")
    return "\n".join(lines)


def reflect_text(
    runtime: AgentRuntime,
    draft: QuestionDraft,
    report: ValidationReport,
    input: InstructionalInput,
) -> ReflectionDirective:
    """Ask the reflector for a revised draft addressing the failed checks."""
    if report.status is not ReportStatus.REVISION_NEEDED:
        raise ContractViolation("reflection requires a RevisionNeeded report")

    bindings = {
        "question_stem": draft.question_stem,
        "analysis": draft.analysis,
        "answer": draft.answer,
        "image_description": draft.image_description,
        "verification_results": _verification_summary(report),
    }
    response = runtime.invoke(AgentRole.TEXT_REFLECTOR, bindings)
    try:
        revised = parse_stage1_output(response.text, context=draft, iteration=draft.iteration)
    except ParseError:
        retry = runtime.invoke(AgentRole.TEXT_REFLECTOR, bindings, extra=FORMAT_REMINDER)
        revised = parse_stage1_output(retry.text, context=draft, iteration=draft.iteration)
    return ReflectionDirective(target=DirectiveTarget.TEXT, revised_draft=revised)


def run_stage1(
    runtime: AgentRuntime,
    input: InstructionalInput,
    config: PipelineConfig,
    emit: EventSink | None = None,
) -> Stage1Outcome:
    """Loop generate, validate, reflect until the threshold or the cap."""
    trace: list[Stage1Step] = []
    directive: ReflectionDirective | None = None
    try:
        for round_number in range(1, config.i_max_text + 1):
            draft = generate_draft(runtime, input, directive)
            report = validate_draft(runtime, draft, input)
            step = Stage1Step(draft=draft, report=report)
            trace.append(step)

            score = q_text_score(report)
            converged = score >= config.tau_text
            if not converged and round_number < config.i_max_text:
                directive = reflect_text(runtime, draft, report, input)
                step = Stage1Step(draft=draft, report=report, directive=directive)
                trace[-1] = step
            if emit is not None:
                emit("stage1_iteration", step.to_dict() | {"q_text": score})
            if converged:
                outcome = Stage1Outcome(
                    final=draft, trace=tuple(trace), terminal=StageTerminal.CONVERGED
                )
                break
        else:
            outcome = Stage1Outcome(
                final=None, trace=tuple(trace), terminal=StageTerminal.ITERATION_CAP
            )
    except (ParseError, AgentUnavailable):
        outcome = Stage1Outcome(final=None, trace=tuple(trace), terminal=StageTerminal.FAILED)

    if emit is not None:
        emit(
            "stage1_done",
            {"terminal": outcome.terminal.value, "iterations": len(outcome.trace)},
        )
    return outcome
