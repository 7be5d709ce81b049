"""Stage-1 loop: generation, validation fan-out, reflection, stop rules."""

from __future__ import annotations

import dataclasses
import random

import pytest

from magma.errors import ContractViolation
from magma.model import (
    CheckId,
    PipelineConfig,
    ReportStatus,
    StageTerminal,
    Verdict,
)
from magma.prompts import AgentRole
from magma.stage1 import (
    generate_draft,
    reflect_text,
    run_stage1,
    validate_draft,
)
from magma.testing import (
    AA_FEEDBACK_JSON,
    DRAFT_V1_JSON,
    REFLECTOR_REPLY,
    REVISED_ANALYSIS,
    random_text,
)

from conftest import FAIL_REPLY, PASS_REPLY, scripted_runtime

SIX_PASSES = [PASS_REPLY] * 6
SIX_FAILS = [FAIL_REPLY] * 6


class TestGenerateDraft:
    def test_first_call_parses_generator_reply(self, sample_input):
        runtime = scripted_runtime([DRAFT_V1_JSON])
        draft = generate_draft(runtime, sample_input)
        assert draft.answer == "5 cm"
        assert draft.iteration == 1
        # The generator saw the raw teacher instruction.
        assert sample_input.raw_instruction in runtime.backend.calls[0].prompt

    def test_directive_passes_revision_through(self, sample_input, sample_draft):
        runtime = scripted_runtime([])  # any agent call would blow up
        revised = dataclasses.replace(sample_draft, analysis="better analysis")
        from magma.model import DirectiveTarget, ReflectionDirective

        directive = ReflectionDirective(target=DirectiveTarget.TEXT, revised_draft=revised)
        draft = generate_draft(runtime, sample_input, directive)
        assert draft == revised.with_iteration(revised.iteration + 1)

    def test_malformed_reply_retried_once(self, sample_input):
        runtime = scripted_runtime(["no tags here at all", DRAFT_V1_JSON])
        draft = generate_draft(runtime, sample_input)
        assert draft.answer == "5 cm"
        assert len(runtime.backend.calls) == 2
        assert "Reminder" in runtime.backend.calls[1].prompt


class TestValidateDraft:
    def test_six_passes_approved(self, sample_input, sample_draft):
        runtime = scripted_runtime(SIX_PASSES)
        report = validate_draft(runtime, sample_draft, sample_input)
        assert report.status is ReportStatus.APPROVED
        assert [c.check_id for c in report.checks] == list(CheckId)

    def test_formula_error_feedback_on_aa(self, sample_input, sample_draft):
        replies = [PASS_REPLY, PASS_REPLY, PASS_REPLY, AA_FEEDBACK_JSON, PASS_REPLY, PASS_REPLY]
        runtime = scripted_runtime(replies)
        report = validate_draft(runtime, sample_draft, sample_input)
        assert report.status is ReportStatus.REVISION_NEEDED
        verdicts = {c.check_id: c.verdict for c in report.checks}
        assert verdicts[CheckId.AA] is Verdict.FAIL
        assert sum(1 for c in report.checks if c.verdict is Verdict.PASS) == 5
        assert report.feedback[0].error_type == "formula_error"

    def test_always_six_checks_on_fuzzed_replies(self, sample_input, sample_draft):
        rng = random.Random(5)
        pool = [PASS_REPLY, FAIL_REPLY, "??", "", "maybe", "not passed", "{broken json"]
        for _ in range(25):
            replies = [rng.choice(pool) for _ in range(6)]
            runtime = scripted_runtime(replies)
            report = validate_draft(runtime, sample_draft, sample_input)
            assert len(report.checks) == 6

    def test_validators_run_in_fixed_order(self, sample_input, sample_draft):
        runtime = scripted_runtime(SIX_PASSES)
        validate_draft(runtime, sample_draft, sample_input)
        roles = [call.role for call in runtime.backend.calls]
        assert roles == [
            AgentRole.TEXT_VALIDATOR_UO,
            AgentRole.TEXT_VALIDATOR_LR,
            AgentRole.TEXT_VALIDATOR_QF,
            AgentRole.TEXT_VALIDATOR_AA,
            AgentRole.TEXT_VALIDATOR_CA,
            AgentRole.TEXT_VALIDATOR_IDQ,
        ]


def failing_report(runtime_replies=None):
    from magma.model import CHECK_ORDER, CheckResult, ValidationReport

    checks = [
        CheckResult(check_id=check_id, verdict=Verdict.FAIL, reason="bad")
        for check_id in CHECK_ORDER
    ]
    return ValidationReport.from_checks(checks)


class TestReflectText:
    def test_revised_analysis_contains_full_expression(self, sample_input, sample_draft):
        runtime = scripted_runtime([REFLECTOR_REPLY])
        directive = reflect_text(runtime, sample_draft, failing_report(), sample_input)
        assert directive.revised_draft is not None
        assert "BC^2 = AB^2 + AC^2" in directive.revised_draft.analysis
        assert directive.revised_draft.analysis == REVISED_ANALYSIS

    def test_approved_report_is_a_contract_violation(self, sample_input, sample_draft):
        from magma.model import CHECK_ORDER, CheckResult, ValidationReport

        approved = ValidationReport.from_checks(
            [
                CheckResult(check_id=check_id, verdict=Verdict.PASS, reason="")
                for check_id in CHECK_ORDER
            ]
        )
        runtime = scripted_runtime([])
        with pytest.raises(ContractViolation):
            reflect_text(runtime, sample_draft, approved, sample_input)

    def test_conflict_revises_description_not_stem(self, sample_input, sample_draft):
        # Scripted per the reflector rule: image description yields, stem stays.
        revised_description = "A right triangle with AB=3 cm, AC=4 cm, right angle at A."
        reply = (
            f"[Question]{sample_draft.question_stem}\n"
            f"[Explanation]{sample_draft.analysis}\n"
            f"[Answer]{sample_draft.answer}\n"
            f"[Image Description]{revised_description}"
        )
        runtime = scripted_runtime([reply])
        directive = reflect_text(runtime, sample_draft, failing_report(), sample_input)
        assert directive.revised_draft.question_stem == sample_draft.question_stem
        assert directive.revised_draft.image_description == revised_description

    def test_reflector_prompt_carries_verdicts(self, sample_input, sample_draft):
        runtime = scripted_runtime([REFLECTOR_REPLY])
        reflect_text(runtime, sample_draft, failing_report(), sample_input)
        prompt = runtime.backend.calls[0].prompt
        for check_id in CheckId:
            assert f"{check_id.value}: Fail" in prompt


class TestRunStage1:
    def test_fail_then_pass_converges_at_two(self, sample_input):
        replies = [
            DRAFT_V1_JSON,
            *[PASS_REPLY] * 3,
            AA_FEEDBACK_JSON,
            *[PASS_REPLY] * 2,
            REFLECTOR_REPLY,
            *SIX_PASSES,
        ]
        outcome = run_stage1(scripted_runtime(replies), sample_input, PipelineConfig())
        assert outcome.terminal is StageTerminal.CONVERGED
        assert len(outcome.trace) == 2
        assert outcome.final is not None
        assert outcome.final.iteration == 2
        assert outcome.final.analysis == REVISED_ANALYSIS

    def test_always_fail_hits_cap_at_five(self, sample_input):
        replies = [DRAFT_V1_JSON]
        for round_number in range(5):
            replies.extend(SIX_FAILS)
            if round_number < 4:
                replies.append(REFLECTOR_REPLY)
        outcome = run_stage1(scripted_runtime(replies), sample_input, PipelineConfig())
        assert outcome.terminal is StageTerminal.ITERATION_CAP
        assert len(outcome.trace) == 5
        assert outcome.final is None

    def test_zero_threshold_converges_immediately(self, sample_input):
        replies = [DRAFT_V1_JSON, *SIX_FAILS]
        config = PipelineConfig(tau_text=0.0)
        outcome = run_stage1(scripted_runtime(replies), sample_input, config)
        assert outcome.terminal is StageTerminal.CONVERGED
        assert len(outcome.trace) == 1

    def test_unparseable_generator_fails_question(self, sample_input):
        outcome = run_stage1(
            scripted_runtime(["garbage", "more garbage"]), sample_input, PipelineConfig()
        )
        assert outcome.terminal is StageTerminal.FAILED
        assert outcome.final is None

    def test_iterations_strictly_increasing_from_one(self, sample_input):
        replies = [DRAFT_V1_JSON]
        for round_number in range(3):
            replies.extend(SIX_FAILS)
            replies.append(REFLECTOR_REPLY)
        replies.extend(SIX_PASSES)
        outcome = run_stage1(scripted_runtime(replies), sample_input, PipelineConfig())
        iterations = [step.draft.iteration for step in outcome.trace]
        assert iterations == [1, 2, 3, 4]

    def test_no_directive_after_approved_report(self, sample_input):
        replies = [DRAFT_V1_JSON, *SIX_PASSES]
        outcome = run_stage1(scripted_runtime(replies), sample_input, PipelineConfig())
        for step in outcome.trace:
            if step.report.status is ReportStatus.APPROVED:
                assert step.directive is None

    def test_bounded_iteration_under_fuzz(self, sample_input):
        rng = random.Random(99)
        pool = [
            PASS_REPLY,
            FAIL_REPLY,
            "unreadable",
            DRAFT_V1_JSON,
            REFLECTOR_REPLY,
            random_text(rng),
        ]
        for _ in range(40):
            cap = rng.randint(1, 5)
            replies = [rng.choice(pool) for _ in range(200)]
            config = PipelineConfig(i_max_text=cap)
            outcome = run_stage1(scripted_runtime(replies), sample_input, config)
            assert len(outcome.trace) <= cap
