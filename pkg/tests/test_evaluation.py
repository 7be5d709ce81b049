"""Metric judging, aggregation arithmetic, categories, and sweeps."""

from __future__ import annotations

import random
from collections import Counter

import pytest
import requests

from magma.errors import ContractViolation
from magma.evaluation import (
    METRIC_COLUMNS,
    AggregateRow,
    aggregate,
    build_report,
    categorize,
    judge_metrics,
    record_itc,
    render_csv,
    render_markdown,
    round_half_up,
    sweep_reflection,
)
from magma.model import (
    Category,
    CheckOutcome,
    DiagramCycle,
    DrawingCode,
    ExecStatus,
    ExecutionOutcome,
    InstructionalInput,
    MetricVector,
    RunRecord,
    TerminalState,
    Verdict,
)
from magma.prompts import AgentRole
from magma.runtime import AgentRuntime

from conftest import FAIL_REPLY, PASS_REPLY, scripted_runtime

# Reference rows frozen from the comparison table: six per-metric
# percentages and the expected Avg-Text mean.
GPT4O_ROW = (32.47, 58.67, 63.47, 56.83, 67.16, 63.47)
GPT4O_AVG = 57.01
NANO_BANANA_ROW = (99.63, 99.63, 89.30, 96.68, 83.39, 100.00)
NANO_BANANA_AVG = 94.77


def final_cycle(syntax_ok: bool, align_pass: bool, visual_pass: bool | None) -> DiagramCycle:
    code = DrawingCode(source="x = 1", dialect="python-matplotlib", save_path="diagram.png")
    if syntax_ok:
        exec_outcome = ExecutionOutcome(
            status=ExecStatus.OK, duration_ms=5, artifact_path="q/diagram.png"
        )
        image_check = (
            CheckOutcome(verdict=Verdict.PASS if visual_pass else Verdict.FAIL, reason="")
            if visual_pass is not None
            else None
        )
    else:
        exec_outcome = ExecutionOutcome(status=ExecStatus.RUNTIME_ERROR, stderr_tail="err")
        image_check = None
    return DiagramCycle(
        iteration=1,
        code=code,
        exec=exec_outcome,
        code_check=CheckOutcome(verdict=Verdict.PASS if align_pass else Verdict.FAIL, reason=""),
        image_check=image_check,
        syntax_ok=syntax_ok,
    )


def make_record(
    sample_input: InstructionalInput,
    sample_draft,
    with_text: bool = True,
    stage2: tuple[bool, bool, bool | None] | None = (True, True, True),
    terminal: TerminalState = TerminalState.CONVERGED,
    category: Category | None = None,
    metrics: MetricVector | None = None,
) -> RunRecord:
    import dataclasses

    input = sample_input
    if category is not None:
        input = dataclasses.replace(sample_input, category=category)
    trace = (final_cycle(*stage2),) if stage2 is not None else ()
    final_diagram = "q/diagram.png" if terminal is TerminalState.CONVERGED else None
    return RunRecord(
        run_id="q",
        input=input,
        stage1_trace=(),
        final_text=sample_draft if with_text else None,
        stage2_trace=trace,
        final_diagram=final_diagram,
        metrics=metrics or MetricVector.all_false(),
        terminal_state=terminal,
    )


class TestJudgeMetrics:
    def test_converged_with_six_passes_all_true(self, sample_input, sample_draft):
        runtime = scripted_runtime([PASS_REPLY] * 6)
        record = make_record(sample_input, sample_draft)
        vector = judge_metrics(runtime, record)
        assert vector == MetricVector.from_flags(True, True, True, True, True, True, True)
        roles = {call.role for call in runtime.backend.calls}
        assert roles == {AgentRole.METRIC_JUDGE}

    def test_iteration_capped_diagram_fails_itc(self, sample_input, sample_draft):
        runtime = scripted_runtime([PASS_REPLY] * 6)
        record = make_record(
            sample_input,
            sample_draft,
            stage2=(True, True, False),
            terminal=TerminalState.ITERATION_CAP_DIAGRAM,
        )
        vector = judge_metrics(runtime, record)
        assert vector.itc is False
        assert vector.q_visual == 0.0
        assert vector.uo is True

    def test_missing_final_text_all_false(self, sample_input, sample_draft):
        runtime = scripted_runtime([])
        record = make_record(
            sample_input,
            sample_draft,
            with_text=False,
            stage2=None,
            terminal=TerminalState.FAILED,
        )
        assert judge_metrics(runtime, record) == MetricVector.all_false()

    def test_judge_unavailable_marks_false_and_footnotes(self, sample_input, sample_draft):
        class DeadBackend:
            backend_id = "dead"

            def complete(self, request, system_message, model):
                raise requests.ConnectionError("down")

        runtime = AgentRuntime(mode="live", backend=DeadBackend(), retries=0, backoff_s=0.0)
        notes: Counter[str] = Counter()
        record = make_record(sample_input, sample_draft)
        vector = judge_metrics(runtime, record, notes=notes)
        assert vector.q_text == 0.0
        assert vector.itc is True  # trace-derived, not judged
        assert notes["judge_unavailable"] == 6

    def test_twelve_record_fixture_corpus(self, sample_input, sample_draft):
        # Hand-computed oracle: (judge replies, stage2 shape, with_text) per
        # record, and the expected (q_text, itc) pair.
        cases = [
            ([PASS_REPLY] * 6, (True, True, True), True, 1.0, True),
            ([PASS_REPLY] * 6, (True, True, False), True, 1.0, False),
            ([PASS_REPLY] * 6, (True, False, True), True, 1.0, False),
            ([PASS_REPLY] * 6, (False, False, None), True, 1.0, False),
            ([FAIL_REPLY] * 6, (True, True, True), True, 0.0, True),
            ([FAIL_REPLY] + [PASS_REPLY] * 5, (True, True, True), True, 5 / 6, True),
            ([PASS_REPLY] * 3 + [FAIL_REPLY] * 3, (True, True, True), True, 0.5, True),
            (["huh?"] * 6, (True, True, True), True, 0.0, True),
            ([PASS_REPLY, FAIL_REPLY] * 3, (True, True, True), True, 0.5, True),
            ([], None, False, 0.0, False),
            ([PASS_REPLY] * 6, None, True, 1.0, False),
            ([PASS_REPLY] * 5 + [FAIL_REPLY], (False, True, None), True, 5 / 6, False),
        ]
        assert len(cases) == 12
        for replies, stage2, with_text, expected_q, expected_itc in cases:
            terminal = (
                TerminalState.CONVERGED
                if stage2 == (True, True, True)
                else TerminalState.ITERATION_CAP_DIAGRAM
            )
            if not with_text:
                terminal = TerminalState.FAILED
            record = make_record(
                sample_input, sample_draft, with_text=with_text, stage2=stage2, terminal=terminal
            )
            vector = judge_metrics(scripted_runtime(list(replies)), record)
            assert vector.q_text == pytest.approx(expected_q)
            assert vector.itc == expected_itc


class TestRecordItc:
    def test_requires_stage2_trace(self, sample_input, sample_draft):
        record = make_record(
            sample_input, sample_draft, stage2=None, terminal=TerminalState.ITERATION_CAP_TEXT
        )
        assert record_itc(record) is False

    def test_full_pass_final_cycle(self, sample_input, sample_draft):
        record = make_record(sample_input, sample_draft)
        assert record_itc(record) is True


class TestAggregate:
    def test_gpt4o_row_avg_text(self):
        row = AggregateRow.from_percentages("gpt-4o", *GPT4O_ROW, itc=13.20, n=390)
        assert abs(row.avg_text - GPT4O_AVG) <= 0.005

    def test_nano_banana_row_avg_text(self):
        row = AggregateRow.from_percentages("nano-banana", *NANO_BANANA_ROW, itc=15.90, n=390)
        assert abs(row.avg_text - NANO_BANANA_AVG) <= 0.005

    def test_recomputation_identity(self):
        for values, expected in ((GPT4O_ROW, GPT4O_AVG), (NANO_BANANA_ROW, NANO_BANANA_AVG)):
            row = AggregateRow.from_percentages("x", *values)
            assert abs(row.avg_text - sum(values) / 6) < 1e-12
            assert abs(round_half_up(row.avg_text) - expected) <= 0.005

    def test_all_true_vectors_give_100(self):
        vectors = [MetricVector.from_flags(*([True] * 7)) for _ in range(7)]
        row = aggregate(vectors, "perfect")
        for name in ("uo", "lr", "qf", "aa", "ca", "idq", "itc"):
            assert getattr(row, name) == 100.0
        assert row.avg_text == 100.0
        assert row.n == 7

    def test_permutation_invariance(self):
        rng = random.Random(3)
        vectors = [
            MetricVector.from_flags(*(rng.random() < 0.5 for _ in range(7))) for _ in range(20)
        ]
        row = aggregate(vectors, "x")
        shuffled = vectors.copy()
        rng.shuffle(shuffled)
        assert aggregate(shuffled, "x") == row

    def test_empty_rejected(self):
        with pytest.raises(ContractViolation):
            aggregate([], "x")

    def test_rounding_half_up(self):
        assert round_half_up(57.011666) == 57.01
        assert round_half_up(94.775) == 94.78
        assert round_half_up(0.005) == 0.01


class TestCategorize:
    def test_hand_computed_mixes(self, sample_input, sample_draft):
        # PlaneGeometry 2/3 pass, Spatial 0/1, Function 1/1, Analytic 1/2.
        spec = [
            (Category.PLANE_GEOMETRY, True),
            (Category.PLANE_GEOMETRY, True),
            (Category.PLANE_GEOMETRY, False),
            (Category.SPATIAL_GEOMETRY, False),
            (Category.FUNCTION_IMAGES, True),
            (Category.ANALYTIC_GEOMETRY, True),
            (Category.ANALYTIC_GEOMETRY, False),
        ]
        labeled = []
        for category, passing in spec:
            stage2 = (True, True, True) if passing else (True, True, False)
            terminal = TerminalState.CONVERGED if passing else TerminalState.ITERATION_CAP_DIAGRAM
            record = make_record(
                sample_input, sample_draft, stage2=stage2, terminal=terminal, category=category
            )
            vector = MetricVector.from_flags(True, True, True, True, True, True, passing)
            labeled.append(("run", record, vector))
        rows = categorize(labeled)
        assert len(rows) == 1
        values = rows[0].values
        assert values[Category.PLANE_GEOMETRY] == pytest.approx(100 * 2 / 3)
        assert values[Category.SPATIAL_GEOMETRY] == 0.0
        assert values[Category.FUNCTION_IMAGES] == 100.0
        assert values[Category.ANALYTIC_GEOMETRY] == 50.0
        assert values[Category.MIXED_KNOWLEDGE] is None

    def test_single_category_all_pass(self, sample_input, sample_draft):
        record = make_record(sample_input, sample_draft, category=Category.MIXED_KNOWLEDGE)
        vector = MetricVector.from_flags(True, True, True, True, True, True, True)
        rows = categorize([("solo", record, vector)])
        values = rows[0].values
        assert values[Category.MIXED_KNOWLEDGE] == 100.0
        assert all(
            values[c] is None for c in Category if c is not Category.MIXED_KNOWLEDGE
        )

    def test_empty_category_renders_na(self, sample_input, sample_draft):
        record = make_record(sample_input, sample_draft, category=Category.PLANE_GEOMETRY)
        vector = MetricVector.from_flags(True, True, True, True, True, True, True)
        report = build_report([], categorize([("r", record, vector)]))
        markdown = render_markdown(report)
        assert "n/a" in markdown


class TestSweep:
    def test_monotone_groups_give_non_decreasing_series(self):
        labeled = []
        for cap, pass_rate in ((1, 0.2), (3, 0.6), (5, 1.0)):
            for index in range(10):
                passing = index < pass_rate * 10
                labeled.append(
                    (cap, MetricVector.from_flags(*([passing] * 7)))
                )
        points = sweep_reflection(labeled)
        assert [p.i_max for p in points] == [1, 3, 5]
        assert points[0].avg_text <= points[1].avg_text <= points[2].avg_text
        assert points[0].itc <= points[1].itc <= points[2].itc

    def test_single_cap_single_point(self):
        points = sweep_reflection([(5, MetricVector.from_flags(*([True] * 7)))])
        assert len(points) == 1
        assert points[0].i_max == 5

    def test_failed_records_count_in_denominator(self):
        labeled = [
            (2, MetricVector.from_flags(*([True] * 7))),
            (2, MetricVector.all_false()),
        ]
        points = sweep_reflection(labeled)
        assert points[0].avg_text == 50.0
        assert points[0].itc == 50.0


class TestRendering:
    def test_csv_mirrors_table_column_order(self):
        row = AggregateRow.from_percentages("model", *GPT4O_ROW, itc=13.20, n=390)
        csv_text = render_csv([row])
        header = csv_text.splitlines()[0]
        assert header == "Label,UO,LR,QF,AA,CA,IDQ,Avg-Text,ITC,N"
        body = csv_text.splitlines()[1]
        assert body.startswith("model,32.47,58.67,63.47,56.83,67.16,63.47,57.01,13.2")

    def test_report_shape(self):
        row = aggregate([MetricVector.from_flags(*([True] * 7))], "x")
        report = build_report([row], footnotes={"judge_unavailable": 2})
        assert set(report) == {"rows", "categories", "sweep", "footnotes"}
        assert report["rows"][0]["avg_text"] == 100.0
        assert report["footnotes"]["judge_unavailable"] == 2

    def test_markdown_has_all_columns(self):
        row = aggregate([MetricVector.from_flags(*([True] * 7))], "x")
        markdown = render_markdown(build_report([row]))
        for column in (*METRIC_COLUMNS, "Avg-Text", "ITC"):
            assert column in markdown
