"""Guards that the bundled fixtures stay in sync with the pipeline."""

from __future__ import annotations

from magma.model import StageTerminal, TerminalState
from magma.runstore import RunStore
from magma.runtime import Cassette
from magma.testing import (
    build_pythagorean_cassette,
    build_pythagorean_run,
    bundled_cassette_path,
)


def test_bundled_cassette_is_current(tmp_path):
    """Regenerating the fixture must reproduce the checked-in file.

    If this fails after an intentional prompt or fixture change, refresh
    the data file with ``python3 -m magma.testing``.
    """
    fresh = tmp_path / "fresh.jsonl"
    build_pythagorean_cassette(fresh)
    assert fresh.read_bytes() == bundled_cassette_path().read_bytes()


def test_fixture_run_shape(tmp_path):
    store = RunStore(tmp_path / "run")
    record = build_pythagorean_run(store, Cassette(mode="record"))
    assert record.terminal_state is TerminalState.CONVERGED
    assert len(record.stage1_trace) == 2
    assert len(record.stage2_trace) == 2
    assert record.final_text is not None
    assert record.final_text.answer == "5 cm"
    # First round fails exactly one check, the analysis one.
    first_report = record.stage1_trace[0].report
    failing = [c.check_id.value for c in first_report.checks if c.verdict.value == "Fail"]
    assert failing == ["AA"]
    # First diagram cycle breaks at runtime; second passes everything.
    assert record.stage2_trace[0].syntax_ok is False
    assert record.stage2_trace[1].full_pass is True
