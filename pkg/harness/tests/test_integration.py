"""The orchestrator's executor port driving the real harness CLI."""

from __future__ import annotations

import os
import sys
import time
from pathlib import Path

import pytest

pytest.importorskip("magma")

from magma.executors import HarnessExecutor
from magma.model import DrawingCode, ExecStatus

HARNESS_SRC = Path(__file__).resolve().parents[1] / "src"

TRIANGLE_SOURCE = """import matplotlib.pyplot as plt
plt.plot([0,3,0,0],[0,0,4,0])  # draw right triangle
plt.text(0,0,'A'); plt.text(3,0,'B'); plt.text(0,4,'C')
plt.text(1.5,-0.4,'3 cm'); plt.text(-0.6,2,'4 cm')
plt.text(1.6,1.8,'5 cm'); plt.axis('equal')
plt.savefig('diagram.png')
"""


@pytest.fixture(autouse=True)
def harness_on_pythonpath(monkeypatch):
    existing = os.environ.get("PYTHONPATH", "")
    merged = str(HARNESS_SRC) + (os.pathsep + existing if existing else "")
    monkeypatch.setenv("PYTHONPATH", merged)


def harness_command() -> str:
    return f"{sys.executable} -m drawharness"


class TestHarnessExecutor:
    def test_triangle_through_the_port(self, tmp_path):
        executor = HarnessExecutor(harness_command())
        code = DrawingCode(
            source=TRIANGLE_SOURCE, dialect="python-matplotlib", save_path="diagram.png"
        )
        outcome = executor.execute(code, tmp_path / "q001", timeout_s=60)
        assert outcome.status is ExecStatus.OK
        assert outcome.artifact_path is not None
        assert Path(outcome.artifact_path).stat().st_size > 0

    def test_runtime_error_surfaces_as_code_failure(self, tmp_path):
        executor = HarnessExecutor(harness_command())
        code = DrawingCode(
            source="raise RuntimeError('bad drawing')",
            dialect="python-matplotlib",
            save_path="diagram.png",
        )
        outcome = executor.execute(code, tmp_path / "q001", timeout_s=30)
        assert outcome.status is ExecStatus.RUNTIME_ERROR
        assert "bad drawing" in outcome.stderr_tail

    def test_timeout_is_enforced(self, tmp_path):
        executor = HarnessExecutor(harness_command())
        code = DrawingCode(
            source="import time\nwhile True:\n    time.sleep(0.05)",
            dialect="python-matplotlib",
            save_path="diagram.png",
        )
        started = time.monotonic()
        outcome = executor.execute(code, tmp_path / "q001", timeout_s=2)
        assert outcome.status is ExecStatus.TIMEOUT
        assert time.monotonic() - started < 30
