"""Harness contract: status mapping, kill guarantee, stdout protocol."""

from __future__ import annotations

import json
import os
import subprocess
import sys
import time
from pathlib import Path

import pytest

HARNESS_SRC = Path(__file__).resolve().parents[1] / "src"

# The triangle listing the pipeline's code generator is expected to emit,
# with its save target already rewritten by the caller.
TRIANGLE_CODE = """import matplotlib.pyplot as plt
plt.plot([0,3,0,0],[0,0,4,0])  # draw right triangle
plt.text(0,0,'A'); plt.text(3,0,'B'); plt.text(0,4,'C')
plt.text(1.5,-0.4,'3 cm'); plt.text(-0.6,2,'4 cm')
plt.text(1.6,1.8,'5 cm'); plt.axis('equal')
plt.savefig('{out}')
"""

LOOPING_CODE = """import os, time
with open({pidfile!r}, 'w') as handle:
    handle.write(str(os.getpid()))
while True:
    time.sleep(0.05)
"""

CLEAN_EXIT_CODE = "x = 1 + 1\n"


def run_harness_cli(code_file: Path, out_path: Path, timeout: int) -> subprocess.CompletedProcess:
    env = os.environ.copy()
    env["PYTHONPATH"] = str(HARNESS_SRC) + os.pathsep + env.get("PYTHONPATH", "")
    return subprocess.run(
        [
            sys.executable,
            "-m",
            "drawharness",
            str(code_file),
            "--out",
            str(out_path),
            "--timeout",
            str(timeout),
        ],
        capture_output=True,
        text=True,
        env=env,
        timeout=timeout + 60,
    )


def single_json_object(stdout: str) -> dict:
    lines = [line for line in stdout.splitlines() if line.strip()]
    assert len(lines) == 1, f"stdout must be exactly one JSON object, got: {stdout!r}"
    return json.loads(lines[0])


class TestHarnessContract:
    def test_triangle_listing_renders_ok(self, tmp_path):
        out_path = tmp_path / "diagram.png"
        code_file = tmp_path / "triangle.py"
        code_file.write_text(TRIANGLE_CODE.format(out=out_path), encoding="utf-8")

        proc = run_harness_cli(code_file, out_path, timeout=30)
        assert proc.returncode == 0, proc.stderr
        result = single_json_object(proc.stdout)
        assert result["status"] == "ok"
        assert result["artifact_bytes"] > 0
        assert result["artifact_path"] == str(out_path)
        assert out_path.stat().st_size == result["artifact_bytes"]

    def test_unbounded_loop_killed_at_timeout(self, tmp_path):
        out_path = tmp_path / "diagram.png"
        pidfile = tmp_path / "child.pid"
        code_file = tmp_path / "loop.py"
        code_file.write_text(LOOPING_CODE.format(pidfile=str(pidfile)), encoding="utf-8")

        proc = run_harness_cli(code_file, out_path, timeout=2)
        assert proc.returncode == 0, proc.stderr
        result = single_json_object(proc.stdout)
        assert result["status"] == "timeout"
        assert result["duration_ms"] >= 2000

        # Kill guarantee: the child process is gone after harness return.
        child_pid = int(pidfile.read_text())
        time.sleep(0.2)
        alive = True
        try:
            os.kill(child_pid, 0)
        except ProcessLookupError:
            alive = False
        assert not alive, f"child {child_pid} survived the harness"

    def test_clean_exit_without_artifact(self, tmp_path):
        out_path = tmp_path / "diagram.png"
        code_file = tmp_path / "noop.py"
        code_file.write_text(CLEAN_EXIT_CODE, encoding="utf-8")

        proc = run_harness_cli(code_file, out_path, timeout=10)
        assert proc.returncode == 0, proc.stderr
        result = single_json_object(proc.stdout)
        assert result["status"] == "no_artifact"
        assert result["artifact_path"] is None

    def test_runtime_error_reported_with_stderr_tail(self, tmp_path):
        out_path = tmp_path / "diagram.png"
        code_file = tmp_path / "broken.py"
        code_file.write_text("raise ValueError('kaboom')\n", encoding="utf-8")

        proc = run_harness_cli(code_file, out_path, timeout=10)
        assert proc.returncode == 0
        result = single_json_object(proc.stdout)
        assert result["status"] == "runtime_error"
        assert "kaboom" in result["stderr_tail"]
        assert len(result["stderr_tail"]) <= 2000

    def test_missing_code_file_is_harness_fault(self, tmp_path):
        proc = run_harness_cli(tmp_path / "absent.py", tmp_path / "out.png", timeout=5)
        assert proc.returncode != 0
        assert proc.stdout.strip() == ""
        assert "not readable" in proc.stderr

    def test_child_stdout_never_pollutes_protocol(self, tmp_path):
        out_path = tmp_path / "diagram.png"
        code_file = tmp_path / "noisy.py"
        code_file.write_text(
            f"print('chatter')\nopen({str(out_path)!r}, 'wb').write(b'data')\n",
            encoding="utf-8",
        )
        proc = run_harness_cli(code_file, out_path, timeout=10)
        result = single_json_object(proc.stdout)
        assert result["status"] == "ok"


class TestInProcessApi:
    def test_run_harness_matches_cli_semantics(self, tmp_path):
        sys.path.insert(0, str(HARNESS_SRC))
        try:
            from drawharness import run_harness

            out_path = tmp_path / "art.png"
            code_file = tmp_path / "write.py"
            code_file.write_text(
                f"open({str(out_path)!r}, 'wb').write(b'abc')\n", encoding="utf-8"
            )
            result = run_harness(code_file, out_path, timeout_s=10)
            assert result.status == "ok"
            assert result.artifact_bytes == 3
        finally:
            sys.path.remove(str(HARNESS_SRC))

    def test_short_timeout_rejected(self, tmp_path):
        sys.path.insert(0, str(HARNESS_SRC))
        try:
            from drawharness import run_harness
            from drawharness.harness import HarnessFault

            code_file = tmp_path / "x.py"
            code_file.write_text("pass\n", encoding="utf-8")
            with pytest.raises(HarnessFault):
                run_harness(code_file, tmp_path / "o.png", timeout_s=0)
        finally:
            sys.path.remove(str(HARNESS_SRC))
