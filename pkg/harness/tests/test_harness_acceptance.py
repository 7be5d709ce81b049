"""The harness-contract acceptance criterion as one timed scenario."""

from __future__ import annotations

import json
import os
import time
from contextlib import contextmanager

from test_harness import LOOPING_CODE, TRIANGLE_CODE, run_harness_cli, single_json_object


@contextmanager
def criterion(name: str):
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE FAIL: {name}")
        raise
    print(f"ACCEPTANCE PASS: {name}")


def test_harness_contract(tmp_path):
    with criterion(
        "Harness contract: triangle ok, loop killed at timeout, no-file reported, "
        "single-JSON stdout, < 40 s"
    ):
        started = time.perf_counter()

        out_path = tmp_path / "diagram.png"
        triangle = tmp_path / "triangle.py"
        triangle.write_text(TRIANGLE_CODE.format(out=out_path), encoding="utf-8")
        ok_proc = run_harness_cli(triangle, out_path, timeout=30)
        ok_result = single_json_object(ok_proc.stdout)
        assert ok_proc.returncode == 0
        assert ok_result["status"] == "ok"
        assert ok_result["artifact_bytes"] > 0

        pidfile = tmp_path / "child.pid"
        loop = tmp_path / "loop.py"
        loop.write_text(LOOPING_CODE.format(pidfile=str(pidfile)), encoding="utf-8")
        loop_out = tmp_path / "never.png"
        loop_proc = run_harness_cli(loop, loop_out, timeout=2)
        loop_result = single_json_object(loop_proc.stdout)
        assert loop_proc.returncode == 0
        assert loop_result["status"] == "timeout"
        assert loop_result["duration_ms"] >= 2000
        child_pid = int(pidfile.read_text())
        time.sleep(0.2)
        try:
            os.kill(child_pid, 0)
            survived = True
        except ProcessLookupError:
            survived = False
        assert not survived

        quiet = tmp_path / "quiet.py"
        quiet.write_text("value = 2 + 2\n", encoding="utf-8")
        quiet_proc = run_harness_cli(quiet, tmp_path / "missing.png", timeout=10)
        quiet_result = single_json_object(quiet_proc.stdout)
        assert quiet_proc.returncode == 0
        assert quiet_result["status"] == "no_artifact"

        for proc in (ok_proc, loop_proc, quiet_proc):
            payload = [line for line in proc.stdout.splitlines() if line.strip()]
            assert len(payload) == 1
            json.loads(payload[0])

        assert time.perf_counter() - started < 40.0
