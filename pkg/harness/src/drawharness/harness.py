"""Run one generated drawing program under a timeout and output contract.

The child runs in a fresh temporary directory with its own process group.
Whatever happens to the child, the harness prints exactly one JSON result
object to stdout and exits 0; a nonzero exit means the harness itself
broke, so callers can tell transport faults from failing code. Temp-dir
confinement plus the wall-clock kill is the enforced boundary; there is no
import allow-listing (the threat model is accidental misbehavior, not
adversarial code).
"""

from __future__ import annotations

import argparse
import json
import os
import shutil
import signal
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

STDERR_TAIL_LIMIT = 2000

STATUS_OK = "ok"
STATUS_RUNTIME_ERROR = "runtime_error"
STATUS_TIMEOUT = "timeout"
STATUS_NO_ARTIFACT = "no_artifact"


@dataclass
class HarnessResult:
    status: str
    stderr_tail: str
    duration_ms: int
    artifact_path: str | None
    artifact_bytes: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "status": self.status,
                "stderr_tail": self.stderr_tail,
                "duration_ms": self.duration_ms,
                "artifact_path": self.artifact_path,
                "artifact_bytes": self.artifact_bytes,
            },
            sort_keys=True,
        )


class HarnessFault(Exception):
    """The harness itself could not run the program (caller maps to Failed)."""


def _kill_process_group(proc: subprocess.Popen) -> None:
    # SIGKILL the whole group so grandchildren cannot survive either.
    try:
        os.killpg(proc.pid, signal.SIGKILL)
    except (ProcessLookupError, PermissionError):
        pass
    try:
        proc.wait(timeout=10)
    except subprocess.TimeoutExpired:
        pass


def run_harness(code_file: str | Path, out_path: str | Path, timeout_s: int) -> HarnessResult:
    """Execute ``code_file`` in a child process and report what happened.

    Success requires both a clean exit and a nonempty artifact at
    ``out_path``. The child's working directory is a fresh temp dir that is
    deleted afterwards, so only the requested artifact survives.
    """
    code_file = Path(code_file).resolve()
    out_path = Path(out_path).resolve()
    if not code_file.is_file():
        raise HarnessFault(f"code file not readable: {code_file}")
    if not out_path.parent.is_dir():
        raise HarnessFault(f"output directory missing: {out_path.parent}")
    if timeout_s < 1:
        raise HarnessFault(f"timeout must be >= 1 second, got {timeout_s}")

    workdir = Path(tempfile.mkdtemp(prefix="drawharness-"))
    env = os.environ.copy()
    env["MPLBACKEND"] = "Agg"
    env["MPLCONFIGDIR"] = str(workdir / ".mpl")

    started = time.monotonic()
    timed_out = False
    try:
        proc = subprocess.Popen(
            [sys.executable, "-B", str(code_file)],
            cwd=workdir,
            env=env,
            stdin=subprocess.DEVNULL,
            stdout=subprocess.DEVNULL,
            stderr=subprocess.PIPE,
            text=True,
            start_new_session=True,
        )
        try:
            _, stderr = proc.communicate(timeout=timeout_s)
        except subprocess.TimeoutExpired:
            timed_out = True
            _kill_process_group(proc)
            stderr = proc.stderr.read() if proc.stderr else ""
        finally:
            _kill_process_group(proc)
        duration_ms = int((time.monotonic() - started) * 1000)
        stderr_tail = (stderr or "")[-STDERR_TAIL_LIMIT:]

        if timed_out:
            return HarnessResult(
                status=STATUS_TIMEOUT,
                stderr_tail=stderr_tail,
                duration_ms=max(duration_ms, timeout_s * 1000),
                artifact_path=None,
                artifact_bytes=0,
            )
        if proc.returncode != 0:
            return HarnessResult(
                status=STATUS_RUNTIME_ERROR,
                stderr_tail=stderr_tail,
                duration_ms=duration_ms,
                artifact_path=None,
                artifact_bytes=0,
            )
        if not out_path.is_file() or out_path.stat().st_size == 0:
            return HarnessResult(
                status=STATUS_NO_ARTIFACT,
                stderr_tail=stderr_tail,
                duration_ms=duration_ms,
                artifact_path=None,
                artifact_bytes=0,
            )
        return HarnessResult(
            status=STATUS_OK,
            stderr_tail=stderr_tail,
            duration_ms=duration_ms,
            artifact_path=str(out_path),
            artifact_bytes=out_path.stat().st_size,
        )
    except OSError as exc:
        raise HarnessFault(f"failed to launch child: {exc}") from exc
    finally:
        shutil.rmtree(workdir, ignore_errors=True)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="harness",
        description="Run one drawing-code program with a timeout and an output contract.",
    )
    parser.add_argument("code_file", help="path of the program to execute")
    parser.add_argument("--out", required=True, help="where the program must save its image")
    parser.add_argument("--timeout", type=int, default=30, help="wall-clock limit in seconds")
    args = parser.parse_args(argv)

    try:
        result = run_harness(args.code_file, args.out, args.timeout)
    except HarnessFault as exc:
        print(f"harness fault: {exc}", file=sys.stderr)
        return 2
    # The single line below is the whole stdout protocol.
    print(result.to_json())
    return 0


if __name__ == "__main__":
    sys.exit(main())
