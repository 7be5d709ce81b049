"""Execution port for generated drawing code.

Four implementations share one contract: run a DrawingCode body and report
an ExecutionOutcome whose artifact lands at ``workdir / code.save_path``.

* StubExecutor — in-process, returns scripted outcomes; keeps the whole
  orchestration test suite runnable with no sandbox present.
* HarnessExecutor — shells out to the external sandbox harness command.
* RecordingExecutor / ReplayExecutor — mirror the agent cassette so a run
  can be replayed offline, execution outcomes included.
"""

from __future__ import annotations

import base64
import hashlib
import json
import shlex
import subprocess
import threading
from dataclasses import dataclass
from pathlib import Path

from .errors import ContractViolation, SandboxUnavailable, SchemaError
from .model import STDERR_TAIL_LIMIT, DrawingCode, ExecStatus, ExecutionOutcome
from .runtime import EXECUTOR_ROLE, Cassette, CassetteRecord, fingerprint


class Executor:
    """Runs one drawing program and reports what happened."""

    def execute(self, code: DrawingCode, workdir: Path, timeout_s: int) -> ExecutionOutcome:
        raise NotImplementedError


def exec_fingerprint(code: DrawingCode) -> str:
    """Cassette key for an execution: depends only on source and save path."""
    digest = hashlib.sha256(code.source.encode("utf-8")).hexdigest()
    return fingerprint(EXECUTOR_ROLE, f"{digest}\n{code.save_path}")


@dataclass
class StubOutcome:
    """One scripted result for the stub executor."""

    status: ExecStatus
    stderr_tail: str = ""
    duration_ms: int = 5
    artifact_bytes: bytes | None = None


# Placeholder artifact written by the unscripted stub: a 1x1 white PNG.
PLACEHOLDER_PNG = base64.b64decode(
    "iVBORw0KGgoAAAANSUhEUgAAAAEAAAABCAYAAAAfFcSJAAAADUlEQVR4nGP4"
    "z8DwHwAFAAH/q842iQAAAABJRU5ErkJggg=="
)


class StubExecutor(Executor):
    """Replays a scripted list of outcomes, writing canned artifacts for Ok.

    With no script, every execution reports Ok with a placeholder artifact;
    that keeps smoke runs working when no sandbox harness is configured.
    """

    def __init__(self, script: list[StubOutcome] | None = None):
        self.script = None if script is None else list(script)
        self._cursor = 0

    def execute(self, code: DrawingCode, workdir: Path, timeout_s: int) -> ExecutionOutcome:
        if self.script is None:
            planned = StubOutcome(status=ExecStatus.OK, artifact_bytes=PLACEHOLDER_PNG)
        else:
            if self._cursor >= len(self.script):
                raise SandboxUnavailable("stub executor script exhausted")
            planned = self.script[self._cursor]
            self._cursor += 1
        if planned.status is ExecStatus.OK:
            target = workdir / code.save_path
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_bytes(planned.artifact_bytes or b"stub-artifact")
            return ExecutionOutcome(
                status=ExecStatus.OK,
                stderr_tail=planned.stderr_tail,
                duration_ms=planned.duration_ms,
                artifact_path=str(target),
            )
        return ExecutionOutcome(
            status=planned.status,
            stderr_tail=planned.stderr_tail[:STDERR_TAIL_LIMIT],
            duration_ms=planned.duration_ms,
            artifact_path=None,
        )


_HARNESS_STATUS = {
    "ok": ExecStatus.OK,
    "runtime_error": ExecStatus.RUNTIME_ERROR,
    "timeout": ExecStatus.TIMEOUT,
    "no_artifact": ExecStatus.NO_ARTIFACT,
}


class HarnessExecutor(Executor):
    """Runs code through the external sandbox harness command.

    The command (e.g. from MAGMA_SANDBOX_CMD) is invoked as
    ``<cmd> <code_file> --out <abs_out> --timeout <seconds>`` and must print
    exactly one JSON result object to stdout. A nonzero harness exit is a
    sandbox fault, distinct from the code under test failing.
    """

    def __init__(self, command: str, semaphore: threading.Semaphore | None = None):
        if not command.strip():
            raise ContractViolation("harness command must be nonempty")
        self.command = shlex.split(command)
        self.semaphore = semaphore

    def execute(self, code: DrawingCode, workdir: Path, timeout_s: int) -> ExecutionOutcome:
        workdir.mkdir(parents=True, exist_ok=True)
        out_path = (workdir / code.save_path).resolve()
        staged = workdir / "code.py"
        # The source carries the relative save target; the child runs in a
        # harness-owned temp dir, so point it at the absolute artifact path.
        staged.write_text(
            code.source.replace(code.save_path, str(out_path)), encoding="utf-8"
        )

        argv = self.command + [str(staged), "--out", str(out_path), "--timeout", str(timeout_s)]
        if self.semaphore is not None:
            self.semaphore.acquire()
        try:
            proc = subprocess.run(
                argv,
                capture_output=True,
                text=True,
                timeout=timeout_s + 30,
            )
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise SandboxUnavailable(f"harness invocation failed: {exc}") from exc
        finally:
            if self.semaphore is not None:
                self.semaphore.release()

        if proc.returncode != 0:
            raise SandboxUnavailable(
                f"harness exited {proc.returncode}: {proc.stderr.strip()[:500]}"
            )
        try:
            payload = json.loads(proc.stdout)
        except json.JSONDecodeError as exc:
            raise SandboxUnavailable(f"harness emitted invalid JSON: {exc}") from exc

        status = _HARNESS_STATUS.get(payload.get("status", ""))
        if status is None:
            raise SandboxUnavailable(f"harness reported unknown status {payload.get('status')!r}")
        return ExecutionOutcome(
            status=status,
            stderr_tail=str(payload.get("stderr_tail", ""))[:STDERR_TAIL_LIMIT],
            duration_ms=int(payload.get("duration_ms", 0)),
            artifact_path=str(out_path) if status is ExecStatus.OK else None,
        )


class RecordingExecutor(Executor):
    """Delegates to an inner executor and logs outcomes to the cassette."""

    def __init__(self, inner: Executor, cassette: Cassette):
        self.inner = inner
        self.cassette = cassette

    def execute(self, code: DrawingCode, workdir: Path, timeout_s: int) -> ExecutionOutcome:
        outcome = self.inner.execute(code, workdir, timeout_s)
        artifact_b64 = None
        if outcome.status is ExecStatus.OK and outcome.artifact_path:
            artifact_b64 = base64.b64encode(Path(outcome.artifact_path).read_bytes()).decode(
                "ascii"
            )
        payload = {
            "status": outcome.status.value,
            "stderr_tail": outcome.stderr_tail,
            "duration_ms": outcome.duration_ms,
            "artifact_b64": artifact_b64,
        }
        self.cassette.append(
            CassetteRecord(
                fingerprint=exec_fingerprint(code),
                role=EXECUTOR_ROLE,
                prompt_sha=hashlib.sha256(code.source.encode("utf-8")).hexdigest(),
                response=json.dumps(payload, sort_keys=True),
            )
        )
        return outcome


class ReplayExecutor(Executor):
    """Resolves executions from recorded outcomes; writes back artifacts."""

    def __init__(self, cassette: Cassette):
        self.cassette = cassette

    def execute(self, code: DrawingCode, workdir: Path, timeout_s: int) -> ExecutionOutcome:
        response = self.cassette.replay(exec_fingerprint(code))
        try:
            payload = json.loads(response)
            status = ExecStatus(payload["status"])
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            raise SchemaError(f"malformed execution record: {exc}") from exc

        artifact_path = None
        if status is ExecStatus.OK:
            target = workdir / code.save_path
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_bytes(base64.b64decode(payload.get("artifact_b64") or ""))
            artifact_path = str(target)
        return ExecutionOutcome(
            status=status,
            stderr_tail=payload.get("stderr_tail", ""),
            duration_ms=int(payload.get("duration_ms", 0)),
            artifact_path=artifact_path,
        )
