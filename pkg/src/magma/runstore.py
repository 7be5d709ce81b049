"""Run-directory persistence: config snapshot, event log, question files.

Layout under the run root:

    config.json            effective config snapshot (secrets redacted)
    events.jsonl           append-only event log, single writer
    <question id>/         one subdir per question, owned by one worker
        question.json      final draft + metrics + artifact ref + terminals
        trace.jsonl        stage-1 steps and stage-2 cycles
        cassette.jsonl     recorded agent exchanges and execution outcomes
        diagram.<ext>      rendered artifact, when produced

Timestamps live only in the ``ts`` sidecar field of each event line and
are excluded from replay comparison.
"""

from __future__ import annotations

import json
import threading
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from .errors import ContractViolation
from .model import PipelineConfig, RunRecord


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


class RunStore:
    """Owns one run directory; event appends are serialized."""

    def __init__(self, root: str | Path, create: bool = True):
        # Resolved so artifact paths relativize identically regardless of CWD.
        self.root = Path(root).resolve()
        if create:
            self.root.mkdir(parents=True, exist_ok=True)
        elif not self.root.is_dir():
            raise ContractViolation(f"run directory {self.root} does not exist")
        self._lock = threading.Lock()
        self._seq = self._next_seq()

    # Event log -----------------------------------------------------------

    @property
    def events_path(self) -> Path:
        return self.root / "events.jsonl"

    def _next_seq(self) -> int:
        if not self.events_path.exists():
            return 0
        with self.events_path.open(encoding="utf-8") as handle:
            return sum(1 for line in handle if line.strip())

    def emit(self, event: str, data: dict[str, Any]) -> None:
        with self._lock:
            line = json.dumps(
                {"seq": self._seq, "event": event, "data": data, "ts": _utc_now()},
                sort_keys=True,
                ensure_ascii=False,
            )
            with self.events_path.open("a", encoding="utf-8") as handle:
                handle.write(line + "\n")
            self._seq += 1

    @staticmethod
    def normalized_events(
        path: str | Path, question_id: str | None = None, strip_seq: bool = False
    ) -> bytes:
        """Event log bytes with the timestamp sidecar stripped.

        ``question_id`` filters to one question's events; ``strip_seq``
        additionally drops sequence numbers so per-question streams from
        concurrently written logs stay comparable.
        """
        lines = []
        with Path(path).open(encoding="utf-8") as handle:
            for line in handle:
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                if question_id is not None:
                    if record.get("data", {}).get("question_id") != question_id:
                        continue
                record.pop("ts", None)
                if strip_seq:
                    record.pop("seq", None)
                lines.append(json.dumps(record, sort_keys=True, ensure_ascii=False))
        return ("\n".join(lines) + "\n").encode("utf-8")

    # Config snapshot -------------------------------------------------------

    @property
    def config_path(self) -> Path:
        return self.root / "config.json"

    def write_config_snapshot(self, config: PipelineConfig) -> None:
        """Persist the effective config (API keys redacted) before any agent call."""
        self.config_path.write_text(
            json.dumps(config.to_dict(redact=True), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )

    def load_config_snapshot(self) -> PipelineConfig:
        return PipelineConfig.from_dict(json.loads(self.config_path.read_text(encoding="utf-8")))

    # Question files --------------------------------------------------------

    def question_dir(self, question_id: str) -> Path:
        path = self.root / question_id
        path.mkdir(parents=True, exist_ok=True)
        return path

    def question_ids(self) -> list[str]:
        return sorted(
            child.name
            for child in self.root.iterdir()
            if child.is_dir() and (child / "question.json").exists()
        )

    def cassette_path(self, question_id: str) -> Path:
        return self.question_dir(question_id) / "cassette.jsonl"

    def relativize(self, path: str | None) -> str | None:
        if path is None:
            return None
        candidate = Path(path)
        try:
            return str(candidate.relative_to(self.root))
        except ValueError:
            return str(candidate)

    def write_question(self, question_id: str, record: RunRecord, artifact_format: str) -> None:
        data = record.to_dict()
        data["final_diagram"] = self.relativize(record.final_diagram)
        for cycle in data["stage2_trace"]:
            cycle["exec"]["artifact_path"] = self.relativize(cycle["exec"]["artifact_path"])

        question = {
            "run_id": record.run_id,
            "input": data["input"],
            "final_text": data["final_text"],
            "metrics": data["metrics"],
            "artifact": data["final_diagram"],
            "artifact_format": artifact_format,
            "terminal_state": data["terminal_state"],
            "stage1_iterations": len(record.stage1_trace),
            "stage2_cycles": len(record.stage2_trace),
        }
        directory = self.question_dir(question_id)
        (directory / "question.json").write_text(
            json.dumps(question, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )
        with (directory / "trace.jsonl").open("w", encoding="utf-8") as handle:
            for step in data["stage1_trace"]:
                handle.write(json.dumps({"stage1": step}, sort_keys=True, ensure_ascii=False) + "\n")
            for cycle in data["stage2_trace"]:
                handle.write(json.dumps({"stage2": cycle}, sort_keys=True, ensure_ascii=False) + "\n")

    def question_complete(self, question_id: str) -> bool:
        """A question is resumable-complete once its question.json parses."""
        path = self.root / question_id / "question.json"
        if not path.exists():
            return False
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError:
            return False
        return "terminal_state" in data

    def load_question(self, question_id: str) -> dict[str, Any]:
        path = self.root / question_id / "question.json"
        return json.loads(path.read_text(encoding="utf-8"))
