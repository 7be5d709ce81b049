"""Uniform interface to model backends with deterministic record/replay.

The runtime renders a role's template, fingerprints the request, and either
replays a recorded response, records a live one, or just calls the backend.
Replay mode never touches the network: a runtime can be built with no
backend at all.
"""

from __future__ import annotations

import base64
import hashlib
import json
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Protocol

import requests

from .errors import AgentUnavailable, CassetteMismatch, ContractViolation, TemplateError
from .prompts import MULTIMODAL_ROLES, AgentRole, PromptTemplate, load_templates

EXEC_EXCERPT_LIMIT = 100

_PLACEHOLDER_RE = re.compile(r"\{([a-z][a-z0-9_]*)\}")

# Counts real HTTP calls process-wide; the offline test suite asserts zero.
LIVE_CALL_COUNT = 0


def render_prompt(template: PromptTemplate, bindings: dict[str, str]) -> str:
    """Substitute named placeholders into the template body.

    The ``last_exec_result`` binding is cut to its first 100 characters
    before substitution; extra bindings are ignored; a placeholder with no
    binding raises TemplateError naming it.
    """
    prepared = dict(bindings)
    if "last_exec_result" in prepared:
        prepared["last_exec_result"] = prepared["last_exec_result"][:EXEC_EXCERPT_LIMIT]

    def _substitute(match: re.Match[str]) -> str:
        name = match.group(1)
        if name not in prepared:
            raise TemplateError(name)
        return prepared[name]

    return _PLACEHOLDER_RE.sub(_substitute, template.body)


@dataclass(frozen=True)
class Attachment:
    """Binary image payload sent alongside a prompt."""

    data: bytes
    media_type: str

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.data).hexdigest()


@dataclass(frozen=True)
class AgentRequest:
    role: AgentRole
    prompt: str
    attachment: Attachment | None = None

    def __post_init__(self) -> None:
        if self.attachment is not None and self.role not in MULTIMODAL_ROLES:
            raise ContractViolation(f"role {self.role.value} cannot carry an image attachment")


@dataclass(frozen=True)
class AgentResponse:
    text: str
    latency_ms: int
    backend_id: str


def prompt_sha(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


def fingerprint(role: str, prompt: str, attachment_digest: str | None = None) -> str:
    """Stable digest of (role, rendered prompt, attachment digest)."""
    payload = f"{role}\n{prompt_sha(prompt)}\n{attachment_digest or '-'}"
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class Backend(Protocol):
    """A chat-completion endpoint: one rendered prompt in, one text out."""

    backend_id: str

    def complete(
        self, request: AgentRequest, system_message: str | None, model: str | None
    ) -> str: ...


def build_chat_payload(
    request: AgentRequest, system_message: str | None, model: str
) -> dict[str, Any]:
    """Chat-completion request body; images ride as base64 content parts."""
    content: Any = request.prompt
    if request.attachment is not None:
        encoded = base64.b64encode(request.attachment.data).decode("ascii")
        content = [
            {"type": "text", "text": request.prompt},
            {
                "type": "image_url",
                "image_url": {"url": f"data:{request.attachment.media_type};base64,{encoded}"},
            },
        ]
    messages = []
    if system_message:
        messages.append({"role": "system", "content": system_message})
    messages.append({"role": "user", "content": content})
    return {"model": model, "messages": messages}


class HttpBackend:
    """Chat-completion-style HTTPS backend.

    Connection settings come from the backend config; multimodal content
    parts carry base64 image data with a declared media type.
    """

    def __init__(self, api_base: str, model: str, api_key: str, timeout_s: float = 120.0):
        if not api_base or not model:
            raise ContractViolation("live backend requires api_base and model")
        self.api_base = api_base.rstrip("/")
        self.model = model
        self.api_key = api_key
        self.timeout_s = timeout_s
        self.backend_id = f"http:{model}"
        self._session = requests.Session()

    def complete(
        self, request: AgentRequest, system_message: str | None, model: str | None = None
    ) -> str:
        global LIVE_CALL_COUNT
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"

        LIVE_CALL_COUNT += 1
        response = self._session.post(
            f"{self.api_base}/chat/completions",
            headers=headers,
            json=build_chat_payload(request, system_message, model or self.model),
            timeout=self.timeout_s,
        )
        if response.status_code in (429, 500, 502, 503, 504):
            raise requests.HTTPError(f"retryable status {response.status_code}")
        response.raise_for_status()
        return response.json()["choices"][0]["message"]["content"]


# Synthetic role used for execution-outcome records stored in cassettes,
# so replays are fully offline (see executors.ReplayExecutor).
EXECUTOR_ROLE = "__executor__"


@dataclass
class CassetteRecord:
    fingerprint: str
    role: str
    prompt_sha: str
    response: str

    def to_dict(self) -> dict[str, str]:
        return {
            "fingerprint": self.fingerprint,
            "role": self.role,
            "prompt_sha": self.prompt_sha,
            "response": self.response,
        }


class Cassette:
    """An ordered log of request fingerprints and canned responses.

    Replay matches the next record in order and falls back to a keyed
    lookup so concurrent runs can share one cassette. Appends are
    serialized; when bound to a path each append is flushed immediately.
    """

    MODES = ("record", "replay", "live")

    def __init__(self, mode: str, path: str | Path | None = None):
        if mode not in self.MODES:
            raise ContractViolation(f"cassette mode must be one of {self.MODES}")
        self.mode = mode
        self.path = Path(path) if path else None
        self.records: list[CassetteRecord] = []
        self._cursor = 0
        self._lock = threading.Lock()
        self._by_fingerprint: dict[str, list[CassetteRecord]] = {}
        if mode == "replay":
            if self.path is None:
                raise ContractViolation("replay mode requires a cassette file")
            self._load()

    def _load(self) -> None:
        assert self.path is not None
        with self.path.open(encoding="utf-8") as handle:
            for line in handle:
                line = line.strip()
                if not line:
                    continue
                raw = json.loads(line)
                record = CassetteRecord(
                    fingerprint=raw["fingerprint"],
                    role=raw["role"],
                    prompt_sha=raw["prompt_sha"],
                    response=raw["response"],
                )
                self.records.append(record)
                self._by_fingerprint.setdefault(record.fingerprint, []).append(record)

    def append(self, record: CassetteRecord) -> None:
        with self._lock:
            self.records.append(record)
            self._by_fingerprint.setdefault(record.fingerprint, []).append(record)
            if self.path is not None:
                with self.path.open("a", encoding="utf-8") as handle:
                    handle.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")

    def replay(self, fp: str) -> str:
        """Return the canned response for ``fp`` or raise CassetteMismatch."""
        with self._lock:
            if self._cursor < len(self.records):
                candidate = self.records[self._cursor]
                if candidate.fingerprint == fp:
                    self._cursor += 1
                    return candidate.response
            matches = self._by_fingerprint.get(fp)
            if matches:
                return matches[0].response
            expected = (
                self.records[self._cursor].fingerprint
                if self._cursor < len(self.records)
                else None
            )
            raise CassetteMismatch(expected, fp)

    def save(self, path: str | Path) -> None:
        target = Path(path)
        with target.open("w", encoding="utf-8") as handle:
            for record in self.records:
                handle.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")


EventSink = Callable[[str, dict[str, Any]], None]


@dataclass
class AgentRuntime:
    """Routes agent calls through templates, cassettes, and backends.

    One runtime serves a whole question run; the judge backend, when set,
    answers MetricJudge calls while every other role uses the main backend.
    """

    mode: str = "live"
    backend: Backend | None = None
    judge_backend: Backend | None = None
    cassette: Cassette | None = None
    templates: dict[AgentRole, PromptTemplate] = field(default_factory=load_templates)
    retries: int = 3
    backoff_s: float = 0.5
    event_sink: EventSink | None = None

    def __post_init__(self) -> None:
        if self.mode not in Cassette.MODES:
            raise ContractViolation(f"runtime mode must be one of {Cassette.MODES}")
        if self.mode == "replay":
            if self.cassette is None:
                raise ContractViolation("replay mode requires a loaded cassette")
        elif self.backend is None:
            raise ContractViolation(f"{self.mode} mode requires a backend")
        if self.mode == "record" and self.cassette is None:
            self.cassette = Cassette(mode="record")

    def render(self, role: AgentRole, bindings: dict[str, str]) -> str:
        return render_prompt(self.templates[role], bindings)

    def invoke(
        self,
        role: AgentRole,
        bindings: dict[str, str],
        attachment: Attachment | None = None,
        extra: str = "",
    ) -> AgentResponse:
        """Render, fingerprint, and resolve one agent call.

        ``extra`` text is appended after rendering; parse-retry re-asks use
        it so the retried request gets its own fingerprint.
        """
        prompt = self.render(role, bindings) + extra
        request = AgentRequest(role=role, prompt=prompt, attachment=attachment)
        fp = fingerprint(role.value, prompt, attachment.digest if attachment else None)

        if self.mode == "replay":
            assert self.cassette is not None
            text = self.cassette.replay(fp)
            response = AgentResponse(text=text, latency_ms=0, backend_id="replay")
        else:
            text, latency_ms, backend_id = self._call_backend(request)
            response = AgentResponse(text=text, latency_ms=latency_ms, backend_id=backend_id)
            if self.mode == "record":
                assert self.cassette is not None
                self.cassette.append(
                    CassetteRecord(
                        fingerprint=fp,
                        role=role.value,
                        prompt_sha=prompt_sha(prompt),
                        response=text,
                    )
                )

        if self.event_sink is not None:
            self.event_sink(
                "agent_call", {"role": role.value, "prompt": prompt, "response": response.text}
            )
        return response

    def _backend_for(self, role: AgentRole) -> Backend:
        if role is AgentRole.METRIC_JUDGE and self.judge_backend is not None:
            return self.judge_backend
        assert self.backend is not None
        return self.backend

    def _call_backend(self, request: AgentRequest) -> tuple[str, int, str]:
        backend = self._backend_for(request.role)
        system_message = self.templates[request.role].system_message
        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            started = time.perf_counter()
            try:
                text = backend.complete(request, system_message, None)
                latency_ms = int((time.perf_counter() - started) * 1000)
                return text, latency_ms, backend.backend_id
            except requests.RequestException as exc:
                last_error = exc
                if attempt < self.retries and self.backoff_s > 0:
                    time.sleep(self.backoff_s * (2**attempt))
        raise AgentUnavailable(
            f"backend {backend.backend_id} failed after {self.retries + 1} attempts: {last_error}"
        )


def runtime_from_config(
    config: Any,
    mode: str = "live",
    cassette: Cassette | None = None,
    event_sink: EventSink | None = None,
) -> AgentRuntime:
    """Build a runtime from a PipelineConfig.

    Replay runtimes carry no backend at all, which structurally rules out
    network access.
    """
    templates = load_templates(config.prompt_dir)
    if mode == "replay":
        return AgentRuntime(
            mode=mode,
            cassette=cassette,
            templates=templates,
            event_sink=event_sink,
        )
    backend = HttpBackend(
        api_base=config.backend.api_base,
        model=config.backend.model,
        api_key=config.backend.api_key,
    )
    judge_backend: Backend | None = None
    if config.judge_backend is not None:
        judge = config.judge_backend
        judge_backend = HttpBackend(
            api_base=judge.api_base or config.backend.api_base,
            model=judge.model or config.backend.model,
            api_key=judge.api_key or config.backend.api_key,
        )
    return AgentRuntime(
        mode=mode,
        backend=backend,
        judge_backend=judge_backend,
        cassette=cassette,
        templates=templates,
        retries=config.backend.retries,
        backoff_s=config.backend.backoff_s,
        event_sink=event_sink,
    )
