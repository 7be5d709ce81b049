"""Domain types and scoring primitives shared across the pipeline.

Every type here is an immutable value object: safe to share across threads
and to serialize as a flat JSON object whose keys match the field names.
No I/O and no agent logic lives in this module.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any

from .errors import ContractViolation, SchemaError

__all__ = [
    "Category",
    "CheckId",
    "Verdict",
    "ReportStatus",
    "ExecStatus",
    "DirectiveTarget",
    "TerminalState",
    "StageTerminal",
    "CHECK_ORDER",
    "InstructionalInput",
    "QuestionDraft",
    "FeedbackItem",
    "CheckResult",
    "CheckOutcome",
    "ValidationReport",
    "ReflectionDirective",
    "DrawingCode",
    "ExecutionOutcome",
    "DiagramCycle",
    "MetricVector",
    "BackendConfig",
    "PipelineConfig",
    "Stage1Step",
    "RunRecord",
    "compute_phi",
    "itc_verdict",
    "q_text_score",
    "validate_run_record",
]


class Category(str, Enum):
    """Knowledge-point category labels used for reporting."""

    PLANE_GEOMETRY = "PlaneGeometry"
    SPATIAL_GEOMETRY = "SpatialGeometry"
    FUNCTION_IMAGES = "FunctionImages"
    ANALYTIC_GEOMETRY = "AnalyticGeometry"
    MIXED_KNOWLEDGE = "MixedKnowledge"


class CheckId(str, Enum):
    """The six textual quality checks, in validator order."""

    UO = "UO"
    LR = "LR"
    QF = "QF"
    AA = "AA"
    CA = "CA"
    IDQ = "IDQ"


CHECK_ORDER: tuple[CheckId, ...] = (
    CheckId.UO,
    CheckId.LR,
    CheckId.QF,
    CheckId.AA,
    CheckId.CA,
    CheckId.IDQ,
)


class Verdict(str, Enum):
    PASS = "Pass"
    FAIL = "Fail"


class ReportStatus(str, Enum):
    APPROVED = "Approved"
    REVISION_NEEDED = "RevisionNeeded"


class ExecStatus(str, Enum):
    OK = "Ok"
    RUNTIME_ERROR = "RuntimeError"
    TIMEOUT = "Timeout"
    NO_ARTIFACT = "NoArtifact"


class DirectiveTarget(str, Enum):
    TEXT = "Text"
    DIAGRAM = "Diagram"


class TerminalState(str, Enum):
    """How a question's full pipeline ended."""

    CONVERGED = "Converged"
    ITERATION_CAP_TEXT = "IterationCapText"
    ITERATION_CAP_DIAGRAM = "IterationCapDiagram"
    FAILED = "Failed"


class StageTerminal(str, Enum):
    """How a single stage's loop ended."""

    CONVERGED = "Converged"
    ITERATION_CAP = "IterationCap"
    FAILED = "Failed"


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ContractViolation(message)


@dataclass(frozen=True)
class InstructionalInput:
    """The structured teaching request a question is generated from.

    ``raw_instruction`` is the teacher-style prompt actually fed to the
    generator; the structured fields drive validation and reporting.
    """

    knowledge_point: str
    subject_grade: str
    diagram_requirements: str
    raw_instruction: str
    category: Category

    def __post_init__(self) -> None:
        _require(bool(self.knowledge_point.strip()), "knowledge_point must be nonempty")
        _require(bool(self.raw_instruction.strip()), "raw_instruction must be nonempty")

    def to_dict(self) -> dict[str, Any]:
        return {
            "knowledge_point": self.knowledge_point,
            "subject_grade": self.subject_grade,
            "diagram_requirements": self.diagram_requirements,
            "raw_instruction": self.raw_instruction,
            "category": self.category.value,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "InstructionalInput":
        try:
            return cls(
                knowledge_point=data["knowledge_point"],
                subject_grade=data["subject_grade"],
                diagram_requirements=data["diagram_requirements"],
                raw_instruction=data["raw_instruction"],
                category=Category(data["category"]),
            )
        except (KeyError, ValueError) as exc:
            raise SchemaError(f"malformed InstructionalInput: {exc}") from exc


@dataclass(frozen=True)
class QuestionDraft:
    """One candidate problem statement, evolving across refinement rounds."""

    subject: str
    grade_level: str
    knowledge_point: str
    question_stem: str
    answer: str
    analysis: str
    image_description: str
    iteration: int = 0

    def __post_init__(self) -> None:
        _require(self.iteration >= 0, "iteration must be >= 0")

    def with_iteration(self, iteration: int) -> "QuestionDraft":
        return replace(self, iteration=iteration)

    def to_dict(self) -> dict[str, Any]:
        return {
            "subject": self.subject,
            "grade_level": self.grade_level,
            "knowledge_point": self.knowledge_point,
            "question_stem": self.question_stem,
            "answer": self.answer,
            "analysis": self.analysis,
            "image_description": self.image_description,
            "iteration": self.iteration,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "QuestionDraft":
        try:
            return cls(
                subject=data["subject"],
                grade_level=data["grade_level"],
                knowledge_point=data["knowledge_point"],
                question_stem=data["question_stem"],
                answer=data["answer"],
                analysis=data["analysis"],
                image_description=data["image_description"],
                iteration=int(data.get("iteration", 0)),
            )
        except KeyError as exc:
            raise SchemaError(f"malformed QuestionDraft: missing {exc}") from exc


@dataclass(frozen=True)
class FeedbackItem:
    """One structured revision request emitted by a validator."""

    error_type: str
    suggestion: str

    def __post_init__(self) -> None:
        _require(bool(self.error_type.strip()), "error_type must be nonempty")
        _require(bool(self.suggestion.strip()), "suggestion must be nonempty")

    def to_dict(self) -> dict[str, Any]:
        return {"error_type": self.error_type, "suggestion": self.suggestion}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "FeedbackItem":
        try:
            return cls(error_type=data["error_type"], suggestion=data["suggestion"])
        except KeyError as exc:
            raise SchemaError(f"malformed FeedbackItem: missing {exc}") from exc


@dataclass(frozen=True)
class CheckResult:
    """Verdict of one of the six textual checks."""

    check_id: CheckId
    verdict: Verdict
    reason: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "check_id": self.check_id.value,
            "verdict": self.verdict.value,
            "reason": self.reason,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "CheckResult":
        try:
            return cls(
                check_id=CheckId(data["check_id"]),
                verdict=Verdict(data["verdict"]),
                reason=data.get("reason", ""),
            )
        except (KeyError, ValueError) as exc:
            raise SchemaError(f"malformed CheckResult: {exc}") from exc


@dataclass(frozen=True)
class CheckOutcome:
    """Verdict + reason of a single diagram-side check."""

    verdict: Verdict
    reason: str

    def to_dict(self) -> dict[str, Any]:
        return {"verdict": self.verdict.value, "reason": self.reason}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "CheckOutcome":
        try:
            return cls(verdict=Verdict(data["verdict"]), reason=data.get("reason", ""))
        except (KeyError, ValueError) as exc:
            raise SchemaError(f"malformed CheckOutcome: {exc}") from exc


@dataclass(frozen=True)
class ValidationReport:
    """Combined result of the six textual checks on one draft.

    Invariant: exactly six checks, one per check id, in validator order;
    ``status`` is Approved iff every verdict is Pass.
    """

    checks: tuple[CheckResult, ...]
    status: ReportStatus
    feedback: tuple[FeedbackItem, ...] = ()

    def __post_init__(self) -> None:
        ids = [c.check_id for c in self.checks]
        if sorted(ids, key=lambda c: c.value) != sorted(CHECK_ORDER, key=lambda c: c.value):
            raise SchemaError(f"report must contain exactly one result per check id, got {ids}")
        all_pass = all(c.verdict is Verdict.PASS for c in self.checks)
        expected = ReportStatus.APPROVED if all_pass else ReportStatus.REVISION_NEEDED
        if self.status is not expected:
            raise ContractViolation(
                f"status {self.status.value} inconsistent with verdicts (expected {expected.value})"
            )

    @classmethod
    def from_checks(
        cls,
        checks: list[CheckResult] | tuple[CheckResult, ...],
        feedback: list[FeedbackItem] | tuple[FeedbackItem, ...] = (),
    ) -> "ValidationReport":
        """Build a report, deriving ``status`` from the verdicts."""
        all_pass = all(c.verdict is Verdict.PASS for c in checks)
        status = ReportStatus.APPROVED if all_pass else ReportStatus.REVISION_NEEDED
        return cls(checks=tuple(checks), status=status, feedback=tuple(feedback))

    def to_dict(self) -> dict[str, Any]:
        return {
            "checks": [c.to_dict() for c in self.checks],
            "status": self.status.value,
            "feedback": [f.to_dict() for f in self.feedback],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ValidationReport":
        try:
            return cls(
                checks=tuple(CheckResult.from_dict(c) for c in data["checks"]),
                status=ReportStatus(data["status"]),
                feedback=tuple(FeedbackItem.from_dict(f) for f in data.get("feedback", [])),
            )
        except (KeyError, ValueError) as exc:
            raise SchemaError(f"malformed ValidationReport: {exc}") from exc


@dataclass(frozen=True)
class ReflectionDirective:
    """The revision signal produced after a failed validation round.

    A Text directive carries the fully revised draft; a Diagram directive
    carries free-form revision notes assembled from the cycle's feedback.
    """

    target: DirectiveTarget
    revised_draft: QuestionDraft | None = None
    revision_notes: str = ""

    def __post_init__(self) -> None:
        if self.target is DirectiveTarget.TEXT:
            _require(self.revised_draft is not None, "Text directive requires revised_draft")
        else:
            _require(bool(self.revision_notes.strip()), "Diagram directive requires revision_notes")

    def to_dict(self) -> dict[str, Any]:
        return {
            "target": self.target.value,
            "revised_draft": self.revised_draft.to_dict() if self.revised_draft else None,
            "revision_notes": self.revision_notes,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ReflectionDirective":
        try:
            draft = data.get("revised_draft")
            return cls(
                target=DirectiveTarget(data["target"]),
                revised_draft=QuestionDraft.from_dict(draft) if draft else None,
                revision_notes=data.get("revision_notes", ""),
            )
        except (KeyError, ValueError) as exc:
            raise SchemaError(f"malformed ReflectionDirective: {exc}") from exc


@dataclass(frozen=True)
class DrawingCode:
    """An executable drawing program plus where it must save its image.

    ``save_path`` is kept relative to the question's working directory so
    recorded prompts and sources stay stable across run directories; the
    executor resolves it to an absolute path at execution time.
    """

    source: str
    dialect: str
    save_path: str

    def __post_init__(self) -> None:
        _require(bool(self.source.strip()), "source must be nonempty")
        _require(bool(self.save_path.strip()), "save_path must be nonempty")

    def to_dict(self) -> dict[str, Any]:
        return {"source": self.source, "dialect": self.dialect, "save_path": self.save_path}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "DrawingCode":
        try:
            return cls(
                source=data["source"],
                dialect=data["dialect"],
                save_path=data["save_path"],
            )
        except KeyError as exc:
            raise SchemaError(f"malformed DrawingCode: missing {exc}") from exc


STDERR_TAIL_LIMIT = 2000


@dataclass(frozen=True)
class ExecutionOutcome:
    """What happened when one drawing program ran."""

    status: ExecStatus
    stderr_tail: str = ""
    duration_ms: int = 0
    artifact_path: str | None = None

    def __post_init__(self) -> None:
        if self.status is ExecStatus.OK:
            _require(self.artifact_path is not None, "Ok outcome requires artifact_path")
        _require(len(self.stderr_tail) <= STDERR_TAIL_LIMIT, "stderr_tail exceeds bound")

    def to_dict(self) -> dict[str, Any]:
        return {
            "status": self.status.value,
            "stderr_tail": self.stderr_tail,
            "duration_ms": self.duration_ms,
            "artifact_path": self.artifact_path,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExecutionOutcome":
        try:
            return cls(
                status=ExecStatus(data["status"]),
                stderr_tail=data.get("stderr_tail", ""),
                duration_ms=int(data.get("duration_ms", 0)),
                artifact_path=data.get("artifact_path"),
            )
        except (KeyError, ValueError) as exc:
            raise SchemaError(f"malformed ExecutionOutcome: {exc}") from exc


@dataclass(frozen=True)
class DiagramCycle:
    """One full round of the diagram loop: code, run, two checks, directive."""

    iteration: int
    code: DrawingCode
    exec: ExecutionOutcome
    code_check: CheckOutcome
    image_check: CheckOutcome | None
    syntax_ok: bool
    directive: ReflectionDirective | None = None

    def __post_init__(self) -> None:
        _require(
            self.syntax_ok == (self.exec.status is ExecStatus.OK),
            "syntax_ok must mirror exec.status == Ok",
        )
        if not self.syntax_ok:
            _require(self.image_check is None, "image_check only valid when syntax_ok")

    @property
    def full_pass(self) -> bool:
        return itc_verdict(
            self.syntax_ok,
            self.code_check.verdict is Verdict.PASS,
            self.image_check is not None and self.image_check.verdict is Verdict.PASS,
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "iteration": self.iteration,
            "code": self.code.to_dict(),
            "exec": self.exec.to_dict(),
            "code_check": self.code_check.to_dict(),
            "image_check": self.image_check.to_dict() if self.image_check else None,
            "syntax_ok": self.syntax_ok,
            "directive": self.directive.to_dict() if self.directive else None,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "DiagramCycle":
        try:
            image_check = data.get("image_check")
            directive = data.get("directive")
            return cls(
                iteration=int(data["iteration"]),
                code=DrawingCode.from_dict(data["code"]),
                exec=ExecutionOutcome.from_dict(data["exec"]),
                code_check=CheckOutcome.from_dict(data["code_check"]),
                image_check=CheckOutcome.from_dict(image_check) if image_check else None,
                syntax_ok=bool(data["syntax_ok"]),
                directive=ReflectionDirective.from_dict(directive) if directive else None,
            )
        except (KeyError, ValueError) as exc:
            raise SchemaError(f"malformed DiagramCycle: {exc}") from exc


_METRIC_FLAGS = ("uo", "lr", "qf", "aa", "ca", "idq")


@dataclass(frozen=True)
class MetricVector:
    """Per-question boolean metrics plus their aggregate fractions."""

    uo: bool
    lr: bool
    qf: bool
    aa: bool
    ca: bool
    idq: bool
    itc: bool
    q_text: float
    q_visual: float
    consistency: float

    def __post_init__(self) -> None:
        passed = sum(getattr(self, name) for name in _METRIC_FLAGS)
        _require(abs(self.q_text - passed / 6) < 1e-12, "q_text must equal passed/6")
        _require(self.q_visual in (0.0, 1.0), "q_visual is an indicator in this scoring")
        _require(
            self.consistency == (1.0 if self.itc else 0.0),
            "consistency must be the indicator of itc",
        )

    @classmethod
    def from_flags(
        cls, uo: bool, lr: bool, qf: bool, aa: bool, ca: bool, idq: bool, itc: bool
    ) -> "MetricVector":
        """Derive the aggregate fractions from the seven booleans."""
        passed = sum((uo, lr, qf, aa, ca, idq))
        return cls(
            uo=uo,
            lr=lr,
            qf=qf,
            aa=aa,
            ca=ca,
            idq=idq,
            itc=itc,
            q_text=passed / 6,
            q_visual=1.0 if itc else 0.0,
            consistency=1.0 if itc else 0.0,
        )

    @classmethod
    def all_false(cls) -> "MetricVector":
        return cls.from_flags(False, False, False, False, False, False, False)

    def to_dict(self) -> dict[str, Any]:
        return {
            "uo": self.uo,
            "lr": self.lr,
            "qf": self.qf,
            "aa": self.aa,
            "ca": self.ca,
            "idq": self.idq,
            "itc": self.itc,
            "q_text": self.q_text,
            "q_visual": self.q_visual,
            "consistency": self.consistency,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "MetricVector":
        try:
            return cls(
                uo=bool(data["uo"]),
                lr=bool(data["lr"]),
                qf=bool(data["qf"]),
                aa=bool(data["aa"]),
                ca=bool(data["ca"]),
                idq=bool(data["idq"]),
                itc=bool(data["itc"]),
                q_text=float(data["q_text"]),
                q_visual=float(data["q_visual"]),
                consistency=float(data["consistency"]),
            )
        except KeyError as exc:
            raise SchemaError(f"malformed MetricVector: missing {exc}") from exc


@dataclass(frozen=True)
class BackendConfig:
    """Connection settings for one chat-completion backend."""

    api_base: str = ""
    model: str = ""
    api_key: str = ""
    retries: int = 3
    backoff_s: float = 0.5

    def to_dict(self, redact: bool = False) -> dict[str, Any]:
        return {
            "api_base": self.api_base,
            "model": self.model,
            "api_key": "" if redact else self.api_key,
            "retries": self.retries,
            "backoff_s": self.backoff_s,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "BackendConfig":
        return cls(
            api_base=data.get("api_base", ""),
            model=data.get("model", ""),
            api_key=data.get("api_key", ""),
            retries=int(data.get("retries", 3)),
            backoff_s=float(data.get("backoff_s", 0.5)),
        )


ARTIFACT_FORMATS = ("png", "jpg", "svg")


@dataclass(frozen=True)
class PipelineConfig:
    """Every tunable knob of the two-stage pipeline.

    Defaults mirror the reference setup: both quality thresholds demand a
    full pass, both loops cap at 5 rounds, and the three objective weights
    are equal.
    """

    tau_text: float = 1.0
    tau_visual: float = 1.0
    i_max_text: int = 5
    i_max_diagram: int = 5
    alpha: float = 1 / 3
    beta: float = 1 / 3
    gamma: float = 1 / 3
    sandbox_timeout: int = 30
    sandbox_slots: int = 2
    artifact_format: str = "png"
    sandbox_cmd: str | None = None
    prompt_dir: str | None = None
    backend: BackendConfig = field(default_factory=BackendConfig)
    judge_backend: BackendConfig | None = None

    def __post_init__(self) -> None:
        for name in ("tau_text", "tau_visual"):
            value = getattr(self, name)
            _require(0.0 <= value <= 1.0, f"{name} must be in [0, 1]")
        for name in ("i_max_text", "i_max_diagram"):
            _require(getattr(self, name) >= 1, f"{name} must be >= 1")
        for name in ("alpha", "beta", "gamma"):
            _require(getattr(self, name) >= 0.0, f"{name} must be nonnegative")
        _require(self.sandbox_timeout >= 1, "sandbox_timeout must be >= 1")
        _require(self.sandbox_slots >= 1, "sandbox_slots must be >= 1")
        _require(
            self.artifact_format in ARTIFACT_FORMATS,
            f"artifact_format must be one of {ARTIFACT_FORMATS}",
        )

    def to_dict(self, redact: bool = False) -> dict[str, Any]:
        return {
            "tau_text": self.tau_text,
            "tau_visual": self.tau_visual,
            "i_max_text": self.i_max_text,
            "i_max_diagram": self.i_max_diagram,
            "alpha": self.alpha,
            "beta": self.beta,
            "gamma": self.gamma,
            "sandbox_timeout": self.sandbox_timeout,
            "sandbox_slots": self.sandbox_slots,
            "artifact_format": self.artifact_format,
            "sandbox_cmd": self.sandbox_cmd,
            "prompt_dir": self.prompt_dir,
            "backend": self.backend.to_dict(redact=redact),
            "judge_backend": self.judge_backend.to_dict(redact=redact)
            if self.judge_backend
            else None,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "PipelineConfig":
        judge = data.get("judge_backend")
        return cls(
            tau_text=float(data.get("tau_text", 1.0)),
            tau_visual=float(data.get("tau_visual", 1.0)),
            i_max_text=int(data.get("i_max_text", 5)),
            i_max_diagram=int(data.get("i_max_diagram", 5)),
            alpha=float(data.get("alpha", 1 / 3)),
            beta=float(data.get("beta", 1 / 3)),
            gamma=float(data.get("gamma", 1 / 3)),
            sandbox_timeout=int(data.get("sandbox_timeout", 30)),
            sandbox_slots=int(data.get("sandbox_slots", 2)),
            artifact_format=data.get("artifact_format", "png"),
            sandbox_cmd=data.get("sandbox_cmd"),
            prompt_dir=data.get("prompt_dir"),
            backend=BackendConfig.from_dict(data.get("backend", {})),
            judge_backend=BackendConfig.from_dict(judge) if judge else None,
        )


@dataclass(frozen=True)
class Stage1Step:
    """One refinement round: the draft, its report, and any directive."""

    draft: QuestionDraft
    report: ValidationReport
    directive: ReflectionDirective | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "draft": self.draft.to_dict(),
            "report": self.report.to_dict(),
            "directive": self.directive.to_dict() if self.directive else None,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Stage1Step":
        directive = data.get("directive")
        return cls(
            draft=QuestionDraft.from_dict(data["draft"]),
            report=ValidationReport.from_dict(data["report"]),
            directive=ReflectionDirective.from_dict(directive) if directive else None,
        )


@dataclass(frozen=True)
class RunRecord:
    """The append-only account of one question's trip through the pipeline."""

    run_id: str
    input: InstructionalInput
    stage1_trace: tuple[Stage1Step, ...]
    final_text: QuestionDraft | None
    stage2_trace: tuple[DiagramCycle, ...]
    final_diagram: str | None
    metrics: MetricVector
    terminal_state: TerminalState

    def to_dict(self) -> dict[str, Any]:
        return {
            "run_id": self.run_id,
            "input": self.input.to_dict(),
            "stage1_trace": [s.to_dict() for s in self.stage1_trace],
            "final_text": self.final_text.to_dict() if self.final_text else None,
            "stage2_trace": [c.to_dict() for c in self.stage2_trace],
            "final_diagram": self.final_diagram,
            "metrics": self.metrics.to_dict(),
            "terminal_state": self.terminal_state.value,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RunRecord":
        try:
            final_text = data.get("final_text")
            return cls(
                run_id=data["run_id"],
                input=InstructionalInput.from_dict(data["input"]),
                stage1_trace=tuple(Stage1Step.from_dict(s) for s in data["stage1_trace"]),
                final_text=QuestionDraft.from_dict(final_text) if final_text else None,
                stage2_trace=tuple(DiagramCycle.from_dict(c) for c in data["stage2_trace"]),
                final_diagram=data.get("final_diagram"),
                metrics=MetricVector.from_dict(data["metrics"]),
                terminal_state=TerminalState(data["terminal_state"]),
            )
        except (KeyError, ValueError) as exc:
            raise SchemaError(f"malformed RunRecord: {exc}") from exc


def compute_phi(
    q_text: float,
    q_image: float,
    consistency: float,
    weights: tuple[float, float, float],
) -> float:
    """Weighted objective combining textual, visual, and consistency quality.

    All three quality arguments must lie in [0, 1] and the weights must be
    nonnegative; the result is the plain weighted sum.
    """
    alpha, beta, gamma = weights
    for name, value in (("q_text", q_text), ("q_image", q_image), ("consistency", consistency)):
        _require(0.0 <= value <= 1.0, f"{name} must be in [0, 1]")
    for name, value in (("alpha", alpha), ("beta", beta), ("gamma", gamma)):
        _require(value >= 0.0, f"weight {name} must be nonnegative")
    return alpha * q_text + beta * q_image + gamma * consistency


def itc_verdict(syntax_ok: bool, align_ok: bool, visual_ok: bool) -> bool:
    """A diagram is consistent only if all three verification stages pass."""
    return syntax_ok and align_ok and visual_ok


def q_text_score(report: ValidationReport) -> float:
    """Fraction of the six textual checks that passed."""
    if len(report.checks) != 6:
        raise SchemaError(f"report must carry six checks, got {len(report.checks)}")
    passed = sum(1 for c in report.checks if c.verdict is Verdict.PASS)
    return passed / 6


def validate_run_record(record: RunRecord, config: PipelineConfig) -> None:
    """Check every cross-field invariant a finished record must satisfy.

    Raises ContractViolation on the first violated invariant; used by the
    pipeline after each run and by the test suite on fixtures.
    """
    _require(
        len(record.stage1_trace) <= config.i_max_text,
        "stage1 trace exceeds i_max_text",
    )
    _require(
        len(record.stage2_trace) <= config.i_max_diagram,
        "stage2 trace exceeds i_max_diagram",
    )
    if record.terminal_state is TerminalState.CONVERGED:
        _require(record.final_text is not None, "Converged requires final_text")
        _require(record.final_diagram is not None, "Converged requires final_diagram")

    iterations = [step.draft.iteration for step in record.stage1_trace]
    _require(iterations == sorted(set(iterations)), "stage1 iterations must strictly increase")
    if iterations:
        _require(iterations[0] == 1, "stage1 iterations must start at 1")
    for step in record.stage1_trace:
        if step.report.status is ReportStatus.APPROVED:
            _require(step.directive is None, "no directive may follow an Approved report")

    cycle_numbers = [c.iteration for c in record.stage2_trace]
    _require(
        cycle_numbers == list(range(1, len(cycle_numbers) + 1)),
        "stage2 cycles must be numbered 1..n",
    )

    if record.stage2_trace:
        final = record.stage2_trace[-1]
        _require(
            record.metrics.itc == final.full_pass,
            "metrics.itc must equal the final cycle's three-stage verdict",
        )
    else:
        _require(not record.metrics.itc, "itc requires a stage2 trace")
