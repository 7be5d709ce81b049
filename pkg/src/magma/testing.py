"""Deterministic test doubles and the bundled end-to-end fixture.

``ScriptedBackend`` feeds canned replies to the runtime in order, which is
how every offline test drives the loops. ``build_pythagorean_cassette``
records a complete two-stage run (one failed validation round, one failed
execution cycle, then success) against scripted agents and a scripted
executor; the saved cassette replays the identical run with no network and
no sandbox. Run ``python -m magma.testing`` to refresh the bundled copy.
"""

from __future__ import annotations

import base64
import random
import tempfile
from importlib import resources
from pathlib import Path

from .executors import RecordingExecutor, StubExecutor, StubOutcome
from .model import (
    Category,
    ExecStatus,
    InstructionalInput,
    PipelineConfig,
    QuestionDraft,
    RunRecord,
)
from .pipeline import default_instruction, run_question
from .runstore import RunStore
from .runtime import AgentRequest, AgentRuntime, Cassette

# 1x1 white PNG; small enough to embed in cassettes as base64.
TINY_PNG = base64.b64decode(
    "iVBORw0KGgoAAAANSUhEUgAAAAEAAAABCAYAAAAfFcSJAAAADUlEQVR4nGNgYGD4"
    "DwABBAEAX+XLaQAAAABJRU5ErkJggg=="
)


class ScriptedBackend:
    """Backend double returning a fixed list of replies in order."""

    backend_id = "scripted"

    def __init__(self, replies: list[str]):
        self.replies = list(replies)
        self.calls: list[AgentRequest] = []

    def complete(self, request: AgentRequest, system_message: str | None, model: str | None) -> str:
        self.calls.append(request)
        if not self.replies:
            raise RuntimeError(f"scripted backend exhausted at call {len(self.calls)}")
        return self.replies.pop(0)


_WORDS = (
    "triangle angle circle segment vertex parallel length ratio theorem graph "
    "function axis coordinate midpoint radius chord tangent slope area perimeter"
).split()


def random_text(rng: random.Random, max_words: int = 8) -> str:
    count = rng.randint(2, max_words)
    return " ".join(rng.choice(_WORDS) for _ in range(count))


def random_draft(rng: random.Random) -> QuestionDraft:
    """A well-formed draft whose field text survives both serialized forms."""
    return QuestionDraft(
        subject=random_text(rng, 3),
        grade_level=random_text(rng, 3),
        knowledge_point=random_text(rng, 4),
        question_stem=random_text(rng),
        answer=random_text(rng, 4),
        analysis=random_text(rng, 12),
        image_description=random_text(rng, 12),
        iteration=rng.randint(0, 5),
    )


PYTHAGOREAN_KNOWLEDGE_POINT = "Pythagorean theorem"
PYTHAGOREAN_GRADE = "junior-high geometry"
PYTHAGOREAN_REQUIREMENTS = "a right triangle with legs 3 cm and 4 cm; find the hypotenuse"


def pythagorean_input() -> InstructionalInput:
    return InstructionalInput(
        knowledge_point=PYTHAGOREAN_KNOWLEDGE_POINT,
        subject_grade=PYTHAGOREAN_GRADE,
        diagram_requirements=PYTHAGOREAN_REQUIREMENTS,
        raw_instruction=default_instruction(
            PYTHAGOREAN_KNOWLEDGE_POINT, PYTHAGOREAN_GRADE, PYTHAGOREAN_REQUIREMENTS
        ),
        category=Category.PLANE_GEOMETRY,
    )


DRAFT_V1_JSON = """{
  "subject": "Mathematics",
  "grade_level": "Junior High",
  "knowledge_point": "Pythagorean theorem",
  "question_stem": "In the right triangle ABC shown in the figure, AB = 3 cm and AC = 4 cm. Find BC.",
  "image_description": "A right triangle with AB=3 cm, AC=4 cm, right angle at A, labeled A, B, C.",
  "answer": "5 cm",
  "analysis": "By the Pythagorean theorem, BC = 5 cm."
}"""

AA_FEEDBACK_JSON = (
    '{"status": "revision_needed", "feedback": [{"error_type": "formula_error", '
    '"suggestion": "Include full expression BC^2 = AB^2 + AC^2."}]}'
)

REVISED_ANALYSIS = "By the Pythagorean theorem, BC^2 = AB^2 + AC^2 = 9 + 16 = 25, so BC = 5 cm."

REFLECTOR_REPLY = f"""[Question]In the right triangle ABC shown in the figure, AB = 3 cm and AC = 4 cm. Find BC.
[Explanation]{REVISED_ANALYSIS}
[Answer]5 cm
[Image Description]A right triangle with AB=3 cm, AC=4 cm, right angle at A, labeled A, B, C."""

# Cycle 1 calls an undefined name, so execution fails at runtime.
CYCLE1_CODE_REPLY = """import matplotlib.pyplot as plt
plt.plot([0,3,0,0],[0,0,4,0])  # draw right triangle
plt.text(0,0,'A'); plt.text(3,0,'B'); plt.text(0,4,'C')
plt.text(1.5,-0.4,'3 cm'); plt.text(-0.6,2,'4 cm')
pltt.text(1.6,1.8,'5 cm'); plt.axis('equal')
plt.savefig('triangle.svg')"""

CYCLE2_CODE_REPLY = """import matplotlib.pyplot as plt
plt.plot([0,3,0,0],[0,0,4,0])  # draw right triangle
plt.text(0,0,'A'); plt.text(3,0,'B'); plt.text(0,4,'C')
plt.text(1.5,-0.4,'3 cm'); plt.text(-0.6,2,'4 cm')
plt.text(1.6,1.8,'5 cm'); plt.axis('equal')
plt.savefig('triangle.svg')"""

CYCLE1_STDERR = (
    "Traceback (most recent call last):\n"
    '  File "code.py", line 5, in <module>\n'
    "    pltt.text(1.6,1.8,'5 cm'); plt.axis('equal')\n"
    "NameError: name 'pltt' is not defined"
)

_PASS_VALIDATIONS = [
    "Pass. The knowledge point and question type match the request.",
    "Pass. Language is fluent and all symbols are standard.",
    "Pass. Conditions are complete and the question is solvable.",
    "Pass. The analysis derives the answer step by step.",
    "Pass. The answer 5 cm is correct.",
    "Pass. The description covers elements, relations, and values.",
]

PYTHAGOREAN_REPLIES: list[str] = [
    # Round 1: draft, five passes, one failed analysis check, reflection.
    DRAFT_V1_JSON,
    _PASS_VALIDATIONS[0],
    _PASS_VALIDATIONS[1],
    _PASS_VALIDATIONS[2],
    AA_FEEDBACK_JSON,
    _PASS_VALIDATIONS[4],
    _PASS_VALIDATIONS[5],
    REFLECTOR_REPLY,
    # Round 2: the revised draft passes every check.
    *_PASS_VALIDATIONS,
    # Diagram cycle 1: code that breaks at runtime.
    CYCLE1_CODE_REPLY,
    "Fail. Execution error: name 'pltt' is not defined; fix the typo.",
    # Diagram cycle 2: corrected code, both checks pass.
    CYCLE2_CODE_REPLY,
    "Pass. All described elements are drawn with correct relationships.",
    "Pass. The image matches the description.",
    # Metric judging, six criteria.
    "Pass. The question satisfies the instructional requirements.",
    "Pass. The language is fluent and symbols are standard.",
    "Pass. The question is rational and solvable.",
    "Pass. The reasoning is sound and complete.",
    "Pass. The final answer is correct.",
    "Pass. The image description is complete and faithful.",
]

PYTHAGOREAN_EXEC_SCRIPT = [
    StubOutcome(status=ExecStatus.RUNTIME_ERROR, stderr_tail=CYCLE1_STDERR, duration_ms=12),
    StubOutcome(status=ExecStatus.OK, artifact_bytes=TINY_PNG, duration_ms=34),
]


def build_pythagorean_run(
    store: RunStore,
    cassette: Cassette,
    config: PipelineConfig | None = None,
    question_id: str = "q001",
) -> RunRecord:
    """Record the scripted Pythagorean run into ``store`` and ``cassette``."""
    config = config or PipelineConfig()
    store.write_config_snapshot(config)
    runtime = AgentRuntime(
        mode="record", backend=ScriptedBackend(PYTHAGOREAN_REPLIES), cassette=cassette
    )
    executor = RecordingExecutor(StubExecutor(list(PYTHAGOREAN_EXEC_SCRIPT)), cassette)
    return run_question(runtime, executor, pythagorean_input(), config, store, question_id)


def build_pythagorean_cassette(path: str | Path) -> RunRecord:
    """Write the bundled replayable cassette to ``path``."""
    with tempfile.TemporaryDirectory(prefix="magma-fixture-") as scratch:
        store = RunStore(Path(scratch) / "run")
        cassette = Cassette(mode="record")
        record = build_pythagorean_run(store, cassette)
        cassette.save(path)
    return record


def bundled_cassette_path() -> Path:
    """Path of the checked-in Pythagorean cassette."""
    return Path(str(resources.files("magma").joinpath("data/pythagorean.jsonl")))


def bundled_dataset_path() -> Path:
    """Path of the checked-in six-entry sample dataset."""
    return Path(str(resources.files("magma").joinpath("data/sample_dataset.jsonl")))


if __name__ == "__main__":
    target = Path(__file__).parent / "data" / "pythagorean.jsonl"
    target.parent.mkdir(parents=True, exist_ok=True)
    record = build_pythagorean_cassette(target)
    print(f"wrote {target} (terminal: {record.terminal_state.value})")
