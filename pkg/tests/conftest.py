"""Shared fixtures and scripted-runtime helpers for the offline suite."""

from __future__ import annotations

import pytest

from magma.model import Category, InstructionalInput, QuestionDraft
from magma.runtime import AgentRuntime
from magma.testing import ScriptedBackend

PASS_REPLY = "Pass. Looks good."
FAIL_REPLY = "Fail. Something is off."


def scripted_runtime(replies: list[str]) -> AgentRuntime:
    """A live-mode runtime whose backend replays the given scripts."""
    return AgentRuntime(mode="live", backend=ScriptedBackend(replies), backoff_s=0.0)


@pytest.fixture
def sample_input() -> InstructionalInput:
    return InstructionalInput(
        knowledge_point="Pythagorean theorem",
        subject_grade="junior-high geometry",
        diagram_requirements="a right triangle with legs 3 cm and 4 cm; find the hypotenuse",
        raw_instruction=(
            "I am a junior-high geometry math teacher. Please create one problem on "
            "Pythagorean theorem that comes with a figure."
        ),
        category=Category.PLANE_GEOMETRY,
    )


@pytest.fixture
def sample_draft() -> QuestionDraft:
    return QuestionDraft(
        subject="Mathematics",
        grade_level="Junior High",
        knowledge_point="Pythagorean theorem",
        question_stem="In the right triangle ABC shown in the figure, AB = 3 cm and AC = 4 cm. Find BC.",
        answer="5 cm",
        analysis="By the Pythagorean theorem, BC^2 = AB^2 + AC^2 = 9 + 16 = 25, so BC = 5 cm.",
        image_description="A right triangle with AB=3 cm, AC=4 cm, right angle at A, labeled A, B, C.",
        iteration=1,
    )


