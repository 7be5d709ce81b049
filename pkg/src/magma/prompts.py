"""Default prompt templates for every agent role.

Each role binds to exactly one template. The instruction text is the
production wording; the trailing data blocks carry the named placeholders
the runtime fills per call. Bodies can be overridden per role by dropping
a UTF-8 text file named ``<role id>.txt`` into the configured prompt
directory.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path


class AgentRole(str, Enum):
    """All agent roles; the value doubles as the prompt-override file stem."""

    TEXT_GENERATOR = "text_generator"
    TEXT_VALIDATOR_UO = "text_validator_uo"
    TEXT_VALIDATOR_LR = "text_validator_lr"
    TEXT_VALIDATOR_QF = "text_validator_qf"
    TEXT_VALIDATOR_AA = "text_validator_aa"
    TEXT_VALIDATOR_CA = "text_validator_ca"
    TEXT_VALIDATOR_IDQ = "text_validator_idq"
    TEXT_REFLECTOR = "text_reflector"
    CODE_GENERATOR = "code_generator"
    IMAGE_VALIDATOR_CODE = "image_validator_code"
    IMAGE_VALIDATOR_MULTIMODAL = "image_validator_multimodal"
    IMAGE_REFLECTOR = "image_reflector"
    METRIC_JUDGE = "metric_judge"


@dataclass(frozen=True)
class PromptTemplate:
    role: AgentRole
    body: str
    system_message: str | None = None


_DRAFT_BLOCK = """
Question: {question_stem}
Explanation: {analysis}
Answer: {answer}
Image Description: {image_description}
User input: {user_input}"""


TEXT_GENERATOR_SYSTEM = (
    "You are a professional question generation assistant. Generate standard "
    "questions, explanations, and answers based on user needs; if images are "
    "required, additionally generate detailed image descriptions (clearly "
    "specifying image type, data, layout, etc.)."
)

TEXT_GENERATOR_BODY = """Please generate questions, explanations, answers, and image descriptions based on user needs. The image description refers to the image required for the question. Ensure that the conditions expressed in the image description are consistent with the text conditions. Output strictly in the following format (no additional content) and do not generate images:
[Question]<Question content>
[Explanation]<Explanation content>
[Answer]<Answer content>
[Image Description]<Image description content>
The image description must complete the following tasks: (1) Describe all basic elements of the figure, including which lines, angles, points, surfaces, shapes, etc., and clearly specify the specific shapes. (2) The relative relationships of these basic elements, including positional relationships (left, right, up, down) and connection methods (intersecting, parallel, perpendicular, tangent, etc.). (3) Clearly state the numerical values of each element, such as the length of line segments, angles, etc.
User input:
{user_input}"""

_VALIDATOR_UO = (
    "Determine whether the knowledge points and question type of the question meet "
    "the requirements of the user input. It is considered compliant if the knowledge "
    "points are involved, and the question type is compliant as long as it is correct. "
    "Output requirements: Provide verification results and reasons. Do not repeat the "
    "question or add extra explanations. Be concise and clear."
)

_VALIDATOR_LR = (
    "Determine whether the language of the question, analysis, and answer is smooth, "
    "and whether the use of symbols is correct (no grammatical errors, no format "
    "confusion). Output requirements: Provide verification results and reasons. Do not "
    "repeat the question or add extra explanations. Be concise and clear."
)

_VALIDATOR_QF = (
    "Determine whether the question and image description are clear, the conditions "
    "are complete, and whether it can be solved normally (no ambiguity, no missing key "
    "conditions). If there is a conflict between the question information and the "
    "image information, it is deemed incorrect by default. Output requirements: "
    "Provide verification results and reasons. Do not repeat the question or add "
    "extra explanations. Be concise and clear."
)

_VALIDATOR_AA = (
    "Verification task: Determine whether the analysis is correct, the steps are "
    "complete, and whether it can accurately solve the question. Output requirements: "
    "Provide verification results and reasons. Do not repeat the question or add "
    "extra explanations. Be concise and clear."
)

_VALIDATOR_CA = (
    "Please judge whether the answer is correct based on the question and image "
    "description. Output requirements: Provide verification results and reasons. Do "
    "not repeat the question or add extra explanations. Be concise and clear."
)

_VALIDATOR_IDQ = """The image description must complete the following tasks:
(1) Describe all basic elements of the figure, including which lines, angles, points, surfaces, shapes, etc., and clearly specify the specific shapes.
(2) The relative relationships of these basic elements, including positional relationships (left, right, up, down) and connection methods (intersecting, parallel, perpendicular, tangent, etc.).
(3) Clearly state the numerical values of each element, such as the length of line segments, angles, etc. Output requirements: Provide verification results (passed or not passed) and reasons. Do not repeat the question or add extra explanations. Be concise and clear."""

TEXT_REFLECTOR_BODY = """Based on all fields of the original question and all verification results, determine whether the question and image description need to be revised. Summarize the parts that need revision and provide revision suggestions. Note that if there is a conflict between the question information and the image description information, prioritize revising the image description rather than the question. Output strictly in the following format:
[Question]<Question content>
[Explanation]<Explanation content>
[Answer]<Answer content>
[Image Description]<Image description content>

Original question:
Question: {question_stem}
Explanation: {analysis}
Answer: {answer}
Image Description: {image_description}

Verification results:
{verification_results}"""

CODE_GENERATOR_BODY = """Generate directly executable Python image code based on the image description, strictly following the following requirements:
1. Must use the matplotlib library (preferred) or seaborn library; other plotting libraries are prohibited.
2. The code must be complete and executable, including all necessary imports, data definitions, plotting logic, and saving steps.
3. The fixed image saving path is: '{image_save_path}' (the path has been automatically created, please use it directly).
4. Generate strictly according to the image description:
   - Must include all basic images such as all figures, points, lines, surfaces, angles mentioned in the image description.
   - Must draw according to the positional relationships of the figures required by the image description.
   - Must correctly label numerical values such as line segment lengths and angles, corresponding to the objects to be labeled in the question.
   - Do not generate any special symbols, such as parallel symbols, perpendicular symbols, etc.
5. Code format specifications:
   - Indent with 4 spaces, add clear comments, do not use any Chinese symbols. Except as required by the image description, comment on the coordinate system.
   - Avoid redundant code and ensure no syntax errors.
   - Do not wrap with ```python```, output the code content directly.
6. Only output executable Python code, no additional explanations or markdown formats.

Image description: {image_description}"""

IMAGE_VALIDATOR_CODE_BODY = """Based on the image description, generated code, and code execution result, comprehensively judge whether the code meets the requirements. Evaluation criteria:
1. Pass if all elements in the image description exist and their positional relationships are correct.
2. Pass if the required standard numerical labels exist; incorrect labeling of angle symbols, right angle symbols, perpendicular symbols, etc., is not considered an error.
3. Pass if there is image overlap.
4. Pass if there are no special marks (e.g., parallel symbols, perpendicular symbols, angle symbols, etc.).

Output requirements:
- First clearly state the verification result (Pass/Fail);
- Then explain the reason (focus on pointing out issues: execution error/missing elements/inconsistency, etc.);
- If failing, provide specific modification directions; directly return "Pass" if partially passing;
- Control the total number of words within 150, no redundancy.

Image description: {image_description}
Generated code:
{cycle_code}
Code execution result: {last_exec_result}"""

IMAGE_VALIDATOR_MULTIMODAL_BODY = """As a multimodal verification tool, compare the consistency between the generated image and the original description to determine if there are errors.
Input: Image (base64 format), original image description
Verification criteria:
1. Correct if all elements in the image description exist and their positional relationships are correct.
2. Correct if the required standard numerical labels exist; incorrect positions of angle symbols, right angle symbols, perpendicular symbols, etc., are not considered errors.
3. Missing points/lines are not considered errors if they may be due to image overlap.
4. Absence of special marks (e.g., parallel symbols, perpendicular symbols, angle symbols, etc.) is not considered an error.

Output requirements:
- First clearly state the verification result (Pass/Fail);
- Briefly explain the basis (1-2 sentences);
- If failing, clearly point out differences between the image and description and modification suggestions; directly return "Pass" if partially passing;
- Control the total number of words within 120, no additional explanations.

Original image description: {image_description}"""

IMAGE_REFLECTOR_BODY = """I am generating image code. The previously generated code and verification results are as follows:
1. Previously generated code: {cycle_code}
2. Code execution result: {last_exec_result}...
3. Large model verification result: {last_code_val_result}
4. Multimodal verification result: {last_multimodal_val_result}

Please optimize the code based on the above modification suggestions, with the following requirements:
- Strictly iterate based on the previous code: prioritize fixing code errors, then optimize inconsistencies between the code and the image. If there is overlap (e.g., two coincident points), adjust the code (e.g., express one point in parentheses); do not modify error-free parts.
- Ensure compliance with the original image description: {image_description};
- Code requirements:
  - Must include all basic elements (figures, points, lines, surfaces, angles, etc.) mentioned in the image description.
  - Must draw according to the positional relationships of figures required by the image description.
  - Must correctly label numerical values (e.g., line segment lengths, angles) corresponding to the objects to be labeled in the question.
  - Do not generate any special symbols (e.g., parallel symbols, perpendicular symbols, angle symbols, etc.).
- The save path remains: {image_save_path};
- The code must be complete, executable, and free of redundancy."""

METRIC_JUDGE_BODY = """You are an impartial reviewer of generated math problems. Judge the question pack below against exactly one criterion.

Criterion {criterion_id}: {criterion_text}

Question pack:
{question_pack}

Output requirements: State the verification result (Pass/Fail) on the first line, then the reason. Be concise and clear."""


DEFAULT_TEMPLATES: dict[AgentRole, PromptTemplate] = {
    AgentRole.TEXT_GENERATOR: PromptTemplate(
        role=AgentRole.TEXT_GENERATOR,
        body=TEXT_GENERATOR_BODY,
        system_message=TEXT_GENERATOR_SYSTEM,
    ),
    AgentRole.TEXT_VALIDATOR_UO: PromptTemplate(
        role=AgentRole.TEXT_VALIDATOR_UO, body=_VALIDATOR_UO + _DRAFT_BLOCK
    ),
    AgentRole.TEXT_VALIDATOR_LR: PromptTemplate(
        role=AgentRole.TEXT_VALIDATOR_LR, body=_VALIDATOR_LR + _DRAFT_BLOCK
    ),
    AgentRole.TEXT_VALIDATOR_QF: PromptTemplate(
        role=AgentRole.TEXT_VALIDATOR_QF, body=_VALIDATOR_QF + _DRAFT_BLOCK
    ),
    AgentRole.TEXT_VALIDATOR_AA: PromptTemplate(
        role=AgentRole.TEXT_VALIDATOR_AA, body=_VALIDATOR_AA + _DRAFT_BLOCK
    ),
    AgentRole.TEXT_VALIDATOR_CA: PromptTemplate(
        role=AgentRole.TEXT_VALIDATOR_CA, body=_VALIDATOR_CA + _DRAFT_BLOCK
    ),
    AgentRole.TEXT_VALIDATOR_IDQ: PromptTemplate(
        role=AgentRole.TEXT_VALIDATOR_IDQ, body=_VALIDATOR_IDQ + _DRAFT_BLOCK
    ),
    AgentRole.TEXT_REFLECTOR: PromptTemplate(
        role=AgentRole.TEXT_REFLECTOR, body=TEXT_REFLECTOR_BODY
    ),
    AgentRole.CODE_GENERATOR: PromptTemplate(
        role=AgentRole.CODE_GENERATOR, body=CODE_GENERATOR_BODY
    ),
    AgentRole.IMAGE_VALIDATOR_CODE: PromptTemplate(
        role=AgentRole.IMAGE_VALIDATOR_CODE, body=IMAGE_VALIDATOR_CODE_BODY
    ),
    AgentRole.IMAGE_VALIDATOR_MULTIMODAL: PromptTemplate(
        role=AgentRole.IMAGE_VALIDATOR_MULTIMODAL, body=IMAGE_VALIDATOR_MULTIMODAL_BODY
    ),
    AgentRole.IMAGE_REFLECTOR: PromptTemplate(
        role=AgentRole.IMAGE_REFLECTOR, body=IMAGE_REFLECTOR_BODY
    ),
    AgentRole.METRIC_JUDGE: PromptTemplate(role=AgentRole.METRIC_JUDGE, body=METRIC_JUDGE_BODY),
}

# Roles allowed to carry an image attachment on the request.
MULTIMODAL_ROLES = frozenset({AgentRole.IMAGE_VALIDATOR_MULTIMODAL, AgentRole.METRIC_JUDGE})


def load_templates(prompt_dir: str | Path | None = None) -> dict[AgentRole, PromptTemplate]:
    """Return the default templates, with per-role body overrides applied.

    An override file replaces only the body; the system message, if any,
    is kept. Unknown files in the directory are ignored.
    """
    templates = dict(DEFAULT_TEMPLATES)
    if prompt_dir is None:
        return templates
    base = Path(prompt_dir)
    for role in AgentRole:
        candidate = base / f"{role.value}.txt"
        if candidate.is_file():
            default = templates[role]
            templates[role] = PromptTemplate(
                role=role,
                body=candidate.read_text(encoding="utf-8"),
                system_message=default.system_message,
            )
    return templates
