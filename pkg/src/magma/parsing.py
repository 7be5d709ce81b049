"""Converts free-form agent text into structured pipeline types.

Three families of agent output are handled: bracket-tagged question drafts
(with a JSON fallback form), validator verdict prose (with a JSON feedback
fallback), and drawing-code bodies. All functions here are pure.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum

from .errors import ParseError
from .model import DrawingCode, FeedbackItem, InstructionalInput, QuestionDraft, Verdict

# Tags of a well-formed draft document, in output order.
DRAFT_TAGS = ("Question", "Explanation", "Answer", "Image Description")

_TAG_RE = re.compile(
    r"^[ \t]*\[\s*(question|explanation|answer|image description)\s*\]",
    re.IGNORECASE | re.MULTILINE,
)

_FENCE_RE = re.compile(r"^```[a-zA-Z0-9_+-]*\s*$")

# Source prompts are bilingual in provenance; normalize CJK bracket variants.
_BRACKET_TRANSLATION = str.maketrans({"【": "[", "】": "]", "［": "[", "］": "]"})


def _normalize_brackets(text: str) -> str:
    return text.translate(_BRACKET_TRANSLATION)


def strip_code_fences(text: str) -> str:
    """Drop a leading/trailing markdown fence pair if present."""
    lines = text.strip().splitlines()
    if len(lines) >= 2 and _FENCE_RE.match(lines[0]) and _FENCE_RE.match(lines[-1]):
        return "\n".join(lines[1:-1]).strip()
    return text.strip()


@dataclass(frozen=True)
class TaggedDocument:
    """Ordered (tag, body) sections parsed from bracket-tagged output."""

    sections: tuple[tuple[str, str], ...]

    def body(self, tag: str) -> str | None:
        for name, body in self.sections:
            if name.lower() == tag.lower():
                return body
        return None


def parse_tagged(raw: str) -> TaggedDocument:
    """Split bracket-tagged text into sections; tags match case-insensitively."""
    text = _normalize_brackets(raw)
    matches = list(_TAG_RE.finditer(text))
    sections: list[tuple[str, str]] = []
    seen: set[str] = set()
    for index, match in enumerate(matches):
        tag = match.group(1).title()
        key = tag.lower()
        if key in seen:
            raise ParseError(f"duplicate tag [{tag}]")
        seen.add(key)
        end = matches[index + 1].start() if index + 1 < len(matches) else len(text)
        body = text[match.end() : end].strip()
        if body.startswith("<") and body.endswith(">"):
            body = body[1:-1].strip()
        sections.append((tag, body))
    return TaggedDocument(sections=tuple(sections))


def _context_fields(context: InstructionalInput | QuestionDraft | None) -> dict[str, str]:
    if context is None:
        return {}
    if isinstance(context, QuestionDraft):
        return {
            "subject": context.subject,
            "grade_level": context.grade_level,
            "knowledge_point": context.knowledge_point,
        }
    # The single subject/grade input field backs both draft fields.
    return {
        "subject": context.subject_grade,
        "grade_level": context.subject_grade,
        "knowledge_point": context.knowledge_point,
    }


def parse_stage1_output(
    raw: str,
    context: InstructionalInput | QuestionDraft | None = None,
    iteration: int = 0,
) -> QuestionDraft:
    """Parse a generated draft in bracket-tagged or JSON object form.

    The JSON form is detected by a leading '{' and carries its own subject
    fields; bracket-form drafts inherit subject, grade level, and knowledge
    point from ``context``. Missing or empty required fields raise
    ParseError listing them.
    """
    if not raw.strip():
        raise ParseError("empty agent output")
    text = strip_code_fences(raw)
    if text.startswith("{"):
        return _parse_json_draft(text, context, iteration)
    return _parse_bracket_draft(text, context, iteration)


def _parse_json_draft(
    text: str, context: InstructionalInput | QuestionDraft | None, iteration: int
) -> QuestionDraft:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON draft: {exc}") from exc
    if not isinstance(data, dict):
        raise ParseError("JSON draft must be an object")

    inherited = _context_fields(context)
    fields: dict[str, str] = {}
    missing: list[str] = []
    for name in (
        "subject",
        "grade_level",
        "knowledge_point",
        "question_stem",
        "answer",
        "analysis",
        "image_description",
    ):
        value = data.get(name)
        if value is None or not str(value).strip():
            value = inherited.get(name)
        if value is None or not str(value).strip():
            missing.append(name)
        else:
            fields[name] = str(value).strip()
    if missing:
        raise ParseError(f"draft missing fields: {', '.join(missing)}", missing=missing)
    return QuestionDraft(iteration=iteration, **fields)


_TAG_TO_FIELD = {
    "Question": "question_stem",
    "Explanation": "analysis",
    "Answer": "answer",
    "Image Description": "image_description",
}


def _parse_bracket_draft(
    text: str, context: InstructionalInput | QuestionDraft | None, iteration: int
) -> QuestionDraft:
    document = parse_tagged(text)
    fields: dict[str, str] = {}
    missing: list[str] = []
    for tag, field_name in _TAG_TO_FIELD.items():
        body = document.body(tag)
        if body is None or not body.strip():
            missing.append(field_name)
        else:
            fields[field_name] = body.strip()

    inherited = _context_fields(context)
    for name in ("subject", "grade_level", "knowledge_point"):
        value = inherited.get(name, "")
        if not value.strip():
            missing.append(name)
        else:
            fields[name] = value
    if missing:
        raise ParseError(f"draft missing fields: {', '.join(missing)}", missing=missing)
    return QuestionDraft(iteration=iteration, **fields)


def serialize_draft_json(draft: QuestionDraft) -> str:
    """Render a draft in the JSON object form the generator may emit."""
    return json.dumps(
        {
            "subject": draft.subject,
            "grade_level": draft.grade_level,
            "knowledge_point": draft.knowledge_point,
            "question_stem": draft.question_stem,
            "image_description": draft.image_description,
            "answer": draft.answer,
            "analysis": draft.analysis,
        },
        ensure_ascii=False,
        indent=2,
    )


def serialize_draft_bracket(draft: QuestionDraft) -> str:
    """Render a draft in the bracket-tagged output form."""
    return (
        f"[Question]{draft.question_stem}\n"
        f"[Explanation]{draft.analysis}\n"
        f"[Answer]{draft.answer}\n"
        f"[Image Description]{draft.image_description}"
    )


class VerdictReading(str, Enum):
    """Three-valued outcome of reading a validator reply."""

    PASS = "Pass"
    FAIL = "Fail"
    AMBIGUOUS = "Ambiguous"

    def to_verdict(self) -> Verdict:
        # Fail-safe mapping: an unreadable validator must not approve.
        return Verdict.PASS if self is VerdictReading.PASS else Verdict.FAIL


@dataclass(frozen=True)
class ParsedVerdict:
    reading: VerdictReading
    reason: str
    feedback: tuple[FeedbackItem, ...] = ()


_NEGATIVE_RES = (
    re.compile(r"\bnot\s+pass(?:ed|es)?\b", re.IGNORECASE),
    re.compile(r"\bfail(?:ed|s|ing)?\b", re.IGNORECASE),
    re.compile(r"\brevision[_\s]?needed\b", re.IGNORECASE),
)
_POSITIVE_RES = (re.compile(r"\bpass(?:ed|es)?\b", re.IGNORECASE),)

_REASON_STRIP = " \t.,:;!—–-"


def parse_verdict(raw: str) -> ParsedVerdict:
    """Read a validator reply into Pass, Fail, or Ambiguous plus a reason.

    Total on nonempty input: never raises. The first line is scanned for
    verdict keywords first; the JSON feedback object form maps
    ``revision_needed`` to Fail with its feedback items preserved.
    """
    if not raw.strip():
        return ParsedVerdict(reading=VerdictReading.AMBIGUOUS, reason="empty reply")

    text = strip_code_fences(raw)
    if text.startswith("{"):
        parsed = _parse_json_verdict(text)
        if parsed is not None:
            return parsed

    lines = text.splitlines()
    for index, line in enumerate(lines):
        reading, span = _scan_line(line)
        if reading is None:
            continue
        # Leading separators go; trailing punctuation belongs to the reason.
        after = line[span[1] :].lstrip(_REASON_STRIP).strip()
        remainder = "\n".join(lines[index + 1 :]).strip()
        reason = after
        if remainder:
            reason = f"{reason}\n{remainder}".strip() if reason else remainder
        if not reason:
            reason = line[: span[0]].strip(_REASON_STRIP)
        return ParsedVerdict(reading=reading, reason=reason)
    return ParsedVerdict(reading=VerdictReading.AMBIGUOUS, reason=text.strip())


def _scan_line(line: str) -> tuple[VerdictReading | None, tuple[int, int]]:
    # Negative forms take precedence: "not passed" contains "passed".
    for pattern in _NEGATIVE_RES:
        match = pattern.search(line)
        if match:
            return VerdictReading.FAIL, match.span()
    for pattern in _POSITIVE_RES:
        match = pattern.search(line)
        if match:
            return VerdictReading.PASS, match.span()
    return None, (0, 0)


def _parse_json_verdict(text: str) -> ParsedVerdict | None:
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        return None
    if not isinstance(data, dict):
        return None
    status = str(data.get("status", "")).strip().lower()
    feedback_items: list[FeedbackItem] = []
    reasons: list[str] = []
    for item in data.get("feedback", []) or []:
        if not isinstance(item, dict):
            continue
        error_type = str(item.get("error_type", "")).strip()
        suggestion = str(item.get("suggestion", "")).strip()
        if error_type and suggestion:
            feedback_items.append(FeedbackItem(error_type=error_type, suggestion=suggestion))
            reasons.append(f"{error_type}: {suggestion}")
    reason = "; ".join(reasons) if reasons else status
    if status in ("revision_needed", "revision needed", "fail", "failed", "not passed"):
        return ParsedVerdict(
            reading=VerdictReading.FAIL, reason=reason, feedback=tuple(feedback_items)
        )
    if status in ("approved", "pass", "passed", "ok"):
        return ParsedVerdict(
            reading=VerdictReading.PASS, reason=reason, feedback=tuple(feedback_items)
        )
    return None


_CODE_LINE_RES = (
    re.compile(r"^(?:import|from|def|class|if|elif|else|for|while|with|try|except|finally|return|print|assert|raise|pass|lambda)\b"),
    re.compile(r"^[#@(\[{]"),
    re.compile(r"^[A-Za-z_][\w.]*\s*\("),
    re.compile(r"^[A-Za-z_][\w.,'\"\s()\[\]]*=[^=]"),
)


def _looks_like_code(line: str) -> bool:
    stripped = line.strip()
    if not stripped:
        return False
    return any(pattern.match(stripped) for pattern in _CODE_LINE_RES)


_SAVEFIG_RE = re.compile(r"(\bsavefig\(\s*)(['\"])(.*?)\2")


def rewrite_save_path(source: str, save_path: str) -> str:
    """Force every save call's path literal to the run-directory target."""
    return _SAVEFIG_RE.sub(lambda m: f"{m.group(1)}'{save_path}'", source)


def extract_code(raw: str, save_path: str, dialect: str = "python-matplotlib") -> DrawingCode:
    """Extract an executable drawing-code body from an agent reply.

    Code fences are stripped even though the prompt forbids them, leading
    prose lines before the first plausible code line are rejected, and the
    image save path is forcibly rewritten to the given target.
    """
    if not raw.strip():
        raise ParseError("empty agent output")

    text = raw.strip()
    fence_positions = [m.start() for m in re.finditer(r"^```", text, re.MULTILINE)]
    if len(fence_positions) >= 2:
        # Keep only the first fenced block; prose around it is discarded.
        first_end = text.index("\n", fence_positions[0])
        closing = fence_positions[1]
        text = text[first_end + 1 : closing].strip()
    elif len(fence_positions) == 1:
        # Unterminated fence: drop the fence line, keep what follows.
        first_end = text.index("\n", fence_positions[0]) if "\n" in text[fence_positions[0] :] else len(text)
        text = (text[: fence_positions[0]] + text[first_end + 1 :]).strip()

    lines = text.splitlines()
    start = 0
    while start < len(lines) and not _looks_like_code(lines[start]):
        start += 1
    if start == len(lines):
        raise ParseError("no code content found in reply")
    source = "\n".join(lines[start:]).strip()
    source = rewrite_save_path(source, save_path)
    return DrawingCode(source=source, dialect=dialect, save_path=save_path)
