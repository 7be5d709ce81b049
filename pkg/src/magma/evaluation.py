"""Seven-metric evaluation over completed runs, plus report shapes.

Per-question metrics are booleans: six textual judgments from the judge
model and one diagram-consistency verdict derived from the stage-2 trace.
Aggregation turns them into percentages; machine outputs stay unrounded
and only rendered tables round (half-up, two decimals).
"""

from __future__ import annotations

import io
import csv as csv_module
from collections import Counter
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Iterable, Mapping

from .errors import AgentUnavailable, ContractViolation
from .model import Category, MetricVector, RunRecord, itc_verdict
from .parsing import VerdictReading, parse_verdict
from .prompts import AgentRole
from .runtime import AgentRuntime

METRIC_CRITERIA: dict[str, str] = {
    "UO": (
        "User Orientation: the generated question satisfies the instructional "
        "requirements specified in the user input."
    ),
    "LR": (
        "Language Readability: the content is grammatically fluent and free of "
        "corrupted characters or non-standard symbols."
    ),
    "QF": (
        "Question Feasibility: the question stem and its associated image "
        "information are rational and pedagogically appropriate."
    ),
    "AA": (
        "Accurate Analysis: the reasoning presented in the explanation is "
        "logically sound and coherent."
    ),
    "CA": (
        "Correct Answer: the final answer derived for the question is "
        "numerically or symbolically correct."
    ),
    "IDQ": (
        "Image Description Quality: the image description accurately captures "
        "the intended textual requirements and visual context."
    ),
}

METRIC_COLUMNS = ("UO", "LR", "QF", "AA", "CA", "IDQ")


def round_half_up(value: float, places: int = 2) -> float:
    quantum = Decimal(10) ** -places
    return float(Decimal(repr(value)).quantize(quantum, rounding=ROUND_HALF_UP))


def record_itc(record: RunRecord) -> bool:
    """Three-stage consistency verdict of the record's final cycle."""
    if not record.stage2_trace:
        return False
    final = record.stage2_trace[-1]
    return itc_verdict(
        final.syntax_ok,
        final.code_check.verdict.value == "Pass",
        final.image_check is not None and final.image_check.verdict.value == "Pass",
    )


def question_pack(record: RunRecord) -> str:
    draft = record.final_text
    assert draft is not None
    diagram = "rendered successfully" if record.final_diagram else "not produced"
    return (
        f"User input: {record.input.raw_instruction}\n"
        f"Subject: {draft.subject}\n"
        f"Grade level: {draft.grade_level}\n"
        f"Knowledge point: {draft.knowledge_point}\n"
        f"Question: {draft.question_stem}\n"
        f"Analysis: {draft.analysis}\n"
        f"Answer: {draft.answer}\n"
        f"Image Description: {draft.image_description}\n"
        f"Diagram: {diagram}"
    )


def judge_metrics(
    runtime: AgentRuntime,
    record: RunRecord,
    notes: Counter[str] | None = None,
) -> MetricVector:
    """Judge the six textual metrics and derive the consistency verdict.

    A record with no verified text fails everything. An unavailable judge
    marks that metric false and bumps the ``judge_unavailable`` footnote
    count instead of aborting the batch.
    """
    itc = record_itc(record)
    if record.final_text is None:
        return MetricVector.all_false()

    pack = question_pack(record)
    flags: dict[str, bool] = {}
    for metric_id in METRIC_COLUMNS:
        try:
            response = runtime.invoke(
                AgentRole.METRIC_JUDGE,
                {
                    "criterion_id": metric_id,
                    "criterion_text": METRIC_CRITERIA[metric_id],
                    "question_pack": pack,
                },
            )
            flags[metric_id] = parse_verdict(response.text).reading is VerdictReading.PASS
        except AgentUnavailable:
            flags[metric_id] = False
            if notes is not None:
                notes["judge_unavailable"] += 1
    return MetricVector.from_flags(
        uo=flags["UO"],
        lr=flags["LR"],
        qf=flags["QF"],
        aa=flags["AA"],
        ca=flags["CA"],
        idq=flags["IDQ"],
        itc=itc,
    )


@dataclass(frozen=True)
class AggregateRow:
    """Percentages over one labeled batch; values are unrounded."""

    label: str
    uo: float
    lr: float
    qf: float
    aa: float
    ca: float
    idq: float
    itc: float
    n: int

    @property
    def avg_text(self) -> float:
        return (self.uo + self.lr + self.qf + self.aa + self.ca + self.idq) / 6

    @classmethod
    def from_percentages(
        cls,
        label: str,
        uo: float,
        lr: float,
        qf: float,
        aa: float,
        ca: float,
        idq: float,
        itc: float = 0.0,
        n: int = 0,
    ) -> "AggregateRow":
        return cls(label=label, uo=uo, lr=lr, qf=qf, aa=aa, ca=ca, idq=idq, itc=itc, n=n)

    def to_dict(self) -> dict[str, object]:
        return {
            "label": self.label,
            "uo": self.uo,
            "lr": self.lr,
            "qf": self.qf,
            "aa": self.aa,
            "ca": self.ca,
            "idq": self.idq,
            "avg_text": self.avg_text,
            "itc": self.itc,
            "n": self.n,
        }

    def rounded(self) -> dict[str, object]:
        data = self.to_dict()
        return {
            key: round_half_up(value) if isinstance(value, float) else value
            for key, value in data.items()
        }


def aggregate(vectors: list[MetricVector], label: str) -> AggregateRow:
    """Fold per-question booleans into one percentage row."""
    if not vectors:
        raise ContractViolation("aggregate requires at least one vector")
    n = len(vectors)

    def pct(name: str) -> float:
        return 100.0 * sum(1 for v in vectors if getattr(v, name)) / n

    return AggregateRow(
        label=label,
        uo=pct("uo"),
        lr=pct("lr"),
        qf=pct("qf"),
        aa=pct("aa"),
        ca=pct("ca"),
        idq=pct("idq"),
        itc=pct("itc"),
        n=n,
    )


CATEGORIES = tuple(Category)


@dataclass(frozen=True)
class CategoryRow:
    """Per-category consistency percentages for one label; None means no data."""

    label: str
    values: Mapping[Category, float | None]

    def __post_init__(self) -> None:
        if set(self.values) != set(CATEGORIES):
            raise ContractViolation("category row must cover exactly the five categories")

    def to_dict(self) -> dict[str, object]:
        return {"label": self.label} | {
            category.value: self.values[category] for category in CATEGORIES
        }


def categorize(
    labeled_rows: Iterable[tuple[str, RunRecord, MetricVector]],
) -> list[CategoryRow]:
    """Per-category ITC percentage for each label; empty cells stay None."""
    by_label: dict[str, dict[Category, list[bool]]] = {}
    for label, record, vector in labeled_rows:
        cells = by_label.setdefault(label, {category: [] for category in CATEGORIES})
        cells[record.input.category].append(vector.itc)

    rows: list[CategoryRow] = []
    for label in sorted(by_label):
        values: dict[Category, float | None] = {}
        for category in CATEGORIES:
            hits = by_label[label][category]
            values[category] = 100.0 * sum(hits) / len(hits) if hits else None
        rows.append(CategoryRow(label=label, values=values))
    return rows


@dataclass(frozen=True)
class SweepPoint:
    """Scores at one configured iteration cap."""

    i_max: int
    avg_text: float
    itc: float

    def to_dict(self) -> dict[str, float | int]:
        return {"i_max": self.i_max, "avg_text": self.avg_text, "itc": self.itc}


def sweep_reflection(labeled: Iterable[tuple[int, MetricVector]]) -> list[SweepPoint]:
    """One series point per iteration-cap value, sorted by cap."""
    groups: dict[int, list[MetricVector]] = {}
    for cap, vector in labeled:
        groups.setdefault(cap, []).append(vector)
    points = []
    for cap in sorted(groups):
        row = aggregate(groups[cap], label=str(cap))
        points.append(SweepPoint(i_max=cap, avg_text=row.avg_text, itc=row.itc))
    return points


def build_report(
    rows: list[AggregateRow],
    categories: list[CategoryRow] | None = None,
    sweep: list[SweepPoint] | None = None,
    footnotes: Mapping[str, int] | None = None,
) -> dict[str, object]:
    """Machine-readable report with unrounded values."""
    return {
        "rows": [row.to_dict() for row in rows],
        "categories": [row.to_dict() for row in categories or []],
        "sweep": [point.to_dict() for point in sweep or []],
        "footnotes": dict(footnotes or {}),
    }


def render_csv(rows: list[AggregateRow]) -> str:
    buffer = io.StringIO()
    writer = csv_module.writer(buffer, lineterminator="\n")
    writer.writerow(["Label", "UO", "LR", "QF", "AA", "CA", "IDQ", "Avg-Text", "ITC", "N"])
    for row in rows:
        rounded = row.rounded()
        writer.writerow(
            [
                row.label,
                rounded["uo"],
                rounded["lr"],
                rounded["qf"],
                rounded["aa"],
                rounded["ca"],
                rounded["idq"],
                rounded["avg_text"],
                rounded["itc"],
                row.n,
            ]
        )
    return buffer.getvalue()


def _format_cell(value: float | None) -> str:
    return "n/a" if value is None else f"{round_half_up(value):.2f}"


def render_markdown(report: Mapping[str, object]) -> str:
    lines = [
        "| Label | UO | LR | QF | AA | CA | IDQ | Avg-Text | ITC | N |",
        "| --- | --- | --- | --- | --- | --- | --- | --- | --- | --- |",
    ]
    for raw in report.get("rows", []):  # type: ignore[union-attr]
        row = dict(raw)
        cells = [
            str(row["label"]),
            *(_format_cell(float(row[key])) for key in ("uo", "lr", "qf", "aa", "ca", "idq")),
            _format_cell(float(row["avg_text"])),
            _format_cell(float(row["itc"])),
            str(row["n"]),
        ]
        lines.append("| " + " | ".join(cells) + " |")

    categories = list(report.get("categories", []))  # type: ignore[arg-type]
    if categories:
        lines.append("")
        header = ["Label"] + [category.value for category in CATEGORIES]
        lines.append("| " + " | ".join(header) + " |")
        lines.append("|" + " --- |" * len(header))
        for raw in categories:
            row = dict(raw)
            cells = [str(row["label"])]
            for category in CATEGORIES:
                value = row[category.value]
                cells.append(_format_cell(value if value is None else float(value)))
            lines.append("| " + " | ".join(cells) + " |")

    sweep = list(report.get("sweep", []))  # type: ignore[arg-type]
    if sweep:
        lines.append("")
        lines.append("| I_max | Avg-Text | ITC |")
        lines.append("| --- | --- | --- |")
        for raw in sweep:
            point = dict(raw)
            lines.append(
                f"| {point['i_max']} | {_format_cell(float(point['avg_text']))} "
                f"| {_format_cell(float(point['itc']))} |"
            )

    footnotes = dict(report.get("footnotes", {}))  # type: ignore[arg-type]
    if footnotes:
        lines.append("")
        for key in sorted(footnotes):
            lines.append(f"footnote {key}: {footnotes[key]}")
    return "\n".join(lines) + "\n"
