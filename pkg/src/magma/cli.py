"""Command-line entry points: generate, batch, evaluate, replay."""

from __future__ import annotations

import argparse
import json
import shutil
import sys
import tempfile
import threading
from collections import Counter
from concurrent.futures import ThreadPoolExecutor, as_completed
from datetime import datetime, timezone
from pathlib import Path

from .config import load_config
from .datasets import dataset_budget, ingest_dataset
from .errors import MagmaError
from .evaluation import (
    AggregateRow,
    SweepPoint,
    aggregate,
    build_report,
    categorize,
    render_csv,
    render_markdown,
    sweep_reflection,
)
from .executors import (
    Executor,
    HarnessExecutor,
    RecordingExecutor,
    ReplayExecutor,
    StubExecutor,
)
from .model import (
    Category,
    InstructionalInput,
    MetricVector,
    PipelineConfig,
    RunRecord,
    TerminalState,
)
from .pipeline import default_instruction, run_question
from .runstore import RunStore
from .runtime import AgentRuntime, Cassette, runtime_from_config

GENERATE_QUESTION_ID = "q001"


def _build_input(args: argparse.Namespace) -> InstructionalInput:
    if args.instruction:
        raw = Path(args.instruction).read_text(encoding="utf-8").strip()
    else:
        raw = default_instruction(args.knowledge_point, args.grade, args.requirements)
    return InstructionalInput(
        knowledge_point=args.knowledge_point,
        subject_grade=args.grade,
        diagram_requirements=args.requirements,
        raw_instruction=raw,
        category=Category(args.category),
    )


def _make_executor(
    config: PipelineConfig, kind: str, semaphore: threading.Semaphore | None = None
) -> Executor:
    if kind == "stub":
        return StubExecutor(script=None)
    if not config.sandbox_cmd:
        raise MagmaError(
            "harness executor requires sandbox_cmd (config) or MAGMA_SANDBOX_CMD (env)"
        )
    return HarnessExecutor(config.sandbox_cmd, semaphore=semaphore)


def _default_out_dir() -> str:
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ")
    return f"runs/run-{stamp}"


def cmd_generate(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    input = _build_input(args)
    store = RunStore(args.out or _default_out_dir())
    store.write_config_snapshot(config)

    question_id = GENERATE_QUESTION_ID
    if args.replay:
        cassette_path = store.cassette_path(question_id)
        shutil.copyfile(args.replay, cassette_path)
        cassette = Cassette(mode="replay", path=cassette_path)
        runtime = AgentRuntime(mode="replay", cassette=cassette)
        executor: Executor = ReplayExecutor(cassette)
    else:
        cassette = Cassette(mode="record", path=store.cassette_path(question_id))
        runtime = runtime_from_config(config, mode="record", cassette=cassette)
        # Recording execution outcomes alongside agent exchanges is what
        # lets `magma replay` re-run with no sandbox and no network.
        executor = RecordingExecutor(_make_executor(config, args.executor), cassette)

    record = run_question(runtime, executor, input, config, store, question_id)
    print(f"{question_id}: {record.terminal_state.value}")
    if record.final_text is not None:
        print(f"answer: {record.final_text.answer}")
    if record.final_diagram is not None:
        print(f"diagram: {store.root / store.relativize(record.final_diagram)}")
    return 1 if record.terminal_state is TerminalState.FAILED else 0


def cmd_batch(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    entries = ingest_dataset(args.dataset)
    store = RunStore(args.out)
    store.write_config_snapshot(config)
    print(f"dataset budget: {dataset_budget(entries)} questions")

    jobs: list[tuple[str, InstructionalInput]] = []
    for entry in entries:
        for index in range(1, entry.per_point_count + 1):
            question_id = f"{entry.id}-{index:02d}"
            if store.question_complete(question_id):
                continue
            jobs.append((question_id, entry.input))

    semaphore = threading.Semaphore(config.sandbox_slots)
    notes: Counter[str] = Counter()
    terminals: Counter[str] = Counter()

    def run_one(question_id: str, input: InstructionalInput) -> TerminalState:
        cassette = Cassette(mode="record", path=store.cassette_path(question_id))
        runtime = runtime_from_config(config, mode="record", cassette=cassette)
        executor = RecordingExecutor(
            _make_executor(config, args.executor, semaphore=semaphore), cassette
        )
        record = run_question(runtime, executor, input, config, store, question_id, notes=notes)
        return record.terminal_state

    with ThreadPoolExecutor(max_workers=args.workers) as pool:
        futures = {pool.submit(run_one, qid, input): qid for qid, input in jobs}
        for future in as_completed(futures):
            question_id = futures[future]
            try:
                terminal = future.result()
            except MagmaError as exc:
                print(f"{question_id}: error: {exc}", file=sys.stderr)
                terminal = TerminalState.FAILED
            terminals[terminal.value] += 1
            print(f"{question_id}: {terminal.value}")

    summary = {
        "scheduled": len(jobs),
        "skipped_complete": dataset_budget(entries) - len(jobs),
        "terminals": dict(terminals),
        "footnotes": dict(notes),
    }
    (store.root / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(json.dumps(summary, sort_keys=True))
    return 0


def _load_run(run_dir: Path) -> tuple[str, list[tuple[RunRecord, MetricVector]], PipelineConfig]:
    store = RunStore(run_dir, create=False)
    config = store.load_config_snapshot()
    rows: list[tuple[RunRecord, MetricVector]] = []
    for question_id in store.question_ids():
        data = store.load_question(question_id)
        record = RunRecord.from_dict(
            {
                "run_id": data["run_id"],
                "input": data["input"],
                "stage1_trace": [],
                "final_text": data.get("final_text"),
                "stage2_trace": [],
                "final_diagram": data.get("artifact"),
                "metrics": data["metrics"],
                "terminal_state": data["terminal_state"],
            }
        )
        rows.append((record, record.metrics))
    return run_dir.name, rows, config


def cmd_evaluate(args: argparse.Namespace) -> int:
    rows: list[AggregateRow] = []
    labeled: list[tuple[str, RunRecord, MetricVector]] = []
    sweep_input: list[tuple[int, MetricVector]] = []
    for run_dir in args.runs:
        label, pairs, config = _load_run(Path(run_dir))
        if not pairs:
            print(f"{label}: no completed questions", file=sys.stderr)
            continue
        vectors = [vector for _, vector in pairs]
        rows.append(aggregate(vectors, label))
        labeled.extend((label, record, vector) for record, vector in pairs)
        sweep_input.extend((config.i_max_text, vector) for vector in vectors)

    sweep: list[SweepPoint] = sweep_reflection(sweep_input) if sweep_input else []
    report = build_report(rows, categorize(labeled), sweep)

    target = Path(args.report)
    if args.format == "json":
        target.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    elif args.format == "csv":
        target.write_text(render_csv(rows), encoding="utf-8")
    else:
        target.write_text(render_markdown(report), encoding="utf-8")
    print(f"report written to {target}")
    return 0


def _replay_run(run_dir: Path) -> bool:
    """Re-execute every question from its cassette and diff the event streams."""
    source = RunStore(run_dir, create=False)
    config = source.load_config_snapshot()
    identical = True
    with tempfile.TemporaryDirectory(prefix="magma-replay-") as scratch:
        for question_id in source.question_ids():
            cassette_file = source.cassette_path(question_id)
            if not cassette_file.exists():
                print(f"{question_id}: no cassette, skipped", file=sys.stderr)
                identical = False
                continue
            data = source.load_question(question_id)
            input = InstructionalInput.from_dict(data["input"])

            replay_store = RunStore(Path(scratch) / question_id)
            replay_store.write_config_snapshot(config)
            cassette = Cassette(mode="replay", path=cassette_file)
            runtime = AgentRuntime(mode="replay", cassette=cassette)
            run_question(
                runtime, ReplayExecutor(cassette), input, config, replay_store, question_id
            )

            original = RunStore.normalized_events(
                source.events_path, question_id=question_id, strip_seq=True
            )
            replayed = RunStore.normalized_events(
                replay_store.events_path, question_id=question_id, strip_seq=True
            )
            match = original == replayed
            identical = identical and match
            print(f"{question_id}: {'identical' if match else 'DIVERGED'}")
    return identical


def cmd_replay(args: argparse.Namespace) -> int:
    return 0 if _replay_run(Path(args.run)) else 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="magma",
        description="Generate multimodal math problems with a self-reflective agent pipeline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    generate = sub.add_parser("generate", help="run one question end-to-end")
    generate.add_argument("--knowledge-point", required=True)
    generate.add_argument("--grade", required=True, help="subject and grade level")
    generate.add_argument("--requirements", required=True, help="diagram requirements")
    generate.add_argument(
        "--category", default=Category.MIXED_KNOWLEDGE.value, choices=[c.value for c in Category]
    )
    generate.add_argument("--instruction", help="file with the raw teacher instruction")
    generate.add_argument("--config", help="JSON config file")
    generate.add_argument("--out", help="run directory (default: runs/run-<timestamp>)")
    generate.add_argument("--replay", help="cassette file to replay instead of live calls")
    generate.add_argument("--executor", default="harness", choices=["stub", "harness"])
    generate.set_defaults(func=cmd_generate)

    batch = sub.add_parser("batch", help="run a dataset with bounded concurrency")
    batch.add_argument("--dataset", required=True)
    batch.add_argument("--out", required=True)
    batch.add_argument("--config", help="JSON config file")
    batch.add_argument("--workers", type=int, default=1)
    batch.add_argument("--executor", default="harness", choices=["stub", "harness"])
    batch.set_defaults(func=cmd_batch)

    evaluate = sub.add_parser("evaluate", help="aggregate metrics over run directories")
    evaluate.add_argument("--runs", nargs="+", required=True)
    evaluate.add_argument("--report", required=True)
    evaluate.add_argument("--format", default="json", choices=["json", "csv", "md"])
    evaluate.set_defaults(func=cmd_evaluate)

    replay = sub.add_parser("replay", help="re-execute a run from its cassettes and diff events")
    replay.add_argument("--run", required=True)
    replay.set_defaults(func=cmd_replay)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return int(args.func(args))
    except MagmaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
