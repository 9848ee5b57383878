"""Command-line front end: process | chunk | validate | score.

``process`` runs the full pipeline (load, chunk, parallel extraction, merge,
validation layers, metrics) and writes the record, validation report, metrics
report, and run summary. Exit codes: 0 when validation passes, 1 when
error-severity issues exist, 2 on pipeline failure. Configuration comes from
an optional JSON file; any key can be overridden by the flag of the same name,
and flags win.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import dataclass, field as dc_field
from pathlib import Path

from .chunker import ChunkingConfig, WordTokenizer, chunk_text_by_tokens
from .extraction import (
    ExtractionConfig,
    HttpChatBackend,
    reprocess_low_coverage,
    run_parallel,
)
from .ingest import DecodeError, ReadError, load_markdown
from .merge import EmptyMergeError, merge_chunk_results, resolve_cross_references
from .metrics import WeightVector, compute_metrics, render_metrics_table
from .mock_backend import MockBackend
from .schema import parse_record, serialize_record
from .validation import ValidationReport, validate_all

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ISSUES = 1
EXIT_PIPELINE_FAILURE = 2


@dataclass
class PipelineConfig:
    max_tokens: int = 3000
    hard_split_threshold: int = 2000
    workers_cap: int = 8
    max_attempts: int = 3
    backend: str = "mock"
    endpoint: str = ""
    model: str = "bmr-extractor"
    auth_env: str = "BMR_API_TOKEN"
    timeout: float = 60.0
    transport_retries: int = 2
    reprocess_threshold: float | None = None
    weights: WeightVector = dc_field(default_factory=WeightVector)
    out: str = "record.json"
    report_out: str = "validation.json"
    metrics_out: str = "metrics.json"
    summary_out: str | None = None

    @classmethod
    def from_file(cls, path: str) -> "PipelineConfig":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        weights = data.pop("weights", None)
        cfg = cls(**data)
        if weights:
            cfg.weights = WeightVector(**weights)
        return cfg


@dataclass
class RunSummary:
    chunk_count: int
    attempts_per_chunk: list[int]
    total_seconds: float
    load_seconds: float
    avg_chunk_seconds: float
    validation_passed: bool
    composite_score: float

    def to_json(self) -> dict:
        return {
            "chunk_count": self.chunk_count,
            "attempts_per_chunk": self.attempts_per_chunk,
            "total_seconds": self.total_seconds,
            "load_seconds": self.load_seconds,
            "avg_chunk_seconds": self.avg_chunk_seconds,
            "validation_passed": self.validation_passed,
            "composite_score": self.composite_score,
        }


def _make_backend(cfg: PipelineConfig):
    if cfg.backend == "mock":
        return MockBackend()
    if cfg.backend == "http":
        if not cfg.endpoint:
            raise ValueError("http backend requires an endpoint")
        return HttpChatBackend(
            endpoint=cfg.endpoint,
            auth_env=cfg.auth_env,
            timeout=cfg.timeout,
            transport_retries=cfg.transport_retries,
        )
    raise ValueError(f"unknown backend kind {cfg.backend!r}")


def _write_json(path: str, payload: dict | list) -> None:
    Path(path).write_text(
        json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )


def cmd_process(input_path: str, cfg: PipelineConfig) -> int:
    started = time.perf_counter()
    try:
        doc = load_markdown(input_path)
    except (ReadError, DecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PIPELINE_FAILURE
    load_seconds = time.perf_counter() - started

    tok = WordTokenizer()
    chunks = chunk_text_by_tokens(
        doc.text,
        ChunkingConfig(cfg.max_tokens, cfg.hard_split_threshold),
        tok,
    )
    if not chunks:
        print("error: document produced no chunks", file=sys.stderr)
        return EXIT_PIPELINE_FAILURE

    extraction_cfg = ExtractionConfig(
        model=cfg.model,
        max_attempts=cfg.max_attempts,
        workers_cap=cfg.workers_cap,
        reprocess_threshold=cfg.reprocess_threshold,
    )
    try:
        backend = _make_backend(cfg)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PIPELINE_FAILURE

    extract_started = time.perf_counter()
    results = run_parallel(chunks, extraction_cfg, backend)
    if cfg.reprocess_threshold is not None:
        results = reprocess_low_coverage(
            results, chunks, cfg.reprocess_threshold, extraction_cfg, backend
        )
    extract_seconds = time.perf_counter() - extract_started

    try:
        record, merge_issues = merge_chunk_results(results)
    except EmptyMergeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PIPELINE_FAILURE
    record, refs = resolve_cross_references(record)

    record_json = json.dumps(serialize_record(record), indent=2, ensure_ascii=False)
    report = validate_all(record_json, refs=refs)
    report = ValidationReport(issues=merge_issues + report.issues)

    total_seconds = time.perf_counter() - started
    metrics = compute_metrics(
        doc, record, refs=refs, weights=cfg.weights, processing_seconds=total_seconds
    )

    _write_json(cfg.out, json.loads(record_json))
    _write_json(cfg.report_out, report.to_json())
    _write_json(cfg.metrics_out, metrics.to_json())

    summary = RunSummary(
        chunk_count=len(chunks),
        attempts_per_chunk=[r.attempts_used for r in results],
        total_seconds=total_seconds,
        load_seconds=load_seconds,
        avg_chunk_seconds=extract_seconds / len(chunks),
        validation_passed=report.passed,
        composite_score=metrics.composite,
    )
    if cfg.summary_out:
        _write_json(cfg.summary_out, summary.to_json())

    print(render_metrics_table(metrics))
    print(
        f"chunks={summary.chunk_count} "
        f"attempts={summary.attempts_per_chunk} "
        f"total={summary.total_seconds:.2f}s "
        f"load={summary.load_seconds:.2f}s "
        f"avg_chunk={summary.avg_chunk_seconds:.2f}s "
        f"validation={'pass' if summary.validation_passed else 'FAIL'} "
        f"composite={summary.composite_score:.2f}"
    )
    return EXIT_OK if report.passed else EXIT_ISSUES


def cmd_chunk(input_path: str, cfg: PipelineConfig, out: str | None) -> int:
    try:
        doc = load_markdown(input_path)
    except (ReadError, DecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PIPELINE_FAILURE
    chunks = chunk_text_by_tokens(
        doc.text,
        ChunkingConfig(cfg.max_tokens, cfg.hard_split_threshold),
        WordTokenizer(),
    )
    payload = [
        {"index": c.index, "token_count": c.token_count, "text": c.text}
        for c in chunks
    ]
    if out:
        _write_json(out, payload)
    else:
        print(json.dumps(payload, indent=2, ensure_ascii=False))
    return EXIT_OK


def cmd_validate(record_path: str) -> int:
    try:
        text = Path(record_path).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PIPELINE_FAILURE
    refs = None
    try:
        parsed = parse_record(json.loads(text))
        if not isinstance(parsed, list):
            _, refs = resolve_cross_references(parsed)
    except (json.JSONDecodeError, ValueError):
        pass
    report = validate_all(text, refs=refs)
    print(json.dumps(report.to_json(), indent=2, ensure_ascii=False))
    return EXIT_OK if report.passed else EXIT_ISSUES


def cmd_score(source_path: str, record_path: str, cfg: PipelineConfig) -> int:
    try:
        doc = load_markdown(source_path)
        text = Path(record_path).read_text(encoding="utf-8")
    except (ReadError, DecodeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PIPELINE_FAILURE
    try:
        parsed = parse_record(json.loads(text))
    except (json.JSONDecodeError, ValueError) as exc:
        print(f"error: record is not valid JSON: {exc}", file=sys.stderr)
        return EXIT_PIPELINE_FAILURE
    if isinstance(parsed, list):
        print("error: record does not parse against the schema", file=sys.stderr)
        for issue in parsed:
            print(f"  {issue.code} at {issue.path}: {issue.message}", file=sys.stderr)
        return EXIT_PIPELINE_FAILURE
    record, refs = resolve_cross_references(parsed)
    metrics = compute_metrics(doc, record, refs=refs, weights=cfg.weights)
    _write_json(cfg.metrics_out, metrics.to_json())
    print(render_metrics_table(metrics))
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bmrkit",
        description="Transform batch-record markdown into validated, scored JSON.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON config file; flags override its keys")
        p.add_argument("--max-tokens", type=int, dest="max_tokens")
        p.add_argument(
            "--hard-split-threshold", type=int, dest="hard_split_threshold"
        )
        p.add_argument("--workers", type=int, dest="workers_cap")
        p.add_argument("--max-attempts", type=int, dest="max_attempts")
        p.add_argument("--backend", choices=["mock", "http"])
        p.add_argument(
            "--mock", action="store_true", help="shorthand for --backend mock"
        )
        p.add_argument("--endpoint")
        p.add_argument("--model")
        p.add_argument("--reprocess-threshold", type=float, dest="reprocess_threshold")
        p.add_argument(
            "--weights", help="JSON object of per-metric weights, e.g. "
            '\'{"unit_fidelity": 2.0}\''
        )
        p.add_argument("--metrics-out", dest="metrics_out")

    p_process = sub.add_parser("process", help="run the full pipeline")
    p_process.add_argument("input")
    add_common(p_process)
    p_process.add_argument("--out")
    p_process.add_argument("--report-out", dest="report_out")
    p_process.add_argument("--summary-out", dest="summary_out")

    p_chunk = sub.add_parser("chunk", help="chunk a document and stop")
    p_chunk.add_argument("input")
    add_common(p_chunk)
    p_chunk.add_argument("--out")

    p_validate = sub.add_parser("validate", help="validate a record file")
    p_validate.add_argument("record")

    p_score = sub.add_parser("score", help="score a record against its source")
    p_score.add_argument("source")
    p_score.add_argument("record")
    add_common(p_score)

    return parser


def _config_from_args(args: argparse.Namespace) -> PipelineConfig:
    cfg = (
        PipelineConfig.from_file(args.config)
        if getattr(args, "config", None)
        else PipelineConfig()
    )
    for key in (
        "max_tokens",
        "hard_split_threshold",
        "workers_cap",
        "max_attempts",
        "backend",
        "endpoint",
        "model",
        "reprocess_threshold",
        "metrics_out",
        "out",
        "report_out",
        "summary_out",
    ):
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, key, value)
    if getattr(args, "mock", False):
        cfg.backend = "mock"
    raw_weights = getattr(args, "weights", None)
    if raw_weights:
        overrides = json.loads(raw_weights)
        base = {name: getattr(cfg.weights, name) for name in vars(cfg.weights)}
        base.update(overrides)
        cfg.weights = WeightVector(**base)
    return cfg


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.WARNING)
    args = _build_parser().parse_args(argv)
    if args.command == "validate":
        return cmd_validate(args.record)
    try:
        cfg = _config_from_args(args)
    except (ValueError, TypeError, OSError, json.JSONDecodeError) as exc:
        print(f"error: bad configuration: {exc}", file=sys.stderr)
        return EXIT_PIPELINE_FAILURE
    if args.command == "process":
        return cmd_process(args.input, cfg)
    if args.command == "chunk":
        return cmd_chunk(args.input, cfg, args.out)
    if args.command == "score":
        return cmd_score(args.source, args.record, cfg)
    raise AssertionError(f"unhandled command {args.command}")


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
