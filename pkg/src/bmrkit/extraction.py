"""Per-chunk extraction: prompt assembly, backend calls with repair retries,
tagged-response parsing, and a bounded worker pool.

A completion backend is anything with a ``complete(prompt, model, params)``
method that returns response text; it must tolerate concurrent calls up to the
worker cap. Chunks extract independently with locally numbered ids; the merge
stage renumbers globally, so the next-group-id hint in continuation prompts is
advisory only.
"""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from typing import Any, Mapping, Protocol

import requests

from .chunker import Chunk
from .ingest import SourceDocument
from .issues import (
    LAYER_SYNTACTIC,
    ValidationIssue,
    issue_error,
    issue_warning,
)
from .schema import BmrRecord, parse_record

logger = logging.getLogger(__name__)

TAG_FALLBACK = "TAG_FALLBACK"
NO_JSON_PAYLOAD = "NO_JSON_PAYLOAD"
BACKEND_ERROR = "BACKEND_ERROR"
PARSE_FAILED = "PARSE_FAILED"
SCHEMA_INVALID = "SCHEMA_INVALID"

PROMPT_TEMPLATE = """Please convert the following manufacturing batch record (chunk {chunk_number} of {total_chunks}) into a structured JSON format according to the provided template.

Input:
- Manufacturing Batch Record: {mbr}
- Template Structure: {template}

Requirements:
1. Generate a complete, valid JSON that strictly follows proper JSON syntax
2. Your JSON MUST contain separate top-level arrays for groups, phases, and steps:
   {
       "header": {general information about the document},
       "groups": [array of Group objects],
       "phases": [array of Phase objects],
       "steps": [array of Step objects]
   }
3. Do NOT nest phases inside groups or steps inside phases
4. CRITICAL JSON SYNTAX REQUIREMENTS:
   a) Use only valid JSON syntax - NO JavaScript functions
   b) Do NOT use TypeScript class initialization syntax
   c) For empty arrays, use [] not Array()
   d) Ensure all table rows have the same number of columns
5. Each object must include ALL fields defined in its class
6. Include ALL relevant information from the batch record
7. IMPORTANT: When encountering text from images (indicated by "[Image Text: ...]"), create content objects with type "image" and place the extracted text in "text" field

Wrap your response in <json></json> tags as follows:
<json>
{
    "header": {...},
    "groups": [...],
    "phases": [...],
    "steps": [...]
}
</json>

Ensure your JSON is fully parsable - no syntax errors, unclosed brackets, or trailing commas."""

CONTINUATION_TEMPLATE = (
    "This chunk continues the same record. Earlier chunks already used group "
    "ids up to group-{last}; start any new group ids at group-{next}."
)


class BackendError(Exception):
    """Transport-level failure talking to the completion backend."""


class NoJsonPayloadError(Exception):
    """The response carried neither <json></json> tags nor a brace pair."""


class ExtractionBackend(Protocol):
    def complete(self, prompt: str, model: str, params: Mapping[str, Any]) -> str: ...


@dataclass
class ExtractionConfig:
    model: str = "bmr-extractor"
    max_attempts: int = 3
    workers_cap: int = 8
    generation_params: dict = dc_field(default_factory=dict)
    reprocess_threshold: float | None = None

    def __post_init__(self) -> None:
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be at least 1")
        if self.workers_cap < 1:
            raise ValueError("workers_cap must be at least 1")


@dataclass
class ChunkResult:
    """Outcome for one chunk: a record or a failure reason, never both."""

    index: int
    record: BmrRecord | None
    attempts_used: int
    issues: list[ValidationIssue] = dc_field(default_factory=list)
    failure: str | None = None


def build_prompt(
    chunk: Chunk,
    chunk_number: int,
    total_chunks: int,
    schema_text: str,
    last_group_id: int = 0,
) -> str:
    """Fill the prompt template for one chunk.

    Continuation chunks reuse the same template plus one appended line naming
    the next free group id; substitution order keeps user content from being
    re-scanned for placeholders.
    """
    if not 1 <= chunk_number <= total_chunks:
        raise ValueError(f"chunk_number {chunk_number} outside 1..{total_chunks}")
    prompt = PROMPT_TEMPLATE.replace("{chunk_number}", str(chunk_number))
    prompt = prompt.replace("{total_chunks}", str(total_chunks))
    prompt = prompt.replace("{template}", schema_text)
    prompt = prompt.replace("{mbr}", chunk.text)
    if chunk_number > 1:
        prompt += "\n\n" + CONTINUATION_TEMPLATE.format(
            last=last_group_id, next=last_group_id + 1
        )
    return prompt


def extract_json_block(response: str) -> tuple[str, list[ValidationIssue]]:
    """Text strictly between the first <json> and the last </json>.

    Falls back to the first-{/last-} substring with a TAG_FALLBACK warning
    when the tags are absent; raises NoJsonPayloadError when neither exists.
    """
    open_idx = response.find("<json>")
    close_idx = response.rfind("</json>")
    if open_idx != -1 and close_idx != -1 and close_idx > open_idx:
        return response[open_idx + len("<json>") : close_idx], []
    brace_open = response.find("{")
    brace_close = response.rfind("}")
    if brace_open != -1 and brace_close > brace_open:
        warning = issue_warning(
            LAYER_SYNTACTIC, "", TAG_FALLBACK,
            "response was not wrapped in <json></json>; used brace fallback",
        )
        return response[brace_open : brace_close + 1], [warning]
    raise NoJsonPayloadError("response contains no JSON payload")


def _repair_section(issues: list[ValidationIssue]) -> str:
    lines = [
        "",
        "",
        "Your previous response was rejected for the following reasons:",
    ]
    for issue in issues:
        where = f" at {issue.path}" if issue.path else ""
        lines.append(f"- {issue.code}{where}: {issue.message}")
    lines.append(
        "Return the complete corrected JSON, wrapped in <json></json> tags."
    )
    return "\n".join(lines)


def process_single_chunk(
    index: int,
    chunk: Chunk,
    last_group_id: int,
    total_chunks: int,
    cfg: ExtractionConfig,
    backend: ExtractionBackend,
) -> ChunkResult:
    """Extract one chunk, retrying up to ``cfg.max_attempts`` times.

    Each retry re-sends the original prompt plus a repair section listing the
    previous attempt's issue codes and messages. The final failure reason
    mirrors the stage the last attempt died in; payload extraction failures
    count as parse failures.
    """
    from .schema import schema_prompt_text

    base_prompt = build_prompt(
        chunk, index + 1, total_chunks, schema_prompt_text(), last_group_id
    )
    all_issues: list[ValidationIssue] = []
    prior_issues: list[ValidationIssue] = []
    failure = PARSE_FAILED

    for attempt in range(1, cfg.max_attempts + 1):
        attempt_issues: list[ValidationIssue] = []
        prompt = base_prompt
        if prior_issues:
            prompt += _repair_section(prior_issues)

        try:
            response = backend.complete(prompt, cfg.model, cfg.generation_params)
        except Exception as exc:
            attempt_issues.append(
                issue_error(LAYER_SYNTACTIC, "", BACKEND_ERROR, str(exc))
            )
            all_issues.extend(attempt_issues)
            prior_issues = attempt_issues
            failure = BACKEND_ERROR
            logger.debug("chunk %d attempt %d: backend error: %s", index, attempt, exc)
            continue

        try:
            payload, tag_issues = extract_json_block(response)
        except NoJsonPayloadError as exc:
            attempt_issues.append(
                issue_error(LAYER_SYNTACTIC, "", NO_JSON_PAYLOAD, str(exc))
            )
            all_issues.extend(attempt_issues)
            prior_issues = attempt_issues
            failure = PARSE_FAILED
            continue
        attempt_issues.extend(tag_issues)

        try:
            value = json.loads(payload)
        except (json.JSONDecodeError, ValueError) as exc:
            attempt_issues.append(
                issue_error(LAYER_SYNTACTIC, "", PARSE_FAILED, f"invalid JSON: {exc}")
            )
            all_issues.extend(attempt_issues)
            prior_issues = attempt_issues
            failure = PARSE_FAILED
            continue

        parsed = parse_record(value)
        if isinstance(parsed, list):
            attempt_issues.extend(parsed)
            all_issues.extend(attempt_issues)
            prior_issues = attempt_issues
            failure = SCHEMA_INVALID
            logger.debug(
                "chunk %d attempt %d: %d schema issues", index, attempt, len(parsed)
            )
            continue

        all_issues.extend(attempt_issues)
        return ChunkResult(
            index=index, record=parsed, attempts_used=attempt, issues=all_issues
        )

    return ChunkResult(
        index=index,
        record=None,
        attempts_used=cfg.max_attempts,
        issues=all_issues,
        failure=failure,
    )


def run_parallel(
    chunks: list[Chunk], cfg: ExtractionConfig, backend: ExtractionBackend
) -> list[ChunkResult]:
    """Extract all chunks with at most ``min(workers_cap, len(chunks))``
    in flight; results come back ordered by chunk index regardless of
    completion order, and one chunk's failure never aborts the others."""
    if not chunks:
        return []
    workers = min(cfg.workers_cap, len(chunks))
    total = len(chunks)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(process_single_chunk, chunk.index, chunk, 0, total, cfg, backend)
            for chunk in chunks
        ]
        return [f.result() for f in futures]


def _chunk_coverage(result: ChunkResult, chunk: Chunk) -> float:
    from .metrics import crude_word_coverage

    if result.record is None:
        return 0.0
    return crude_word_coverage(SourceDocument.from_text(chunk.text), result.record)


def reprocess_low_coverage(
    results: list[ChunkResult],
    chunks: list[Chunk],
    threshold: float,
    cfg: ExtractionConfig,
    backend: ExtractionBackend,
) -> list[ChunkResult]:
    """Re-extract chunks whose crude word coverage fell strictly below the
    threshold, once each, keeping whichever result covers more."""
    if not 0 <= threshold <= 100:
        raise ValueError(f"threshold {threshold} outside [0, 100]")
    out = list(results)
    for i, (result, chunk) in enumerate(zip(results, chunks)):
        coverage = _chunk_coverage(result, chunk)
        if coverage >= threshold:
            continue
        logger.info(
            "chunk %d coverage %.1f%% below %.1f%%; reprocessing",
            chunk.index, coverage, threshold,
        )
        retry = process_single_chunk(
            chunk.index, chunk, 0, len(chunks), cfg, backend
        )
        if _chunk_coverage(retry, chunk) > coverage:
            out[i] = retry
    return out


class HttpChatBackend:
    """Chat-completion JSON-over-HTTP backend.

    Sends the prompt as a single user message along with the model name and
    generation parameters; expects one text completion back. The bearer token
    is read from the environment variable named in the configuration.
    Transport errors are retried up to ``transport_retries`` times.
    """

    def __init__(
        self,
        endpoint: str,
        auth_env: str = "BMR_API_TOKEN",
        timeout: float = 60.0,
        transport_retries: int = 2,
        session: requests.Session | None = None,
    ) -> None:
        self.endpoint = endpoint
        self.auth_env = auth_env
        self.timeout = timeout
        self.transport_retries = transport_retries
        self._session = session or requests.Session()

    def complete(self, prompt: str, model: str, params: Mapping[str, Any]) -> str:
        headers = {}
        token = os.environ.get(self.auth_env, "") if self.auth_env else ""
        if token:
            headers["Authorization"] = f"Bearer {token}"
        body: dict[str, Any] = {
            "model": model,
            "messages": [{"role": "user", "content": prompt}],
        }
        body.update(params)

        last_exc: Exception | None = None
        for _ in range(self.transport_retries + 1):
            try:
                response = self._session.post(
                    self.endpoint, json=body, headers=headers, timeout=self.timeout
                )
            except requests.RequestException as exc:
                last_exc = exc
                continue
            if response.status_code != 200:
                raise BackendError(
                    f"HTTP {response.status_code} from {self.endpoint}: "
                    f"{response.text[:200]}"
                )
            try:
                data = response.json()
                return data["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise BackendError(f"malformed completion payload: {exc}") from exc
        raise BackendError(f"transport failure: {last_exc}")
