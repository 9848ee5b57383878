"""Combine per-chunk records into one coherent record.

Each chunk extracts with locally numbered ids; the merge renumbers every
group/phase/step onto a global sequence, keeps the first non-null header
values, and resolves textual cross-references ("See Figure 2", document codes)
against the assembled record.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING

from .issues import (
    LAYER_STRUCTURAL,
    ValidationIssue,
    issue_error,
    issue_warning,
)
from .schema import HEADER_KEYS, BmrRecord, Content, Group, Phase, Step

if TYPE_CHECKING:
    from .extraction import ChunkResult

DANGLING_LOCAL_REF = "DANGLING_LOCAL_REF"
CHUNK_MISSING = "CHUNK_MISSING"
HEADER_CONFLICT = "HEADER_CONFLICT"


class EmptyMergeError(Exception):
    """No chunk produced a record; there is nothing to merge."""


@dataclass
class MergeState:
    """Highest id suffixes assigned so far; counters only ever grow."""

    max_group_id: int = 0
    max_phase_id: int = 0
    max_step_id: int = 0


@dataclass
class CrossReference:
    """A textual reference found in content, optionally resolved to a path."""

    source_path: str
    ref_text: str
    target_path: str | None = None
    resolved: bool = False

    def to_json(self) -> dict:
        return {
            "source_path": self.source_path,
            "ref_text": self.ref_text,
            "target_path": self.target_path,
            "resolved": self.resolved,
        }


def _suffix(identifier: str) -> int:
    _, _, tail = identifier.rpartition("-")
    return int(tail) if tail.isdigit() else -1


def renumber_ids(
    record: BmrRecord, state: MergeState
) -> tuple[BmrRecord, list[ValidationIssue]]:
    """Rewrite every id onto the next free global suffix, advancing ``state``.

    All phase_id/group_id references inside the record are rewritten through
    the same mapping. A local reference that does not resolve is kept verbatim
    and flagged with DANGLING_LOCAL_REF.
    """
    issues: list[ValidationIssue] = []
    group_map: dict[str, str] = {}
    phase_map: dict[str, str] = {}
    step_map: dict[str, str] = {}

    groups: list[Group] = []
    for g in record.groups:
        state.max_group_id += 1
        new_id = f"group-{state.max_group_id}"
        group_map[g.id] = new_id
        groups.append(replace(g, id=new_id))

    def remap(mapping: dict[str, str], old: str, path: str) -> str:
        if old in mapping:
            return mapping[old]
        issues.append(
            issue_warning(
                LAYER_STRUCTURAL,
                path,
                DANGLING_LOCAL_REF,
                f"reference {old!r} does not resolve within its chunk record",
            )
        )
        return old

    phases: list[Phase] = []
    for i, p in enumerate(record.phases):
        state.max_phase_id += 1
        new_id = f"phase-{state.max_phase_id}"
        phase_map[p.id] = new_id
        phases.append(
            replace(p, id=new_id, group_id=remap(group_map, p.group_id, f"phases[{i}].group_id"))
        )

    steps: list[Step] = []
    for i, s in enumerate(record.steps):
        state.max_step_id += 1
        new_id = f"step-{state.max_step_id}"
        step_map[s.id] = new_id
        steps.append(
            replace(
                s,
                id=new_id,
                phase_id=remap(phase_map, s.phase_id, f"steps[{i}].phase_id"),
                group_id=remap(group_map, s.group_id, f"steps[{i}].group_id"),
            )
        )

    renumbered = BmrRecord(
        header=record.header,
        groups=groups,
        phases=phases,
        steps=steps,
        extra=dict(record.extra),
    )
    return renumbered, issues


def merge_chunk_results(
    results: list["ChunkResult"],
) -> tuple[BmrRecord, list[ValidationIssue]]:
    """Concatenate chunk records in order after global renumbering.

    Header fields take the first non-null value across chunks; later
    conflicting values are kept out and flagged. Failed chunks contribute a
    CHUNK_MISSING issue. Raises EmptyMergeError when nothing merged.
    """
    issues: list[ValidationIssue] = []
    state = MergeState()
    merged = BmrRecord.empty()
    merged_any = False

    for result in results:
        if result.record is None:
            issues.append(
                issue_error(
                    LAYER_STRUCTURAL,
                    "",
                    CHUNK_MISSING,
                    f"chunk {result.index} produced no record"
                    + (f" ({result.failure})" if result.failure else ""),
                )
            )
            continue
        merged_any = True
        renumbered, local_issues = renumber_ids(result.record, state)
        issues.extend(local_issues)
        merged.groups.extend(renumbered.groups)
        merged.phases.extend(renumbered.phases)
        merged.steps.extend(renumbered.steps)
        for key in HEADER_KEYS:
            incoming = getattr(renumbered.header, key)
            current = getattr(merged.header, key)
            if incoming.value is None:
                continue
            if current.value is None:
                setattr(merged.header, key, incoming)
            elif current.value != incoming.value:
                issues.append(
                    issue_warning(
                        LAYER_STRUCTURAL,
                        f"header.{key}",
                        HEADER_CONFLICT,
                        f"kept {current.value!r}, chunk {result.index} "
                        f"also provided {incoming.value!r}",
                    )
                )

    if not merged_any:
        raise EmptyMergeError("no chunk produced a record")
    return merged, issues


# --------------------------------------------------------------------------
# Cross-reference resolution

FIGURE_REF_RE = re.compile(r"\bsee\s+figure\s+(\d+)", re.IGNORECASE)
TABLE_REF_RE = re.compile(r"\b(?:see|refer\s+to)\s+table\s+(\d+)", re.IGNORECASE)
STEP_REF_RE = re.compile(r"\bsee\s+step\s+(\d+)", re.IGNORECASE)
DOC_CODE_RE = re.compile(r"\b[A-Z]{2,4}-\d{4,6}(?![-\d])")
UNRESOLVABLE_NOTE_RE = re.compile(r"\bas\s+per\s+(?:the\s+)?above\b[\w\s]*", re.IGNORECASE)


def detect_reference_texts(text: str) -> list[str]:
    """Reference phrases present in free text, in order of appearance."""
    found: list[tuple[int, str]] = []
    for rx in (FIGURE_REF_RE, TABLE_REF_RE, STEP_REF_RE, DOC_CODE_RE, UNRESOLVABLE_NOTE_RE):
        for m in rx.finditer(text):
            found.append((m.start(), m.group(0)))
    found.sort()
    return [t for _, t in found]


def _content_paths_by_kind(record: BmrRecord, kind: str) -> list[str]:
    paths = []
    for i, step in enumerate(record.steps):
        for j, content in enumerate(step.content):
            if content.kind == kind:
                paths.append(f"steps[{i}].content[{j}]")
    return paths


def resolve_cross_references(
    record: BmrRecord,
) -> tuple[BmrRecord, list[CrossReference]]:
    """Link "See Figure/Table/step N" mentions and collect document codes.

    Figure and table ordinals resolve to the Nth image/table content in
    document order. Resolved references gain a link annotation on the
    referring content; document codes and "as per above" style notes are
    returned unresolved since their targets live outside the record.
    """
    refs: list[CrossReference] = []
    image_paths = _content_paths_by_kind(record, "image")
    table_paths = _content_paths_by_kind(record, "table")
    step_by_suffix = {
        _suffix(s.id): i for i, s in enumerate(record.steps) if _suffix(s.id) > 0
    }

    for i, step in enumerate(record.steps):
        for j, content in enumerate(step.content):
            path = f"steps[{i}].content[{j}]"
            texts = [content.text] + list(content.items or [])
            for text in texts:
                if not text:
                    continue
                for m in FIGURE_REF_RE.finditer(text):
                    ordinal = int(m.group(1))
                    target = (
                        image_paths[ordinal - 1] if 0 < ordinal <= len(image_paths) else None
                    )
                    refs.append(
                        _annotate(content, path, m.group(0), target)
                    )
                for m in TABLE_REF_RE.finditer(text):
                    ordinal = int(m.group(1))
                    target = (
                        table_paths[ordinal - 1] if 0 < ordinal <= len(table_paths) else None
                    )
                    refs.append(_annotate(content, path, m.group(0), target))
                for m in STEP_REF_RE.finditer(text):
                    ordinal = int(m.group(1))
                    target = (
                        f"steps[{step_by_suffix[ordinal]}]"
                        if ordinal in step_by_suffix
                        else None
                    )
                    refs.append(_annotate(content, path, m.group(0), target))
                for m in DOC_CODE_RE.finditer(text):
                    refs.append(
                        CrossReference(source_path=path, ref_text=m.group(0))
                    )
                for m in UNRESOLVABLE_NOTE_RE.finditer(text):
                    # Reported but never auto-resolved: guessing a target for
                    # "as per above procedure" would fabricate a link.
                    refs.append(
                        CrossReference(source_path=path, ref_text=m.group(0).strip())
                    )
    return record, refs


def _annotate(
    content: Content, path: str, ref_text: str, target: str | None
) -> CrossReference:
    if target is None:
        return CrossReference(source_path=path, ref_text=ref_text)
    if content.link is None:
        content.link = {"link_text": ref_text, "url": f"#{target}"}
    return CrossReference(
        source_path=path, ref_text=ref_text, target_path=target, resolved=True
    )
