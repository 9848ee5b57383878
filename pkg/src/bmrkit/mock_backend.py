"""Deterministic rule-based extraction double.

Maps fixture-convention markdown straight to a record with no model calls:
bold header lines fill the header, second-level headings open groups,
"Phase N:" headings open phases, "**Step N:**" lines open steps, and bullets
become form fields, lists, instructions, or image content. Content that
appears before the first step (binder pages, equipment tables) is carried
forward and attached to that step so nothing is dropped.
"""

from __future__ import annotations

import json
import re

from .chunker import Chunk
from .schema import (
    BmrRecord,
    CalcResult,
    Calculation,
    Content,
    Field,
    FormField,
    Group,
    Header,
    Phase,
    Step,
    Variable,
    serialize_record,
)

_H1_RE = re.compile(r"^#\s+(.+?)\s*$")
_H2_RE = re.compile(r"^##\s+(.+?)\s*$")
_H3_PHASE_RE = re.compile(r"^###\s+Phase\s+(\d+)\s*:\s*(.+?)\s*$", re.IGNORECASE)
_H3_RE = re.compile(r"^###\s+(.+?)\s*$")
_STEP_RE = re.compile(r"^\*\*Step\s+(\d+)\s*:\s*\*\*\s*:?\s*(.+?)\s*$", re.IGNORECASE)
_BOLD_META_RE = re.compile(r"^\*\*([^*]+?)\s*:\s*\*\*\s*:?\s*(.+?)\s*$")
_CALC_RE = re.compile(r"^\*\*Calculation\s*:\s*\*\*\s*:?\s*(.*?)\s*$", re.IGNORECASE)
_BULLET_RE = re.compile(r"^\s*[-*]\s+(.*)$")
_LABELED_RE = re.compile(r"^\s*\*{0,2}([^:*]+?)\*{0,2}\s*:\s*(.*)$")
_BLANK_RUN_RE = re.compile(r"_{3,}")
_TABLE_SEPARATOR_RE = re.compile(r"^\|[\s\-:|]+\|$")
_FORMULA_RE = re.compile(r"^\s*Formula\s*:\s*(.+)$", re.IGNORECASE)
_VARIABLES_RE = re.compile(r"^\s*Variables\s*:\s*$", re.IGNORECASE)
_NUMBER_VALUE_RE = re.compile(r"^(\d+(?:\.\d+)?)\s*(\S+)?\s*((?:\+/-|±).*)?$")
_IMAGE_OPEN = "[Image Text:"

_SKIP_LABELS_RE = re.compile(
    r"^(performed by|date|signature|signed|verified by|checked by|reviewed by)\b",
    re.IGNORECASE,
)
_ACTION_VERBS = frozenset(
    {
        "add", "pass", "load", "mix", "weigh", "screen", "transfer", "charge",
        "place", "remove", "install", "attach", "verify", "ensure", "check",
        "clean", "inspect", "start", "stop", "begin", "open", "close", "set",
        "record", "collect", "discard", "label", "seal", "store",
    }
)

_HEADER_META_KEYS = {
    "product": "name",
    "batch number": "sku",
    "manufacturing date": "start_date",
}


def _join_image_marker_lines(lines: list[str]) -> list[str]:
    """Fold multi-line image markers onto a single line."""
    out: list[str] = []
    i = 0
    while i < len(lines):
        line = lines[i]
        if _IMAGE_OPEN in line and "]" not in line.split(_IMAGE_OPEN, 1)[1]:
            joined = line.rstrip()
            while i + 1 < len(lines) and "]" not in joined.split(_IMAGE_OPEN, 1)[1]:
                i += 1
                joined += " " + lines[i].strip()
            out.append(joined)
        else:
            out.append(line)
        i += 1
    return out


def _parse_number_value(rest: str) -> tuple:
    m = _NUMBER_VALUE_RE.match(rest)
    if not m:
        return rest, None, None
    unit = m.group(2)
    if unit is not None and not re.fullmatch(r"[A-Za-z°%]+", unit):
        return rest, None, None
    limits = m.group(3).strip() if m.group(3) else None
    return m.group(1), unit, limits


class _RecordBuilder:
    def __init__(self) -> None:
        self.header = Header.empty()
        self.groups: list[Group] = []
        self.phases: list[Phase] = []
        self.steps: list[Step] = []
        self.pending_group_name: str | None = None
        self.section_heading = ""
        self.fallback_name: str | None = None
        self.pending_content: list[Content] = []
        self.plain_run: list[str] = []
        self.form_run: list[FormField] = []

    # -- structure -------------------------------------------------------

    def current_group(self) -> Group:
        if self.pending_group_name is not None or not self.groups:
            name = self.pending_group_name or "General"
            self.pending_group_name = None
            group = Group(
                id=f"group-{len(self.groups) + 1}",
                group_name=Field(["text"], name),
            )
            self.groups.append(group)
        return self.groups[-1]

    def current_phase(self) -> Phase:
        if not self.phases or self.phases[-1].group_id != self.groups[-1].id:
            self.open_phase("General")
        return self.phases[-1]

    def open_phase(self, name: str) -> None:
        group = self.current_group()
        self.phases.append(
            Phase(
                id=f"phase-{len(self.phases) + 1}",
                group_id=group.id,
                phase_name=Field(["text"], name),
            )
        )

    def open_step(self, name: str) -> None:
        self.flush_runs()
        group = self.current_group()
        phase = self.current_phase()
        step = Step(
            id=f"step-{len(self.steps) + 1}",
            phase_id=phase.id,
            group_id=group.id,
            step_name=Field(["text"], name),
            step_type=Field(["text"], None),
            content=[],
        )
        if self.pending_content:
            step.content.extend(self.pending_content)
            self.pending_content = []
        self.steps.append(step)

    # -- content ---------------------------------------------------------

    def emit(self, content: Content) -> None:
        self.flush_runs()
        self._emit_raw(content)

    def _emit_raw(self, content: Content) -> None:
        if self.steps:
            self.steps[-1].content.append(content)
        else:
            self.pending_content.append(content)

    def flush_runs(self) -> None:
        if self.plain_run:
            run, self.plain_run = self.plain_run, []
            if len(run) == 1:
                self._emit_raw(Content(kind="instruction", text=run[0]))
            else:
                self._emit_raw(Content(kind="bullet_list", text="", items=run))
        if self.form_run:
            fields, self.form_run = self.form_run, []
            self._emit_raw(
                Content(kind="data_form", text="Data entry form", fields=fields)
            )

    def add_plain_bullet(self, text: str) -> None:
        if self.form_run:
            self.flush_runs()
        self.plain_run.append(text)

    def add_form_field(self, form_field: FormField) -> None:
        if self.plain_run:
            self.flush_runs()
        self.form_run.append(form_field)

    def finish(self) -> BmrRecord:
        self.flush_runs()
        if self.header.name.value is None and self.fallback_name:
            self.header.name = Field(["text"], self.fallback_name)
        return BmrRecord(
            header=self.header,
            groups=self.groups,
            phases=self.phases,
            steps=self.steps,
        )


def _parse_bullet(builder: _RecordBuilder, body: str) -> None:
    if body.startswith(_IMAGE_OPEN):
        close = body.rfind("]")
        inner = body[len(_IMAGE_OPEN) : close if close != -1 else None]
        builder.emit(Content(kind="image", text=" ".join(inner.split())))
        return
    labeled = _LABELED_RE.match(body)
    if labeled:
        label = labeled.group(1).strip()
        rest = labeled.group(2).strip()
        if _SKIP_LABELS_RE.match(label):
            return
        if _BLANK_RUN_RE.search(rest):
            after = _BLANK_RUN_RE.split(rest, maxsplit=1)[1].strip()
            unit = after.split()[0] if after else None
            builder.add_form_field(FormField(label=label, value=None, unit=unit))
            return
        if label.split()[0].lower() not in _ACTION_VERBS:
            value, unit, limits = _parse_number_value(rest)
            builder.add_form_field(
                FormField(label=label, value=value, unit=unit, limits=limits)
            )
            return
    builder.add_plain_bullet(body)


def _parse_calc_block(
    builder: _RecordBuilder, lines: list[str], start: int, title: str
) -> int:
    """Consume a calculation block; returns the index after its last line."""
    formula = ""
    variables: list[Variable] = []
    result: CalcResult | None = None
    notes: list[str] = []
    in_variables = False
    i = start
    while i < len(lines):
        line = lines[i]
        if not line.strip() or line.startswith("#") or _STEP_RE.match(line):
            break
        fm = _FORMULA_RE.match(line)
        if fm:
            formula = fm.group(1).strip()
            in_variables = False
        elif _VARIABLES_RE.match(line):
            in_variables = True
        else:
            bullet = _BULLET_RE.match(line)
            if in_variables and bullet:
                labeled = _LABELED_RE.match(bullet.group(1))
                if labeled:
                    name = labeled.group(1).strip()
                    value, unit, _ = _parse_number_value(labeled.group(2).strip())
                    try:
                        value = float(value)
                    except (TypeError, ValueError):
                        pass
                    variables.append(
                        Variable(name=name, description=name, value=value, unit=unit)
                    )
            else:
                in_variables = False
                labeled = _LABELED_RE.match(line)
                if labeled:
                    label = labeled.group(1).strip().lower()
                    rest = labeled.group(2).strip()
                    value, unit, _ = _parse_number_value(rest)
                    if any(k in label for k in ("expected", "result", "yield")):
                        try:
                            value = float(value)
                        except (TypeError, ValueError):
                            pass
                        result = CalcResult(value=value, unit=unit)
                    else:
                        notes.append(line.strip())
                else:
                    notes.append(line.strip())
        i += 1
    text = f"{title} Calculation" if title else "Calculation"
    builder.emit(
        Content(
            kind="calculation",
            text=text,
            calculation=Calculation(
                formula=formula,
                variables=variables,
                result=result,
                notes="\n".join(notes) if notes else None,
            ),
        )
    )
    return i


def _parse_table(builder: _RecordBuilder, lines: list[str], start: int) -> int:
    header_cells = [c.strip() for c in lines[start].strip().strip("|").split("|")]
    headers = [c for c in header_cells if c]
    rows: list[list] = []
    i = start + 2
    while i < len(lines) and lines[i].strip().startswith("|"):
        cells = [c.strip() for c in lines[i].strip().strip("|").split("|")]
        rows.append((cells + [""] * len(headers))[: len(headers)])
        i += 1
    builder.emit(
        Content(
            kind="table",
            text=builder.section_heading,
            headers=headers,
            rows=rows,
        )
    )
    return i


def extract_markdown_record(text: str) -> BmrRecord:
    """Map fixture-convention markdown to a record without any model call."""
    builder = _RecordBuilder()
    lines = _join_image_marker_lines(text.split("\n"))
    i = 0
    while i < len(lines):
        line = lines[i]
        if not line.strip():
            builder.flush_runs()
            i += 1
            continue

        calc = _CALC_RE.match(line)
        if calc:
            i = _parse_calc_block(builder, lines, i + 1, calc.group(1).strip())
            continue
        step = _STEP_RE.match(line)
        if step:
            builder.open_step(step.group(2))
            i += 1
            continue
        meta = _BOLD_META_RE.match(line)
        if meta:
            key = meta.group(1).strip().lower()
            if key in _HEADER_META_KEYS:
                attr = _HEADER_META_KEYS[key]
                types = ["date"] if attr.endswith("date") else ["text"]
                setattr(builder.header, attr, Field(types, meta.group(2).strip()))
                i += 1
                continue
        phase = _H3_PHASE_RE.match(line)
        if phase:
            builder.flush_runs()
            builder.open_phase(phase.group(2))
            builder.section_heading = phase.group(2)
            i += 1
            continue
        h3 = _H3_RE.match(line)
        if h3:
            builder.flush_runs()
            builder.open_phase(h3.group(1))
            builder.section_heading = h3.group(1)
            i += 1
            continue
        h2 = _H2_RE.match(line)
        if h2:
            builder.flush_runs()
            heading = h2.group(1)
            builder.pending_group_name = heading.split()[0].title()
            builder.section_heading = heading
            i += 1
            continue
        h1 = _H1_RE.match(line)
        if h1:
            builder.fallback_name = h1.group(1)
            builder.section_heading = h1.group(1)
            i += 1
            continue
        if (
            line.strip().startswith("|")
            and i + 1 < len(lines)
            and _TABLE_SEPARATOR_RE.match(lines[i + 1].strip())
        ):
            i = _parse_table(builder, lines, i)
            continue
        bullet = _BULLET_RE.match(line)
        if bullet:
            _parse_bullet(builder, bullet.group(1).strip())
            i += 1
            continue
        builder.emit(Content(kind="paragraph", text=line.strip()))
        i += 1
    return builder.finish()


def mock_extract(chunk: Chunk) -> BmrRecord:
    """Rule-based extraction of one chunk; deterministic, no model calls."""
    return extract_markdown_record(chunk.text)


_MBR_START = "- Manufacturing Batch Record: "
_MBR_END = "\n- Template Structure:"


class MockBackend:
    """Completion backend that recovers the record slice from the prompt and
    answers with the rule-based extraction, wrapped in <json></json> tags.

    Performs no network I/O and is safe under concurrent calls.
    """

    def complete(self, prompt: str, model: str, params) -> str:
        start = prompt.find(_MBR_START)
        end = prompt.find(_MBR_END, start)
        if start != -1 and end != -1:
            text = prompt[start + len(_MBR_START) : end]
        else:
            text = prompt
        record = extract_markdown_record(text)
        payload = json.dumps(serialize_record(record), indent=2, ensure_ascii=False)
        return f"<json>\n{payload}\n</json>"
