"""Extraction-quality metrics, composite confidence score, and status bands.

Every metric is a recall against detectors that run over the source markdown:
step headings, form-entry bullets, calculation blocks, conditional sentences,
number/unit pairs, pipe tables, and image markers. The detectors double as the
metric denominators, so their rules are part of this module's contract and are
deliberately spelled out in the docstrings below. All metrics return a
percentage in [0, 100] and degrade to 100 when the source contains nothing to
preserve.
"""

from __future__ import annotations

import re
from bisect import bisect_left
from dataclasses import dataclass, field as dc_field, fields as dc_fields
from typing import Any, Iterator

from .chunker import split_sentences
from .ingest import SourceDocument, scan_image_markers
from .merge import CrossReference, detect_reference_texts
from .schema import BmrRecord, Content, HEADER_KEYS

STATUS_EXCELLENT = "Excellent"
STATUS_ACCEPTABLE = "Acceptable"
STATUS_NEEDS_REVIEW = "Needs review"

METRIC_NAMES = (
    "crude_word_coverage",
    "context_aware_coverage",
    "reference_coverage",
    "hierarchy_preservation",
    "sequence_preservation",
    "cross_reference_integrity",
    "calculation_fidelity",
    "conditional_logic_fidelity",
    "unit_fidelity",
    "field_accuracy",
)

_NUMBER_DOT_RE = re.compile(r"(?<=\d)\.(?=\d)")
_TOKEN_RE = re.compile(r"[a-z0-9]+")

_BOILERPLATE_RES = (
    re.compile(r"page\s+\d+\s+of\s+\d+", re.IGNORECASE),
    re.compile(r"performed\s+by", re.IGNORECASE),
    re.compile(r"date:\s*_+", re.IGNORECASE),
)

_CONDITIONAL_RE = re.compile(r"\b(if|when|unless|otherwise)\b", re.IGNORECASE)
_CONDITIONAL_KINDS = {"instruction", "note", "warning", "paragraph"}

# Longer alternatives first so e.g. "minutes" is not eaten as "min".
_UNIT_RE = re.compile(
    r"(?<![\w.])(\d+(?:\.\d+)?)\s*"
    r"(mcg|mg|kg|mL|ml|rpm|minutes|min|hours|mesh|°C|%|L|g|C)"
    r"(?![A-Za-z0-9])"
)

_STEP_HEADING_RE = re.compile(
    r"^\s*(?:#{1,6}\s+)?\*{0,2}\s*Step\s+(\d+)\s*:?\s*\*{0,2}\s*:?\s*(.+?)\s*$",
    re.IGNORECASE,
)

_FORM_BULLET_RE = re.compile(r"^\s*[-*]\s+\*{0,2}([^:*]+)\*{0,2}\s*:\s*(.*)$")
_BLANK_RUN_RE = re.compile(r"_{3,}")
_BOILERPLATE_LABEL_RE = re.compile(
    r"^(performed by|date|signature|signed|verified by|checked by|reviewed by)\b",
    re.IGNORECASE,
)
_FORM_VALUE_RE = re.compile(
    r"^(\d+(?:\.\d+)?)\s*([A-Za-z°%]+)?\s*((?:\+/-|±).*)?$"
)
_ACTION_VERBS = frozenset(
    {
        "add", "pass", "load", "mix", "weigh", "screen", "transfer", "charge",
        "place", "remove", "install", "attach", "verify", "ensure", "check",
        "clean", "inspect", "start", "stop", "begin", "open", "close", "set",
        "record", "collect", "discard", "label", "seal", "store",
    }
)

_TABLE_SEPARATOR_RE = re.compile(r"^\|[\s\-:|]+\|$")

_CALC_HEADER_RE = re.compile(r"^\s*\*{0,2}Calculation\s*:?\*{0,2}\s*(.*)$", re.IGNORECASE)
_FORMULA_LINE_RE = re.compile(r"^\s*Formula\s*:\s*(.+)$", re.IGNORECASE)
_VARIABLES_LINE_RE = re.compile(r"^\s*Variables\s*:\s*$", re.IGNORECASE)
_HEADING_LINE_RE = re.compile(r"^\s*(#{1,6}\s+|\*\*Step\s+\d+)", re.IGNORECASE)


# --------------------------------------------------------------------------
# Word normalization


def normalize_words(text: str) -> set[str]:
    """Lowercase, strip punctuation (keeping dots inside numbers like 1.5),
    split on whitespace, and drop tokens shorter than two characters."""
    return {w for w in _tokenize(text) if len(w) >= 2}


def _tokenize(text: str) -> list[str]:
    guarded = _NUMBER_DOT_RE.sub("", text.lower())
    return [m.group(0).replace("", ".") for m in _TOKEN_RE.finditer(guarded)]


def _canon_token(token: str) -> str:
    token = token.replace("×", "x")
    if re.fullmatch(r"\d+\.0+", token):
        return token.split(".", 1)[0]
    return token


def _canon_words(text: str) -> set[str]:
    return {_canon_token(w) for w in normalize_words(text)}


def _text_key(text: str) -> str:
    """Order-preserving token key for name matching (keeps short tokens)."""
    return " ".join(_canon_token(t) for t in _tokenize(text))


def _canon_number(raw: Any) -> str | None:
    try:
        return f"{float(raw):g}"
    except (TypeError, ValueError):
        return None


def _canon_unit(unit: str) -> str:
    return unit.lower()


# --------------------------------------------------------------------------
# Record-side views


def iter_record_strings(record: BmrRecord) -> Iterator[str]:
    """Every prose string in the record.

    Structural identifiers, declared type lists, and internal link targets are
    not prose and are excluded.
    """
    for key in HEADER_KEYS:
        value = getattr(record.header, key).value
        if isinstance(value, str):
            yield value
    for group in record.groups:
        if isinstance(group.group_name.value, str):
            yield group.group_name.value
    for phase in record.phases:
        if isinstance(phase.phase_name.value, str):
            yield phase.phase_name.value
    for step in record.steps:
        for field in (step.step_name, step.step_type):
            if isinstance(field.value, str):
                yield field.value
        for content in step.content:
            yield from _content_strings(content)


def _content_strings(content: Content) -> Iterator[str]:
    if content.text:
        yield content.text
    for item in content.items or []:
        if isinstance(item, str):
            yield item
    for form_field in content.fields or []:
        yield form_field.label
        for value in (form_field.value, form_field.unit, form_field.limits, form_field.notes):
            if isinstance(value, str):
                yield value
    if content.calculation is not None:
        calc = content.calculation
        yield calc.formula
        if calc.notes:
            yield calc.notes
        for variable in calc.variables:
            yield variable.name
            yield variable.description
            if isinstance(variable.value, str):
                yield variable.value
            if variable.unit:
                yield variable.unit
        if calc.result is not None:
            if isinstance(calc.result.value, str):
                yield calc.result.value
            if calc.result.unit:
                yield calc.result.unit
    for header in content.headers or []:
        if isinstance(header, str):
            yield header
    for row in content.rows or []:
        for cell in row:
            if isinstance(cell, str):
                yield cell
    if content.link is not None:
        text = content.link.get("link_text")
        if isinstance(text, str):
            yield text
        url = content.link.get("url")
        if isinstance(url, str) and not url.startswith("#"):
            yield url
    if content.attachment is not None:
        for key in ("name", "reference"):
            value = content.attachment.get(key)
            if isinstance(value, str):
                yield value


def _iter_contents(record: BmrRecord) -> Iterator[Content]:
    for step in record.steps:
        yield from step.content


# --------------------------------------------------------------------------
# Coverage metrics


def crude_word_coverage(source: SourceDocument, record: BmrRecord) -> float:
    """Word-set recall: share of normalized source words present anywhere in
    the record's prose strings."""
    src_words = normalize_words(source.text)
    if not src_words:
        return 100.0
    out_words: set[str] = set()
    for text in iter_record_strings(record):
        out_words |= normalize_words(text)
    return 100.0 * len(src_words & out_words) / len(src_words)


def _is_boilerplate(sentence: str) -> bool:
    return any(rx.search(sentence) for rx in _BOILERPLATE_RES)


def context_aware_coverage(source: SourceDocument, record: BmrRecord) -> float:
    """Sentence-level recall after canonicalization.

    A sentence counts as covered when at least 60% of its content words appear
    within a single content item or step name. Boilerplate sentences (page
    footers, signature lines) are dropped before counting.
    """
    kept: list[set[str]] = []
    for sentence in split_sentences(source.text):
        if _is_boilerplate(sentence):
            continue
        words = _canon_words(sentence)
        if words:
            kept.append(words)
    if not kept:
        return 100.0

    units: list[set[str]] = []
    for content in _iter_contents(record):
        blob = " ".join(_content_strings(content))
        if blob:
            units.append(_canon_words(blob))
    for step in record.steps:
        if isinstance(step.step_name.value, str):
            units.append(_canon_words(step.step_name.value))

    covered = 0
    for words in kept:
        needed = 0.6 * len(words)
        if any(len(words & unit) >= needed for unit in units):
            covered += 1
    return 100.0 * covered / len(kept)


def reference_coverage(
    source: SourceDocument, record: BmrRecord, refs: list[CrossReference]
) -> float:
    """Share of source-detected references represented in the record, either
    as a resolved link or carried through as a reference note."""
    detected = detect_reference_texts(source.text)
    if not detected:
        return 100.0
    blob = " ".join(iter_record_strings(record)).lower()
    blob = " ".join(blob.split())
    resolved_texts = {r.ref_text.lower() for r in refs if r.resolved}
    covered = 0
    for ref_text in detected:
        needle = " ".join(ref_text.lower().split())
        if needle in blob or needle in resolved_texts:
            covered += 1
    return 100.0 * covered / len(detected)


# --------------------------------------------------------------------------
# Structural metrics


def hierarchy_preservation(record: BmrRecord) -> float:
    """Valid parent links over all parent links. A step's group link is valid
    only when it also matches its phase's group."""
    group_ids = {g.id for g in record.groups}
    phase_by_id = {p.id: p for p in record.phases}
    total = 0
    valid = 0
    for phase in record.phases:
        total += 1
        valid += phase.group_id in group_ids
    for step in record.steps:
        total += 1
        phase = phase_by_id.get(step.phase_id)
        valid += phase is not None
        total += 1
        valid += (
            step.group_id in group_ids
            and phase is not None
            and step.group_id == phase.group_id
        )
    return 100.0 if total == 0 else 100.0 * valid / total


def detect_step_headings(text: str) -> list[str]:
    """Ordered step names from source headings like '**Step 3:** Blend'."""
    names = []
    for line in text.split("\n"):
        m = _STEP_HEADING_RE.match(line)
        if m and m.group(2).strip():
            names.append(m.group(2).strip())
    return names


def _lis_length(seq: list[int]) -> int:
    tails: list[int] = []
    for x in seq:
        i = bisect_left(tails, x)
        if i == len(tails):
            tails.append(x)
        else:
            tails[i] = x
    return len(tails)


def sequence_preservation(source: SourceDocument, record: BmrRecord) -> float:
    """Longest increasing subsequence of matched step positions over matches.

    Source step headings are matched to record steps by normalized name; the
    metric is 100 when fewer than two headings match.
    """
    headings = detect_step_headings(source.text)
    step_keys = [
        _text_key(s.step_name.value) if isinstance(s.step_name.value, str) else ""
        for s in record.steps
    ]
    used: set[int] = set()
    positions: list[int] = []
    for heading in headings:
        key = _text_key(heading)
        for idx, step_key in enumerate(step_keys):
            if idx not in used and key and step_key == key:
                used.add(idx)
                positions.append(idx)
                break
    if len(positions) < 2:
        return 100.0
    return 100.0 * _lis_length(positions) / len(positions)


def _target_exists(record: BmrRecord, target: str) -> bool:
    m = re.fullmatch(r"steps\[(\d+)\](?:\.content\[(\d+)\])?", target)
    if not m:
        return False
    step_idx = int(m.group(1))
    if step_idx >= len(record.steps):
        return False
    if m.group(2) is None:
        return True
    return int(m.group(2)) < len(record.steps[step_idx].content)


def cross_reference_integrity(record: BmrRecord) -> float:
    """Resolved internal id references over all internal id references:
    link annotations pointing at record paths plus phase/group links."""
    group_ids = {g.id for g in record.groups}
    phase_by_id = {p.id: p for p in record.phases}
    total = 0
    resolved = 0
    for content in _iter_contents(record):
        if content.link is not None:
            url = content.link.get("url", "")
            if isinstance(url, str) and url.startswith("#"):
                total += 1
                resolved += _target_exists(record, url[1:])
    for phase in record.phases:
        total += 1
        resolved += phase.group_id in group_ids
    for step in record.steps:
        phase = phase_by_id.get(step.phase_id)
        total += 2
        resolved += phase is not None
        resolved += (
            step.group_id in group_ids
            and phase is not None
            and step.group_id == phase.group_id
        )
    return 100.0 if total == 0 else 100.0 * resolved / total


# --------------------------------------------------------------------------
# Content fidelity metrics


def _norm_formula(formula: str) -> str:
    formula = formula.replace("×", "x").replace("*", "x").lower()
    return " ".join(formula.split())


def detect_source_calculations(text: str) -> list[tuple[str, list[str]]]:
    """(formula, variable names) blocks introduced by a calculation header or
    a bare 'Formula:' line; variable bullets follow a 'Variables:' line."""
    blocks: list[tuple[str, list[str]]] = []
    lines = text.split("\n")
    i = 0
    while i < len(lines):
        line = lines[i]
        starts = bool(_CALC_HEADER_RE.match(line)) or bool(_FORMULA_LINE_RE.match(line))
        if not starts:
            i += 1
            continue
        formula = ""
        variables: list[str] = []
        in_variables = False
        while i < len(lines):
            line = lines[i]
            if not line.strip():
                break
            fm = _FORMULA_LINE_RE.match(line)
            if fm:
                formula = fm.group(1).strip()
            elif _VARIABLES_LINE_RE.match(line):
                in_variables = True
            elif in_variables:
                vm = _FORM_BULLET_RE.match(line)
                if vm:
                    variables.append(vm.group(1).strip())
                else:
                    in_variables = False
            i += 1
        if formula:
            blocks.append((formula, variables))
    return blocks


def calculation_fidelity(source: SourceDocument, record: BmrRecord) -> float:
    """A source calculation is preserved when some calculation content matches
    its formula after normalization (whitespace collapsed, multiplication sign
    unified) and carries at least its listed variable names."""
    detected = detect_source_calculations(source.text)
    if not detected:
        return 100.0
    record_calcs = [
        (
            _norm_formula(c.calculation.formula),
            {_text_key(v.name) for v in c.calculation.variables},
        )
        for c in _iter_contents(record)
        if c.calculation is not None
    ]
    preserved = 0
    for formula, names in detected:
        want_formula = _norm_formula(formula)
        want_names = {_text_key(n) for n in names}
        if any(
            want_formula == got_formula and want_names <= got_names
            for got_formula, got_names in record_calcs
        ):
            preserved += 1
    return 100.0 * preserved / len(detected)


def conditional_logic_fidelity(source: SourceDocument, record: BmrRecord) -> float:
    """A conditional source sentence is preserved when an instruction, note,
    warning, or paragraph covers it (60% rule) and retains the keyword."""
    detected: list[tuple[set[str], set[str]]] = []
    for sentence in split_sentences(source.text):
        keywords = {m.group(1).lower() for m in _CONDITIONAL_RE.finditer(sentence)}
        if keywords:
            detected.append((_canon_words(sentence), keywords))
    if not detected:
        return 100.0

    units: list[set[str]] = []
    for content in _iter_contents(record):
        if content.kind in _CONDITIONAL_KINDS:
            blob = " ".join(_content_strings(content))
            if blob:
                units.append(_canon_words(blob))

    preserved = 0
    for words, keywords in detected:
        needed = 0.6 * len(words)
        if any(
            len(words & unit) >= needed and keywords & unit for unit in units
        ):
            preserved += 1
    return 100.0 * preserved / len(detected)


def detect_unit_pairs(text: str) -> list[tuple[str, str]]:
    """(number, unit) occurrences drawn from a fixed unit lexicon."""
    pairs = []
    for m in _UNIT_RE.finditer(text):
        number = _canon_number(m.group(1))
        if number is not None:
            pairs.append((number, _canon_unit(m.group(2))))
    return pairs


def _record_unit_pairs(record: BmrRecord) -> set[tuple[str, str]]:
    pairs: set[tuple[str, str]] = set()
    for text in iter_record_strings(record):
        pairs.update(detect_unit_pairs(text))
    for content in _iter_contents(record):
        for form_field in content.fields or []:
            number = _canon_number(form_field.value)
            if number is not None and form_field.unit:
                pairs.add((number, _canon_unit(form_field.unit)))
        if content.calculation is not None:
            calc = content.calculation
            for variable in calc.variables:
                number = _canon_number(variable.value)
                if number is not None and variable.unit:
                    pairs.add((number, _canon_unit(variable.unit)))
            if calc.result is not None:
                number = _canon_number(calc.result.value)
                if number is not None and calc.result.unit:
                    pairs.add((number, _canon_unit(calc.result.unit)))
    return pairs


def unit_fidelity(source: SourceDocument, record: BmrRecord) -> float:
    """A (number, unit) pair survives when the same normalized number sits
    next to the same normalized unit somewhere in the record: inside one
    string, or as a form-field/variable/result value-unit pairing."""
    detected = detect_unit_pairs(source.text)
    if not detected:
        return 100.0
    available = _record_unit_pairs(record)
    preserved = sum(1 for pair in detected if pair in available)
    return 100.0 * preserved / len(detected)


@dataclass
class FormLine:
    label: str
    value: str | None
    unit: str | None = None
    limits: str | None = None


def _parse_form_bullet(line: str) -> FormLine | None:
    if "[Image Text:" in line:
        return None
    m = _FORM_BULLET_RE.match(line)
    if not m:
        return None
    label = m.group(1).strip()
    rest = m.group(2).strip()
    if not label or _BOILERPLATE_LABEL_RE.match(label):
        return None
    if _BLANK_RUN_RE.search(rest):
        after = _BLANK_RUN_RE.split(rest, maxsplit=1)[1].strip()
        unit = after.split()[0] if after else None
        return FormLine(label=label, value=None, unit=unit)
    first_word = label.split()[0].lower()
    if first_word in _ACTION_VERBS:
        return None
    if not rest:
        return FormLine(label=label, value=None)
    vm = _FORM_VALUE_RE.match(rest)
    if vm:
        return FormLine(
            label=label,
            value=vm.group(1),
            unit=vm.group(2),
            limits=vm.group(3).strip() if vm.group(3) else None,
        )
    return FormLine(label=label, value=rest)


def detect_form_lines(text: str) -> list[FormLine]:
    """Fill-in form bullets inside step bodies.

    Signature boilerplate is skipped, as are action bullets whose 'label' is
    really an imperative instruction. Bullets inside calculation blocks are
    variable listings, not form entries, and are skipped too.
    """
    lines = text.split("\n")
    out: list[FormLine] = []
    in_step_body = False
    in_calc_block = False
    for line in lines:
        if _CALC_HEADER_RE.match(line):
            in_calc_block = True
            continue
        if in_calc_block:
            if not line.strip() or _HEADING_LINE_RE.match(line):
                in_calc_block = False
            else:
                continue
        if _STEP_HEADING_RE.match(line):
            in_step_body = True
            continue
        if re.match(r"^\s*#{1,6}\s+", line):
            in_step_body = False
            continue
        if not in_step_body:
            continue
        parsed = _parse_form_bullet(line)
        if parsed is not None:
            out.append(parsed)
    return out


def field_accuracy(source: SourceDocument, record: BmrRecord) -> float:
    """A source form line is captured when a form field matches its label and,
    when the line had a concrete value, the same normalized value. A blank in
    the source corresponds to a null field value."""
    detected = detect_form_lines(source.text)
    if not detected:
        return 100.0
    record_fields = [
        ff for content in _iter_contents(record) for ff in (content.fields or [])
    ]
    captured = 0
    for line in detected:
        want_label = _text_key(line.label)
        for ff in record_fields:
            if _text_key(ff.label) != want_label:
                continue
            if line.value is None and ff.value is None:
                captured += 1
                break
            if line.value is not None and ff.value is not None:
                if _canon_token(str(line.value).lower()) == _canon_token(str(ff.value).lower()):
                    captured += 1
                    break
    return 100.0 * captured / len(detected)


# --------------------------------------------------------------------------
# Table / image preservation


def detect_source_tables(text: str) -> list[list[str]]:
    """Header cell lists of markdown pipe tables (a separator row required)."""
    tables: list[list[str]] = []
    lines = text.split("\n")
    i = 0
    while i < len(lines):
        line = lines[i].strip()
        if (
            line.startswith("|")
            and line.endswith("|")
            and i + 1 < len(lines)
            and _TABLE_SEPARATOR_RE.match(lines[i + 1].strip())
        ):
            headers = [cell.strip() for cell in line.strip("|").split("|")]
            tables.append([h for h in headers if h])
            i += 2
            while i < len(lines) and lines[i].strip().startswith("|"):
                i += 1
        else:
            i += 1
    return tables


def table_preservation(source: SourceDocument, record: BmrRecord) -> float:
    """A source table is preserved when all of its header cells appear in some
    table content's headers."""
    source_tables = detect_source_tables(source.text)
    if not source_tables:
        return 100.0
    record_headers = [
        {_text_key(h) for h in (c.headers or []) if isinstance(h, str)}
        for c in _iter_contents(record)
        if c.kind == "table"
    ]
    preserved = 0
    for headers in source_tables:
        want = {_text_key(h) for h in headers}
        if any(want <= got for got in record_headers):
            preserved += 1
    return 100.0 * preserved / len(source_tables)


def image_preservation(source: SourceDocument, record: BmrRecord) -> float:
    """An image marker is preserved when its inner text appears in some image
    content (whitespace-collapsed comparison)."""
    markers, _ = scan_image_markers(source.text)
    if not markers:
        return 100.0
    image_texts = [
        " ".join(c.text.split()).lower()
        for c in _iter_contents(record)
        if c.kind == "image"
    ]
    preserved = 0
    for marker in markers:
        needle = " ".join(marker.inner_text.split()).lower()
        if any(needle in text for text in image_texts):
            preserved += 1
    return 100.0 * preserved / len(markers)


def unique_step_types(record: BmrRecord) -> int:
    """Count of distinct non-null step_type values."""
    values = {
        step.step_type.value
        for step in record.steps
        if step.step_type.value is not None
    }
    return len(values)


# --------------------------------------------------------------------------
# Composite score and report


@dataclass
class WeightVector:
    """Non-negative weight per percentage metric; defaults are equal."""

    crude_word_coverage: float = 1.0
    context_aware_coverage: float = 1.0
    reference_coverage: float = 1.0
    hierarchy_preservation: float = 1.0
    sequence_preservation: float = 1.0
    cross_reference_integrity: float = 1.0
    calculation_fidelity: float = 1.0
    conditional_logic_fidelity: float = 1.0
    unit_fidelity: float = 1.0
    field_accuracy: float = 1.0

    def __post_init__(self) -> None:
        values = [getattr(self, name) for name in METRIC_NAMES]
        if any(w < 0 for w in values):
            raise ValueError("weights must be non-negative")
        if sum(values) <= 0:
            raise ValueError("weights must sum to a positive value")


@dataclass
class MetricsReport:
    crude_word_coverage: float = 100.0
    context_aware_coverage: float = 100.0
    reference_coverage: float = 100.0
    hierarchy_preservation: float = 100.0
    sequence_preservation: float = 100.0
    cross_reference_integrity: float = 100.0
    calculation_fidelity: float = 100.0
    conditional_logic_fidelity: float = 100.0
    unit_fidelity: float = 100.0
    field_accuracy: float = 100.0
    table_preservation: float = 100.0
    image_preservation: float = 100.0
    unique_step_types: int = 0
    processing_seconds: float = 0.0
    composite: float = 100.0
    statuses: dict[str, str] = dc_field(default_factory=dict)

    def to_json(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in dc_fields(self)}
        return out


def status_for(score: float) -> str:
    """Band a score: Excellent at 85 and above, Acceptable from 65 below 85,
    Needs review under 65."""
    if not 0 <= score <= 100:
        raise ValueError(f"score {score} outside [0, 100]")
    if score >= 85:
        return STATUS_EXCELLENT
    if score >= 65:
        return STATUS_ACCEPTABLE
    return STATUS_NEEDS_REVIEW


def composite_score(report: MetricsReport, weights: WeightVector | None = None) -> float:
    """Weighted arithmetic mean of the ten percentage metrics."""
    weights = weights or WeightVector()
    total = sum(getattr(weights, name) for name in METRIC_NAMES)
    return sum(getattr(report, name) * getattr(weights, name) for name in METRIC_NAMES) / total


def compute_metrics(
    source: SourceDocument,
    record: BmrRecord,
    refs: list[CrossReference] | None = None,
    weights: WeightVector | None = None,
    processing_seconds: float = 0.0,
) -> MetricsReport:
    refs = refs or []
    report = MetricsReport(
        crude_word_coverage=crude_word_coverage(source, record),
        context_aware_coverage=context_aware_coverage(source, record),
        reference_coverage=reference_coverage(source, record, refs),
        hierarchy_preservation=hierarchy_preservation(record),
        sequence_preservation=sequence_preservation(source, record),
        cross_reference_integrity=cross_reference_integrity(record),
        calculation_fidelity=calculation_fidelity(source, record),
        conditional_logic_fidelity=conditional_logic_fidelity(source, record),
        unit_fidelity=unit_fidelity(source, record),
        field_accuracy=field_accuracy(source, record),
        table_preservation=table_preservation(source, record),
        image_preservation=image_preservation(source, record),
        unique_step_types=unique_step_types(record),
        processing_seconds=processing_seconds,
    )
    report.composite = composite_score(report, weights)
    report.statuses = {
        name: status_for(getattr(report, name))
        for name in METRIC_NAMES + ("table_preservation", "image_preservation")
    }
    report.statuses["composite"] = status_for(report.composite)
    return report


_TABLE_LAYOUT = (
    (
        "Structural Metrics",
        (
            ("Hierarchy Preservation", "hierarchy_preservation"),
            ("Sequence Preservation", "sequence_preservation"),
            ("Cross-Reference Integrity", "cross_reference_integrity"),
        ),
    ),
    (
        "Content Fidelity Metrics",
        (
            ("Calculation Fidelity", "calculation_fidelity"),
            ("Conditional Logic", "conditional_logic_fidelity"),
            ("Unit Fidelity", "unit_fidelity"),
            ("Field-Level Accuracy", "field_accuracy"),
            ("Table Preservation", "table_preservation"),
            ("Image Preservation", "image_preservation"),
        ),
    ),
    (
        "Coverage Metrics",
        (
            ("Crude Word Coverage", "crude_word_coverage"),
            ("Context-Aware Coverage", "context_aware_coverage"),
            ("Reference Coverage", "reference_coverage"),
        ),
    ),
)


def render_metrics_table(report: MetricsReport) -> str:
    """Aligned plain-text table grouped by metric category."""
    name_width = 34
    lines = [f"{'Metric Category':<{name_width}} {'Score':>10}  Status"]
    lines.append("-" * (name_width + 20))
    for category, rows in _TABLE_LAYOUT:
        lines.append(category)
        for label, attr in rows:
            value = getattr(report, attr)
            status = report.statuses.get(attr, "")
            lines.append(f"  {label:<{name_width - 2}} {value:>9.2f}%  {status}")
    lines.append("Performance Metrics")
    lines.append(
        f"  {'Processing Time':<{name_width - 2}} {report.processing_seconds:>8.1f} s  -"
    )
    lines.append(
        f"  {'Unique Step Types Identified':<{name_width - 2}} {report.unique_step_types:>10}  -"
    )
    lines.append("-" * (name_width + 20))
    lines.append(
        f"{'Composite Confidence Score':<{name_width}} {report.composite:>9.2f}%  "
        f"{report.statuses.get('composite', '')}"
    )
    return "\n".join(lines)
