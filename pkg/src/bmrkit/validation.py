"""Three validation layers: syntactic, structural, pharmaceutical compliance.

Syntactic checks run on the raw JSON text, structural checks on the parsed
record (class separation, id uniqueness, referential integrity), and the
compliance layer applies a small documented rule set derived from GMP
expectations: complete calculations, units on limited values, named steps, a
populated header block, surfaced unresolved references, and well-formed
pass/fail values. Each later layer runs only when the previous one produced
no errors, so issues always point at the first broken precondition.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field as dc_field
from typing import Any

from .issues import (
    LAYER_COMPLIANCE,
    LAYER_STRUCTURAL,
    LAYER_SYNTACTIC,
    SEVERITY_ERROR,
    ValidationIssue,
    issue_error,
    issue_warning,
)
from .merge import CrossReference
from .schema import (
    BmrRecord,
    CONTENT_KINDS,
    FIELD_TYPES,
    HEADER_KEYS,
    parse_record,
)

JSON_MALFORMED = "JSON_MALFORMED"
BAD_FIELD_TYPE = "BAD_FIELD_TYPE"
BAD_CONTENT_KIND = "BAD_CONTENT_KIND"
ROW_WIDTH_MISMATCH = "ROW_WIDTH_MISMATCH"
CODE_SYNTAX_RESIDUE = "CODE_SYNTAX_RESIDUE"

CLASS_NESTING = "CLASS_NESTING"
DUP_ID = "DUP_ID"
DANGLING_REF = "DANGLING_REF"
GROUP_MISMATCH = "GROUP_MISMATCH"
SEQ_ORDER = "SEQ_ORDER"

CALC_INCOMPLETE = "CALC_INCOMPLETE"
UNITLESS_LIMIT = "UNITLESS_LIMIT"
UNNAMED_STEP = "UNNAMED_STEP"
HEADER_GAP = "HEADER_GAP"
UNRESOLVED_REF = "UNRESOLVED_REF"
BAD_PASSFAIL = "BAD_PASSFAIL"

_CONSTRUCTOR_RESIDUE_RE = re.compile(r"\bnew\s+[A-Z][A-Za-z_]*\s*\(")

_PASSFAIL_VALUES = {None, "pass", "fail"}


@dataclass
class ValidationReport:
    issues: list[ValidationIssue] = dc_field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not any(i.severity == SEVERITY_ERROR for i in self.issues)

    def to_json(self) -> dict:
        return {"passed": self.passed, "issues": [i.to_json() for i in self.issues]}


def _join(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key


# --------------------------------------------------------------------------
# Layer 1: syntactic


def validate_syntactic(json_text: str) -> list[ValidationIssue]:
    """Check the raw payload: parseable JSON, legal type strings, uniform
    table rows, and no executable-constructor residue in the text."""
    try:
        value = json.loads(json_text)
    except (json.JSONDecodeError, ValueError) as exc:
        return [issue_error(LAYER_SYNTACTIC, "", JSON_MALFORMED, str(exc))]

    issues: list[ValidationIssue] = []
    for m in _CONSTRUCTOR_RESIDUE_RE.finditer(json_text):
        issues.append(
            issue_error(
                LAYER_SYNTACTIC,
                "",
                CODE_SYNTAX_RESIDUE,
                f"constructor call residue in output: {m.group(0)!r}",
            )
        )
    _walk_syntactic(value, "", issues)
    return issues


def _walk_syntactic(value: Any, path: str, issues: list[ValidationIssue]) -> None:
    if isinstance(value, dict):
        declared = value.get("type")
        if isinstance(declared, list):
            if not declared:
                issues.append(
                    issue_error(
                        LAYER_SYNTACTIC, _join(path, "type"), BAD_FIELD_TYPE,
                        "empty type list",
                    )
                )
            for t in declared:
                if t not in FIELD_TYPES:
                    issues.append(
                        issue_error(
                            LAYER_SYNTACTIC, _join(path, "type"), BAD_FIELD_TYPE,
                            f"unknown field type {t!r}",
                        )
                    )
        elif isinstance(declared, str):
            if declared not in CONTENT_KINDS:
                issues.append(
                    issue_error(
                        LAYER_SYNTACTIC, _join(path, "type"), BAD_CONTENT_KIND,
                        f"unknown content kind {declared!r}",
                    )
                )
        headers = value.get("headers")
        rows = value.get("rows")
        if isinstance(headers, list) and isinstance(rows, list):
            for i, row in enumerate(rows):
                if not isinstance(row, list) or len(row) != len(headers):
                    issues.append(
                        issue_error(
                            LAYER_SYNTACTIC,
                            f"{_join(path, 'rows')}[{i}]",
                            ROW_WIDTH_MISMATCH,
                            f"row width differs from {len(headers)} header columns",
                        )
                    )
        for key, child in value.items():
            _walk_syntactic(child, _join(path, key), issues)
    elif isinstance(value, list):
        for i, child in enumerate(value):
            _walk_syntactic(child, f"{path}[{i}]", issues)


# --------------------------------------------------------------------------
# Layer 2: structural


def validate_structural(record: BmrRecord) -> list[ValidationIssue]:
    """Class separation, id uniqueness, referential integrity, id ordering."""
    issues: list[ValidationIssue] = []

    for i, group in enumerate(record.groups):
        for nested in ("phases", "steps"):
            if isinstance(group.extra.get(nested), list):
                issues.append(
                    issue_error(
                        LAYER_STRUCTURAL, f"groups[{i}]", CLASS_NESTING,
                        f"group carries a nested {nested} array; arrays must stay top-level",
                    )
                )
    for i, phase in enumerate(record.phases):
        if isinstance(phase.extra.get("steps"), list):
            issues.append(
                issue_error(
                    LAYER_STRUCTURAL, f"phases[{i}]", CLASS_NESTING,
                    "phase carries a nested steps array; arrays must stay top-level",
                )
            )

    arrays = (("groups", record.groups), ("phases", record.phases), ("steps", record.steps))
    dup_arrays: set[str] = set()
    seen: dict[str, str] = {}
    for name, objs in arrays:
        for i, obj in enumerate(objs):
            if obj.id in seen:
                dup_arrays.add(name)
                issues.append(
                    issue_error(
                        LAYER_STRUCTURAL, f"{name}[{i}].id", DUP_ID,
                        f"id {obj.id!r} already used at {seen[obj.id]}",
                    )
                )
            else:
                seen[obj.id] = f"{name}[{i}].id"

    group_ids = {g.id for g in record.groups}
    phase_by_id = {p.id: p for p in record.phases}
    for i, phase in enumerate(record.phases):
        if phase.group_id not in group_ids:
            issues.append(
                issue_error(
                    LAYER_STRUCTURAL, f"phases[{i}].group_id", DANGLING_REF,
                    f"no group with id {phase.group_id!r}",
                )
            )
    for i, step in enumerate(record.steps):
        phase = phase_by_id.get(step.phase_id)
        if phase is None:
            issues.append(
                issue_error(
                    LAYER_STRUCTURAL, f"steps[{i}].phase_id", DANGLING_REF,
                    f"no phase with id {step.phase_id!r}",
                )
            )
        if step.group_id not in group_ids:
            issues.append(
                issue_error(
                    LAYER_STRUCTURAL, f"steps[{i}].group_id", DANGLING_REF,
                    f"no group with id {step.group_id!r}",
                )
            )
        elif phase is not None and step.group_id != phase.group_id:
            issues.append(
                issue_error(
                    LAYER_STRUCTURAL, f"steps[{i}].group_id", GROUP_MISMATCH,
                    f"step group {step.group_id!r} differs from its phase's "
                    f"group {phase.group_id!r}",
                )
            )

    # Ordering is meaningless once duplicates exist in an array, so the
    # sequence check is suppressed there; the duplicate is already reported.
    for name, objs in arrays:
        if name in dup_arrays:
            continue
        suffixes = [_id_suffix(o.id) for o in objs]
        for i in range(1, len(suffixes)):
            if suffixes[i] <= suffixes[i - 1]:
                issues.append(
                    issue_warning(
                        LAYER_STRUCTURAL, f"{name}[{i}].id", SEQ_ORDER,
                        f"id suffixes not strictly increasing at {objs[i].id!r}",
                    )
                )
    return issues


def _id_suffix(identifier: str) -> int:
    _, _, tail = identifier.rpartition("-")
    return int(tail) if tail.isdigit() else -1


# --------------------------------------------------------------------------
# Layer 3: compliance


def validate_compliance(
    record: BmrRecord, refs: list[CrossReference] | None = None
) -> list[ValidationIssue]:
    """GMP-motivated content rules on a structurally valid record."""
    issues: list[ValidationIssue] = []

    all_fields: list[tuple[str, Any]] = [
        (f"header.{key}", getattr(record.header, key)) for key in HEADER_KEYS
    ]
    for i, group in enumerate(record.groups):
        all_fields.append((f"groups[{i}].group_name", group.group_name))
    for i, phase in enumerate(record.phases):
        all_fields.append((f"phases[{i}].phase_name", phase.phase_name))

    for i, step in enumerate(record.steps):
        all_fields.append((f"steps[{i}].step_name", step.step_name))
        all_fields.append((f"steps[{i}].step_type", step.step_type))
        name = step.step_name.value
        if not isinstance(name, str) or not name.strip():
            issues.append(
                issue_error(
                    LAYER_COMPLIANCE, f"steps[{i}].step_name", UNNAMED_STEP,
                    "step has no name",
                )
            )
        for j, content in enumerate(step.content):
            path = f"steps[{i}].content[{j}]"
            if content.calculation is not None:
                calc = content.calculation
                if not calc.formula.strip():
                    issues.append(
                        issue_error(
                            LAYER_COMPLIANCE, f"{path}.calculation.formula",
                            CALC_INCOMPLETE, "calculation has an empty formula",
                        )
                    )
                elif not calc.variables:
                    issues.append(
                        issue_warning(
                            LAYER_COMPLIANCE, f"{path}.calculation.variables",
                            CALC_INCOMPLETE, "calculation lists no variables",
                        )
                    )
            for k, form_field in enumerate(content.fields or []):
                if form_field.limits is not None and form_field.unit is None:
                    if _looks_numeric(form_field.value, form_field.limits):
                        issues.append(
                            issue_warning(
                                LAYER_COMPLIANCE, f"{path}.fields[{k}]",
                                UNITLESS_LIMIT,
                                f"field {form_field.label!r} carries limits "
                                f"{form_field.limits!r} but no unit",
                            )
                        )

    for key in HEADER_KEYS:
        if getattr(record.header, key).value is None:
            issues.append(
                issue_warning(
                    LAYER_COMPLIANCE, f"header.{key}", HEADER_GAP,
                    f"header {key} is not populated",
                )
            )

    for path, field in all_fields:
        if "pass_fail" in field.types and field.value not in _PASSFAIL_VALUES:
            issues.append(
                issue_error(
                    LAYER_COMPLIANCE, f"{path}.value", BAD_PASSFAIL,
                    f"pass_fail value must be null, 'pass' or 'fail', got {field.value!r}",
                )
            )
    for ref in refs or []:
        if not ref.resolved:
            issues.append(
                issue_warning(
                    LAYER_COMPLIANCE, ref.source_path, UNRESOLVED_REF,
                    f"reference {ref.ref_text!r} is not resolved within the record",
                )
            )
    return issues


def _looks_numeric(value: Any, limits: str) -> bool:
    if isinstance(value, (int, float)):
        return True
    if isinstance(value, str):
        try:
            float(value)
            return True
        except ValueError:
            pass
    return value is None and any(ch.isdigit() for ch in limits)


# --------------------------------------------------------------------------
# All layers


def validate_all(
    json_text: str, refs: list[CrossReference] | None = None
) -> ValidationReport:
    """Run the layers in order, each gated on the previous having no errors."""
    issues = validate_syntactic(json_text)
    if any(i.severity == SEVERITY_ERROR for i in issues):
        return ValidationReport(issues=issues)

    parsed = parse_record(json.loads(json_text))
    if isinstance(parsed, list):
        return ValidationReport(issues=issues + parsed)

    structural = validate_structural(parsed)
    issues += structural
    if any(i.severity == SEVERITY_ERROR for i in structural):
        return ValidationReport(issues=issues)

    issues += validate_compliance(parsed, refs=refs)
    return ValidationReport(issues=issues)
