"""Canonical batch-record model and its JSON wire format.

The record is a header plus three flat arrays (groups, phases, steps) linked
by string ids; hierarchy is expressed through references, never nesting.
``parse_record`` turns generic parsed JSON into typed objects, collecting all
shape problems instead of stopping at the first. Unknown keys are preserved
opaquely and re-emitted so nothing a backend produced is destroyed.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field as dc_field
from typing import Any

from .issues import LAYER_STRUCTURAL, ValidationIssue, issue_error

FIELD_TYPES = frozenset(
    {"text", "numeric", "date", "choice", "pass_fail", "timestamp", "boolean"}
)

CONTENT_KINDS = frozenset(
    {
        "paragraph",
        "bullet_list",
        "numbered_list",
        "note",
        "warning",
        "instruction",
        "data_form",
        "calculation",
        "table",
        "image",
        "link",
        "attachments",
    }
)

ATTACHMENT_KINDS = frozenset({"BOM", "BOE", "other"})

HEADER_KEYS = (
    "completion_date",
    "expiry_date",
    "name",
    "quantity",
    "sku",
    "start_date",
)

GROUP_ID_RE = re.compile(r"^group-[1-9]\d*$")
PHASE_ID_RE = re.compile(r"^phase-[1-9]\d*$")
STEP_ID_RE = re.compile(r"^step-[1-9]\d*$")

# Issue codes produced by parse_record.
MISSING_FIELD = "MISSING_FIELD"
BAD_FIELD_TYPE = "BAD_FIELD_TYPE"
BAD_CONTENT_KIND = "BAD_CONTENT_KIND"
ROW_WIDTH_MISMATCH = "ROW_WIDTH_MISMATCH"
BAD_ID_FORMAT = "BAD_ID_FORMAT"


@dataclass
class Field:
    """A typed value slot: a list of declared types plus an arbitrary value."""

    types: list[str]
    value: Any = None
    extra: dict = dc_field(default_factory=dict)

    def to_json(self) -> dict:
        out: dict = {"type": list(self.types), "value": self.value}
        out.update(self.extra)
        return out


@dataclass
class Header:
    completion_date: Field
    expiry_date: Field
    name: Field
    quantity: Field
    sku: Field
    start_date: Field
    extra: dict = dc_field(default_factory=dict)

    @classmethod
    def empty(cls) -> "Header":
        return cls(
            completion_date=Field(["date"]),
            expiry_date=Field(["date"]),
            name=Field(["text"]),
            quantity=Field(["numeric"]),
            sku=Field(["text"]),
            start_date=Field(["date"]),
        )

    def to_json(self) -> dict:
        out = {key: getattr(self, key).to_json() for key in HEADER_KEYS}
        out.update(self.extra)
        return out


@dataclass
class FormField:
    """One fill-in entry of a data form (label, value, optional unit/limits)."""

    label: str
    value: str | None = None
    unit: str | None = None
    limits: str | None = None
    notes: str | None = None
    extra: dict = dc_field(default_factory=dict)

    def to_json(self) -> dict:
        out: dict = {"label": self.label, "value": self.value}
        for key in ("unit", "limits", "notes"):
            val = getattr(self, key)
            if val is not None:
                out[key] = val
        out.update(self.extra)
        return out


@dataclass
class Variable:
    name: str
    description: str
    value: Any = None
    unit: str | None = None
    extra: dict = dc_field(default_factory=dict)

    def to_json(self) -> dict:
        out: dict = {"name": self.name, "description": self.description}
        if self.value is not None:
            out["value"] = self.value
        if self.unit is not None:
            out["unit"] = self.unit
        out.update(self.extra)
        return out


@dataclass
class CalcResult:
    value: Any
    unit: str | None = None
    extra: dict = dc_field(default_factory=dict)

    def to_json(self) -> dict:
        out: dict = {"value": self.value}
        if self.unit is not None:
            out["unit"] = self.unit
        out.update(self.extra)
        return out


@dataclass
class Calculation:
    formula: str
    variables: list[Variable] = dc_field(default_factory=list)
    result: CalcResult | None = None
    notes: str | None = None
    extra: dict = dc_field(default_factory=dict)

    def to_json(self) -> dict:
        out: dict = {
            "formula": self.formula,
            "variables": [v.to_json() for v in self.variables],
        }
        if self.result is not None:
            out["result"] = self.result.to_json()
        if self.notes is not None:
            out["notes"] = self.notes
        out.update(self.extra)
        return out


@dataclass
class Content:
    """One content block of a step; ``kind`` selects which payload applies."""

    kind: str
    text: str = ""
    items: list[str] | None = None
    fields: list[FormField] | None = None
    calculation: Calculation | None = None
    headers: list[str] | None = None
    rows: list[list] | None = None
    link: dict | None = None
    attachment: dict | None = None
    extra: dict = dc_field(default_factory=dict)

    def to_json(self) -> dict:
        out: dict = {"type": self.kind, "text": self.text}
        if self.items is not None:
            out["items"] = list(self.items)
        if self.fields is not None:
            out["fields"] = [f.to_json() for f in self.fields]
        if self.calculation is not None:
            out["calculation"] = self.calculation.to_json()
        if self.headers is not None:
            out["headers"] = list(self.headers)
        if self.rows is not None:
            out["rows"] = [list(r) for r in self.rows]
        if self.link is not None:
            out["link"] = dict(self.link)
        if self.attachment is not None:
            out["attachment"] = dict(self.attachment)
        out.update(self.extra)
        return out


@dataclass
class Step:
    id: str
    phase_id: str
    group_id: str
    step_name: Field
    step_type: Field
    content: list[Content] = dc_field(default_factory=list)
    extra: dict = dc_field(default_factory=dict)

    def to_json(self) -> dict:
        out: dict = {
            "id": self.id,
            "phase_id": self.phase_id,
            "group_id": self.group_id,
            "step_name": self.step_name.to_json(),
            "step_type": self.step_type.to_json(),
            "content": [c.to_json() for c in self.content],
        }
        out.update(self.extra)
        return out


@dataclass
class Phase:
    id: str
    group_id: str
    phase_name: Field
    extra: dict = dc_field(default_factory=dict)

    def to_json(self) -> dict:
        out: dict = {
            "id": self.id,
            "group_id": self.group_id,
            "phase_name": self.phase_name.to_json(),
        }
        out.update(self.extra)
        return out


@dataclass
class Group:
    id: str
    group_name: Field
    extra: dict = dc_field(default_factory=dict)

    def to_json(self) -> dict:
        out: dict = {"id": self.id, "group_name": self.group_name.to_json()}
        out.update(self.extra)
        return out


@dataclass
class BmrRecord:
    header: Header
    groups: list[Group] = dc_field(default_factory=list)
    phases: list[Phase] = dc_field(default_factory=list)
    steps: list[Step] = dc_field(default_factory=list)
    extra: dict = dc_field(default_factory=dict)

    @classmethod
    def empty(cls) -> "BmrRecord":
        return cls(header=Header.empty())


def serialize_record(record: BmrRecord) -> dict:
    out: dict = {
        "header": record.header.to_json(),
        "groups": [g.to_json() for g in record.groups],
        "phases": [p.to_json() for p in record.phases],
        "steps": [s.to_json() for s in record.steps],
    }
    out.update(record.extra)
    return out


# --------------------------------------------------------------------------
# Parsing


def _join(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key


class _Parser:
    def __init__(self) -> None:
        self.issues: list[ValidationIssue] = []

    def error(self, path: str, code: str, message: str) -> None:
        self.issues.append(issue_error(LAYER_STRUCTURAL, path, code, message))

    def field(self, value: Any, path: str) -> Field:
        if not isinstance(value, dict):
            self.error(path, MISSING_FIELD, "expected a field object")
            return Field(types=["text"])
        types = value.get("type")
        if "type" not in value:
            self.error(_join(path, "type"), MISSING_FIELD, "field is missing its type list")
            types = ["text"]
        elif not isinstance(types, list) or not types:
            self.error(
                _join(path, "type"), BAD_FIELD_TYPE, "type must be a non-empty list"
            )
            types = ["text"]
        else:
            for t in types:
                if t not in FIELD_TYPES:
                    self.error(
                        _join(path, "type"), BAD_FIELD_TYPE, f"unknown field type {t!r}"
                    )
        if "value" not in value:
            self.error(_join(path, "value"), MISSING_FIELD, "field is missing its value")
        extra = {k: v for k, v in value.items() if k not in ("type", "value")}
        return Field(types=list(types), value=value.get("value"), extra=extra)

    def form_field(self, value: Any, path: str) -> FormField:
        if not isinstance(value, dict):
            self.error(path, MISSING_FIELD, "expected a form field object")
            return FormField(label="")
        label = value.get("label")
        if not isinstance(label, str) or not label:
            self.error(_join(path, "label"), MISSING_FIELD, "form field needs a label")
            label = ""
        if "value" not in value:
            self.error(_join(path, "value"), MISSING_FIELD, "form field is missing its value")
        known = ("label", "value", "unit", "limits", "notes")
        extra = {k: v for k, v in value.items() if k not in known}
        return FormField(
            label=label,
            value=value.get("value"),
            unit=value.get("unit"),
            limits=value.get("limits"),
            notes=value.get("notes"),
            extra=extra,
        )

    def variable(self, value: Any, path: str) -> Variable:
        if not isinstance(value, dict):
            self.error(path, MISSING_FIELD, "expected a variable object")
            return Variable(name="", description="")
        name = value.get("name")
        if not isinstance(name, str) or not name:
            self.error(_join(path, "name"), MISSING_FIELD, "variable needs a name")
            name = ""
        description = value.get("description")
        if not isinstance(description, str):
            self.error(
                _join(path, "description"), MISSING_FIELD, "variable needs a description"
            )
            description = ""
        known = ("name", "description", "value", "unit")
        extra = {k: v for k, v in value.items() if k not in known}
        return Variable(
            name=name,
            description=description,
            value=value.get("value"),
            unit=value.get("unit"),
            extra=extra,
        )

    def calculation(self, value: Any, path: str) -> Calculation:
        if not isinstance(value, dict):
            self.error(path, MISSING_FIELD, "expected a calculation object")
            return Calculation(formula="")
        formula = value.get("formula")
        if not isinstance(formula, str):
            self.error(_join(path, "formula"), MISSING_FIELD, "calculation needs a formula")
            formula = ""
        raw_vars = value.get("variables")
        if not isinstance(raw_vars, list):
            self.error(
                _join(path, "variables"), MISSING_FIELD, "calculation needs a variables list"
            )
            raw_vars = []
        variables = [
            self.variable(v, f"{_join(path, 'variables')}[{i}]")
            for i, v in enumerate(raw_vars)
        ]
        result = None
        raw_result = value.get("result")
        if raw_result is not None:
            if not isinstance(raw_result, dict) or "value" not in raw_result:
                self.error(_join(path, "result"), MISSING_FIELD, "result needs a value")
            else:
                result_extra = {
                    k: v for k, v in raw_result.items() if k not in ("value", "unit")
                }
                result = CalcResult(
                    value=raw_result.get("value"),
                    unit=raw_result.get("unit"),
                    extra=result_extra,
                )
        known = ("formula", "variables", "result", "notes")
        extra = {k: v for k, v in value.items() if k not in known}
        return Calculation(
            formula=formula,
            variables=variables,
            result=result,
            notes=value.get("notes"),
            extra=extra,
        )

    def content(self, value: Any, path: str) -> Content:
        if not isinstance(value, dict):
            self.error(path, MISSING_FIELD, "expected a content object")
            return Content(kind="paragraph")
        kind = value.get("type")
        if "type" not in value:
            self.error(_join(path, "type"), MISSING_FIELD, "content is missing its type")
            kind = "paragraph"
        elif not isinstance(kind, str) or kind not in CONTENT_KINDS:
            self.error(
                _join(path, "type"), BAD_CONTENT_KIND, f"unknown content kind {kind!r}"
            )
            kind = "paragraph"
        text = value.get("text")
        if not isinstance(text, str):
            self.error(_join(path, "text"), MISSING_FIELD, "content needs a text string")
            text = ""

        items = value.get("items")
        if items is not None and not isinstance(items, list):
            self.error(_join(path, "items"), MISSING_FIELD, "items must be a list")
            items = None
        fields = None
        raw_fields = value.get("fields")
        if raw_fields is not None:
            if not isinstance(raw_fields, list):
                self.error(_join(path, "fields"), MISSING_FIELD, "fields must be a list")
            else:
                fields = [
                    self.form_field(f, f"{_join(path, 'fields')}[{i}]")
                    for i, f in enumerate(raw_fields)
                ]
        calculation = None
        if value.get("calculation") is not None:
            calculation = self.calculation(
                value["calculation"], _join(path, "calculation")
            )
        headers = value.get("headers")
        if headers is not None and not isinstance(headers, list):
            self.error(_join(path, "headers"), MISSING_FIELD, "headers must be a list")
            headers = None
        rows = value.get("rows")
        if rows is not None and not isinstance(rows, list):
            self.error(_join(path, "rows"), MISSING_FIELD, "rows must be a list")
            rows = None
        link = value.get("link")
        if link is not None and not isinstance(link, dict):
            self.error(_join(path, "link"), MISSING_FIELD, "link must be an object")
            link = None
        attachment = value.get("attachment")
        if attachment is not None and not isinstance(attachment, dict):
            self.error(
                _join(path, "attachment"), MISSING_FIELD, "attachment must be an object"
            )
            attachment = None

        # Kind-specific payload requirements.
        if kind == "table":
            if headers is None:
                self.error(_join(path, "headers"), MISSING_FIELD, "table needs headers")
            elif rows is not None:
                for i, row in enumerate(rows):
                    if not isinstance(row, list) or len(row) != len(headers):
                        self.error(
                            f"{_join(path, 'rows')}[{i}]",
                            ROW_WIDTH_MISMATCH,
                            f"row width differs from {len(headers)} header columns",
                        )
        elif kind == "data_form":
            if not fields:
                self.error(
                    _join(path, "fields"), MISSING_FIELD, "data_form needs form fields"
                )
        elif kind == "calculation":
            if calculation is None:
                self.error(
                    _join(path, "calculation"),
                    MISSING_FIELD,
                    "calculation content needs a calculation payload",
                )
        elif kind in ("bullet_list", "numbered_list"):
            if items is None:
                self.error(_join(path, "items"), MISSING_FIELD, f"{kind} needs items")
        elif kind == "link":
            if link is None or "link_text" not in link or "url" not in link:
                self.error(
                    _join(path, "link"), MISSING_FIELD, "link content needs link_text and url"
                )
        elif kind == "attachments":
            if attachment is None or "name" not in attachment:
                self.error(
                    _join(path, "attachment"),
                    MISSING_FIELD,
                    "attachments content needs an attachment payload",
                )
            elif attachment.get("kind") not in ATTACHMENT_KINDS:
                self.error(
                    f"{_join(path, 'attachment')}.kind",
                    BAD_FIELD_TYPE,
                    f"attachment kind must be one of {sorted(ATTACHMENT_KINDS)}",
                )

        known = (
            "type",
            "text",
            "items",
            "fields",
            "calculation",
            "headers",
            "rows",
            "link",
            "attachment",
        )
        extra = {k: v for k, v in value.items() if k not in known}
        return Content(
            kind=kind,
            text=text,
            items=items,
            fields=fields,
            calculation=calculation,
            headers=headers,
            rows=rows,
            link=link,
            attachment=attachment,
            extra=extra,
        )

    def identifier(self, value: Any, path: str, pattern: re.Pattern) -> str:
        if not isinstance(value, str) or value == "":
            self.error(path, MISSING_FIELD, "missing id")
            return ""
        if not pattern.match(value):
            self.error(path, BAD_ID_FORMAT, f"id {value!r} does not match the expected format")
        return value

    def header(self, value: Any) -> Header:
        if not isinstance(value, dict):
            self.error("header", MISSING_FIELD, "header must be an object")
            return Header.empty()
        fields = {}
        for key in HEADER_KEYS:
            if key not in value:
                self.error(_join("header", key), MISSING_FIELD, f"header is missing {key}")
                fields[key] = Field(["text"])
            else:
                fields[key] = self.field(value[key], _join("header", key))
        extra = {k: v for k, v in value.items() if k not in HEADER_KEYS}
        return Header(extra=extra, **fields)

    def group(self, value: Any, path: str) -> Group:
        if not isinstance(value, dict):
            self.error(path, MISSING_FIELD, "expected a group object")
            return Group(id="", group_name=Field(["text"]))
        gid = self.identifier(value.get("id"), _join(path, "id"), GROUP_ID_RE)
        if "group_name" not in value:
            self.error(_join(path, "group_name"), MISSING_FIELD, "group needs group_name")
            name = Field(["text"])
        else:
            name = self.field(value["group_name"], _join(path, "group_name"))
        extra = {k: v for k, v in value.items() if k not in ("id", "group_name")}
        return Group(id=gid, group_name=name, extra=extra)

    def phase(self, value: Any, path: str) -> Phase:
        if not isinstance(value, dict):
            self.error(path, MISSING_FIELD, "expected a phase object")
            return Phase(id="", group_id="", phase_name=Field(["text"]))
        pid = self.identifier(value.get("id"), _join(path, "id"), PHASE_ID_RE)
        gid = self.identifier(value.get("group_id"), _join(path, "group_id"), GROUP_ID_RE)
        if "phase_name" not in value:
            self.error(_join(path, "phase_name"), MISSING_FIELD, "phase needs phase_name")
            name = Field(["text"])
        else:
            name = self.field(value["phase_name"], _join(path, "phase_name"))
        extra = {
            k: v for k, v in value.items() if k not in ("id", "group_id", "phase_name")
        }
        return Phase(id=pid, group_id=gid, phase_name=name, extra=extra)

    def step(self, value: Any, path: str) -> Step:
        if not isinstance(value, dict):
            self.error(path, MISSING_FIELD, "expected a step object")
            return Step(
                id="", phase_id="", group_id="",
                step_name=Field(["text"]), step_type=Field(["text"]),
            )
        sid = self.identifier(value.get("id"), _join(path, "id"), STEP_ID_RE)
        pid = self.identifier(value.get("phase_id"), _join(path, "phase_id"), PHASE_ID_RE)
        gid = self.identifier(value.get("group_id"), _join(path, "group_id"), GROUP_ID_RE)
        names = {}
        for key in ("step_name", "step_type"):
            if key not in value:
                self.error(_join(path, key), MISSING_FIELD, f"step needs {key}")
                names[key] = Field(["text"])
            else:
                names[key] = self.field(value[key], _join(path, key))
        raw_content = value.get("content")
        if not isinstance(raw_content, list):
            self.error(_join(path, "content"), MISSING_FIELD, "step needs a content list")
            raw_content = []
        content = [
            self.content(c, f"{_join(path, 'content')}[{i}]")
            for i, c in enumerate(raw_content)
        ]
        known = ("id", "phase_id", "group_id", "step_name", "step_type", "content")
        extra = {k: v for k, v in value.items() if k not in known}
        return Step(
            id=sid,
            phase_id=pid,
            group_id=gid,
            step_name=names["step_name"],
            step_type=names["step_type"],
            content=content,
            extra=extra,
        )


def parse_record(value: Any) -> BmrRecord | list[ValidationIssue]:
    """Parse generic JSON into a typed record, or return every issue found.

    Shape problems (missing members, bad type strings, malformed ids, ragged
    table rows) are all reported with record paths. Uniqueness and reference
    resolution are deliberately left to the structural validator so that layer
    can report them on an otherwise parseable record.
    """
    p = _Parser()
    if not isinstance(value, dict):
        p.error("", MISSING_FIELD, "record must be a JSON object")
        return p.issues

    if "header" not in value:
        p.error("header", MISSING_FIELD, "record is missing header")
        header = Header.empty()
    else:
        header = p.header(value["header"])

    arrays: dict[str, list] = {}
    for key, parse_one in (("groups", p.group), ("phases", p.phase), ("steps", p.step)):
        raw = value.get(key)
        if key not in value or not isinstance(raw, list):
            p.error(key, MISSING_FIELD, f"record needs a {key} array")
            arrays[key] = []
        else:
            arrays[key] = [parse_one(v, f"{key}[{i}]") for i, v in enumerate(raw)]

    if p.issues:
        return p.issues
    extra = {
        k: v for k, v in value.items() if k not in ("header", "groups", "phases", "steps")
    }
    return BmrRecord(
        header=header,
        groups=arrays["groups"],
        phases=arrays["phases"],
        steps=arrays["steps"],
        extra=extra,
    )


# --------------------------------------------------------------------------
# Schema prompt asset

SCHEMA_TEMPLATE = '''type FieldType = "text" | "numeric" | "date" | "choice" |
                 "pass_fail" | "timestamp" | "boolean";

class Field {
    type: FieldType[];
    value: any;
    constructor(type: FieldType[], value: any) {
        this.type = type;
        this.value = value;
    }
}

class Header {
    completion_date: Field;
    expiry_date: Field;
    name: Field;
    quantity: Field;
    sku: Field;
    start_date: Field;

    constructor() {
        this.completion_date = new Field(
            ["date"],
            "The date the batch process was completed"
        );
        this.expiry_date = new Field(
            ["date"],
            "Expiration date of the final product batch"
        );
        this.name = new Field(
            ["text"],
            "Name of the batch record template"
        );
        this.quantity = new Field(
            ["numeric"],
            "The quantity or yield of the final product"
        );
        this.sku = new Field(
            ["text"],
            "Stock Keeping Unit identifier"
        );
        this.start_date = new Field(
            ["date"],
            "Date when the batch process started"
        );
    }
}

class Content {
    type: "paragraph" | "bullet_list" | "numbered_list" |
          "note" | "warning" | "instruction" | "data_form" |
          "calculation" | "table" | "image";
    text: string;
    items?: string[];
    fields?: {
        label: string;
        value: string | null;
        unit?: string;
        limits?: string;
        notes?: string;
    }[];
    calculation?: {
        formula: string;
        variables: {
            name: string;
            description: string;
            value?: any;
            unit?: string;
        }[];
        result?: {
            value: any;
            unit?: string;
        };
        notes?: string;
    };
    headers?: string[];
    rows?: any[][];
}

class Step {
    id: string;
    phase_id: string;
    group_id: string;
    step_name: Field;
    step_type: Field;
    content: Content[];
}

class Phase {
    id: string;
    group_id: string;
    phase_name: Field;
}

class Group {
    id: string;
    group_name: Field;
}'''


def schema_prompt_text() -> str:
    """The fixed typed-interface schema text embedded in extraction prompts."""
    return SCHEMA_TEMPLATE
