from __future__ import annotations

import json

from hypothesis import given, settings, strategies as st

from bmrkit.schema import (
    BmrRecord,
    parse_record,
    schema_prompt_text,
    serialize_record,
)

from conftest import SAMPLE_RECORD, clean_record_json


def test_schema_text_mentions_header_class():
    assert "class Header" in schema_prompt_text()


def test_schema_text_lists_pass_fail_type():
    assert '"pass_fail" | "timestamp"' in schema_prompt_text()


def test_schema_text_is_constant():
    assert schema_prompt_text() == schema_prompt_text()


def test_parse_golden_record_file():
    value = json.loads(SAMPLE_RECORD.read_text(encoding="utf-8"))
    record = parse_record(value)
    assert isinstance(record, BmrRecord)
    assert len(record.groups) == 1
    assert len(record.phases) == 2
    assert len(record.steps) == 3
    assert record.groups[0].id == "group-1"


def test_parse_empty_record():
    value = {
        "header": clean_record_json()["header"],
        "groups": [],
        "phases": [],
        "steps": [],
    }
    record = parse_record(value)
    assert isinstance(record, BmrRecord)
    assert record.steps == []


def _codes(result):
    assert isinstance(result, list)
    return [(i.code, i.path) for i in result]


def test_row_width_mismatch_reported_with_path():
    value = clean_record_json()
    value["steps"][0]["content"][3]["rows"] = [["only one"]]
    codes = _codes(parse_record(value))
    assert codes == [("ROW_WIDTH_MISMATCH", "steps[0].content[3].rows[0]")]


def test_missing_header_key():
    value = clean_record_json()
    del value["header"]["quantity"]
    assert ("MISSING_FIELD", "header.quantity") in _codes(parse_record(value))


def test_bad_field_type_string():
    value = clean_record_json()
    value["header"]["name"]["type"] = ["string"]
    assert ("BAD_FIELD_TYPE", "header.name.type") in _codes(parse_record(value))


def test_bad_content_kind():
    value = clean_record_json()
    value["steps"][0]["content"][0]["type"] = "sidebar"
    assert ("BAD_CONTENT_KIND", "steps[0].content[0].type") in _codes(parse_record(value))


def test_bad_id_format():
    value = clean_record_json()
    value["steps"][0]["id"] = "step-0"
    assert ("BAD_ID_FORMAT", "steps[0].id") in _codes(parse_record(value))


def test_all_issues_reported_not_just_first():
    value = clean_record_json()
    del value["header"]["sku"]
    value["steps"][0]["id"] = "bogus"
    value["steps"][0]["content"][0]["type"] = "sidebar"
    codes = [c for c, _ in _codes(parse_record(value))]
    assert "MISSING_FIELD" in codes
    assert "BAD_ID_FORMAT" in codes
    assert "BAD_CONTENT_KIND" in codes


def test_data_form_requires_fields():
    value = clean_record_json()
    value["steps"][0]["content"][1]["fields"] = []
    assert ("MISSING_FIELD", "steps[0].content[1].fields") in _codes(parse_record(value))


def test_list_kinds_require_items():
    value = clean_record_json()
    value["steps"][0]["content"][0] = {"type": "bullet_list", "text": "things"}
    assert ("MISSING_FIELD", "steps[0].content[0].items") in _codes(parse_record(value))


def test_link_and_attachment_payloads():
    value = clean_record_json()
    value["steps"][1]["content"].append(
        {"type": "link", "text": "policy", "link": {"link_text": "POL", "url": "https://x"}}
    )
    value["steps"][1]["content"].append(
        {
            "type": "attachments",
            "text": "bom",
            "attachment": {"name": "parts.pdf", "kind": "BOM"},
        }
    )
    record = parse_record(value)
    assert isinstance(record, BmrRecord)

    value["steps"][1]["content"][-1]["attachment"]["kind"] = "ZIP"
    issues = parse_record(value)
    assert ("BAD_FIELD_TYPE", "steps[1].content[2].attachment.kind") in _codes(issues)


def test_unknown_extra_keys_round_trip():
    value = clean_record_json()
    value["audit"] = {"who": "qa"}
    value["steps"][0]["confidence"] = 0.9
    value["header"]["name"]["source_page"] = 3
    record = parse_record(value)
    assert isinstance(record, BmrRecord)
    assert serialize_record(record) == value


def test_round_trip_golden_file_exact():
    value = json.loads(SAMPLE_RECORD.read_text(encoding="utf-8"))
    record = parse_record(value)
    assert isinstance(record, BmrRecord)
    assert serialize_record(record) == value


# --------------------------------------------------------------------------
# Round-trip property over generated records

_name = st.text(alphabet="abcdefghij ", min_size=1, max_size=12).map(str.strip).filter(bool)


def _field(types):
    return st.fixed_dictionaries(
        {"type": st.just(types), "value": st.one_of(st.none(), _name)}
    )


@st.composite
def record_values(draw):
    n_groups = draw(st.integers(1, 3))
    groups = [
        {"id": f"group-{i + 1}", "group_name": draw(_field(["text"]))}
        for i in range(n_groups)
    ]
    n_phases = draw(st.integers(1, 3))
    phases = [
        {
            "id": f"phase-{i + 1}",
            "group_id": f"group-{draw(st.integers(1, n_groups))}",
            "phase_name": draw(_field(["text"])),
        }
        for i in range(n_phases)
    ]
    steps = []
    for i in range(draw(st.integers(0, 4))):
        phase = phases[draw(st.integers(0, n_phases - 1))]
        content = []
        for _ in range(draw(st.integers(0, 2))):
            kind = draw(st.sampled_from(["paragraph", "note", "instruction", "warning"]))
            content.append({"type": kind, "text": draw(_name)})
        if draw(st.booleans()):
            content.append(
                {
                    "type": "table",
                    "text": draw(_name),
                    "headers": ["a", "b"],
                    "rows": [[draw(_name), draw(_name)]],
                }
            )
        steps.append(
            {
                "id": f"step-{i + 1}",
                "phase_id": phase["id"],
                "group_id": phase["group_id"],
                "step_name": draw(_field(["text"])),
                "step_type": draw(_field(["text", "choice"])),
                "content": content,
            }
        )
    header = {
        key: draw(_field(["date" if "date" in key else "text"]))
        for key in (
            "completion_date",
            "expiry_date",
            "name",
            "quantity",
            "sku",
            "start_date",
        )
    }
    return {"header": header, "groups": groups, "phases": phases, "steps": steps}


@settings(max_examples=60, deadline=None)
@given(value=record_values())
def test_round_trip_preserves_valid_records(value):
    record = parse_record(value)
    assert isinstance(record, BmrRecord)
    assert serialize_record(record) == value
    again = parse_record(json.loads(json.dumps(serialize_record(record))))
    assert isinstance(again, BmrRecord)
    assert serialize_record(again) == value
