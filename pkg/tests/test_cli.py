from __future__ import annotations

import json

import bmrkit.cli as cli
from bmrkit.cli import main

from conftest import SAMPLE_BMR, SAMPLE_RECORD, ScriptedBackend, clean_record_json, wrap_json


def run(argv):
    return main([str(a) for a in argv])


def test_process_sample_with_mock(tmp_path, capsys):
    out = tmp_path / "record.json"
    code = run(
        [
            "process", SAMPLE_BMR, "--mock",
            "--out", out,
            "--report-out", tmp_path / "validation.json",
            "--metrics-out", tmp_path / "metrics.json",
            "--summary-out", tmp_path / "summary.json",
        ]
    )
    assert code == 0
    record = json.loads(out.read_text())
    assert len(record["steps"]) == 3
    report = json.loads((tmp_path / "validation.json").read_text())
    assert report["passed"] is True
    metrics = json.loads((tmp_path / "metrics.json").read_text())
    assert metrics["hierarchy_preservation"] == 100.0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["chunk_count"] == 1
    assert summary["attempts_per_chunk"] == [1]
    assert summary["validation_passed"] is True
    assert "Composite Confidence Score" in capsys.readouterr().out


def test_process_is_deterministic(tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / f"{name}.json"
        code = run(
            [
                "process", SAMPLE_BMR, "--mock",
                "--out", out,
                "--report-out", tmp_path / f"{name}.validation.json",
                "--metrics-out", tmp_path / f"{name}.metrics.json",
            ]
        )
        assert code == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    assert outs[0] == SAMPLE_RECORD.read_bytes()


def test_process_exit_1_on_dangling_reference(tmp_path, monkeypatch):
    bad = clean_record_json()
    bad["steps"][0]["phase_id"] = "phase-9"
    monkeypatch.setattr(
        cli, "_make_backend", lambda cfg: ScriptedBackend([wrap_json(bad)])
    )
    code = run(
        [
            "process", SAMPLE_BMR,
            "--out", tmp_path / "r.json",
            "--report-out", tmp_path / "v.json",
            "--metrics-out", tmp_path / "m.json",
        ]
    )
    assert code == 1
    report = json.loads((tmp_path / "v.json").read_text())
    assert any(i["code"] == "DANGLING_REF" for i in report["issues"])


def test_process_exit_2_when_backend_unreachable(tmp_path):
    code = run(
        [
            "process", SAMPLE_BMR,
            "--backend", "http",
            "--endpoint", "http://127.0.0.1:9/v1/chat",
            "--max-attempts", "1",
            "--out", tmp_path / "r.json",
            "--report-out", tmp_path / "v.json",
            "--metrics-out", tmp_path / "m.json",
        ]
    )
    assert code == 2


def test_process_exit_2_on_missing_input(tmp_path):
    assert run(["process", tmp_path / "missing.md", "--mock"]) == 2


def test_http_backend_requires_endpoint(tmp_path):
    assert run(["process", SAMPLE_BMR, "--backend", "http"]) == 2


def test_chunk_empty_file(tmp_path, capsys):
    src = tmp_path / "empty.md"
    src.write_text("")
    assert run(["chunk", src]) == 0
    assert json.loads(capsys.readouterr().out) == []


def test_chunk_sample_is_single_chunk(tmp_path):
    out = tmp_path / "chunks.json"
    assert run(["chunk", SAMPLE_BMR, "--out", out]) == 0
    chunks = json.loads(out.read_text())
    assert len(chunks) == 1
    assert chunks[0]["index"] == 0
    assert chunks[0]["token_count"] < 3000


def test_chunk_greedy_packing_case(tmp_path):
    src = tmp_path / "five.md"
    src.write_text("a1 b1. a2 b2. a3 b3. a4 b4. a5 b5.")
    out = tmp_path / "chunks.json"
    assert run(["chunk", src, "--max-tokens", "6", "--out", out]) == 0
    chunks = json.loads(out.read_text())
    assert [c["text"] for c in chunks] == ["a1 b1. a2 b2. a3 b3.", "a4 b4. a5 b5."]


def test_validate_sample_record():
    assert run(["validate", SAMPLE_RECORD]) == 0


def test_validate_trailing_comma(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"header": 1,}')
    assert run(["validate", bad]) == 1
    assert "JSON_MALFORMED" in capsys.readouterr().out


def test_validate_nested_phases(tmp_path, capsys):
    value = clean_record_json()
    value["groups"][0]["phases"] = []
    path = tmp_path / "nested.json"
    path.write_text(json.dumps(value))
    assert run(["validate", path]) == 1
    assert "CLASS_NESTING" in capsys.readouterr().out


def test_score_identity_fixture(tmp_path, capsys):
    src = tmp_path / "tiny.md"
    src.write_text("Blend the powder slowly. Verify the final seal integrity.")
    value = clean_record_json()
    value["steps"][0]["content"] = [
        {"type": "paragraph", "text": "Blend the powder slowly."},
        {"type": "paragraph", "text": "Verify the final seal integrity."},
    ]
    value["steps"][1]["content"] = []
    record = tmp_path / "tiny.json"
    record.write_text(json.dumps(value))
    metrics_out = tmp_path / "metrics.json"
    assert run(["score", src, record, "--metrics-out", metrics_out]) == 0
    metrics = json.loads(metrics_out.read_text())
    assert metrics["composite"] == 100.0
    assert set(metrics["statuses"].values()) == {"Excellent"}
    assert "Excellent" in capsys.readouterr().out


def test_score_with_one_of_two_calculations_missing(tmp_path):
    src = tmp_path / "calc.md"
    src.write_text(
        "**Calculation:** First\nFormula: A x B\nVariables:\n- A: 1\n\n"
        "**Calculation:** Second\nFormula: C x D\nVariables:\n- C: 2\n"
    )
    value = clean_record_json()
    value["steps"][0]["content"] = [
        {
            "type": "calculation",
            "text": "First Calculation",
            "calculation": {
                "formula": "A x B",
                "variables": [{"name": "A", "description": "A", "value": 1}],
            },
        }
    ]
    value["steps"][1]["content"] = []
    record = tmp_path / "calc.json"
    record.write_text(json.dumps(value))
    metrics_out = tmp_path / "metrics.json"
    assert run(["score", src, record, "--metrics-out", metrics_out]) == 0
    assert json.loads(metrics_out.read_text())["calculation_fidelity"] == 50.0


def test_score_rejects_invalid_record(tmp_path):
    src = tmp_path / "s.md"
    src.write_text("text")
    record = tmp_path / "r.json"
    record.write_text(json.dumps({"groups": []}))
    assert run(["score", src, record]) == 2


def test_weights_flag_changes_composite(tmp_path):
    metrics_out = tmp_path / "metrics.json"
    code = run(
        [
            "score", SAMPLE_BMR, SAMPLE_RECORD,
            "--metrics-out", metrics_out,
            "--weights", '{"crude_word_coverage": 0.0}',
        ]
    )
    assert code == 0
    assert json.loads(metrics_out.read_text())["composite"] == 100.0


def test_config_file_with_flag_override(tmp_path):
    config = tmp_path / "config.json"
    config.write_text(
        json.dumps(
            {
                "backend": "mock",
                "max_tokens": 2500,
                "out": str(tmp_path / "from_config.json"),
                "report_out": str(tmp_path / "v.json"),
                "metrics_out": str(tmp_path / "m.json"),
            }
        )
    )
    override = tmp_path / "override.json"
    code = run(["process", SAMPLE_BMR, "--config", config, "--out", override])
    assert code == 0
    assert override.exists()
    assert not (tmp_path / "from_config.json").exists()


def test_bad_config_file_is_pipeline_failure(tmp_path):
    config = tmp_path / "config.json"
    config.write_text('{"no_such_key": 1}')
    assert run(["process", SAMPLE_BMR, "--config", config]) == 2
