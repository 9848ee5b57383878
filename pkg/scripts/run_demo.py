#!/usr/bin/env python3
"""End-to-end demo: process the bundled sample batch record with the mock
backend and drop all reports into ./demo_out."""

from __future__ import annotations

import sys
from pathlib import Path

from bmrkit.cli import main

REPO_ROOT = Path(__file__).resolve().parent.parent
SAMPLE = REPO_ROOT / "tests" / "data" / "sample_bmr.md"


def run() -> int:
    out_dir = Path("demo_out")
    out_dir.mkdir(exist_ok=True)
    code = main(
        [
            "process",
            str(SAMPLE),
            "--mock",
            "--out", str(out_dir / "record.json"),
            "--report-out", str(out_dir / "validation.json"),
            "--metrics-out", str(out_dir / "metrics.json"),
            "--summary-out", str(out_dir / "summary.json"),
        ]
    )
    print(f"\nreports written to {out_dir.resolve()}")
    return code


if __name__ == "__main__":
    sys.exit(run())
