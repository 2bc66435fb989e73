"""Regenerate the golden validation prompt, the golden seed-7 Type-1 clone and
the golden end-to-end report.

Review the diff by hand before committing a regenerated golden.

    python3 tests/fixtures/build_goldens.py
"""

from __future__ import annotations

import shutil
import tempfile
from pathlib import Path

from vccscan.bench import gen_type1
from vccscan.cli import main as vcc
from vccscan.languages import Language
from vccscan.validate import ValidationRequest, render_prompt

HERE = Path(__file__).resolve().parent


def golden_request() -> ValidationRequest:
    pairs = HERE / "pairs" / "p04"
    return ValidationRequest(
        original_function=(pairs / "vulnerable.c").read_text(encoding="utf-8"),
        fixed_function=(pairs / "fixed.c").read_text(encoding="utf-8"),
        cloned_function=(HERE / "restyled_clone.c").read_text(encoding="utf-8"),
        entry_id="E4",
        target_id="restyled-clone",
    )


E2E_STAGES = ("extract", "embed", "detect", "baseline", "validate", "evaluate", "report")


def e2e_report_markdown() -> bytes:
    """Run the whole pipeline on a scratch copy of e2e/ and return report.md."""
    with tempfile.TemporaryDirectory() as tmp:
        work = Path(tmp) / "e2e"
        shutil.copytree(HERE / "e2e", work, ignore=shutil.ignore_patterns("out"))
        for stage in E2E_STAGES:
            if vcc([stage, "--config", str(work / "config.json")]) != 0:
                raise SystemExit(f"stage {stage} failed")
        return (work / "out" / "report.md").read_bytes()


def main() -> None:
    out = HERE / "golden"
    out.mkdir(exist_ok=True)
    (out / "prompt_p04.txt").write_bytes(render_prompt(golden_request()).encode("utf-8"))
    text = (HERE / "pairs" / "p01" / "vulnerable.c").read_text(encoding="utf-8")
    (out / "t1_seed7_p01.c").write_bytes(gen_type1(text, Language.C, 7).encode("utf-8"))
    (out / "report_e2e.md").write_bytes(e2e_report_markdown())


if __name__ == "__main__":
    main()
