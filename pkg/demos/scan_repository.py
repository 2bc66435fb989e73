"""Scan the bundled end-to-end fixture repository and print the findings report.

Runs every stage through the `vcc` entry point on a scratch copy, using local
trigram embeddings and replayed LLM answers, so it needs no network or keys.

    python3 demos/scan_repository.py [--keep DIR]
"""

import argparse
import shutil
import sys
import tempfile
from pathlib import Path

from vccscan.cli import main as vcc

FIXTURE = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "e2e"
STAGES = ("extract", "embed", "detect", "baseline", "validate", "evaluate", "report")


def run(work: Path) -> int:
    shutil.copytree(FIXTURE, work, ignore=shutil.ignore_patterns("out"))
    config = str(work / "config.json")
    for stage in STAGES:
        code = vcc([stage, "--config", config])
        if code:
            print(f"{stage} failed with exit code {code}", file=sys.stderr)
            return code
    print((work / "out" / "report.md").read_text(encoding="utf-8"))
    print((work / "out" / "evaluation.md").read_text(encoding="utf-8"))
    return 0


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--keep", type=Path, help="write the working copy here instead of a temp dir")
    args = parser.parse_args()
    if args.keep:
        return run(args.keep)
    with tempfile.TemporaryDirectory() as tmp:
        return run(Path(tmp) / "e2e")


if __name__ == "__main__":
    sys.exit(main())
