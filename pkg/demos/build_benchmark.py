"""Generate the synthetic clone benchmark from the ten fixture pairs, then score
embedding retrieval and the hash baseline on it.

Type-2/3/4 clones come from the recorded generation replay, so the run is
offline and repeatable.

    python3 demos/build_benchmark.py
"""

import json
import shutil
import sys
import tempfile
from pathlib import Path

from vccscan import bench, jsonl
from vccscan.cli import main as vcc
from vccscan.corpus import FunctionPair

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def main() -> int:
    with tempfile.TemporaryDirectory() as tmp:
        work = Path(tmp)
        shutil.copy(FIXTURES / "bench" / "pairs.jsonl", work / "pairs.jsonl")
        shutil.copy(FIXTURES / "bench" / "generation_replay.jsonl", work / "gen.jsonl")
        config = {
            "seed": 7,
            "paths": {
                "pairs": "pairs.jsonl", "bench_dir": "bench", "vulns": "bench/vulns.jsonl",
                "truth": "bench/truth.jsonl", "corpus": "out/corpus.jsonl", "embeddings": "out/emb.jsonl",
                "entry_embeddings": "out/entry_emb.jsonl", "candidates": "out/candidates.jsonl",
                "baseline": "out/baseline.jsonl", "evaluation": "out/evaluation.json",
            },
            "detect": {"threshold_t": 0.7},
            "bench": {"llm": {"kind": "REPLAY", "fixture_path": "gen.jsonl"}},
        }
        (work / "config.json").write_text(json.dumps(config, indent=2))
        for stage in ("bench-gen", "extract", "embed", "detect", "baseline", "evaluate"):
            code = vcc([stage, "--config", str(work / "config.json")])
            if code:
                return code

        print((work / "bench" / "stats.md").read_text())
        clones = bench.read_clones(work / "bench" / "clones.jsonl")
        pair = FunctionPair.from_json(jsonl.read_jsonl(work / "bench" / "vulns.jsonl")[0])
        print(f"Clones of {pair.vulnerable.name} (vulnerable side):\n")
        for c in clones[:5]:
            print(f"--- {c.clone_id} ({c.clone_type.value}, token diff {c.token_diff})")
            print(c.text, "\n")
        print((work / "out" / "evaluation.md").read_text())
    return 0


if __name__ == "__main__":
    sys.exit(main())
