import json
import logging
import random
import re

import pytest
from hypothesis import given, settings, strategies as st

import oracles
from build_bench_fixture import SEED, load_pairs
from conftest import FIXTURES
from vccscan import bench
from vccscan.bench import BenchPlan, CloneRecord, CloneType, Side
from vccscan.corpus import FunctionPair, is_well_formed
from vccscan.errors import FixtureMiss, IndistinctClone, ParseFailure, UnparseableClone
from vccscan.languages import Language
from vccscan.lexer import COMMENT_KINDS, IDENT, LITERAL_KINDS, NUMBER, WS, code_tokens, tokenize
from vccscan.normalize import abstract_text
from vccscan.validate import ReplayProvider

REPLAY = FIXTURES / "bench" / "generation_replay.jsonl"


@pytest.fixture(scope="module")
def generated():
    pairs = load_pairs()
    clones, stats = bench.assemble_benchmark(pairs, BenchPlan(), ReplayProvider.from_file(REPLAY), SEED)
    return pairs, clones, stats


def test_plan_arithmetic():
    plan = BenchPlan()
    assert plan.clones_per_side == 5
    assert plan.total_clones(100) == 1000
    assert BenchPlan.from_json(plan.to_json()) == plan
    with pytest.raises(ValueError):
        BenchPlan(clones_per_function={"T5": 1})


def test_clone_label_follows_side():
    with pytest.raises(ValueError):
        CloneRecord("c", "p", Side.FIXED, CloneType.T1, "x", True, 0)
    rec = CloneRecord("c", "p", "VULNERABLE", "T3", "int f(void) { return 0; }", True, 2, "JAVA")
    assert CloneRecord.from_json(json.loads(json.dumps(rec.to_json()))) == rec


def fake_pairs(n, cwe):
    base = load_pairs()[0]
    out = []
    for i in range(n):
        v = bench.dataclasses.replace(base.vulnerable, id=f"{cwe}-{i}-v", path=f"{cwe}/{i}.c")
        f = bench.dataclasses.replace(base.fixed, id=f"{cwe}-{i}-f", path=f"{cwe}/{i}.c")
        out.append(FunctionPair(v, f, f"CVE-{i}", cwe))
    return out


def test_cwe_cap_and_determinism():
    pool = fake_pairs(30, "CWE-787")
    picked = bench.cwe_sample(pool, BenchPlan(), 1)
    assert len(picked) == 10
    assert picked == bench.cwe_sample(pool, BenchPlan(), 1)
    assert picked != bench.cwe_sample(pool, BenchPlan(), 2)


def test_short_pool_returned_whole_with_warning(caplog):
    pool = load_pairs()
    with caplog.at_level(logging.WARNING, logger="vccscan.bench"):
        picked = bench.cwe_sample(pool, BenchPlan(), SEED)
    assert sorted(p.pair_id for p in picked) == sorted(p.pair_id for p in pool)
    assert "insufficient pool" in caplog.text


def test_priority_order_and_target():
    pool = fake_pairs(4, "CWE-999") + fake_pairs(4, "CWE-22") + fake_pairs(4, "CWE-787")
    picked = bench.cwe_sample(pool, BenchPlan(target_pairs=6, pairs_per_cwe_cap=3), 0)
    assert [p.cwe_id for p in picked] == ["CWE-787"] * 3 + ["CWE-22"] * 3


def test_type1_golden():
    text = (FIXTURES / "pairs" / "p01" / "vulnerable.c").read_text(encoding="utf-8")
    golden = (FIXTURES / "golden" / "t1_seed7_p01.c").read_bytes().decode("utf-8")
    assert bench.gen_type1(text, Language.C, 7) == golden


def test_type1_rejects_unparseable():
    with pytest.raises(ParseFailure):
        bench.gen_type1("this is not code", Language.C, 1)


PAIR_TEXTS = [(s.text, s.language) for p in load_pairs() for s in (p.vulnerable, p.fixed)]


def has_comment(text, language):
    return any(t.kind in COMMENT_KINDS for t in tokenize(text, language))


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(PAIR_TEXTS), st.integers(0, 2**32))
def test_type1_keeps_code_tokens(sample, seed):
    text, language = sample
    out = bench.gen_type1(text, language, seed)
    assert code_tokens(out, language) == code_tokens(text, language)
    assert bench.gen_type1(text, language, seed) == out
    assert has_comment(out, language) and bench.token_diff(text, out, language) > 0
    assert is_well_formed(out, language)


def test_token_diff_examples():
    assert bench.token_diff("int x = 1;", "int x = 1;") == 0
    assert bench.token_diff("int x = 1;", "int  x =\n1 ;") == 0
    assert bench.token_diff("int x = 1;", "int x = 1 + 1;") == 2
    assert bench.token_diff("f(a);", "f(a, b);") == 2
    assert bench.token_diff("x;", "x; /* two words */") == 4


def split_comment(text):
    opener, body = text[:2], text[2:]
    closer = []
    if opener == "/*" and body.endswith("*/"):
        body, closer = body[:-2], ["*/"]
    return [opener] + re.findall(r"\w+|[^\w\s]", body) + closer


def lexical(text, language):
    out = []
    for tok in tokenize(text, language):
        if tok.kind == WS:
            continue
        out.extend(split_comment(tok.text) if tok.kind in COMMENT_KINDS else [tok.text])
    return out


def test_token_diff_matches_dp_oracle(generated):
    _, clones, _ = generated
    pairs = {p.pair_id: p for p in load_pairs()}
    for c in clones:
        origin = pairs[c.origin_pair_id].vulnerable if c.label else pairs[c.origin_pair_id].fixed
        expected = oracles.levenshtein(lexical(origin.text, c.language), lexical(c.text, c.language))
        assert c.token_diff == expected, c.clone_id


@settings(max_examples=300)
@given(st.lists(st.sampled_from("abcde"), max_size=12), st.lists(st.sampled_from("abcde"), max_size=12))
def test_levenshtein_matches_oracle(a, b):
    assert bench.levenshtein(a, b) == oracles.levenshtein(a, b) == bench.levenshtein(b, a)


def test_extract_code_block():
    assert bench.extract_code_block("text\n```java\nint f() {}\n```\nmore") == "int f() {}"
    assert bench.extract_code_block("int f() {}\n") == "int f() {}"


def test_prompt_templates_render():
    for ctype in ("T2", "T3", "T4"):
        prompt = bench.render_generation_prompt(ctype, "int f(void) { return 0; }", "CPP", 42)
        assert "```cpp\nint f(void) { return 0; }\n```" in prompt
        assert "Variation id: 42" in prompt and "C++" in prompt
    with pytest.raises(ValueError):
        bench.gen_llm_clone(ReplayProvider({}), "int f(void) { return 0; }", "C", "T1", 0)


def test_empty_fixture_misses():
    text = load_pairs()[0].vulnerable.text
    with pytest.raises(FixtureMiss):
        bench.gen_llm_clone(ReplayProvider({}), text, Language.C, "T4", 3)


class Scripted:
    def __init__(self, answers):
        self.answers = answers
        self.calls = []

    def complete(self, prompt, run=0):
        self.calls.append(run)
        return self.answers[min(run, len(self.answers) - 1)]

    def fingerprint(self):
        return "scripted"


def test_unparseable_clone_retried_then_rejected():
    text = "int f(int a) { return a; }"
    good = "```c\nint f(int b) { return b; }\n```"
    provider = Scripted(["``` c\nnot code at all (\n```", good])
    assert bench.gen_llm_clone(provider, text, "C", "T2", 0) == "int f(int b) { return b; }"
    assert provider.calls == [0, 1]
    bad = Scripted(["```c\n{{{\n```"])
    with pytest.raises(UnparseableClone):
        bench.gen_llm_clone(bad, text, "C", "T3", 0)
    assert bad.calls == [0, 1, 2]


def test_identical_type3_clones_rejected():
    pair = load_pairs()[0]
    same = Scripted(["```c\n" + pair.vulnerable.text + "\n```"])
    plan = BenchPlan(clones_per_function={"T3": 2})
    with pytest.raises(IndistinctClone):
        bench.assemble_benchmark([pair], plan, same, 0)


def test_two_pairs_give_twenty_clones():
    pairs = load_pairs()[:2]
    clones, stats = bench.assemble_benchmark(pairs, BenchPlan(), ReplayProvider.from_file(REPLAY), SEED)
    assert len(clones) == 20
    assert sum(c.label for c in clones) == 10
    assert [stats["types"][t]["clones"] for t in ("T1", "T2", "T3", "T4")] == [4, 4, 8, 4]


def test_full_fixture_matches_golden_stats(generated):
    _, _, stats = generated
    golden = json.loads((FIXTURES / "bench" / "golden_stats.json").read_text())
    assert json.loads(json.dumps(stats)) == golden


def test_label_balance_and_ratios(generated):
    pairs, clones, stats = generated
    assert len(clones) == BenchPlan().total_clones(len(pairs))
    for row in stats["types"].values():
        assert row["positives"] == row["negatives"]
    counts = [stats["types"][t]["clones"] for t in ("T1", "T2", "T3", "T4")]
    assert counts == [2 * len(pairs) * k for k in (1, 1, 2, 1)]
    assert len({c.clone_id for c in clones}) == len(clones)


def test_every_clone_parses_and_type3_clones_differ(generated):
    _, clones, _ = generated
    for c in clones:
        assert is_well_formed(c.text, c.language), c.clone_id
    by_origin = {}
    for c in clones:
        if c.clone_type is CloneType.T3:
            by_origin.setdefault((c.origin_pair_id, c.origin_side), []).append(c)
    for a, b in by_origin.values():
        assert bench.token_diff(a.text, b.text, a.language) > 0


def identifier_literal_only(a, b, language):
    """True when the token streams line up and differ only at identifiers or literals."""
    ta = [t for t in tokenize(a, language) if t.kind != WS and t.kind not in COMMENT_KINDS]
    tb = [t for t in tokenize(b, language) if t.kind != WS and t.kind not in COMMENT_KINDS]
    if len(ta) != len(tb):
        return False
    loose = {IDENT, NUMBER} | LITERAL_KINDS
    return all(x.text == y.text or (x.kind == y.kind and x.kind in loose) for x, y in zip(ta, tb))


def test_type2_clones_change_only_names_and_keep_digest(generated):
    pairs, clones, _ = generated
    by_id = {p.pair_id: p for p in pairs}
    for c in clones:
        if c.clone_type is not CloneType.T2:
            continue
        origin = by_id[c.origin_pair_id].vulnerable if c.label else by_id[c.origin_pair_id].fixed
        assert identifier_literal_only(origin.text, c.text, c.language), c.clone_id
        assert abstract_text(c.text, c.language).digest == abstract_text(origin.text, c.language).digest


def test_generation_is_deterministic(generated):
    pairs, clones, _ = generated
    again, _ = bench.assemble_benchmark(pairs, BenchPlan(), ReplayProvider.from_file(REPLAY), SEED)
    assert again == clones


def test_archive_contents(generated, tmp_path):
    pairs, clones, stats = generated
    out = bench.write_archive(tmp_path / "arc", pairs, clones, stats, BenchPlan(), SEED, "replay:x")
    assert sorted(p.name for p in out.iterdir()) == ["clones.jsonl", "manifest.json", "pairs.jsonl", "prompts",
                                                     "stats.json"]
    assert sorted(p.name for p in (out / "prompts").iterdir()) == ["clone_t2.txt", "clone_t3.txt", "clone_t4.txt"]
    assert bench.read_clones(out / "clones.jsonl") == clones
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == SEED and manifest["clones"] == 100
    assert manifest["provider_fingerprints"]["llm"] == "replay:x"
    assert json.loads((out / "stats.json").read_text()) == json.loads(json.dumps(stats))


def test_truth_and_targets(generated):
    _, clones, _ = generated
    truth = bench.benchmark_truth(clones)
    assert len(truth) == 10
    assert all(len(q.ground_truth) == 5 for q in truth)
    records = bench.clone_functions(clones)
    assert [r.id for r in records] == [c.clone_id for c in clones]


def test_audit_sheet(generated):
    _, clones, _ = generated
    sheet = bench.audit_sheet(clones, 5, 3)
    assert sheet == bench.audit_sheet(clones, 5, 3)
    assert sheet.count("## ") == 5 and sheet.count("- [ ] clone type is correct") == 5
    assert bench.audit_sheet(clones, 500, 3).count("## ") == len(clones)


def test_stats_markdown_shape(generated):
    md = bench.stats_markdown(generated[2])
    assert md.splitlines()[2] == "| Type-1 (Whitespace/Comments) | 20 | 10 | 10 | 16.60 |"
    assert md.splitlines()[-1] == "| Total | 100 | 50 | 50 | - |"


def test_derive_seed_is_stable():
    assert bench.derive_seed(7, "a", 1) == bench.derive_seed(7, "a", 1)
    assert bench.derive_seed(7, "a", 1) != bench.derive_seed(7, "a", 2)
    assert random.Random(bench.derive_seed(0)).random() == random.Random(bench.derive_seed(0)).random()
