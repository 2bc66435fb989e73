"""Synthetic vulnerable-clone benchmark generation.

Every source pair contributes five clones of its vulnerable function and five
of its fixed function (one Type-1, one Type-2, two Type-3, one Type-4). Type-1
clones come from local layout/comment edits; Types 2-4 come from an LLM
provider (live or replayed).
"""

from __future__ import annotations

import dataclasses
import enum
import hashlib
import logging
import random
import re
import string
from importlib import resources
from pathlib import Path
from typing import Sequence

from vccscan import jsonl
from vccscan.corpus import FunctionPair, FunctionRecord, is_well_formed, parse_standalone
from vccscan.errors import IndistinctClone, ParseFailure, UnparseableClone
from vccscan.languages import Language
from vccscan.lexer import COMMENT_KINDS, PUNCT, WS, code_tokens, diff_tokens, tokenize
from vccscan.metrics import EvalQuery

logger = logging.getLogger(__name__)

# Weakness order used when filling the sample; CWEs not listed follow in id order.
DEFAULT_CWE_PRIORITY = (
    "CWE-79", "CWE-787", "CWE-22", "CWE-125", "CWE-78", "CWE-416",
    "CWE-94", "CWE-20", "CWE-862", "CWE-77", "CWE-89", "CWE-287",
)
LLM_ATTEMPTS = 3
TEMPLATE_FILES = {"T2": "clone_t2.txt", "T3": "clone_t3.txt", "T4": "clone_t4.txt"}


class Side(str, enum.Enum):
    VULNERABLE = "VULNERABLE"
    FIXED = "FIXED"


class CloneType(str, enum.Enum):
    T1 = "T1"
    T2 = "T2"
    T3 = "T3"
    T4 = "T4"


@dataclasses.dataclass(frozen=True)
class BenchPlan:
    pairs_per_cwe_cap: int = 10
    clones_per_function: dict = dataclasses.field(default_factory=lambda: {"T1": 1, "T2": 1, "T3": 2, "T4": 1})
    target_pairs: int = 100
    cwe_priority: tuple = DEFAULT_CWE_PRIORITY

    def __post_init__(self):
        plan = {CloneType(k).value: int(v) for k, v in self.clones_per_function.items()}
        if any(v < 0 for v in plan.values()) or not plan:
            raise ValueError("clone plan needs non-negative counts")
        object.__setattr__(self, "clones_per_function", plan)
        object.__setattr__(self, "cwe_priority", tuple(self.cwe_priority))
        if self.pairs_per_cwe_cap < 1 or self.target_pairs < 1:
            raise ValueError("pairs_per_cwe_cap and target_pairs must be >= 1")

    @property
    def clones_per_side(self) -> int:
        return sum(self.clones_per_function.values())

    def total_clones(self, pairs: int) -> int:
        return 2 * pairs * self.clones_per_side

    def to_json(self) -> dict:
        return {
            "pairs_per_cwe_cap": self.pairs_per_cwe_cap,
            "clones_per_function": dict(self.clones_per_function),
            "target_pairs": self.target_pairs,
            "cwe_priority": list(self.cwe_priority),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "BenchPlan":
        fields = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in obj.items() if k in fields})


@dataclasses.dataclass(frozen=True)
class CloneRecord:
    clone_id: str
    origin_pair_id: str
    origin_side: Side
    clone_type: CloneType
    text: str
    label: bool
    token_diff: int
    language: Language = Language.C

    def __post_init__(self):
        object.__setattr__(self, "origin_side", Side(self.origin_side))
        object.__setattr__(self, "clone_type", CloneType(self.clone_type))
        object.__setattr__(self, "language", Language.parse(self.language))
        if self.label != (self.origin_side is Side.VULNERABLE):
            raise ValueError("a clone's label must follow its origin side")
        if self.token_diff < 0:
            raise ValueError("token_diff must be non-negative")

    def to_json(self) -> dict:
        return {
            "clone_id": self.clone_id,
            "origin_pair_id": self.origin_pair_id,
            "origin_side": self.origin_side.value,
            "clone_type": self.clone_type.value,
            "text": self.text,
            "label": self.label,
            "token_diff": self.token_diff,
            "language": self.language.value,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CloneRecord":
        return cls(obj["clone_id"], obj["origin_pair_id"], obj["origin_side"], obj["clone_type"], obj["text"],
                   bool(obj["label"]), int(obj["token_diff"]), obj.get("language", "C"))


def derive_seed(seed, *parts) -> int:
    key = ":".join(str(p) for p in (seed, *parts)).encode("utf-8")
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big")


# --- sampling -------------------------------------------------------------

def cwe_sample(pool: Sequence[FunctionPair], plan: BenchPlan, seed: int) -> list[FunctionPair]:
    """Seeded sample with at most ``plan.pairs_per_cwe_cap`` pairs per CWE.

    CWEs are visited in ``plan.cwe_priority`` order (others afterwards, sorted)
    until ``plan.target_pairs`` pairs are collected. A short pool is returned
    whole (still capped per CWE) with a warning.
    """
    by_cwe: dict[str, list[int]] = {}
    for i, pair in enumerate(pool):
        if not pair.cwe_id:
            raise ValueError(f"pair {pair.pair_id} has no cwe_id")
        by_cwe.setdefault(pair.cwe_id, []).append(i)
    order = [c for c in plan.cwe_priority if c in by_cwe]
    order += sorted(c for c in by_cwe if c not in plan.cwe_priority)
    chosen: list[int] = []
    for cwe in order:
        room = plan.target_pairs - len(chosen)
        if room <= 0:
            break
        members = by_cwe[cwe]
        take = min(plan.pairs_per_cwe_cap, len(members), room)
        picked = random.Random(derive_seed(seed, "cwe", cwe)).sample(members, take)
        chosen.extend(sorted(picked))
    if len(chosen) < plan.target_pairs:
        logger.warning("insufficient pool: %d pairs selected, %d requested", len(chosen), plan.target_pairs)
    return [pool[i] for i in chosen]


# --- Type-1 generation ----------------------------------------------------

COMMENT_PHRASES = (
    "check the input before use",
    "update the running length",
    "the caller owns this buffer",
    "keep the state consistent for the next call",
    "fast path for the common case",
    "handle the error case first",
    "compute the offset into the table",
    "release resources on every exit path",
    "copy the payload into place",
    "the loop walks every element once",
    "see the header for the field layout",
    "values are validated by the parser",
)
_INDENT_STYLES = ("  ", "    ", "\t")


def _join(tokens) -> str:
    return "".join(t.text for t in tokens)


def _reindent(text: str, language, rng: random.Random) -> str:
    tokens = tokenize(text, language)
    widths = []
    for tok in tokens:
        if tok.kind == WS and "\n" in tok.text:
            widths.append(len(tok.text.rsplit("\n", 1)[1].expandtabs(4)))
    positive = [w for w in widths if w > 0]
    if not positive:
        return text
    unit = min(positive)
    current = "\t" if any("\t" in t.text for t in tokens if t.kind == WS) else " " * unit
    target = rng.choice([s for s in _INDENT_STYLES if s != current])
    out = []
    for tok in tokens:
        if tok.kind == WS and "\n" in tok.text:
            head, indent = tok.text.rsplit("\n", 1)
            width = len(indent.expandtabs(4))
            indent = target * (width // unit) + " " * (width % unit)
            out.append(head + "\n" + indent)
        else:
            out.append(tok.text)
    return "".join(out)


def _boundary_gaps(tokens):
    """Indices of whitespace tokens that end a line right after ``;``, ``{`` or ``}``."""
    gaps = []
    for i in range(1, len(tokens)):
        tok, prev = tokens[i], tokens[i - 1]
        if tok.kind != WS or "\n" not in tok.text or prev.kind != PUNCT or prev.text not in (";", "{", "}"):
            continue
        # A backslash splice before the newline continues a macro; leave it alone.
        if "\\" in tok.text.split("\n", 1)[0]:
            continue
        gaps.append(i)
    return gaps


def _blank_lines(text: str, language, rng: random.Random) -> str:
    tokens = tokenize(text, language)
    blanks = [i for i, t in enumerate(tokens) if t.kind == WS and t.text.count("\n") >= 2 and "\\" not in t.text]
    out = [t.text for t in tokens]
    if blanks and rng.random() < 0.5:
        for i in blanks:
            head, indent = out[i].rsplit("\n", 1)
            out[i] = head.split("\n", 1)[0] + "\n" + indent
        return "".join(out)
    gaps = _boundary_gaps(tokens)
    for i in gaps:
        if rng.random() < 0.3:
            first, rest = out[i].split("\n", 1)
            out[i] = first + "\n\n" + rest
    return "".join(out)


def _line_comments(text: str, language, rng: random.Random) -> tuple[str, int]:
    tokens = tokenize(text, language)
    gaps = [i for i in _boundary_gaps(tokens) if i + 1 >= len(tokens) or tokens[i + 1].kind not in COMMENT_KINDS]
    if not gaps:
        return text, 0
    picked = {i for i in gaps if rng.random() < 0.35} or {rng.choice(gaps)}
    out = []
    for i, tok in enumerate(tokens):
        if i in picked:
            out.append(" // " + rng.choice(COMMENT_PHRASES))
        out.append(tok.text)
    return "".join(out), len(picked)


def _block_comment(text: str, language, rng: random.Random) -> str:
    data, _, fn, offset = parse_standalone(text, language)
    body = fn.child_by_field_name("body") if fn is not None else None
    if body is None:
        raise ParseFailure("function body not found")
    at = len(data[offset:body.start_byte].decode("utf-8"))
    phrase = rng.choice(COMMENT_PHRASES)
    return text[:at] + f"/* {phrase} */ " + text[at:]


def _flip_newlines(text: str, language) -> str:
    out = []
    to_lf = "\r\n" in text
    for tok in tokenize(text, language):
        if tok.kind == WS:
            out.append(tok.text.replace("\r\n", "\n") if to_lf else tok.text.replace("\n", "\r\n"))
        else:
            out.append(tok.text)
    return "".join(out)


def gen_type1(text: str, language, seed: int) -> str:
    """Layout and comment edits only; the code token stream is unchanged.

    A seeded subset of re-indentation, blank-line edits, line comments at
    statement ends, a block comment before the body and a CRLF/LF flip is
    applied. At least one comment is always inserted.
    """
    language = Language.parse(language)
    _, _, fn, _ = parse_standalone(text, language)
    if fn is None:
        raise ParseFailure("Type-1 generation needs a parseable function")
    rng = random.Random(seed)
    use = {op: rng.random() < 0.5 for op in ("reindent", "blank_lines", "line_comments", "block_comment", "flip")}
    if not (use["line_comments"] or use["block_comment"]):
        use[rng.choice(("line_comments", "block_comment"))] = True

    out = text
    if use["reindent"]:
        out = _reindent(out, language, rng)
    if use["blank_lines"]:
        out = _blank_lines(out, language, rng)
    inserted = 0
    if use["line_comments"]:
        out, inserted = _line_comments(out, language, rng)
    if use["block_comment"] or inserted == 0:
        out = _block_comment(out, language, rng)
    if use["flip"]:
        out = _flip_newlines(out, language)
    if code_tokens(out, language) != code_tokens(text, language):
        raise AssertionError("Type-1 edit changed the code token stream")
    return out


# --- LLM-generated clones -------------------------------------------------

_FENCE_NAMES = {Language.C: "c", Language.CPP: "cpp", Language.JAVA: "java"}
_CODE_BLOCK = re.compile(r"```[\w+#.-]*[ \t]*\r?\n(.*?)```", re.DOTALL)


def load_template(clone_type) -> str:
    name = TEMPLATE_FILES[CloneType(clone_type).value]
    return resources.files("vccscan").joinpath("prompts", name).read_text(encoding="utf-8")


def render_generation_prompt(clone_type, text: str, language, variant: int) -> str:
    language = Language.parse(language)
    return string.Template(load_template(clone_type)).substitute(
        language={"C": "C", "CPP": "C++", "JAVA": "Java"}[language.value],
        fence=_FENCE_NAMES[language],
        code=text,
        variant=variant,
    )


def extract_code_block(response: str) -> str:
    m = _CODE_BLOCK.search(response)
    code = m.group(1) if m else response
    return code.strip("\r\n")


def gen_llm_clone(provider, text: str, language, clone_type, seed: int) -> str:
    """Ask the provider for a Type-2/3/4 clone; reject output that does not parse.

    Up to two retries are made before :class:`UnparseableClone` is raised.
    """
    clone_type = CloneType(clone_type)
    if clone_type is CloneType.T1:
        raise ValueError("Type-1 clones are generated locally")
    prompt = render_generation_prompt(clone_type, text, language, seed)
    for attempt in range(LLM_ATTEMPTS):
        code = extract_code_block(provider.complete(prompt, attempt))
        if is_well_formed(code, language):
            return code
        logger.info("unparseable %s clone on attempt %d", clone_type.value, attempt + 1)
    raise UnparseableClone(f"{clone_type.value} clone did not parse after {LLM_ATTEMPTS} attempts")


# --- token difference -----------------------------------------------------

def levenshtein(a: Sequence, b: Sequence) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, start=1):
        cur = [i]
        for j, y in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y)))
        prev = cur
    return prev[-1]


def token_diff(a: str, b: str, language=Language.C) -> int:
    """Token edit distance; comment words count as tokens, whitespace does not."""
    return levenshtein(diff_tokens(a, language), diff_tokens(b, language))


# --- assembly -------------------------------------------------------------

def assemble_benchmark(pairs: Sequence[FunctionPair], plan: BenchPlan, provider, seed: int
                       ) -> tuple[list[CloneRecord], dict]:
    """Generate the clone plan for both sides of every pair.

    Returns the clones (pair order, vulnerable side first, plan order within a
    side) and a statistics table.
    """
    clones = []
    for pair in pairs:
        for side, origin in ((Side.VULNERABLE, pair.vulnerable), (Side.FIXED, pair.fixed)):
            lang = origin.language
            for ctype, count in plan.clones_per_function.items():
                made: list[str] = []
                for n in range(count):
                    text = None
                    for retry in range(LLM_ATTEMPTS):
                        s = derive_seed(seed, pair.pair_id, side.value, ctype, n, retry) % 1_000_000
                        if ctype == "T1":
                            text = gen_type1(origin.text, lang, s)
                        else:
                            text = gen_llm_clone(provider, origin.text, lang, ctype, s)
                        if all(token_diff(text, other, lang) > 0 for other in made):
                            break
                        text = None
                    if text is None:
                        raise IndistinctClone(f"could not produce distinct {ctype} clones for {pair.pair_id}")
                    made.append(text)
                    clones.append(CloneRecord(
                        clone_id=f"{pair.pair_id}-{side.value[0]}-{ctype}-{n}",
                        origin_pair_id=pair.pair_id,
                        origin_side=side,
                        clone_type=ctype,
                        text=text,
                        label=side is Side.VULNERABLE,
                        token_diff=token_diff(origin.text, text, lang),
                        language=lang,
                    ))
    return clones, clone_stats(clones)


def clone_stats(clones: Sequence[CloneRecord]) -> dict:
    types = {}
    for ctype in CloneType:
        rows = [c for c in clones if c.clone_type is ctype]
        types[ctype.value] = {
            "clones": len(rows),
            "positives": sum(1 for c in rows if c.label),
            "negatives": sum(1 for c in rows if not c.label),
            "avg_token_diff": (sum(c.token_diff for c in rows) / len(rows)) if rows else 0.0,
        }
    total = {
        "clones": len(clones),
        "positives": sum(1 for c in clones if c.label),
        "negatives": sum(1 for c in clones if not c.label),
    }
    return {"types": types, "total": total}


_TYPE_LABELS = {
    "T1": "Type-1 (Whitespace/Comments)",
    "T2": "Type-2 (Identifiers/Literals)",
    "T3": "Type-3 (Statement Edits)",
    "T4": "Type-4 (Semantic Rewrite)",
}


def stats_markdown(stats: dict) -> str:
    lines = ["| Clone Type | # Clones | # Pos | # Neg | Avg. Token Diff |", "|---|---:|---:|---:|---:|"]
    for key, row in stats["types"].items():
        lines.append(f"| {_TYPE_LABELS[key]} | {row['clones']} | {row['positives']} | {row['negatives']} | "
                     f"{row['avg_token_diff']:.2f} |")
    t = stats["total"]
    lines.append(f"| Total | {t['clones']} | {t['positives']} | {t['negatives']} | - |")
    return "\n".join(lines) + "\n"


def write_archive(out_dir, pairs: Sequence[FunctionPair], clones: Sequence[CloneRecord], stats: dict,
                  plan: BenchPlan, seed: int, provider_fingerprint: str) -> Path:
    """Write clones.jsonl, pairs.jsonl, stats.json, prompts/ and manifest.json."""
    out = Path(out_dir)
    jsonl.write_jsonl(out / "clones.jsonl", (c.to_json() for c in clones))
    jsonl.write_jsonl(out / "pairs.jsonl", (p.to_json() for p in pairs))
    jsonl.write_json(out / "stats.json", stats)
    template_digests = {}
    for ctype, fname in sorted(TEMPLATE_FILES.items()):
        body = load_template(ctype)
        jsonl.write_text_atomic(out / "prompts" / fname, body)
        template_digests[fname] = hashlib.sha256(body.encode("utf-8")).hexdigest()
    manifest = {
        "seed": seed,
        "plan": plan.to_json(),
        "pairs": len(pairs),
        "clones": len(clones),
        "provider_fingerprints": {"llm": provider_fingerprint, "type1": "local-layout-edits"},
        "prompt_templates": template_digests,
    }
    jsonl.write_json(out / "manifest.json", manifest)
    return out


def read_clones(path) -> list[CloneRecord]:
    return [CloneRecord.from_json(row) for row in jsonl.iter_jsonl(path)]


def clone_functions(clones: Sequence[CloneRecord], repo: str = "benchmark") -> list[FunctionRecord]:
    """Clones as target functions, one pseudo-file per clone (id = clone_id)."""
    out = []
    for c in clones:
        end = c.text.count("\n") + 1
        out.append(FunctionRecord(c.clone_id, repo, c.clone_id, c.language, "", 1, end, c.text))
    return out


def benchmark_truth(clones: Sequence[CloneRecord]) -> list[EvalQuery]:
    """One query per source pair: its vulnerable function, relevant = clones of that function."""
    truth: dict[str, set] = {}
    for c in clones:
        truth.setdefault(c.origin_pair_id, set())
        if c.label:
            truth[c.origin_pair_id].add(c.clone_id)
    return [EvalQuery(pid, frozenset(ids)) for pid, ids in truth.items()]


def audit_sheet(clones: Sequence[CloneRecord], sample: int, seed: int) -> str:
    """Markdown review sheet for manually checking a random sample of clones."""
    picked = random.Random(derive_seed(seed, "audit")).sample(list(clones), min(sample, len(clones)))
    parts = [f"# Clone audit sheet ({len(picked)} samples, seed {seed})\n"]
    for i, c in enumerate(picked, start=1):
        fence = _FENCE_NAMES[c.language]
        parts.append(
            f"## {i}. {c.clone_id}\n\n"
            f"- claimed type: {c.clone_type.value}\n- origin: {c.origin_side.value} of pair {c.origin_pair_id}\n"
            f"- [ ] clone type is correct\n- [ ] vulnerability status unchanged\n\n"
            f"```{fence}\n{c.text}\n```\n"
        )
    return "\n".join(parts)
