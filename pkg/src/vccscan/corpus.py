"""Repository ingestion and function-level extraction."""

from __future__ import annotations

import dataclasses
import hashlib
import logging
import math
import os
import re
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Iterable, Sequence

from vccscan.errors import EmptyInput, ParseFailure
from vccscan.languages import EXTENSIONS, Language, new_parser

logger = logging.getLogger(__name__)

_C_FUNCTION = "function_definition"
_JAVA_FUNCTIONS = frozenset({"method_declaration", "constructor_declaration", "compact_constructor_declaration"})
_NAME_NODES = frozenset(
    {"identifier", "field_identifier", "qualified_identifier", "destructor_name", "operator_name",
     "template_function", "operator_cast"}
)


def record_id(repo: str, path: str, start_line: int, end_line: int) -> str:
    key = f"{repo}\x00{path}\x00{start_line}-{end_line}".encode("utf-8")
    return hashlib.sha256(key).hexdigest()[:32]


@dataclasses.dataclass(frozen=True)
class FunctionRecord:
    id: str
    repo: str
    path: str
    language: Language
    name: str
    start_line: int
    end_line: int
    text: str

    def __post_init__(self):
        object.__setattr__(self, "language", Language.parse(self.language))
        if self.start_line > self.end_line:
            raise ValueError(f"start_line {self.start_line} > end_line {self.end_line}")

    @property
    def line_count(self) -> int:
        return self.end_line - self.start_line + 1

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "repo": self.repo,
            "path": self.path,
            "language": self.language.value,
            "name": self.name,
            "start_line": self.start_line,
            "end_line": self.end_line,
            "text": self.text,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "FunctionRecord":
        return cls(
            id=obj["id"],
            repo=obj["repo"],
            path=obj["path"],
            language=Language.parse(obj["language"]),
            name=obj.get("name", ""),
            start_line=int(obj["start_line"]),
            end_line=int(obj["end_line"]),
            text=obj["text"],
        )

    @classmethod
    def from_text(cls, text: str, language, repo: str = "", path: str = "", name: str = "") -> "FunctionRecord":
        """Wrap a standalone function body (e.g. from a vulnerability dataset)."""
        end = text.count("\n") + 1
        return cls(record_id(repo, path or _text_key(text), 1, end), repo, path, Language.parse(language),
                   name, 1, end, text)


def _text_key(text: str) -> str:
    return "sha256:" + hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclasses.dataclass(frozen=True)
class RepoManifestEntry:
    slug: str
    clone_url: str
    language: Language
    months_since_last_commit: float
    pr_merge_rate: float
    stars: int

    def __post_init__(self):
        if not 0.0 <= self.pr_merge_rate <= 1.0:
            raise ValueError(f"pr_merge_rate must lie in [0, 1], got {self.pr_merge_rate}")
        if self.months_since_last_commit < 0 or self.stars < 0:
            raise ValueError("months_since_last_commit and stars must be non-negative")

    def to_json(self) -> dict:
        return {
            "slug": self.slug,
            "clone_url": self.clone_url,
            "language": self.language.value,
            "months_since_last_commit": self.months_since_last_commit,
            "pr_merge_rate": self.pr_merge_rate,
            "stars": self.stars,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "RepoManifestEntry":
        return cls(
            slug=obj["slug"],
            clone_url=obj["clone_url"],
            language=Language.parse(obj["language"]),
            months_since_last_commit=float(obj["months_since_last_commit"]),
            pr_merge_rate=float(obj["pr_merge_rate"]),
            stars=int(obj["stars"]),
        )


@dataclasses.dataclass(frozen=True)
class FunctionPair:
    vulnerable: FunctionRecord
    fixed: FunctionRecord
    cve_id: str
    cwe_id: str

    def __post_init__(self):
        if self.vulnerable.id == self.fixed.id:
            raise ValueError("vulnerable and fixed records must differ")

    @property
    def pair_id(self) -> str:
        return hashlib.sha256(f"{self.vulnerable.id}:{self.fixed.id}".encode()).hexdigest()[:16]

    @property
    def language(self) -> Language:
        return self.vulnerable.language

    def to_json(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "cve_id": self.cve_id,
            "cwe_id": self.cwe_id,
            "vulnerable": self.vulnerable.to_json(),
            "fixed": self.fixed.to_json(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "FunctionPair":
        """Accepts either nested FunctionRecord objects or a flat
        ``{language, vulnerable_function, fixed_function}`` row."""
        if "vulnerable_function" in obj:
            lang = obj.get("language", "C")
            slug = obj.get("repo", "")
            ident = obj.get("pair_key") or obj.get("cve_id", "")
            vul = FunctionRecord.from_text(obj["vulnerable_function"], lang, slug, f"{ident}/vulnerable")
            fix = FunctionRecord.from_text(obj["fixed_function"], lang, slug, f"{ident}/fixed")
        else:
            vul = FunctionRecord.from_json(obj["vulnerable"])
            fix = FunctionRecord.from_json(obj["fixed"])
        return cls(vul, fix, obj.get("cve_id", ""), obj.get("cwe_id", ""))


def decode_source(data: bytes) -> str:
    return data.decode("utf-8", errors="replace")


def _line_starts(text: str) -> list[int]:
    return [0] + [m.end() for m in re.finditer("\n", text)]


def slice_lines(text: str, start_line: int, end_line: int) -> str:
    """Exact text of lines ``start_line..end_line`` (1-based, inclusive), without
    the final line terminator."""
    lines = text.split("\n")
    return "\n".join(lines[start_line - 1:end_line])


def function_nodes(root, language: Language):
    out = []
    stack = [root]
    java = language is Language.JAVA
    while stack:
        node = stack.pop()
        if java:
            if node.type in _JAVA_FUNCTIONS and node.child_by_field_name("body") is not None:
                out.append(node)
            # Methods of local and anonymous classes sit inside method bodies.
        elif node.type == _C_FUNCTION:
            if node.child_by_field_name("body") is not None:
                out.append(node)
            # Top-level only: do not descend into function bodies.
            continue
        stack.extend(reversed(node.children))
    out.sort(key=lambda n: n.start_byte)
    return out


_JAVA_WRAP_HEAD = b"class __VccWrapper__ {\n"
_JAVA_WRAP_TAIL = b"\n}\n"


def parse_standalone(text: str, language):
    """Parse a single function given on its own.

    Java methods are wrapped in a synthetic class first. Returns
    ``(data, tree, node, offset)`` where ``data`` is the parsed buffer, ``node``
    the outermost function (or None) and ``offset`` the byte offset of ``text``
    inside ``data``.
    """
    language = Language.parse(language)
    source = text.encode("utf-8")
    if language is Language.JAVA:
        data, offset = _JAVA_WRAP_HEAD + source + _JAVA_WRAP_TAIL, len(_JAVA_WRAP_HEAD)
    else:
        data, offset = source, 0
    tree = new_parser(language).parse(data)
    nodes = function_nodes(tree.root_node, language)
    return data, tree, (nodes[0] if nodes else None), offset


def is_well_formed(text: str, language) -> bool:
    """True when ``text`` parses without error nodes and holds a function."""
    if not text.strip():
        return False
    _, tree, node, _ = parse_standalone(text, language)
    return node is not None and not tree.root_node.has_error


def _function_name(node, language: Language) -> str:
    name = node.child_by_field_name("name")
    if name is not None:
        return name.text.decode("utf-8", errors="replace")
    decl = node.child_by_field_name("declarator")
    while decl is not None:
        if decl.type in _NAME_NODES:
            return decl.text.decode("utf-8", errors="replace")
        inner = decl.child_by_field_name("declarator")
        if inner is None:
            # parenthesized_declarator keeps its child unnamed
            inner = next((c for c in decl.named_children if c.type not in ("parameter_list",)), None)
        decl = inner
    return ""


def parse_functions(file_text: str, language, repo: str = "", path: str = "") -> list[FunctionRecord]:
    """Extract every function/method that has a body, in source order.

    C and C++ yield ``function_definition`` nodes (class-body method definitions
    included, nested definitions inside function bodies not); Java yields
    method, constructor and compact-constructor declarations, including those of
    local and anonymous classes.
    """
    language = Language.parse(language)
    if not file_text:
        return []
    tree = new_parser(language).parse(file_text.encode("utf-8"))
    if tree is None or tree.root_node is None:
        raise ParseFailure(f"grammar produced no tree for {path or '<text>'}")
    starts = _line_starts(file_text)
    records = []
    for node in function_nodes(tree.root_node, language):
        start_line = node.start_point[0] + 1
        end_line = node.end_point[0] + 1
        if node.end_point[1] == 0 and end_line > start_line:
            end_line -= 1
        lo = starts[start_line - 1]
        hi = starts[end_line] - 1 if end_line < len(starts) else len(file_text)
        records.append(
            FunctionRecord(
                id=record_id(repo, path, start_line, end_line),
                repo=repo,
                path=path,
                language=language,
                name=_function_name(node, language),
                start_line=start_line,
                end_line=end_line,
                text=file_text[lo:hi],
            )
        )
    return records


def _language_for(path: Path, languages) -> Language | None:
    lang = EXTENSIONS.get(path.suffix.lower())
    if lang is None or (languages is not None and lang not in languages):
        return None
    return lang


def _parse_file(root: Path, rel: str, lang: Language, repo: str) -> list[FunctionRecord]:
    try:
        data = (root / rel).read_bytes()
    except OSError as exc:
        logger.warning("skipping unreadable file %s: %s", rel, exc)
        return []
    try:
        return parse_functions(decode_source(data), lang, repo=repo, path=rel)
    except ParseFailure as exc:
        logger.warning("skipping %s: %s", rel, exc)
        return []


def ingest_repository(root, languages: Iterable | None = None, repo: str | None = None,
                      max_workers: int = 1) -> list[FunctionRecord]:
    """Walk ``root`` and extract functions from every C, C++ and Java file.

    Output order is lexicographic by relative path, then start line, regardless
    of ``max_workers``.
    """
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"repository root not found: {root}")
    langs = None if languages is None else {Language.parse(x) for x in languages}
    repo = repo if repo is not None else root.name
    jobs = []
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames.sort()
        for fname in filenames:
            full = Path(dirpath) / fname
            lang = _language_for(full, langs)
            if lang is not None:
                jobs.append((full.relative_to(root).as_posix(), lang))
    jobs.sort()
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            chunks = list(pool.map(lambda job: _parse_file(root, job[0], job[1], repo), jobs))
    else:
        chunks = [_parse_file(root, rel, lang, repo) for rel, lang in jobs]
    records = [rec for chunk in chunks for rec in chunk]
    records.sort(key=lambda r: (r.path, r.start_line))
    return records


def filter_manifest(entries: Sequence[RepoManifestEntry], max_months: float = 10,
                    min_merge_rate: float = 0.10) -> list[RepoManifestEntry]:
    """Keep active repositories that accept outside contributions."""
    return [e for e in entries if e.months_since_last_commit <= max_months and e.pr_merge_rate > min_merge_rate]


def nearest_rank(sorted_values: Sequence[float], pct: float) -> float:
    rank = max(1, math.ceil(pct / 100.0 * len(sorted_values)))
    return sorted_values[min(rank, len(sorted_values)) - 1]


def filter_by_length_percentile(pairs: Sequence[FunctionPair], low_pct: float = 5,
                                 high_pct: float = 5) -> list[FunctionPair]:
    """Drop pairs whose vulnerable function is shorter than the ``low_pct``-th or
    longer than the ``(100 - high_pct)``-th nearest-rank percentile of line counts."""
    if not pairs:
        raise EmptyInput("cannot take length percentiles of an empty pair list")
    counts = sorted(p.vulnerable.line_count for p in pairs)
    lo = nearest_rank(counts, low_pct)
    hi = nearest_rank(counts, 100 - high_pct)
    return [p for p in pairs if lo <= p.vulnerable.line_count <= hi]
