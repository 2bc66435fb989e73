"""Candidate retrieval, vulnerable-vs-fixed filtering and ranking."""

from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Mapping, Sequence

from vccscan.embed import NORM_TOLERANCE, EmbeddingVector, cosine, norm
from vccscan.errors import DimensionMismatch
from vccscan.index import VectorIndex
from vccscan.languages import Language
from vccscan.metrics import RankedList

BENCHMARK_THRESHOLD = 0.7
REALWORLD_THRESHOLD = 0.85


@dataclasses.dataclass(frozen=True, eq=False)
class VulnEntry:
    entry_id: str
    cve_id: str
    cwe_id: str
    vulnerable_text: str
    fixed_text: str
    vulnerable_vec: EmbeddingVector | None = None
    fixed_vec: EmbeddingVector | None = None
    language: Language = Language.C
    # Id of the entry's own function when it also lives in the scanned corpus.
    source_id: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "language", Language.parse(self.language))
        if self.vulnerable_text == self.fixed_text:
            raise ValueError(f"entry {self.entry_id}: vulnerable and fixed text are identical")
        vecs = [v for v in (self.vulnerable_vec, self.fixed_vec) if v is not None]
        for v in vecs:
            if abs(norm(v.values) - 1.0) > NORM_TOLERANCE:
                raise ValueError(f"entry {self.entry_id}: embedding is not unit-norm")
        if len(vecs) == 2 and vecs[0].dim != vecs[1].dim:
            raise DimensionMismatch(f"entry {self.entry_id}: vulnerable/fixed embedding dims differ")


@dataclasses.dataclass(frozen=True)
class CandidateClone:
    entry_id: str
    target_id: str
    sim_vuln: float
    sim_fixed: float
    kept: bool | None = None
    rank_score: float = 0.0

    def to_json(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "CandidateClone":
        return cls(obj["entry_id"], obj["target_id"], float(obj["sim_vuln"]), float(obj["sim_fixed"]),
                   obj.get("kept"), float(obj.get("rank_score", 0.0)))


@dataclasses.dataclass(frozen=True)
class DetectConfig:
    threshold_t: float = BENCHMARK_THRESHOLD
    max_candidates_per_query: int | None = None

    def __post_init__(self):
        if not 0.0 < self.threshold_t <= 1.0:
            raise ValueError(f"threshold_t must lie in (0, 1], got {self.threshold_t}")
        if self.max_candidates_per_query is not None and self.max_candidates_per_query < 1:
            raise ValueError("max_candidates_per_query must be positive or None")

    @classmethod
    def benchmark(cls) -> "DetectConfig":
        return cls(BENCHMARK_THRESHOLD)

    @classmethod
    def realworld(cls) -> "DetectConfig":
        return cls(REALWORLD_THRESHOLD)


def retrieve_candidates(entries: Sequence[VulnEntry], target_index: VectorIndex, config: DetectConfig,
                        max_workers: int = 1) -> list[CandidateClone]:
    """Query the target index with every vulnerable function and assign each
    retrieved target to the single entry it is most similar to.

    Ties go to the entry listed first. A target equal to an entry's own
    ``source_id`` is never a candidate of that entry. Output is grouped by
    entry (input order), best similarity first within an entry.
    """
    for e in entries:
        if e.vulnerable_vec is None or e.fixed_vec is None:
            raise ValueError(f"entry {e.entry_id} has no embeddings")
        if e.vulnerable_vec.dim != target_index.dimension:
            raise DimensionMismatch(
                f"entry {e.entry_id} has dim {e.vulnerable_vec.dim}, index has {target_index.dimension}")

    def run(entry):
        return target_index.query_threshold(entry.vulnerable_vec, config.threshold_t)

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            hits = list(pool.map(run, entries))
    else:
        hits = [run(e) for e in entries]

    best: dict[str, tuple[int, float]] = {}
    for pos, (entry, found) in enumerate(zip(entries, hits)):
        for target_id, score in found:
            if target_id == entry.source_id:
                continue
            prev = best.get(target_id)
            if prev is None or score > prev[1]:
                best[target_id] = (pos, score)

    per_entry: list[list[tuple[str, float]]] = [[] for _ in entries]
    order = {tid: i for i, tid in enumerate(target_index.ids)}
    for target_id, (pos, score) in best.items():
        per_entry[pos].append((target_id, score))

    out = []
    for entry, found in zip(entries, per_entry):
        found.sort(key=lambda item: (-item[1], order[item[0]]))
        if config.max_candidates_per_query is not None:
            found = found[:config.max_candidates_per_query]
        for target_id, score in found:
            sim_fixed = cosine(target_index.vector(target_id), entry.fixed_vec.values)
            out.append(CandidateClone(entry.entry_id, target_id, score, sim_fixed, None, score))
    return out


def filter_against_fixed(candidates: Sequence[CandidateClone]) -> list[CandidateClone]:
    """Mark candidates closer to the patched function as discarded (``kept=False``).

    Equal similarities keep the candidate. Discarded candidates stay in the
    output for auditing.
    """
    return [dataclasses.replace(c, kept=c.sim_fixed <= c.sim_vuln) for c in candidates]


def default_sort_key(candidate: CandidateClone, verdict=None):
    if verdict is None:
        return (-candidate.sim_vuln, candidate.target_id)
    return (-int(verdict.is_vulnerable), -verdict.confidence_level, -candidate.sim_vuln, candidate.target_id)


def rank_candidates(candidates: Sequence[CandidateClone], verdicts: Mapping[str, object] | None = None,
                    sort_key: Callable | None = None) -> dict[str, RankedList]:
    """Build one ranked list per entry from kept candidates.

    Without verdicts the order is similarity descending. With verdicts
    (keyed by target id) the order is (validated, confidence, similarity) and
    targets the validator did not confirm are dropped. ``scores`` carries the
    primary sort value of each listed target.
    """
    key = sort_key or default_sort_key
    grouped: dict[str, list] = {}
    for c in candidates:
        if not c.kept:
            continue
        if verdicts is None:
            grouped.setdefault(c.entry_id, []).append((key(c), c, c.sim_vuln))
            continue
        verdict = verdicts.get(c.target_id)
        if verdict is None or not verdict.is_vulnerable:
            continue
        grouped.setdefault(c.entry_id, []).append((key(c, verdict), c, 1.0))
    ranked = {}
    for entry_id, items in grouped.items():
        items.sort(key=lambda item: item[0])
        ranked[entry_id] = RankedList(entry_id, tuple(c.target_id for _, c, _ in items),
                                      tuple(score for _, _, score in items))
    return ranked
