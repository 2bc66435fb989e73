"""Hash-based clone detection baseline over abstracted functions."""

from __future__ import annotations

import dataclasses
from typing import Sequence

from vccscan.corpus import FunctionRecord
from vccscan.detect import VulnEntry
from vccscan.metrics import RankedList
from vccscan.normalize import abstract_function, abstract_text


@dataclasses.dataclass(frozen=True)
class HashMatch:
    entry_id: str
    target_id: str
    digest: str

    def to_json(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "HashMatch":
        return cls(obj["entry_id"], obj["target_id"], obj["digest"])


def run_hash_baseline(entries: Sequence[VulnEntry], targets: Sequence[FunctionRecord]) -> list[HashMatch]:
    """Every (entry, target) whose abstraction digest equals the entry's
    vulnerable digest, in entry then target order.

    Targets that also match the entry's fixed digest are left out, as is the
    entry's own source function.
    """
    by_digest: dict[str, list[FunctionRecord]] = {}
    for t in targets:
        by_digest.setdefault(abstract_function(t).digest, []).append(t)
    matches = []
    for e in entries:
        vuln = abstract_text(e.vulnerable_text, e.language).digest
        if vuln == abstract_text(e.fixed_text, e.language).digest:
            continue
        for t in by_digest.get(vuln, ()):
            if t.id != e.source_id:
                matches.append(HashMatch(e.entry_id, t.id, vuln))
    return matches


def matches_to_ranked(matches: Sequence[HashMatch]) -> dict[str, RankedList]:
    """Ranked lists for evaluation; all hits of an entry tie, so they keep input order."""
    grouped: dict[str, list[str]] = {}
    for m in matches:
        grouped.setdefault(m.entry_id, []).append(m.target_id)
    return {eid: RankedList(eid, tuple(ids), tuple(1.0 for _ in ids)) for eid, ids in grouped.items()}
