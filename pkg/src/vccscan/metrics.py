"""Ranking metrics (P@k, AP, MAP) and classification metrics (precision, recall, F1)."""

from __future__ import annotations

import dataclasses
from typing import Iterable, Mapping, Sequence

from vccscan.errors import EmptyGroundTruth, EmptyQuerySet


@dataclasses.dataclass(frozen=True)
class EvalQuery:
    query_id: str
    ground_truth: frozenset

    def __post_init__(self):
        object.__setattr__(self, "ground_truth", frozenset(self.ground_truth))

    @classmethod
    def from_json(cls, obj: dict) -> "EvalQuery":
        return cls(obj["query_id"], frozenset(obj["ground_truth"]))


@dataclasses.dataclass(frozen=True)
class RankedList:
    query_id: str
    results: tuple = ()
    scores: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "results", tuple(self.results))
        object.__setattr__(self, "scores", tuple(self.scores))
        if len(set(self.results)) != len(self.results):
            raise ValueError(f"ranked list for {self.query_id!r} contains duplicate ids")

    @property
    def length(self) -> int:
        return len(self.results)

    def to_json(self) -> dict:
        return {"query_id": self.query_id, "results": list(self.results), "scores": list(self.scores)}

    @classmethod
    def from_json(cls, obj: dict) -> "RankedList":
        return cls(obj["query_id"], tuple(obj.get("results", ())), tuple(obj.get("scores", ())))


@dataclasses.dataclass(frozen=True)
class ClassificationReport:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float


@dataclasses.dataclass(frozen=True)
class MetricReport:
    per_query_AP: dict
    MAP: float
    P_at: dict
    classification: ClassificationReport | None = None

    def to_json(self) -> dict:
        return {
            "per_query_AP": dict(sorted(self.per_query_AP.items())),
            "MAP": self.MAP,
            "P_at": {str(k): v for k, v in sorted(self.P_at.items())},
            "classification": None if self.classification is None else dataclasses.asdict(self.classification),
        }


def precision_at_k(ranked: RankedList, truth: EvalQuery, k: int) -> float:
    """|top_k ∩ G| / k; a list shorter than k counts the gap as misses."""
    if k < 1:
        raise ValueError("k must be >= 1")
    hits = sum(1 for r in ranked.results[:k] if r in truth.ground_truth)
    return hits / k


def average_precision(ranked: RankedList, truth: EvalQuery) -> float:
    if not truth.ground_truth:
        raise EmptyGroundTruth(f"query {truth.query_id!r} has no ground truth")
    hits = 0
    total = 0.0
    for i, r in enumerate(ranked.results, start=1):
        if r in truth.ground_truth:
            hits += 1
            total += hits / i
    return total / len(truth.ground_truth)


def mean_average_precision(queries: Sequence[tuple[RankedList, EvalQuery]]) -> float:
    if not queries:
        raise EmptyQuerySet("MAP needs at least one query")
    return sum(average_precision(r, q) for r, q in queries) / len(queries)


def classification_metrics(tp: int, fp: int, fn: int) -> ClassificationReport:
    if min(tp, fp, fn) < 0:
        raise ValueError("counts must be non-negative")
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return ClassificationReport(tp, fp, fn, precision, recall, f1)


def evaluate(ranked: Mapping[str, RankedList], truths: Iterable[EvalQuery], ks: Sequence[int] = (1, 3, 5),
             flagged: Iterable[str] | None = None) -> MetricReport:
    """Score every query in ``truths``; a query with no ranked list scores zero.

    ``flagged`` (ids reported as vulnerable clones) enables the
    classification block, counted against the union of all ground truths.
    """
    truths = list(truths)
    if not truths:
        raise EmptyQuerySet("no evaluation queries")
    pairs = [(ranked.get(q.query_id) or RankedList(q.query_id), q) for q in truths]
    per_query = {q.query_id: average_precision(r, q) for r, q in pairs}
    p_at = {k: sum(precision_at_k(r, q, k) for r, q in pairs) / len(pairs) for k in ks}
    classification = None
    if flagged is not None:
        flagged = set(flagged)
        relevant = set().union(*(q.ground_truth for q in truths))
        tp = len(flagged & relevant)
        classification = classification_metrics(tp, len(flagged - relevant), len(relevant - flagged))
    return MetricReport(per_query, mean_average_precision(pairs), p_at, classification)


def average_reports(reports: Sequence[MetricReport]) -> MetricReport:
    """Metric-level average over repeated runs (per-query AP, MAP and each P@k)."""
    if not reports:
        raise EmptyQuerySet("no reports to average")
    n = len(reports)
    per_query = {qid: sum(r.per_query_AP[qid] for r in reports) / n for qid in reports[0].per_query_AP}
    p_at = {k: sum(r.P_at[k] for r in reports) / n for k in reports[0].P_at}
    return MetricReport(per_query, sum(r.MAP for r in reports) / n, p_at, None)


def markdown_table(rows: Mapping[str, MetricReport], ks: Sequence[int] = (1, 3, 5)) -> str:
    """Percent table with one row per system: P@k columns then MAP."""
    head = "| System | " + " | ".join(f"P@{k}" for k in ks) + " | MAP |"
    sep = "|---|" + "---:|" * (len(ks) + 1)
    lines = [head, sep]
    for name, rep in rows.items():
        cells = [f"{100 * rep.P_at[k]:.2f}" for k in ks] + [f"{100 * rep.MAP:.2f}"]
        lines.append(f"| {name} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def classification_table(rows: Mapping[str, ClassificationReport]) -> str:
    lines = ["| System | TP | FP | FN | Precision | Recall | F1 |", "|---|---:|---:|---:|---:|---:|---:|"]
    for name, c in rows.items():
        lines.append(f"| {name} | {c.tp} | {c.fp} | {c.fn} | {100 * c.precision:.2f} | "
                     f"{100 * c.recall:.2f} | {100 * c.f1:.2f} |")
    return "\n".join(lines) + "\n"
