"""Command-line pipeline: extract, embed, detect, validate, evaluate, report and
benchmark generation, with JSON Lines files between stages."""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import sys
from pathlib import Path

from vccscan import bench, jsonl
from vccscan.baseline import HashMatch, matches_to_ranked, run_hash_baseline
from vccscan.corpus import (FunctionPair, FunctionRecord, RepoManifestEntry, filter_by_length_percentile,
                            filter_manifest, ingest_repository)
from vccscan.detect import (CandidateClone, DetectConfig, VulnEntry, filter_against_fixed, rank_candidates,
                            retrieve_candidates)
from vccscan.embed import EmbeddingVector, EmbedProviderConfig, embed_batch
from vccscan.errors import DataContractError, EmptyInput, FixtureMiss, InputError, VccError
from vccscan.index import VectorIndex
from vccscan.languages import Language
from vccscan.metrics import EvalQuery, MetricReport, average_reports, classification_table, evaluate, markdown_table
from vccscan.normalize import preprocess
from vccscan.validate import (LlmProviderConfig, ParseStatus, ReplayProvider, ValidationRequest,
                              ValidationVerdict, aggregate, make_provider, missing_digests, validate_many)

logger = logging.getLogger("vccscan")

PATH_KEYS = (
    "repo", "manifest", "repos_root", "vulns", "pairs", "truth", "corpus", "embeddings", "entry_embeddings",
    "candidates", "verdicts", "baseline", "evaluation", "report", "bench_dir",
)
REPORT_VERSION = 1


@dataclasses.dataclass
class PipelineConfig:
    base_dir: Path
    paths: dict
    detect: DetectConfig
    embed: EmbedProviderConfig
    llm: LlmProviderConfig
    bench_llm: LlmProviderConfig
    bench: bench.BenchPlan = dataclasses.field(default_factory=bench.BenchPlan)
    seed: int = 0
    languages: tuple = tuple(Language)
    repo_slug: str = ""
    fingerprint: str = ""
    length_filter: bool = True

    def path(self, key: str, required: bool = True) -> Path | None:
        value = self.paths.get(key)
        if value is None:
            if required:
                raise InputError(f"config has no paths.{key}")
            return None
        return value


def load_config(path, threshold=None, runs=None, seed=None) -> PipelineConfig:
    """Read the JSON config; relative paths resolve against the config's directory.

    ``threshold``, ``runs`` and ``seed`` override ``detect.threshold_t``,
    ``llm.runs`` and ``seed``. The fingerprint covers the file bytes plus any
    overrides.
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
        obj = json.loads(raw)
    except FileNotFoundError as exc:
        raise InputError(f"config file not found: {path}") from exc
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise InputError(f"config file is not valid JSON: {path}") from exc
    if not isinstance(obj, dict):
        raise InputError("config must be a JSON object")
    base = path.resolve().parent

    paths = {}
    for key, value in (obj.get("paths") or {}).items():
        if key not in PATH_KEYS:
            raise InputError(f"unknown path key paths.{key}")
        p = Path(value)
        paths[key] = p if p.is_absolute() else (base / p)
    resolved = [str(p.resolve()) for p in paths.values()]
    if len(set(resolved)) != len(resolved):
        raise InputError("config paths must be distinct")

    overrides = {k: v for k, v in (("threshold", threshold), ("runs", runs), ("seed", seed)) if v is not None}
    detect_obj = dict(obj.get("detect") or {})
    if threshold is not None:
        detect_obj["threshold_t"] = threshold
    llm_obj = dict(obj.get("llm") or {})
    if runs is not None:
        llm_obj["runs"] = runs
    bench_obj = dict(obj.get("bench") or {})
    bench_llm_obj = bench_obj.pop("llm", None) or llm_obj
    length_filter = bool(bench_obj.pop("length_filter", True))
    try:
        detect = DetectConfig(float(detect_obj.get("threshold_t", 0.7)), detect_obj.get("max_candidates_per_query"))
        cfg = PipelineConfig(
            base_dir=base,
            paths=paths,
            detect=detect,
            embed=EmbedProviderConfig.from_json(obj.get("embed") or {}),
            llm=LlmProviderConfig.from_json(llm_obj),
            bench_llm=LlmProviderConfig.from_json(bench_llm_obj),
            bench=bench.BenchPlan.from_json(bench_obj),
            seed=int(seed if seed is not None else obj.get("seed", 0)),
            languages=tuple(Language.parse(x) for x in obj.get("languages", [l.value for l in Language])),
            repo_slug=str(obj.get("repo_slug", "")),
            length_filter=length_filter,
        )
    except (TypeError, ValueError) as exc:
        raise InputError(f"invalid config: {exc}") from exc
    digest = hashlib.sha256(raw)
    if overrides:
        digest.update(jsonl.dumps(overrides).encode("utf-8"))
    cfg.fingerprint = digest.hexdigest()
    return cfg


# --- loaders --------------------------------------------------------------

def _rows(path: Path, what: str) -> list[dict]:
    if not path.is_file():
        raise InputError(f"{what} file not found: {path}")
    try:
        return jsonl.read_jsonl(path)
    except (ValueError, UnicodeDecodeError) as exc:
        raise InputError(str(exc)) from exc


def _parse_rows(rows, build, what):
    try:
        return [build(r) for r in rows]
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed {what} row: {exc!r}") from exc


def load_corpus(path: Path) -> list[FunctionRecord]:
    return _parse_rows(_rows(path, "corpus"), FunctionRecord.from_json, "corpus")


def entry_from_json(obj: dict) -> VulnEntry:
    """A vulnerability row: flat ``{entry_id, vulnerable_function, fixed_function, ...}``
    or a nested FunctionPair (entry id = pair id)."""
    if "vulnerable" in obj:
        pair = FunctionPair.from_json(obj)
        return VulnEntry(pair.pair_id, pair.cve_id, pair.cwe_id, pair.vulnerable.text, pair.fixed.text,
                         language=pair.language, source_id=obj.get("source_id"))
    return VulnEntry(obj["entry_id"], obj.get("cve_id", ""), obj.get("cwe_id", ""), obj["vulnerable_function"],
                     obj["fixed_function"], language=obj.get("language", "C"), source_id=obj.get("source_id"))


def load_entries(path: Path) -> list[VulnEntry]:
    entries = _parse_rows(_rows(path, "vulnerability"), entry_from_json, "vulnerability")
    if not entries:
        raise EmptyInput(f"no vulnerability entries in {path}")
    seen = set()
    for e in entries:
        if e.entry_id in seen:
            raise InputError(f"duplicate entry id {e.entry_id}")
        seen.add(e.entry_id)
    return entries


def load_vectors(path: Path, what: str) -> list[EmbeddingVector]:
    rows = _rows(path, what)
    try:
        return [EmbeddingVector.from_json(r) for r in rows]
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed {what} row: {exc!r}") from exc
    except ValueError as exc:
        raise DataContractError(str(exc)) from exc


def load_candidates(path: Path) -> list[CandidateClone]:
    return _parse_rows(_rows(path, "candidates"), CandidateClone.from_json, "candidates")


def load_truth(path: Path) -> list[EvalQuery]:
    return _parse_rows(_rows(path, "truth"), EvalQuery.from_json, "truth")


def load_verdict_rows(path: Path) -> list[dict]:
    return _rows(path, "verdicts")


def attach_vectors(entries, vectors) -> list[VulnEntry]:
    by_id = {v.source_id: v for v in vectors}
    out = []
    for e in entries:
        try:
            vul, fix = by_id[f"{e.entry_id}:vulnerable"], by_id[f"{e.entry_id}:fixed"]
        except KeyError as exc:
            raise InputError(f"no embedding for entry {e.entry_id}; re-run embed") from exc
        out.append(dataclasses.replace(e, vulnerable_vec=vul, fixed_vec=fix))
    return out


# --- stages ---------------------------------------------------------------

def cmd_extract(cfg: PipelineConfig) -> list[FunctionRecord]:
    out = cfg.path("corpus")
    manifest = cfg.path("manifest", required=False)
    if manifest is not None:
        entries = _parse_rows(_rows(manifest, "manifest"), RepoManifestEntry.from_json, "manifest")
        root = cfg.path("repos_root")
        records = []
        for entry in filter_manifest(entries):
            repo_dir = root / entry.slug
            if not repo_dir.is_dir():
                logger.warning("repository %s not found under %s; skipped", entry.slug, root)
                continue
            records.extend(ingest_repository(repo_dir, cfg.languages, repo=entry.slug))
    elif cfg.paths.get("bench_dir") is not None and cfg.paths.get("repo") is None:
        records = bench.clone_functions(bench.read_clones(cfg.path("bench_dir") / "clones.jsonl"))
    else:
        repo = cfg.path("repo")
        if not repo.is_dir():
            raise InputError(f"repository directory not found: {repo}")
        records = ingest_repository(repo, cfg.languages, repo=cfg.repo_slug or repo.name)
    if not records:
        logger.warning("no functions extracted")
    jsonl.write_jsonl(out, (r.to_json() for r in records))
    logger.info("extracted %d functions -> %s", len(records), out)
    return records


def cmd_embed(cfg: PipelineConfig) -> None:
    records = load_corpus(cfg.path("corpus"))
    if records:
        vectors = embed_batch(cfg.embed, [preprocess(r.text, r.language) for r in records], [r.id for r in records])
    else:
        vectors = []
    jsonl.write_jsonl(cfg.path("embeddings"), (v.to_json() for v in vectors))
    vulns = cfg.path("vulns", required=False)
    if vulns is not None:
        entries = load_entries(vulns)
        texts, ids = [], []
        for e in entries:
            texts += [preprocess(e.vulnerable_text, e.language), preprocess(e.fixed_text, e.language)]
            ids += [f"{e.entry_id}:vulnerable", f"{e.entry_id}:fixed"]
        entry_vecs = embed_batch(cfg.embed, texts, ids)
        jsonl.write_jsonl(cfg.path("entry_embeddings"), (v.to_json() for v in entry_vecs))
    logger.info("embedded %d functions", len(vectors))


def cmd_detect(cfg: PipelineConfig) -> list[CandidateClone]:
    targets = load_vectors(cfg.path("embeddings"), "embeddings")
    if not targets:
        raise EmptyInput("no target embeddings; corpus is empty")
    entries = attach_vectors(load_entries(cfg.path("vulns")), load_vectors(cfg.path("entry_embeddings"),
                                                                         "entry embeddings"))
    index = VectorIndex(targets)
    candidates = filter_against_fixed(retrieve_candidates(entries, index, cfg.detect))
    jsonl.write_jsonl(cfg.path("candidates"), (c.to_json() for c in candidates))
    logger.info("%d candidates, %d kept", len(candidates), sum(1 for c in candidates if c.kept))
    return candidates


def cmd_baseline(cfg: PipelineConfig) -> list[HashMatch]:
    records = load_corpus(cfg.path("corpus"))
    entries = load_entries(cfg.path("vulns"))
    matches = run_hash_baseline(entries, records)
    jsonl.write_jsonl(cfg.path("baseline"), (m.to_json() for m in matches))
    logger.info("hash baseline: %d matches", len(matches))
    return matches


def _validation_requests(cfg: PipelineConfig, candidates):
    entries = {e.entry_id: e for e in load_entries(cfg.path("vulns"))}
    corpus = {r.id: r for r in load_corpus(cfg.path("corpus"))}
    reqs = []
    for c in candidates:
        if c.entry_id not in entries or c.target_id not in corpus:
            raise InputError(f"candidate {c.entry_id}/{c.target_id} refers to unknown ids")
        e = entries[c.entry_id]
        reqs.append(ValidationRequest(e.vulnerable_text, e.fixed_text, corpus[c.target_id].text,
                                      c.entry_id, c.target_id))
    return reqs


def cmd_validate(cfg: PipelineConfig) -> list[dict]:
    kept = [c for c in load_candidates(cfg.path("candidates")) if c.kept]
    reqs = _validation_requests(cfg, kept)
    provider = make_provider(cfg.llm, cfg.base_dir)
    if isinstance(provider, ReplayProvider):
        missing = missing_digests(provider, reqs, cfg.llm.prompt_budget)
        if missing:
            raise FixtureMiss(missing)
    per_run = validate_many(provider, reqs, cfg.llm.runs, cfg.llm.max_in_flight, cfg.llm.prompt_budget)
    rows = []
    for req, runs in zip(reqs, per_run):
        row = {"entry_id": req.entry_id, "target_id": req.target_id}
        row.update(aggregate(runs).to_json())
        row["runs"] = [v.to_json() for v in runs]
        rows.append(row)
    jsonl.write_jsonl(cfg.path("verdicts"), rows)
    logger.info("validated %d candidates", len(rows))
    return rows


def _verdict_maps(rows):
    """Aggregated verdicts and per-run verdicts, both keyed by target id."""
    voted = {r["target_id"]: ValidationVerdict.from_json(r) for r in rows}
    n_runs = max((len(r.get("runs", ())) for r in rows), default=0)
    per_run = []
    for i in range(n_runs):
        per_run.append({r["target_id"]: ValidationVerdict.from_json(r["runs"][i])
                        for r in rows if i < len(r.get("runs", ()))})
    return voted, per_run


def _flagged(ranked) -> set:
    return {t for rl in ranked.values() for t in rl.results}


def cmd_evaluate(cfg: PipelineConfig) -> dict:
    truth_path = cfg.path("truth")
    truths = load_truth(truth_path)
    candidates = load_candidates(cfg.path("candidates"))
    systems: dict[str, MetricReport] = {}

    ranked = rank_candidates(candidates)
    systems["retrieval"] = evaluate(ranked, truths, flagged=_flagged(ranked))

    verdict_path = cfg.path("verdicts", required=False)
    if verdict_path is not None and verdict_path.is_file():
        voted, per_run = _verdict_maps(load_verdict_rows(verdict_path))
        ranked = rank_candidates(candidates, voted)
        systems["validated_vote"] = evaluate(ranked, truths, flagged=_flagged(ranked))
        if per_run:
            systems["validated_run_mean"] = average_reports(
                [evaluate(rank_candidates(candidates, run), truths) for run in per_run])

    baseline_path = cfg.path("baseline", required=False)
    if baseline_path is not None and baseline_path.is_file():
        matches = [HashMatch.from_json(r) for r in _rows(baseline_path, "baseline")]
        ranked = matches_to_ranked(matches)
        systems["hash_baseline"] = evaluate(ranked, truths, flagged=_flagged(ranked))

    result = {
        "version": REPORT_VERSION,
        "config_fingerprint": cfg.fingerprint,
        "seed": cfg.seed,
        "threshold_t": cfg.detect.threshold_t,
        "queries": len(truths),
        "systems": {name: rep.to_json() for name, rep in systems.items()},
    }
    out = cfg.path("evaluation")
    jsonl.write_json(out, result)
    md = ["# Evaluation\n", markdown_table(systems)]
    classified = {k: v.classification for k, v in systems.items() if v.classification is not None}
    if classified:
        md += ["\n", classification_table(classified)]
    jsonl.write_text_atomic(out.with_suffix(".md"), "".join(md))
    return result


def cmd_report(cfg: PipelineConfig) -> dict:
    candidates = {(c.entry_id, c.target_id): c for c in load_candidates(cfg.path("candidates"))}
    corpus = {r.id: r for r in load_corpus(cfg.path("corpus"))}
    entries = {e.entry_id: e for e in load_entries(cfg.path("vulns"))}
    verdict_path = cfg.path("verdicts", required=False)
    rows = load_verdict_rows(verdict_path) if verdict_path is not None and verdict_path.is_file() else []

    voted = {r["target_id"]: ValidationVerdict.from_json(r) for r in rows}
    validated = [candidates[(r["entry_id"], r["target_id"])] for r in rows
                 if (r["entry_id"], r["target_id"]) in candidates]
    ranked = rank_candidates(validated, voted)

    order = {eid: i for i, eid in enumerate(entries)}
    findings = []
    for entry_id in sorted(ranked, key=lambda eid: (order.get(eid, len(order)), eid)):
        entry = entries.get(entry_id)
        for rank, target_id in enumerate(ranked[entry_id].results, start=1):
            c = candidates[(entry_id, target_id)]
            v = voted[target_id]
            if not c.kept or v.parse_status is ParseStatus.FAILED:
                continue
            rec = corpus.get(target_id)
            findings.append({
                "entry_id": entry_id,
                "cve_id": entry.cve_id if entry else "",
                "cwe_id": entry.cwe_id if entry else "",
                "rank": rank,
                "target": {
                    "id": target_id,
                    "repo": rec.repo if rec else "",
                    "path": rec.path if rec else "",
                    "name": rec.name if rec else "",
                    "start_line": rec.start_line if rec else 0,
                    "end_line": rec.end_line if rec else 0,
                },
                "sim_vuln": c.sim_vuln,
                "sim_fixed": c.sim_fixed,
                "verdict": {
                    "is_vulnerable": v.is_vulnerable,
                    "confidence_level": v.confidence_level,
                    "justification": v.justification,
                    "parse_status": v.parse_status.value,
                },
            })

    statuses = [ValidationVerdict.from_json(r) for r in rows]
    summary = {
        "validated_candidates": len(rows),
        "confirmed": sum(1 for v in statuses if v.is_vulnerable),
        "rejected": sum(1 for v in statuses if not v.is_vulnerable and v.parse_status is not ParseStatus.FAILED),
        "failed": sum(1 for v in statuses if v.parse_status is ParseStatus.FAILED),
        "findings": len(findings),
        "entries_with_findings": len({f["entry_id"] for f in findings}),
    }
    stats = None
    eval_path = cfg.path("evaluation", required=False)
    if eval_path is not None and eval_path.is_file():
        stats = json.loads(eval_path.read_text(encoding="utf-8"))["systems"]
    report = {
        "version": REPORT_VERSION,
        "config_fingerprint": cfg.fingerprint,
        "seed": cfg.seed,
        "threshold_t": cfg.detect.threshold_t,
        "summary": summary,
        "findings": findings,
        "stats": stats,
    }
    out = cfg.path("report")
    jsonl.write_json(out, report)
    jsonl.write_text_atomic(out.with_suffix(".md"), report_markdown(report))
    return report


def _cell(text: str) -> str:
    return " ".join(text.split()).replace("|", "\\|")


def report_markdown(report: dict) -> str:
    s = report["summary"]
    lines = [
        "# Vulnerable clone findings",
        "",
        f"- config fingerprint: `{report['config_fingerprint']}`",
        f"- seed: {report['seed']}, threshold: {report['threshold_t']}",
        f"- validated candidates: {s['validated_candidates']} (confirmed {s['confirmed']}, "
        f"rejected {s['rejected']}, unparsed {s['failed']})",
        f"- findings: {s['findings']} across {s['entries_with_findings']} known vulnerabilities",
        "",
    ]
    current = None
    for f in report["findings"]:
        if f["entry_id"] != current:
            if current is not None:
                lines.append("")
            current = f["entry_id"]
            label = " / ".join(x for x in (f["cve_id"], f["cwe_id"]) if x) or current
            lines += [f"## {label} (`{current}`)", "",
                      "| Rank | Location | Function | Sim (vuln) | Sim (fixed) | Confidence | Justification |",
                      "|---:|---|---|---:|---:|---:|---|"]
        t = f["target"]
        loc = f"{t['repo']}/{t['path']}:{t['start_line']}-{t['end_line']}"
        v = f["verdict"]
        lines.append(f"| {f['rank']} | {_cell(loc)} | {_cell(t['name'])} | {f['sim_vuln']:.4f} | "
                     f"{f['sim_fixed']:.4f} | {v['confidence_level']} | {_cell(v['justification'])} |")
    if current is not None:
        lines.append("")
    if report.get("stats"):
        lines += ["## Evaluation", ""]
        for name, rep in report["stats"].items():
            p = rep["P_at"]
            cells = ", ".join(f"P@{k} {100 * p[k]:.2f}" for k in p)
            lines.append(f"- {name}: {cells}, MAP {100 * rep['MAP']:.2f}")
        lines.append("")
    return "\n".join(lines)


def cmd_bench_gen(cfg: PipelineConfig) -> dict:
    pool = _parse_rows(_rows(cfg.path("pairs"), "pairs"), FunctionPair.from_json, "pairs")
    if not pool:
        raise EmptyInput("pairs file is empty")
    if cfg.length_filter:
        pool = filter_by_length_percentile(pool)
    pairs = bench.cwe_sample(pool, cfg.bench, cfg.seed)
    provider = make_provider(cfg.bench_llm, cfg.base_dir)
    clones, stats = bench.assemble_benchmark(pairs, cfg.bench, provider, cfg.seed)
    out = cfg.path("bench_dir")
    bench.write_archive(out, pairs, clones, stats, cfg.bench, cfg.seed, provider.fingerprint())
    jsonl.write_jsonl(out / "truth.jsonl", ({"query_id": q.query_id, "ground_truth": sorted(q.ground_truth)}
                                            for q in bench.benchmark_truth(clones)))
    jsonl.write_jsonl(out / "vulns.jsonl", (p.to_json() for p in pairs))
    jsonl.write_text_atomic(out / "stats.md", bench.stats_markdown(stats))
    logger.info("benchmark: %d pairs, %d clones -> %s", len(pairs), len(clones), out)
    return stats


def cmd_bench_audit(cfg: PipelineConfig, sample: int, seed: int | None) -> Path:
    out = cfg.path("bench_dir")
    clones = bench.read_clones(out / "clones.jsonl")
    sheet = bench.audit_sheet(clones, sample, cfg.seed if seed is None else seed)
    return jsonl.write_text_atomic(out / "audit.md", sheet)


# --- entry point ----------------------------------------------------------

STAGES = {
    "extract": cmd_extract,
    "embed": cmd_embed,
    "detect": cmd_detect,
    "baseline": cmd_baseline,
    "validate": cmd_validate,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
    "bench-gen": cmd_bench_gen,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vcc", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*STAGES, "bench-audit"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="pipeline config (JSON)")
        p.add_argument("--threshold", type=float, help="override detect.threshold_t")
        p.add_argument("--runs", type=int, help="override llm.runs")
        p.add_argument("--seed", type=int, help="override seed")
        if name == "evaluate":
            p.add_argument("--truth", help="ground-truth JSONL (overrides paths.truth)")
        if name == "bench-gen":
            p.add_argument("--pairs", help="pairs JSONL (overrides paths.pairs)")
        if name == "bench-audit":
            p.add_argument("--sample", type=int, default=100, help="number of clones to review")
    return parser


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, VccError):
        return exc.exit_code
    if isinstance(exc, (FileNotFoundError, IsADirectoryError, NotADirectoryError)):
        return 2
    return 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.threshold, args.runs, args.seed)
        if getattr(args, "truth", None):
            cfg.paths["truth"] = Path(args.truth).resolve()
        if getattr(args, "pairs", None):
            cfg.paths["pairs"] = Path(args.pairs).resolve()
        if args.command == "bench-audit":
            cmd_bench_audit(cfg, args.sample, args.seed)
        else:
            STAGES[args.command](cfg)
    except FixtureMiss as exc:
        logger.error("replay fixture misses %d prompt(s):", len(exc.digests))
        for d in exc.digests:
            print(d, file=sys.stderr)
        return exc.exit_code
    except (VccError, OSError) as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return exit_code(exc)
    return 0


if __name__ == "__main__":
    sys.exit(main())
