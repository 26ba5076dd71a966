"""Command-line surface wiring the pipeline stages together.

Every command is idempotent for a fixed config and seed: outputs are written
atomically into the output directory and re-running overwrites them with
byte-identical content. Errors exit nonzero with a machine-readable JSON
report on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys

from .attack import AttackResult, attack_batch
from .config import PipelineConfig, load_config
from .datasets import (
    build_gold,
    build_diamond,
    build_preference_pairs,
    export_sft,
    select_targets,
    split_train_test,
)
from .errors import (
    ConfigError,
    DataError,
    GenerationParseError,
    GenerationValidationError,
    MetricError,
    NotFoundError,
    RankforgeError,
    RunFormatError,
    SelectionError,
    ServiceError,
    StatsError,
)
from .metrics import compare_attacks, evaluate_attack, report_csv
from .models import TargetGroup, TargetPair, TraceRecord
from .ranking import RankedList, RunEntry, read_run, rerank, write_run
from .selfcheck import run_selfcheck
from .stage1 import run_stage1_batch
from .storage import (
    atomic_write_text,
    load_documents,
    load_queries,
    read_jsonl,
    write_json,
    write_jsonl,
)

_ERROR_CODES: tuple[tuple[type[RankforgeError], str, int], ...] = (
    (ConfigError, "config", 2),
    (RunFormatError, "run-format", 3),
    (SelectionError, "selection", 3),
    (NotFoundError, "not-found", 3),
    (DataError, "data", 3),
    (GenerationParseError, "generation-parse", 4),
    (GenerationValidationError, "generation-contract", 4),
    (ServiceError, "service", 4),
    (MetricError, "metric", 5),
    (StatsError, "statistics", 5),
)


def _rank_only(run: RankedList) -> RankedList:
    """Replace observed scores with rank-derived placeholders (1/rank)."""
    return RankedList(
        query_id=run.query_id,
        entries=tuple(
            RunEntry(doc_id=e.doc_id, score=1.0 / e.rank, rank=e.rank) for e in run.entries
        ),
    )


def _load_targets(path: str) -> list[TargetPair]:
    return [TargetPair.from_json_dict(row) for row in read_jsonl(path)]


def _groups_map(pairs: list[TargetPair]) -> dict[tuple[str, str], TargetGroup]:
    return {(p.query_id, p.doc_id): p.group for p in pairs}


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_select_targets(cfg: PipelineConfig, group: TargetGroup | None = None) -> None:
    group = group or cfg.select_group
    corpus = load_documents(cfg.corpus_path)
    queries = load_queries(cfg.queries_path)
    if cfg.run_path:
        runs = read_run(cfg.run_path)
    else:
        ranker = cfg.make_ranker(corpus)
        runs = [rerank(ranker, query, corpus) for query in queries]
        if cfg.black_box:
            runs = [_rank_only(run) for run in runs]
        write_run(cfg.resolved_run_path(), runs)
        print(f"wrote {cfg.resolved_run_path()} ({len(runs)} queries)")
    pairs = select_targets(runs, group, cfg.seed, cfg.mixture_per_group)
    path = cfg.out("targets.jsonl")
    write_jsonl(path, (p.to_json_dict() for p in pairs))
    print(f"wrote {path} ({len(pairs)} pairs, group={group.value})")


def cmd_stage1(cfg: PipelineConfig) -> None:
    corpus = load_documents(cfg.corpus_path)
    queries = {q.id: q for q in load_queries(cfg.queries_path)}
    pairs = _load_targets(cfg.resolved_targets_path())
    ranker = cfg.make_ranker(corpus)
    generator = cfg.make_generator()
    records, failures = run_stage1_batch(
        pairs, queries, corpus, ranker, generator, cfg.stage1, workers=cfg.workers
    )
    traces_path = cfg.out("traces.jsonl")
    write_jsonl(traces_path, (r.to_json_dict() for r in records))
    write_jsonl(cfg.out("stage1_failures.jsonl"), failures)
    retained = sum(1 for r in records if r.retained)
    print(
        f"wrote {traces_path} ({len(records)} trace records, {retained} retained, "
        f"{len(failures)} failed pairs)"
    )


def cmd_build_datasets(cfg: PipelineConfig) -> None:
    corpus = load_documents(cfg.corpus_path)
    docs_by_id = {d.id: d for d in corpus}
    queries_by_id = {q.id: q for q in load_queries(cfg.queries_path)}
    traces = [TraceRecord.from_json_dict(row) for row in read_jsonl(cfg.resolved_traces_path())]
    pairs = _load_targets(cfg.resolved_targets_path())
    groups = _groups_map(pairs)

    gold = build_gold(traces)
    diamond = build_diamond(gold, groups, cfg.easy_threshold, cfg.hard_threshold)
    write_jsonl(cfg.out("gold.jsonl"), (r.to_json_dict() for r in gold))
    write_jsonl(cfg.out("diamond.jsonl"), (r.to_json_dict() for r in diamond))

    sft = export_sft(diamond, queries_by_id, docs_by_id) if diamond else []
    write_jsonl(cfg.out("sft.jsonl"), (x.to_json_dict() for x in sft))

    preference, skip_report = build_preference_pairs(
        traces, cfg.stage1.k, queries_by_id, docs_by_id
    )
    write_jsonl(cfg.out("preference.jsonl"), (p.to_json_dict() for p in preference))

    diamond_queries = sorted({r.query_id for r in diamond})
    train_count = cfg.train_count
    if train_count is None:
        train_count = int(len(diamond_queries) * 0.8)
    train, test_diamond = split_train_test(diamond_queries, train_count, cfg.seed)
    target_queries = sorted({p.query_id for p in pairs})
    test = sorted(set(test_diamond) | (set(target_queries) - set(diamond_queries)))
    write_json(cfg.out("split.json"), {"train": train, "test": test})

    def per_group(records: list[TraceRecord]) -> dict[str, int]:
        counts: dict[str, int] = {}
        for record in records:
            group = groups.get((record.query_id, record.target_doc_id))
            label = group.value if group else "unlabeled"
            counts[label] = counts.get(label, 0) + 1
        return dict(sorted(counts.items()))

    summary = {
        "pairs_targeted": len(pairs),
        "trace_records": len(traces),
        "retained_records": sum(1 for r in traces if r.retained),
        "gold_pairs": len(gold),
        "gold_per_group": per_group(gold),
        "diamond_pairs": len(diamond),
        "diamond_per_group": per_group(diamond),
        "sft_examples": len(sft),
        "preference": skip_report,
        "queries_targeted": len(target_queries),
        "queries_with_diamond": len(diamond_queries),
        "train_queries": len(train),
        "test_queries": len(test),
    }
    write_json(cfg.out("datasets_summary.json"), summary)
    print(
        f"gold={len(gold)} diamond={len(diamond)} sft={len(sft)} "
        f"preference={len(preference)} (train/test queries: {len(train)}/{len(test)})"
    )


def cmd_attack(cfg: PipelineConfig) -> None:
    corpus = load_documents(cfg.corpus_path)
    queries = {q.id: q for q in load_queries(cfg.queries_path)}
    pairs = _load_targets(cfg.resolved_targets_path())
    ranker = cfg.make_ranker(corpus)
    generator = cfg.make_generator()
    results, failures = attack_batch(
        pairs,
        queries,
        corpus,
        ranker,
        generator,
        cfg.stage1,
        workers=cfg.workers,
        candidates_per_position=cfg.candidates_per_position,
    )
    results_path = cfg.out("attack_results.jsonl")
    write_jsonl(results_path, (r.to_json_dict() for r in results))
    write_jsonl(cfg.out("attack_failures.jsonl"), failures)
    improved = sum(1 for r in results if r.improved)
    print(
        f"wrote {results_path} ({len(results)} results, {improved} improved, "
        f"{len(failures)} failed pairs)"
    )


def cmd_evaluate(cfg: PipelineConfig, baseline_path: str | None = None) -> None:
    corpus = load_documents(cfg.corpus_path)
    docs_by_id = {d.id: d for d in corpus}
    pairs = _load_targets(cfg.resolved_targets_path())
    groups = _groups_map(pairs)
    results = [AttackResult.from_json_dict(row) for row in read_jsonl(cfg.resolved_results_path())]
    reports = evaluate_attack(
        results,
        docs_by_id,
        groups,
        metric_clients=cfg.make_metric_clients(),
        spam_thresholds=cfg.spam_thresholds,
    )
    payload: dict = {"reports": [r.to_json_dict() for r in reports]}
    baseline_path = baseline_path or cfg.baseline_results
    if baseline_path:
        baseline = [AttackResult.from_json_dict(row) for row in read_jsonl(baseline_path)]
        payload["significance"] = compare_attacks(results, baseline, groups)
    write_json(cfg.out("report.json"), payload)
    atomic_write_text(cfg.out("report.csv"), report_csv(reports))
    for report in reports:
        row = report.to_json_dict()
        print(
            f"{row['group']}: n={row['n']} asr={row['asr']} top10={row['top10']} "
            f"top50={row['top50']} boost={row['boost']}"
        )
    print(f"wrote {cfg.out('report.json')} and {cfg.out('report.csv')}")


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rankforge",
        description="Adversarial rank-attack pipeline over pluggable ranker/generator services.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, needs_config in (
        ("select-targets", True),
        ("stage1", True),
        ("build-datasets", True),
        ("attack", True),
        ("evaluate", True),
        ("selfcheck", False),
    ):
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=needs_config, help="path to the JSON config file")
        cmd.add_argument("--seed", type=int, default=None, help="override the config seed")
        cmd.add_argument("--workers", type=int, default=None, help="worker pool width")
        cmd.add_argument("--out", default=None, help="override the output directory")
        if name == "select-targets":
            cmd.add_argument(
                "--group",
                choices=[g.value for g in TargetGroup],
                default=None,
                help="target group to select (defaults to config select.group)",
            )
        if name == "evaluate":
            cmd.add_argument(
                "--baseline",
                default=None,
                help="attack results JSONL to test significance against",
            )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "selfcheck":
            return 0 if run_selfcheck() else 1
        cfg = load_config(args.config, seed=args.seed, workers=args.workers, output_dir=args.out)
        if args.command == "select-targets":
            group = TargetGroup(args.group) if args.group else None
            cmd_select_targets(cfg, group)
        elif args.command == "stage1":
            cmd_stage1(cfg)
        elif args.command == "build-datasets":
            cmd_build_datasets(cfg)
        elif args.command == "attack":
            cmd_attack(cfg)
        elif args.command == "evaluate":
            cmd_evaluate(cfg, baseline_path=args.baseline)
        return 0
    except RankforgeError as exc:
        for klass, code, exit_code in _ERROR_CODES:
            if isinstance(exc, klass):
                break
        else:  # pragma: no cover - RankforgeError always matches a row
            code, exit_code = "error", 1
        report = {"error": {"code": code, "message": str(exc)}}
        print(json.dumps(report, ensure_ascii=False), file=sys.stderr)
        return exit_code


if __name__ == "__main__":
    sys.exit(main())
