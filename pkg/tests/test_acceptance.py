"""Acceptance suite: one test per release criterion, tolerances pinned.

Each test prints an ``ACCEPTANCE <name>: PASS/FAIL`` line so the suite doubles
as a checklist (`pytest tests/test_acceptance.py -v -s`).
"""

import functools
import json
import math
import os
import random
import time

import pytest

from rankforge.attack import attack_document
from rankforge.cli import main
from rankforge.datasets import (
    build_diamond,
    build_gold,
    dpo_loss,
    pick_preference,
)
from rankforge.fixtures import (
    GLUE,
    TOPICS,
    fixture_corpus,
    fixture_queries,
    missing_term_scenario,
    write_fixture_inputs,
)
from rankforge.generation import GenerationResponse, MockGenerator
from rankforge.metrics import (
    adt,
    ati,
    lcs_length,
    lor,
    paired_t_test,
    token_edit_distance,
)
from rankforge.models import Document, Query, TargetGroup, TraceRecord
from rankforge.oracles import (
    brute_force_lcs,
    brute_force_rank,
    levenshtein_full_matrix,
    preference_scan,
)
from rankforge.ranking import LexicalRanker, rank_of
from rankforge.stage1 import (
    Stage1Config,
    check_indirect_relevance,
    coherence_count,
    run_stage1,
)
from rankforge.textops import insert_sentence, split_sentences, tokenize


def criterion(name):
    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"ACCEPTANCE {name}: FAIL", flush=True)
                raise
            print(f"ACCEPTANCE {name}: PASS", flush=True)

        return run

    return wrap


@criterion("rank-oracle")
def test_rank_oracle_zero_mismatches():
    pool = fixture_corpus(seed="acc-rank", n_docs=150)
    ranker = LexicalRanker(pool)
    all_terms = [w for words in TOPICS.values() for w in words] + GLUE
    rng = random.Random(2111)
    mismatches = 0
    for _ in range(200):
        view = rng.sample(pool, rng.randint(2, 100))
        query = Query("q", " ".join(rng.sample(all_terms, rng.randint(1, 4))))
        target = rng.choice(view)
        scored = [(doc.id, ranker.score(query, doc)) for doc in view]
        if rank_of(ranker, query, view, target.id) != brute_force_rank(scored, target.id):
            mismatches += 1
    assert mismatches == 0


@criterion("insertion-algebra")
def test_insertion_algebra_exact():
    rng = random.Random(2112)
    words = ["tax", "form", "panel", "solar", "guide", "name", "notes", "field", "10"]
    for _ in range(1000):
        doc = " ".join(
            " ".join(rng.choice(words) for _ in range(rng.randint(2, 9))).capitalize() + "."
            for _ in range(rng.randint(1, 6))
        )
        sentence = " ".join(rng.choice(words) for _ in range(rng.randint(1, 10))) + "."
        position = rng.randint(0, len(split_sentences(doc)))
        merged = insert_sentence(doc, sentence, position)
        doc_tokens = tokenize(doc)
        sent_tokens = tokenize(sentence)
        merged_tokens = tokenize(merged)
        assert len(merged_tokens) == len(doc_tokens) + len(sent_tokens)
        offset = len(tokenize(" ".join(split_sentences(doc)[:position])))
        assert merged_tokens[offset : offset + len(sent_tokens)] == sent_tokens
        assert merged_tokens[:offset] + merged_tokens[offset + len(sent_tokens):] == doc_tokens


@criterion("stage1-gate-conformance")
def test_stage1_gates_and_generation_budget():
    corpus = fixture_corpus(seed=11, n_docs=200)
    queries = fixture_queries()
    ranker = LexicalRanker(corpus)
    cfg = Stage1Config()  # k=10, n=5, c=5, tau=5
    by_id = {d.id: d for d in corpus}

    class CountingGenerator:
        def __init__(self):
            self.inner = MockGenerator(seed=42, tau=cfg.tau)
            self.per_target = {}

        def generate(self, request):
            key = (request.query, request.target_document)
            self.per_target[key] = self.per_target.get(key, 0) + 1
            return self.inner.generate(request)

    rng = random.Random(2113)
    total_retained = 0
    for query in queries[:4]:
        ordering_targets = rng.sample(list(by_id.values()), 3)
        for target in ordering_targets:
            generator = CountingGenerator()
            records = run_stage1(query, target, corpus, ranker, generator, cfg)
            positions = len(split_sentences(target.text)) + 1
            calls = sum(generator.per_target.values())
            assert calls <= positions * (cfg.n + 1), "generation budget exceeded"
            for record in records:
                if not record.retained:
                    continue
                total_retained += 1
                assert record.rank_after <= record.rank_before
                assert check_indirect_relevance(record.sentence, query)
                assert coherence_count(record.sentence, record.buffer_a) >= cfg.tau
    assert total_retained > 0, "fixture produced no retained records to check"


@criterion("gold-diamond-filters")
def test_gold_diamond_over_ten_thousand_records():
    rng = random.Random(2114)
    records = []
    groups = {}
    for i in range(10000):
        query_id = f"q{rng.randint(0, 60)}"
        doc_id = f"d{rng.randint(0, 12)}"
        groups[(query_id, doc_id)] = (
            TargetGroup.EASY5 if rng.random() < 0.5 else TargetGroup.HARD5
        )
        records.append(
            TraceRecord(
                query_id=query_id,
                context_ids=("c1",),
                target_doc_id=doc_id,
                sentence=f"s{rng.randint(0, 99)}",
                position=rng.randint(0, 5),
                iteration=rng.randint(0, 5),
                rank_before=rng.randint(30, 1000),
                rank_after=rng.randint(1, 200),
                passed_rank_gate=rng.random() < 0.7,
                passed_indirect=rng.random() < 0.8,
                passed_coherence=rng.random() < 0.8,
            )
        )
    gold = build_gold(records)
    retained = {}
    for record in records:
        if record.retained:
            retained.setdefault((record.query_id, record.target_doc_id), []).append(record)
    assert {(g.query_id, g.target_doc_id) for g in gold} == set(retained)
    for g in gold:
        candidates = retained[(g.query_id, g.target_doc_id)]
        best = min((c.rank_after, c.position, c.sentence) for c in candidates)
        assert (g.rank_after, g.position, g.sentence) == best
    diamond = build_diamond(gold, groups, easy_threshold=10, hard_threshold=50)
    gold_keys = {(g.query_id, g.target_doc_id) for g in gold}
    violations = 0
    for record in diamond:
        key = (record.query_id, record.target_doc_id)
        limit = 10 if groups[key] is TargetGroup.EASY5 else 50
        if record.rank_after > limit or key not in gold_keys:
            violations += 1
    expected = {
        key
        for key, group in groups.items()
        if key in retained
        and min(r.rank_after for r in retained[key])
        <= (10 if group is TargetGroup.EASY5 else 50)
    }
    assert violations == 0
    assert {(d.query_id, d.target_doc_id) for d in diamond} == expected


@criterion("preference-pairs")
def test_preference_pairs_match_exhaustive_scan():
    rng = random.Random(2115)
    for _ in range(2000):
        k = rng.randint(1, 25)
        candidates = [
            (f"s{rng.randint(0, 9)}", rng.randint(1, 50))
            for _ in range(rng.randint(1, 14))
        ]
        picked = pick_preference(candidates, k)
        assert picked == preference_scan(candidates, k)
        if picked is not None:
            (chosen, chosen_rank), (rejected, rejected_rank) = picked
            assert chosen_rank <= k < rejected_rank
            assert chosen != rejected


@criterion("dpo-loss")
def test_dpo_loss_exactness_monotonicity_symmetry():
    assert abs(dpo_loss(-3.25, -3.25, beta=0.7) - math.log(2)) <= 1e-12
    grid = [(-500 + i) / 50.0 for i in range(1001)]  # margins -10..10
    losses = [dpo_loss(margin, 0.0, beta=1.3) for margin in grid]
    assert all(a > b for a, b in zip(losses, losses[1:])), "not strictly decreasing"
    assert all(value > 0 for value in losses)
    rng = random.Random(2116)
    for _ in range(1000):
        a = rng.uniform(-40, 40)
        b = rng.uniform(-40, 40)
        beta = rng.uniform(0.01, 5.0)
        total = dpo_loss(a, b, beta) + dpo_loss(b, a, beta)
        assert total >= 2 * math.log(2) - 1e-12


@criterion("metric-oracles")
def test_metric_oracles():
    assert token_edit_distance(list("kitten"), list("sitting")) == 3
    rng = random.Random(2117)
    vocabulary = ["a", "b", "c", "d", "e"]
    for _ in range(1000):
        x = [rng.choice(vocabulary) for _ in range(rng.randint(0, 16))]
        y = [rng.choice(vocabulary) for _ in range(rng.randint(0, 16))]
        assert token_edit_distance(x, y) == levenshtein_full_matrix(x, y)
    for _ in range(200):
        x = [rng.choice(vocabulary) for _ in range(rng.randint(1, 12))]
        y = [rng.choice(vocabulary) for _ in range(rng.randint(0, 12))]
        assert lcs_length(x, y) == brute_force_lcs(x, y)
    words = ["tax", "form", "panel", "solar", "guide", "notes"]
    for _ in range(300):
        doc = " ".join(
            " ".join(rng.choice(words) for _ in range(rng.randint(2, 7))).capitalize() + "."
            for _ in range(rng.randint(1, 4))
        )
        sentence = " ".join(rng.choice(words) for _ in range(rng.randint(1, 9))) + "."
        position = rng.randint(0, len(split_sentences(doc)))
        merged = insert_sentence(doc, sentence, position)
        assert lor(doc, merged) == 1.0
        assert adt(doc, merged) == ati(doc, merged)


@criterion("algorithm4-contract")
def test_algorithm4_contract():
    query, docs, target_ids = missing_term_scenario()
    ranker = LexicalRanker(docs)
    by_id = {d.id: d for d in docs}
    improved = 0
    for target_id in target_ids:
        target = by_id[target_id]
        # Oracle precondition: one missing-term injection crosses rank 10.
        probe = Document(target.id, target.text + " Solar.")
        view = [probe if d.id == target.id else d for d in docs]
        assert rank_of(ranker, query, view, target.id) <= 10
        result = attack_document(
            query, target, docs, ranker, MockGenerator(seed=5), Stage1Config()
        )
        assert result.best_rank <= 10
        if result.best_rank < result.original_rank:
            improved += 1
    assert improved == len(target_ids), "ASR below 100% on the constructed fixture"

    # Never-worse guarantee over randomized pairs.
    prop_corpus = fixture_corpus(seed="acc-a4", n_docs=60)
    prop_queries = fixture_queries()
    prop_ranker = LexicalRanker(prop_corpus)

    class UselessGenerator:
        def generate(self, request):
            sentences = tuple(
                f"Nothing of note in remark {i} as filler." for i in range(request.n_sent)
            )
            return GenerationResponse(buffer_a=("nothing", "note"), sentences=sentences)

    rng = random.Random(2118)
    cfg = Stage1Config(n_sent=2)
    generators = [MockGenerator(seed=1), MockGenerator(seed=2), UselessGenerator()]
    for _ in range(1000):
        q = rng.choice(prop_queries)
        target = rng.choice(prop_corpus)
        result = attack_document(q, target, prop_corpus, prop_ranker, rng.choice(generators), cfg)
        assert result.best_rank <= result.original_rank


@criterion("determinism")
def test_full_pipeline_determinism_and_runtime(tmp_path):
    started = time.monotonic()
    fixture_dir = tmp_path / "inputs"
    paths = write_fixture_inputs(str(fixture_dir), seed=11, n_docs=200)

    def run(tag, workers):
        out_dir = tmp_path / tag
        config = {
            "corpus": paths["corpus"],
            "queries": paths["queries"],
            "output_dir": str(out_dir),
            "seed": 42,
            "workers": workers,
            "ranker": "builtin:0.9,0.4",
            "generator": "mock:42",
            "select": {"group": "easy5"},
        }
        config_path = tmp_path / f"config-{tag}.json"
        config_path.write_text(json.dumps(config))
        for command in ("select-targets", "stage1", "build-datasets", "attack", "evaluate"):
            assert main([command, "--config", str(config_path)]) == 0, command
        return out_dir

    artifacts = (
        "run.txt",
        "targets.jsonl",
        "traces.jsonl",
        "gold.jsonl",
        "diamond.jsonl",
        "sft.jsonl",
        "preference.jsonl",
        "split.json",
        "datasets_summary.json",
        "attack_results.jsonl",
        "report.json",
        "report.csv",
    )
    first = run("w1-a", workers=1)
    second = run("w1-b", workers=1)
    eight = run("w8", workers=8)
    for name in artifacts:
        reference = (first / name).read_bytes()
        assert (second / name).read_bytes() == reference, f"{name} differs across reruns"
        assert (eight / name).read_bytes() == reference, f"{name} differs at workers=8"
    elapsed = time.monotonic() - started
    assert elapsed < 60.0, f"pipeline took {elapsed:.1f}s, budget is 60s"


@criterion("significance")
def test_paired_t_test_reproduces_critical_p():
    n = 10
    target_t = 2.262
    mean = target_t / math.sqrt(n)
    x = 3 / math.sqrt(10)
    diffs = [mean + (x if i % 2 == 0 else -x) for i in range(n)]
    t, p = paired_t_test(diffs, [0.0] * n)
    assert abs(t - target_t) < 1e-12
    assert abs(p - 0.050) <= 0.001
    scipy_stats = pytest.importorskip("scipy.stats")
    oracle = 2.0 * float(scipy_stats.t.sf(abs(t), n - 1))
    assert abs(p - oracle) < 1e-9
