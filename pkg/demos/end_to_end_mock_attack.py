"""End-to-end walk through the pipeline on the bundled deterministic stack.

Everything here runs in-process: the builtin lexical ranker plays the victim,
the mock generator plays the LLM, and the bundled fixture corpus plays the
collection. The same flow drives real services by swapping the two ports.

Run:  python3 demos/end_to_end_mock_attack.py
"""

from rankforge import (
    LexicalRanker,
    MockGenerator,
    Stage1Config,
    TargetGroup,
    attack_batch,
    build_diamond,
    build_gold,
    build_preference_pairs,
    evaluate_attack,
    rerank,
    run_stage1_batch,
    select_targets,
)
from rankforge.fixtures import fixture_corpus, fixture_queries

corpus = fixture_corpus(seed=11, n_docs=200)
queries = fixture_queries()
queries_by_id = {q.id: q for q in queries}
docs_by_id = {d.id: d for d in corpus}

print(f"corpus: {len(corpus)} documents, {len(queries)} queries")
print(f"sample query: {queries[0].text!r}")

# The victim ranker orders the whole corpus per query; attack targets are
# sampled from the mid-ranked band (one per decile of ranks 51-100).
ranker = LexicalRanker(corpus, k1=0.9, b=0.4)
runs = [rerank(ranker, q, corpus) for q in queries]
pairs = select_targets(runs, TargetGroup.EASY5, seed=42)
print(f"\nselected {len(pairs)} target pairs; first: {pairs[0]}")

# Stage 1: generate candidate sentences, inject them at every sentence
# boundary, keep rank/indirect/coherence verdicts for every attempt.
generator = MockGenerator(seed=42, tau=5)
cfg = Stage1Config(k=10, n=5, c=5, tau=5, n_sent=5)
traces, failures = run_stage1_batch(pairs, queries_by_id, corpus, ranker, generator, cfg)
retained = [t for t in traces if t.retained]
print(f"\nstage 1: {len(traces)} evaluated candidates, {len(retained)} retained")
example = min(retained, key=lambda t: t.rank_after)
print(
    f"strongest: rank {example.rank_before} -> {example.rank_after} "
    f"(position {example.position}, iteration {example.iteration})"
)
print(f"  injected: {example.sentence!r}")

# Distill training data: best variant per pair (gold), promotion-threshold
# subset (diamond), preference pairs contrasting top-k hits with the
# strongest misses.
gold = build_gold(traces)
groups = {(p.query_id, p.doc_id): p.group for p in pairs}
diamond = build_diamond(gold, groups)
preference, skip_report = build_preference_pairs(traces, cfg.k, queries_by_id, docs_by_id)
print(f"\ndatasets: gold={len(gold)} diamond={len(diamond)} preference={len(preference)}")
print(f"preference skips: {skip_report}")
if preference:
    pair = preference[0]
    print(f"example pair: chosen rank {pair.chosen_rank} vs rejected rank {pair.rejected_rank}")

# Inference-time attack on the same pairs: try each slot, keep the best
# strictly-improving variant, never return something worse than the original.
results, _ = attack_batch(pairs, queries_by_id, corpus, ranker, generator, cfg)
reports = evaluate_attack(results, docs_by_id, groups)
print("\nattack evaluation:")
for report in reports:
    row = report.to_json_dict()
    print(
        f"  {row['group']}: n={row['n']} ASR={row['asr']}% top10={row['top10']}% "
        f"top50={row['top50']}% boost={row['boost']} ATI={row['ati']} "
        f"ADT={row['adt']} LOR={row['lor']}"
    )
