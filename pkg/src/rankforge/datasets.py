"""Target selection, Gold/Diamond filtering, and training-data exports.

Gradient training itself happens outside this package; what lives here is the
data side: picking attackable (query, doc) pairs from a ranked run, distilling
stage-1 traces into supervised examples, pairing strong positives with the
strongest failing negatives, and the two pure preference functions (loss and
reward indicator) external trainers can verify against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import DataError, MetricError, SelectionError
from .models import Document, Query, TargetGroup, TargetPair, TraceRecord
from .ranking import RankedList
from .seeding import rng_for

EASY_DECILES = ((51, 60), (61, 70), (71, 80), (81, 90), (91, 100))
HARD_RANKS = (996, 997, 998, 999, 1000)
DIAMOND_EASY_THRESHOLD = 10
DIAMOND_HARD_THRESHOLD = 50
DEFAULT_DPO_BETA = 0.1


@dataclass(frozen=True)
class SftExample:
    query: str
    context: tuple[str, ...]
    document: str
    target_sentence: str
    position: int

    def to_json_dict(self) -> dict:
        return {
            "query": self.query,
            "context": list(self.context),
            "document": self.document,
            "target_sentence": self.target_sentence,
            "position": self.position,
        }

    @classmethod
    def from_json_dict(cls, row: dict) -> "SftExample":
        try:
            return cls(
                query=row["query"],
                context=tuple(row["context"]),
                document=row["document"],
                target_sentence=row["target_sentence"],
                position=int(row["position"]),
            )
        except KeyError as exc:
            raise DataError(f"sft example missing field {exc}") from exc


@dataclass(frozen=True)
class PreferencePair:
    query: str
    context: tuple[str, ...]
    document: str
    chosen: str
    chosen_rank: int
    rejected: str
    rejected_rank: int

    def __post_init__(self) -> None:
        if self.chosen == self.rejected:
            raise DataError("chosen and rejected sentences must differ")
        if not self.chosen_rank >= 1:
            raise DataError("chosen_rank must be >= 1")
        if not self.rejected_rank > self.chosen_rank:
            raise DataError("rejected_rank must exceed chosen_rank")

    def to_json_dict(self) -> dict:
        return {
            "query": self.query,
            "context": list(self.context),
            "document": self.document,
            "chosen": self.chosen,
            "rejected": self.rejected,
            "chosen_rank": self.chosen_rank,
            "rejected_rank": self.rejected_rank,
        }


# ---------------------------------------------------------------------------
# Target selection
# ---------------------------------------------------------------------------


def _easy5(run: RankedList, seed: int | str) -> list[TargetPair]:
    if len(run.entries) < EASY_DECILES[-1][1]:
        raise SelectionError(
            f"easy5 needs a run of >= {EASY_DECILES[-1][1]} entries for query "
            f"{run.query_id}, got {len(run.entries)}"
        )
    rng = rng_for(seed, "easy5", run.query_id)
    pairs = []
    for low, high in EASY_DECILES:
        rank = rng.randint(low, high)
        pairs.append(
            TargetPair(run.query_id, run.entries[rank - 1].doc_id, TargetGroup.EASY5)
        )
    return pairs


def _hard5(run: RankedList) -> list[TargetPair]:
    if len(run.entries) < HARD_RANKS[-1]:
        raise SelectionError(
            f"hard5 needs a run of >= {HARD_RANKS[-1]} entries for query "
            f"{run.query_id}, got {len(run.entries)}"
        )
    return [
        TargetPair(run.query_id, run.entries[rank - 1].doc_id, TargetGroup.HARD5)
        for rank in HARD_RANKS
    ]


def select_targets(
    runs: RankedList | Sequence[RankedList],
    group: TargetGroup,
    seed: int | str,
    mixture_per_group: int = 50,
) -> list[TargetPair]:
    """Pick attack targets from ranked runs.

    easy5 samples one document per decile of ranks 51..100 per query; hard5
    takes ranks 996..1000 exactly. mixture draws ``mixture_per_group`` pairs
    from each of the two pools across all runs; the selected pairs keep their
    source group label so downstream thresholds stay well defined.
    """
    run_list = [runs] if isinstance(runs, RankedList) else list(runs)
    if group is TargetGroup.EASY5:
        pairs = [p for run in run_list for p in _easy5(run, seed)]
    elif group is TargetGroup.HARD5:
        pairs = [p for run in run_list for p in _hard5(run)]
    elif group is TargetGroup.MIXTURE:
        easy = [p for run in run_list for p in _easy5(run, seed)]
        hard = [p for run in run_list for p in _hard5(run)]
        if len(easy) < mixture_per_group or len(hard) < mixture_per_group:
            raise SelectionError(
                f"mixture needs {mixture_per_group} pairs per group, pools have "
                f"{len(easy)} easy5 and {len(hard)} hard5"
            )
        rng = rng_for(seed, "mixture")
        pairs = rng.sample(easy, mixture_per_group) + rng.sample(hard, mixture_per_group)
    else:  # pragma: no cover - enum is closed
        raise SelectionError(f"unknown group {group!r}")
    return sorted(pairs, key=lambda p: (p.query_id, p.doc_id))


def split_train_test(
    queries: Iterable[str], train_count: int, seed: int | str
) -> tuple[list[str], list[str]]:
    """Seeded uniform split of query ids without replacement."""
    ids = sorted(set(queries))
    if train_count > len(ids):
        raise SelectionError(f"cannot take {train_count} train queries from {len(ids)}")
    rng = rng_for(seed, "split")
    shuffled = list(ids)
    rng.shuffle(shuffled)
    train = sorted(shuffled[:train_count])
    test = sorted(shuffled[train_count:])
    return train, test


# ---------------------------------------------------------------------------
# Gold / Diamond filters
# ---------------------------------------------------------------------------


def build_gold(traces: Iterable[TraceRecord]) -> list[TraceRecord]:
    """Best retained record per (query, doc) pair.

    Minimal rank_after wins; ties go to the earlier position, then the
    lexicographically smaller sentence. Pairs with no retained record are
    dropped.
    """
    best: dict[tuple[str, str], TraceRecord] = {}
    for record in traces:
        if not record.retained:
            continue
        key = (record.query_id, record.target_doc_id)
        incumbent = best.get(key)
        if incumbent is None or (
            (record.rank_after, record.position, record.sentence)
            < (incumbent.rank_after, incumbent.position, incumbent.sentence)
        ):
            best[key] = record
    return [best[key] for key in sorted(best)]


def build_diamond(
    gold: Iterable[TraceRecord],
    groups: dict[tuple[str, str], TargetGroup],
    easy_threshold: int = DIAMOND_EASY_THRESHOLD,
    hard_threshold: int = DIAMOND_HARD_THRESHOLD,
) -> list[TraceRecord]:
    """Gold records whose promotion clears their group's threshold (inclusive)."""
    kept = []
    for record in gold:
        key = (record.query_id, record.target_doc_id)
        group = groups.get(key)
        if group is TargetGroup.EASY5:
            threshold = easy_threshold
        elif group is TargetGroup.HARD5:
            threshold = hard_threshold
        else:
            raise DataError(
                f"pair {key} has no easy5/hard5 group label; cannot apply thresholds"
            )
        if record.rank_after <= threshold:
            kept.append(record)
    return kept


def export_sft(
    diamond: Sequence[TraceRecord],
    queries_by_id: dict[str, Query],
    docs_by_id: dict[str, Document],
) -> list[SftExample]:
    """Resolve ids to texts, ordered by (query_id, doc_id) for stable files."""
    if not diamond:
        raise DataError("nothing to export: diamond set is empty")
    examples = []
    for record in sorted(diamond, key=lambda r: (r.query_id, r.target_doc_id)):
        query = queries_by_id.get(record.query_id)
        if query is None:
            raise DataError(f"unknown query id {record.query_id!r} in diamond record")
        doc = docs_by_id.get(record.target_doc_id)
        if doc is None:
            raise DataError(f"unknown doc id {record.target_doc_id!r} in diamond record")
        context = []
        for ctx_id in record.context_ids:
            ctx = docs_by_id.get(ctx_id)
            if ctx is None:
                raise DataError(f"unknown context doc id {ctx_id!r} in diamond record")
            context.append(ctx.text)
        examples.append(
            SftExample(
                query=query.text,
                context=tuple(context),
                document=doc.text,
                target_sentence=record.sentence,
                position=record.position,
            )
        )
    return examples


# ---------------------------------------------------------------------------
# Preference pairs
# ---------------------------------------------------------------------------


def pick_preference(
    candidates: Sequence[tuple[str, int]], k: int
) -> tuple[tuple[str, int], tuple[str, int]] | None:
    """Double argmin over one conditioning triple's candidates.

    chosen = best-ranked candidate inside the top ``k``; rejected = best-ranked
    candidate outside it (the strongest negative). A sentence observed at
    several ranks counts once, at its best rank, so a sentence can never be
    both sides of the pair. Ties break by sentence text. Returns None when
    either side is empty.
    """
    best_by_sentence: dict[str, int] = {}
    for sentence, rank in candidates:
        if rank < 1:
            raise DataError(f"candidate rank must be >= 1, got {rank}")
        if sentence not in best_by_sentence or rank < best_by_sentence[sentence]:
            best_by_sentence[sentence] = rank
    chosen = None
    rejected = None
    for sentence in sorted(best_by_sentence):
        rank = best_by_sentence[sentence]
        if rank <= k:
            if chosen is None or rank < chosen[1]:
                chosen = (sentence, rank)
        else:
            if rejected is None or rank < rejected[1]:
                rejected = (sentence, rank)
    if chosen is None or rejected is None:
        return None
    return chosen, rejected


def build_preference_pairs(
    traces: Iterable[TraceRecord],
    k: int,
    queries_by_id: dict[str, Query],
    docs_by_id: dict[str, Document],
) -> tuple[list[PreferencePair], dict]:
    """Preference pairs from stage-1 traces, one per conditioning triple.

    Returns the pairs plus a skip report counting triples that lacked a
    positive or a negative side.
    """
    grouped: dict[tuple[str, str], list[TraceRecord]] = {}
    for record in traces:
        grouped.setdefault((record.query_id, record.target_doc_id), []).append(record)

    pairs: list[PreferencePair] = []
    skipped_no_positive = 0
    skipped_no_negative = 0
    for key in sorted(grouped):
        records = grouped[key]
        picked = pick_preference([(r.sentence, r.rank_after) for r in records], k)
        if picked is None:
            ranks = [r.rank_after for r in records]
            if all(rank > k for rank in ranks):
                skipped_no_positive += 1
            else:
                skipped_no_negative += 1
            continue
        (chosen, chosen_rank), (rejected, rejected_rank) = picked
        query_id, doc_id = key
        query = queries_by_id.get(query_id)
        doc = docs_by_id.get(doc_id)
        if query is None or doc is None:
            raise DataError(f"unknown query/doc id in trace group {key}")
        context = tuple(
            docs_by_id[ctx_id].text
            for ctx_id in records[0].context_ids
            if ctx_id in docs_by_id
        )
        pairs.append(
            PreferencePair(
                query=query.text,
                context=context,
                document=doc.text,
                chosen=chosen,
                chosen_rank=chosen_rank,
                rejected=rejected,
                rejected_rank=rejected_rank,
            )
        )
    report = {
        "pairs": len(pairs),
        "skipped_no_positive": skipped_no_positive,
        "skipped_no_negative": skipped_no_negative,
    }
    return pairs, report


# ---------------------------------------------------------------------------
# Preference-optimization pure functions
# ---------------------------------------------------------------------------


def dpo_loss(logp_chosen: float, logp_rejected: float, beta: float = DEFAULT_DPO_BETA) -> float:
    """Negative log-sigmoid of the scaled log-probability margin.

    Strictly decreasing in the margin and always positive; equal log-probs
    give ln 2 exactly.
    """
    if beta <= 0:
        raise MetricError("beta must be > 0")
    if not (math.isfinite(logp_chosen) and math.isfinite(logp_rejected)):
        raise MetricError("log-probabilities must be finite")
    margin = beta * (logp_chosen - logp_rejected)
    # -log(sigmoid(margin)) = log(1 + exp(-margin)), computed without overflow
    if margin >= 0:
        return math.log1p(math.exp(-margin))
    return -margin + math.log1p(math.exp(margin))


def reward_indicator(rank: int, k: int) -> int:
    """1 when the perturbed document sits inside the top ``k``, else 0."""
    if rank < 1:
        raise MetricError("rank must be >= 1")
    return 1 if rank <= k else 0
