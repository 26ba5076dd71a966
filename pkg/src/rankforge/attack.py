"""Inference-time attack: best injected variant per (query, document) pair.

For each insertion slot the generator proposes candidates; each variant is
re-ranked with the variant substituted for the original document, and the
incumbent is replaced only on a strictly better rank, so earlier slots win
ties and the original document survives when nothing improves.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

from .errors import ConfigError, DataError, NotFoundError, ServiceError
from .generation import GenerationMode, GenerationRequest, GeneratorPort
from .models import Document, Query, TargetPair
from .ranking import RankerPort, RankOnlyView
from .stage1 import Stage1Config, _context_ids
from .textops import insert_sentence, sentence_count


@dataclass(frozen=True)
class AttackResult:
    query_id: str
    doc_id: str
    original_rank: int
    best_rank: int
    adversarial_text: str
    sentence: str | None
    position: int | None
    candidates_tried: int
    positions_covered: int
    partial: bool = False
    error: str | None = None

    def __post_init__(self) -> None:
        if self.best_rank > self.original_rank:
            raise DataError("best_rank must never be worse than original_rank")
        if (self.sentence is None) != (self.position is None):
            raise DataError("sentence and position must be present or absent together")

    @property
    def improved(self) -> bool:
        return self.best_rank < self.original_rank

    def to_json_dict(self) -> dict:
        return {
            "query_id": self.query_id,
            "doc_id": self.doc_id,
            "original_rank": self.original_rank,
            "best_rank": self.best_rank,
            "adversarial_text": self.adversarial_text,
            "sentence": self.sentence,
            "position": self.position,
            "candidates_tried": self.candidates_tried,
            "positions_covered": self.positions_covered,
            "partial": self.partial,
            "error": self.error,
        }

    @classmethod
    def from_json_dict(cls, row: dict) -> "AttackResult":
        try:
            return cls(
                query_id=row["query_id"],
                doc_id=row["doc_id"],
                original_rank=int(row["original_rank"]),
                best_rank=int(row["best_rank"]),
                adversarial_text=row["adversarial_text"],
                sentence=row.get("sentence"),
                position=row.get("position"),
                candidates_tried=int(row.get("candidates_tried", 0)),
                positions_covered=int(row.get("positions_covered", 0)),
                partial=bool(row.get("partial", False)),
                error=row.get("error"),
            )
        except KeyError as exc:
            raise DataError(f"attack result missing field {exc}") from exc


def attack_document(
    query: Query,
    target: Document,
    corpus: Sequence[Document],
    ranker: RankerPort,
    generator: GeneratorPort,
    cfg: Stage1Config,
    candidates_per_position: int | None = None,
) -> AttackResult:
    """Attack one pair; rank-only ranker access, one generation call per slot.

    A service failure after the original rank is known yields a partial result
    covering the slots finished so far.
    """
    ids = [doc.id for doc in corpus]
    if target.id not in ids:
        raise NotFoundError(f"target {target.id!r} not in corpus")
    n_candidates = candidates_per_position or cfg.n_sent
    if n_candidates < 1:
        raise ConfigError("candidates_per_position must be >= 1")

    view = RankOnlyView(ranker)
    ordering = view.ordering(query, corpus)
    original_rank = ordering.index(target.id) + 1
    context_ids = _context_ids(ordering, cfg.c, target.id)
    by_id = {doc.id: doc for doc in corpus}
    context_texts = tuple(by_id[doc_id].text for doc_id in context_ids)

    view_docs = list(corpus)
    target_index = ids.index(target.id)

    best_rank = original_rank
    best_text = target.text
    best_sentence: str | None = None
    best_position: int | None = None
    tried = 0
    covered = 0
    partial = False
    error: str | None = None

    try:
        for position in range(sentence_count(target.text) + 1):
            request = GenerationRequest(
                mode=GenerationMode.INITIAL,
                query=query.text,
                target_document=target.text,
                context_docs=context_texts,
                n_sent=n_candidates,
                max_tokens=cfg.max_tokens,
            )
            response = generator.generate(request)
            try:
                for sentence in response.sentences:
                    variant_text = insert_sentence(target.text, sentence, position)
                    view_docs[target_index] = Document(id=target.id, text=variant_text)
                    rank = view.rank_of(query, view_docs, target.id)
                    tried += 1
                    if rank < best_rank:
                        best_rank = rank
                        best_text = variant_text
                        best_sentence = sentence
                        best_position = position
            finally:
                view_docs[target_index] = target
            covered += 1
    except ServiceError as exc:
        partial = True
        error = str(exc)

    return AttackResult(
        query_id=query.id,
        doc_id=target.id,
        original_rank=original_rank,
        best_rank=best_rank,
        adversarial_text=best_text,
        sentence=best_sentence,
        position=best_position,
        candidates_tried=tried,
        positions_covered=covered,
        partial=partial,
        error=error,
    )


def attack_batch(
    pairs: Sequence[TargetPair],
    queries_by_id: dict[str, Query],
    corpus: Sequence[Document],
    ranker: RankerPort,
    generator: GeneratorPort,
    cfg: Stage1Config,
    workers: int = 1,
    candidates_per_position: int | None = None,
) -> tuple[list[AttackResult], list[dict]]:
    """One result per pair, sorted by (query_id, doc_id); failures isolated.

    Pairs whose very first ranker call fails produce a failure row instead of
    a result; mid-attack failures produce partial results.
    """
    keys = [(pair.query_id, pair.doc_id) for pair in pairs]
    if len(set(keys)) != len(keys):
        raise DataError("attack pairs must be distinct")
    by_id = {doc.id: doc for doc in corpus}

    def process(pair: TargetPair) -> tuple[TargetPair, AttackResult | None, str | None]:
        query = queries_by_id.get(pair.query_id)
        if query is None:
            return pair, None, f"unknown query id {pair.query_id!r}"
        target = by_id.get(pair.doc_id)
        if target is None:
            return pair, None, f"unknown doc id {pair.doc_id!r}"
        try:
            result = attack_document(
                query, target, corpus, ranker, generator, cfg, candidates_per_position
            )
            return pair, result, None
        except ServiceError as exc:
            return pair, None, str(exc)

    if workers <= 1:
        outcomes = [process(pair) for pair in pairs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(process, pairs))

    results: list[AttackResult] = []
    failures: list[dict] = []
    for pair, result, error in outcomes:
        if error is not None:
            failures.append(
                {"query_id": pair.query_id, "doc_id": pair.doc_id, "error": error}
            )
        else:
            results.append(result)
    results.sort(key=lambda r: (r.query_id, r.doc_id))
    failures.sort(key=lambda f: (f["query_id"], f["doc_id"]))
    return results, failures
