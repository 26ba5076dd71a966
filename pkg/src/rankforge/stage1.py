"""Dataset-generation stage: candidate generation, gating, self-refinement.

For every (query, target) pair and every insertion slot, candidates are
generated, injected, re-ranked, and pushed through three gates:

* rank gate — the variant ranks at least as well as the original document;
* indirect gate — the sentence does not contain the normalized query;
* coherence gate — the sentence uses at least ``tau`` distinct buffer terms.

Candidates that fail are still emitted with their verdicts: the strongest
failures become preference-pair negatives later. When a slot produces no
candidate that clears all gates inside the promotion threshold, the best
ranked candidates are fed back to the generator for another round, up to
``n`` refinement iterations.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

from .errors import ConfigError, DataError, NotFoundError, ServiceError
from .generation import GenerationMode, GenerationRequest, GeneratorPort
from .models import Document, Query, TargetPair, TraceRecord
from .ranking import RankerPort, RankOnlyView
from .textops import insert_sentence, normalize, sentence_count, tokenize

IndirectJudge = Callable[[str, str], bool]


@dataclass(frozen=True)
class Stage1Config:
    """Promotion threshold, refinement budget, context size, and gate knobs."""

    k: int = 10
    n: int = 5
    c: int = 5
    tau: int = 5
    n_sent: int = 5
    max_tokens: int = 40

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.n < 0:
            raise ConfigError("n must be >= 0")
        if self.c < 1:
            raise ConfigError("c must be >= 1")
        if self.tau < 1:
            raise ConfigError("tau must be >= 1")
        if self.n_sent < 1:
            raise ConfigError("n_sent must be >= 1")
        if self.max_tokens < 1:
            raise ConfigError("max_tokens must be >= 1")


def _context_ids(ordering: Sequence[str], c: int, exclude_id: str | None) -> list[str]:
    ids = [doc_id for doc_id in ordering if doc_id != exclude_id]
    if len(ids) < c:
        raise ConfigError(f"corpus provides {len(ids)} context candidates, need {c}")
    return ids[:c]


def select_context(
    ranker: RankerPort,
    query: Query,
    corpus: Sequence[Document],
    c: int,
    exclude_id: str | None = None,
) -> list[Document]:
    """Top-``c`` documents in rank order, never including the excluded payload.

    When the excluded document sits inside the top ``c``, the document at rank
    ``c + 1`` takes its slot.
    """
    if len(corpus) < c:
        raise ConfigError(f"corpus has {len(corpus)} documents, need at least {c}")
    ordering = RankOnlyView(ranker).ordering(query, corpus)
    by_id = {doc.id: doc for doc in corpus}
    return [by_id[doc_id] for doc_id in _context_ids(ordering, c, exclude_id)]


def check_indirect_relevance(
    sentence: str, query: Query | str, judge: IndirectJudge | None = None
) -> bool:
    """True when the sentence does not contain the normalized query.

    An optional external judge can only veto, never rescue: the final verdict
    is the substring rule AND the judge's verdict.
    """
    query_text = query.text if isinstance(query, Query) else query
    if normalize(query_text) in normalize(sentence):
        return False
    if judge is not None:
        return bool(judge(sentence, query_text))
    return True


def coherence_count(sentence: str, buffer_a: Sequence[str]) -> int:
    """Distinct buffer terms whose token form occurs in the sentence."""
    if not buffer_a:
        raise DataError("coherence gate needs a non-empty buffer")
    sentence_tokens = tokenize(sentence)
    token_set = set(sentence_tokens)
    count = 0
    seen: set[tuple[str, ...]] = set()
    for term in buffer_a:
        form = tuple(tokenize(term))
        if not form or form in seen:
            continue
        seen.add(form)
        if len(form) == 1:
            if form[0] in token_set:
                count += 1
        elif _contains_run(sentence_tokens, form):
            count += 1
    return count


def _contains_run(tokens: list[str], run: tuple[str, ...]) -> bool:
    limit = len(tokens) - len(run)
    for start in range(limit + 1):
        if tuple(tokens[start : start + len(run)]) == run:
            return True
    return False


def run_stage1(
    query: Query,
    target: Document,
    corpus: Sequence[Document],
    ranker: RankerPort,
    generator: GeneratorPort,
    cfg: Stage1Config,
    judge: IndirectJudge | None = None,
) -> list[TraceRecord]:
    """Generate, gate, and refine candidates for one (query, target) pair.

    Every evaluated candidate is emitted. A slot stops early once a candidate
    clears all three gates with a strict rank improvement into the top ``k``.
    Generation calls per slot never exceed ``n + 1``.
    """
    ids = [doc.id for doc in corpus]
    if target.id not in ids:
        raise NotFoundError(f"target {target.id!r} not in corpus")
    view = RankOnlyView(ranker)
    ordering = view.ordering(query, corpus)
    rank_before = ordering.index(target.id) + 1
    context_ids = _context_ids(ordering, cfg.c, target.id)
    by_id = {doc.id: doc for doc in corpus}
    context_texts = tuple(by_id[doc_id].text for doc_id in context_ids)

    view_docs = list(corpus)
    target_index = ids.index(target.id)
    records: list[TraceRecord] = []

    for position in range(sentence_count(target.text) + 1):
        previous: tuple[str, ...] = ()
        previous_buffer: tuple[str, ...] = ()
        success = False
        for iteration in range(cfg.n + 1):
            if iteration == 0:
                request = GenerationRequest(
                    mode=GenerationMode.INITIAL,
                    query=query.text,
                    target_document=target.text,
                    context_docs=context_texts,
                    n_sent=cfg.n_sent,
                    max_tokens=cfg.max_tokens,
                )
            else:
                request = GenerationRequest(
                    mode=GenerationMode.FEEDBACK,
                    query=query.text,
                    target_document=target.text,
                    context_docs=context_texts,
                    n_sent=cfg.n_sent,
                    max_tokens=cfg.max_tokens,
                    previous_sentences=previous,
                    previous_buffer_a=previous_buffer,
                )
            response = generator.generate(request)
            evaluated: list[tuple[str, int]] = []
            try:
                for sentence in response.sentences:
                    variant_text = insert_sentence(target.text, sentence, position)
                    view_docs[target_index] = Document(id=target.id, text=variant_text)
                    rank_after = view.rank_of(query, view_docs, target.id)
                    passed_rank = rank_after <= rank_before
                    passed_indirect = check_indirect_relevance(sentence, query, judge)
                    passed_coherence = (
                        coherence_count(sentence, response.buffer_a) >= cfg.tau
                    )
                    record = TraceRecord(
                        query_id=query.id,
                        context_ids=tuple(context_ids),
                        target_doc_id=target.id,
                        sentence=sentence,
                        position=position,
                        iteration=iteration,
                        rank_before=rank_before,
                        rank_after=rank_after,
                        passed_rank_gate=passed_rank,
                        passed_indirect=passed_indirect,
                        passed_coherence=passed_coherence,
                        buffer_a=response.buffer_a,
                    )
                    records.append(record)
                    evaluated.append((sentence, rank_after))
                    if record.retained and rank_after <= cfg.k and rank_after < rank_before:
                        success = True
                        break
            finally:
                view_docs[target_index] = target
            if success:
                break
            if iteration < cfg.n:
                best_rank = min(rank for _, rank in evaluated)
                previous = tuple(
                    sorted({s for s, rank in evaluated if rank == best_rank})
                )
                previous_buffer = response.buffer_a
    return records


def run_stage1_batch(
    pairs: Sequence[TargetPair],
    queries_by_id: dict[str, Query],
    corpus: Sequence[Document],
    ranker: RankerPort,
    generator: GeneratorPort,
    cfg: Stage1Config,
    workers: int = 1,
    judge: IndirectJudge | None = None,
) -> tuple[list[TraceRecord], list[dict]]:
    """Run stage 1 over many pairs; service failures skip the pair, not the run.

    Returns records in canonical (query_id, doc_id, position, iteration) order
    plus one failure row per skipped pair, so output never depends on worker
    scheduling.
    """
    by_id = {doc.id: doc for doc in corpus}

    def process(pair: TargetPair) -> tuple[TargetPair, list[TraceRecord] | None, str | None]:
        query = queries_by_id.get(pair.query_id)
        if query is None:
            return pair, None, f"unknown query id {pair.query_id!r}"
        target = by_id.get(pair.doc_id)
        if target is None:
            return pair, None, f"unknown doc id {pair.doc_id!r}"
        try:
            return pair, run_stage1(query, target, corpus, ranker, generator, cfg, judge), None
        except ServiceError as exc:
            return pair, None, str(exc)

    if workers <= 1:
        outcomes = [process(pair) for pair in pairs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(process, pairs))

    records: list[TraceRecord] = []
    failures: list[dict] = []
    for pair, pair_records, error in outcomes:
        if error is not None:
            failures.append(
                {"query_id": pair.query_id, "doc_id": pair.doc_id, "error": error}
            )
        else:
            records.extend(pair_records or [])
    records.sort(key=lambda r: (r.query_id, r.target_doc_id, r.position, r.iteration))
    failures.sort(key=lambda f: (f["query_id"], f["doc_id"]))
    return records, failures
