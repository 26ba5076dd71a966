"""Victim-ranker abstraction, builtin lexical ranker, and ranked-run file IO.

The ranker contract is pointwise: a document's score depends only on the
(query, document) pair, never on what else is in the batch. Ranks are
1-indexed; a document's rank is the count of strictly higher-scoring
documents plus one, with score ties broken by ascending doc id so that
orderings are reproducible.

Attack pipelines must not observe scores (rank-only access); they go through
:class:`RankOnlyView`, which exposes orderings and ranks but no scores.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import Protocol, Sequence

import requests

from .service import service_session

from .errors import ConfigError, NotFoundError, RunFormatError, ServiceError
from .models import Document, Query
from .textops import tokenize

RUN_TAG = "rankforge"
SCORE_DECIMALS = 6


class RankerPort(Protocol):
    """Relevance scorer: one real-valued score per document, pointwise."""

    def score_batch(self, query: Query, documents: Sequence[Document]) -> list[float]: ...


@dataclass(frozen=True)
class RunEntry:
    doc_id: str
    score: float
    rank: int


@dataclass(frozen=True)
class RankedList:
    query_id: str
    entries: tuple[RunEntry, ...]

    def __post_init__(self) -> None:
        seen: set[str] = set()
        prev: RunEntry | None = None
        for i, entry in enumerate(self.entries, start=1):
            if entry.rank != i:
                raise RunFormatError(
                    f"query {self.query_id}: rank {entry.rank} at position {i}, expected {i}"
                )
            if entry.doc_id in seen:
                raise RunFormatError(f"query {self.query_id}: duplicate doc id {entry.doc_id}")
            seen.add(entry.doc_id)
            if prev is not None:
                if (-entry.score, entry.doc_id) < (-prev.score, prev.doc_id):
                    raise RunFormatError(
                        f"query {self.query_id}: entries not sorted by (score desc, doc_id asc) "
                        f"at rank {i}"
                    )
            prev = entry

    def rank_of(self, doc_id: str) -> int:
        for entry in self.entries:
            if entry.doc_id == doc_id:
                return entry.rank
        raise NotFoundError(f"doc {doc_id!r} not in ranked list for query {self.query_id}")

    def doc_ids(self) -> list[str]:
        return [entry.doc_id for entry in self.entries]


@lru_cache(maxsize=65536)
def _doc_profile(text: str) -> tuple[Counter, int]:
    tokens = tokenize(text)
    return Counter(tokens), len(tokens)


class LexicalRanker:
    """Okapi-family lexical scorer used as the deterministic builtin victim.

    Collection statistics (document frequencies, average length) are frozen at
    construction, so scoring a perturbed variant of a corpus document uses the
    same statistics as the original — scores stay pointwise and reproducible.
    idf uses the always-positive ``log(1 + (N - df + 0.5)/(df + 0.5))`` form.
    """

    def __init__(self, corpus: Sequence[Document], k1: float = 0.9, b: float = 0.4):
        if not corpus:
            raise ConfigError("lexical ranker needs a non-empty corpus")
        self.k1 = float(k1)
        self.b = float(b)
        self.doc_count = len(corpus)
        lengths = []
        df: Counter = Counter()
        for doc in corpus:
            counts, length = _doc_profile(doc.text)
            lengths.append(length)
            df.update(counts.keys())
        self.avgdl = sum(lengths) / len(lengths)
        if self.avgdl <= 0:
            raise ConfigError("corpus has no tokens")
        self.df = dict(df)
        n = self.doc_count
        self.idf = {t: math.log(1.0 + (n - d + 0.5) / (d + 0.5)) for t, d in df.items()}

    def score(self, query: Query, document: Document) -> float:
        counts, length = _doc_profile(document.text)
        norm = self.k1 * (1.0 - self.b + self.b * length / self.avgdl)
        total = 0.0
        for term in dict.fromkeys(tokenize(query.text)):
            tf = counts.get(term)
            if not tf:
                continue
            idf = self.idf.get(term)
            if idf is None:
                continue
            total += idf * tf * (self.k1 + 1.0) / (tf + norm)
        return total

    def score_batch(self, query: Query, documents: Sequence[Document]) -> list[float]:
        return [self.score(query, doc) for doc in documents]


def build_lexical_ranker(corpus: Sequence[Document], k1: float = 0.9, b: float = 0.4) -> LexicalRanker:
    return LexicalRanker(corpus, k1=k1, b=b)


def rerank(ranker: RankerPort, query: Query, docs: Sequence[Document]) -> RankedList:
    """Score ``docs`` and return the full ordering (score desc, doc id asc)."""
    if not docs:
        raise ConfigError("rerank needs at least one document")
    try:
        scores = ranker.score_batch(query, docs)
    except ServiceError as exc:
        if exc.query_id is None:
            raise ServiceError(str(exc), query_id=query.id, role=exc.role) from exc
        raise
    if len(scores) != len(docs):
        raise ServiceError(
            f"ranker returned {len(scores)} scores for {len(docs)} documents",
            query_id=query.id,
            role="ranker",
        )
    order = sorted(zip(docs, scores), key=lambda pair: (-pair[1], pair[0].id))
    entries = tuple(
        RunEntry(doc_id=doc.id, score=score, rank=i)
        for i, (doc, score) in enumerate(order, start=1)
    )
    return RankedList(query_id=query.id, entries=entries)


def rank_of(ranker: RankerPort, query: Query, corpus_view: Sequence[Document], target_id: str) -> int:
    """1-indexed rank of ``target_id``: strictly-greater scores + id tie-break + 1."""
    ids = {doc.id for doc in corpus_view}
    if target_id not in ids:
        raise NotFoundError(f"target {target_id!r} not in corpus view")
    scores = ranker.score_batch(query, corpus_view)
    if len(scores) != len(corpus_view):
        raise ServiceError(
            f"ranker returned {len(scores)} scores for {len(corpus_view)} documents",
            query_id=query.id,
            role="ranker",
        )
    target_score = None
    for doc, score in zip(corpus_view, scores):
        if doc.id == target_id:
            target_score = score
            break
    rank = 1
    for doc, score in zip(corpus_view, scores):
        if doc.id == target_id:
            continue
        if score > target_score or (score == target_score and doc.id < target_id):
            rank += 1
    return rank


class RankOnlyView:
    """Rank-only access to a ranker; the shape attack code is allowed to see.

    Exposes document orderings and target ranks but never scores, matching the
    black-box setting where only the final ordering is observable.
    """

    def __init__(self, ranker: RankerPort):
        self._ranker = ranker

    def ordering(self, query: Query, docs: Sequence[Document]) -> list[str]:
        return rerank(self._ranker, query, docs).doc_ids()

    def rank_of(self, query: Query, corpus_view: Sequence[Document], target_id: str) -> int:
        return rank_of(self._ranker, query, corpus_view, target_id)


class RemoteRanker:
    """HTTP client for the ranker wire protocol (POST {base}/rank)."""

    def __init__(self, base_url: str, timeout: float = 30.0, retries: int = 2):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.retries = retries
        self._session = service_session()

    def score_batch(self, query: Query, documents: Sequence[Document]) -> list[float]:
        payload = {
            "query": query.text,
            "documents": [{"id": doc.id, "text": doc.text} for doc in documents],
        }
        last_error: Exception | None = None
        for _ in range(self.retries + 1):
            try:
                resp = self._session.post(
                    f"{self.base_url}/rank", json=payload, timeout=self.timeout
                )
                resp.raise_for_status()
                body = resp.json()
                scores = body["scores"]
                if not isinstance(scores, list) or len(scores) != len(documents):
                    raise ServiceError(
                        "ranker response arity does not match request",
                        query_id=query.id,
                        role="ranker",
                    )
                return [float(s) for s in scores]
            except ServiceError:
                raise
            except (requests.RequestException, KeyError, TypeError, ValueError) as exc:
                last_error = exc
        raise ServiceError(
            f"ranker call failed after {self.retries + 1} attempts: {last_error}",
            query_id=query.id,
            role="ranker",
        )


def write_run(path: str, runs: Sequence[RankedList]) -> None:
    """Write ranked lists in the six-column run format, atomically."""
    from .storage import atomic_write_text

    lines = []
    for run in sorted(runs, key=lambda r: r.query_id):
        for entry in run.entries:
            lines.append(
                f"{run.query_id} Q0 {entry.doc_id} {entry.rank} "
                f"{entry.score:.{SCORE_DECIMALS}f} {RUN_TAG}"
            )
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def read_run(path: str) -> list[RankedList]:
    """Parse a six-column run file, enforcing RankedList invariants."""
    per_query: dict[str, list[RunEntry]] = {}
    order: list[str] = []
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line:
                continue
            fields = line.split()
            if len(fields) != 6:
                raise RunFormatError(f"expected 6 columns, got {len(fields)}", line_no)
            query_id, _q0, doc_id, rank_s, score_s, _tag = fields
            try:
                rank = int(rank_s)
                score = float(score_s)
            except ValueError as exc:
                raise RunFormatError(f"bad rank/score: {exc}", line_no) from exc
            if query_id not in per_query:
                per_query[query_id] = []
                order.append(query_id)
            per_query[query_id].append(RunEntry(doc_id=doc_id, score=score, rank=rank))
    runs = []
    for query_id in order:
        entries = tuple(sorted(per_query[query_id], key=lambda e: e.rank))
        runs.append(RankedList(query_id=query_id, entries=entries))
    return runs
