"""Deterministic synthetic corpus, queries, and attack scenarios.

Desk-scale stand-ins for a retrieval collection: four topic clusters with a
tiered relevance structure, so every query has term-rich documents at the top,
moderately related documents in the middle, and a long tail of background
documents. Everything is derived from seeds; the same seed always produces
byte-identical fixtures.
"""

from __future__ import annotations

import os

from .models import Document, Query
from .seeding import rng_for
from .storage import write_jsonl

TOPICS: dict[str, list[str]] = {
    "tax": [
        "income", "tax", "return", "filing", "deduction", "refund", "form",
        "employer", "wages", "bracket", "credit", "audit", "payroll", "statement",
        "deadline", "exemption", "dependent", "withholding", "liability", "receipt",
    ],
    "travel": [
        "visa", "passport", "border", "flight", "itinerary", "customs", "luggage",
        "embassy", "permit", "transit", "layover", "boarding", "departure", "arrival",
        "booking", "terminal", "currency", "insurance", "voucher", "checkpoint",
    ],
    "health": [
        "protein", "vitamin", "diet", "fiber", "calcium", "nutrition", "exercise",
        "sleep", "immune", "hydration", "calories", "mineral", "wellness", "dosage",
        "allergy", "symptom", "recovery", "metabolism", "supplement", "posture",
    ],
    "energy": [
        "solar", "panel", "inverter", "battery", "grid", "voltage", "efficiency",
        "turbine", "storage", "meter", "kilowatt", "installation", "output",
        "renewable", "capacity", "circuit", "thermal", "insulation", "generator",
        "transformer",
    ],
}

GLUE = [
    "records", "figures", "summary", "annual", "report", "local", "public",
    "common", "general", "basic", "typical", "overview", "section", "notes",
    "details", "review", "guide", "listing", "update", "survey",
]

# One three-term query per (topic, slot); slots index into the topic word list.
_QUERY_SLOTS = ((0, 1, 2), (3, 4, 5))

# Fraction of each topic's documents that are rich in its query terms. Denser
# topics have a deeper top-10 moat, so first-round injections fall short there
# and the refinement loop has real work to do.
_RICH_DENSITY = {"energy": 0.10, "health": 0.14, "tax": 0.22, "travel": 0.30}


def fixture_queries() -> list[Query]:
    """Fixed query set: two three-term queries per topic."""
    queries = []
    for topic, words in sorted(TOPICS.items()):
        for s_index, slot in enumerate(_QUERY_SLOTS):
            terms = [words[i] for i in slot]
            queries.append(Query(id=f"q-{topic}-{s_index}", text=" ".join(terms)))
    return queries


def _sentence(rng, vocabulary: list[str], length: int) -> str:
    words = [rng.choice(vocabulary) for _ in range(length)]
    return " ".join(words).capitalize() + "."


def fixture_corpus(seed: int | str = 11, n_docs: int = 200) -> list[Document]:
    """Topic-tiered corpus: ~15% term-rich, ~25% moderate, rest background."""
    topics = sorted(TOPICS)
    docs = []
    for index in range(n_docs):
        doc_id = f"d{index:04d}"
        rng = rng_for(seed, "doc", doc_id)
        topic = topics[index % len(topics)]
        words = TOPICS[topic]
        query_terms = [words[i] for slot in _QUERY_SLOTS for i in slot]
        other_terms = [w for w in words if w not in query_terms]
        roll = rng.random()
        rich = _RICH_DENSITY[topic]
        if roll < rich:
            # Rich: heavy use of the topic's query terms.
            vocabulary = query_terms * 3 + other_terms + GLUE
        elif roll < rich + 0.25:
            # Moderate: one or two query terms in an otherwise plain document.
            vocabulary = rng.sample(query_terms, 2) + other_terms + GLUE * 2
        else:
            # Background: topic flavor without query terms.
            vocabulary = other_terms + GLUE * 2
        n_sentences = rng.randint(3, 6)
        text = " ".join(
            _sentence(rng, vocabulary, rng.randint(7, 11)) for _ in range(n_sentences)
        )
        docs.append(Document(id=doc_id, text=text))
    return docs


def write_fixture_inputs(directory: str, seed: int | str = 11, n_docs: int = 200) -> dict:
    """Write corpus.jsonl and queries.jsonl under ``directory``; return paths."""
    os.makedirs(directory, exist_ok=True)
    corpus_path = os.path.join(directory, "corpus.jsonl")
    queries_path = os.path.join(directory, "queries.jsonl")
    write_jsonl(corpus_path, ({"id": d.id, "text": d.text} for d in fixture_corpus(seed, n_docs)))
    write_jsonl(queries_path, ({"id": q.id, "text": q.text} for q in fixture_queries()))
    return {"corpus": corpus_path, "queries": queries_path}


def missing_term_scenario(n_targets: int = 4) -> tuple[Query, list[Document], list[str]]:
    """Corpus where adding one absent query term should vault targets upward.

    Each target document covers part of the query; the top-ranked documents
    carry every query term. Injecting a context-derived sentence (which picks
    up the missing ``solar``) should push a target inside the top 10.
    """
    query = Query(id="q-energy-0", text="solar panel efficiency")
    docs = []
    # Term-rich leaders.
    for i in range(12):
        rng = rng_for("missing-term", "leader", i)
        body = []
        for _ in range(4):
            body.append(
                _sentence(
                    rng,
                    ["solar", "panel", "efficiency", "inverter", "output", "grid"] + GLUE,
                    rng.randint(7, 10),
                )
            )
        docs.append(Document(id=f"lead{i:02d}", text=" ".join(body)))
    # Mid-tier documents with partial coverage.
    for i in range(18):
        rng = rng_for("missing-term", "mid", i)
        vocabulary = ["panel", "inverter", "battery", "grid", "meter"] + GLUE
        body = [_sentence(rng, vocabulary, rng.randint(7, 10)) for _ in range(4)]
        docs.append(Document(id=f"mid{i:02d}", text=" ".join(body)))
    # Background noise.
    for i in range(30):
        rng = rng_for("missing-term", "noise", i)
        vocabulary = ["turbine", "storage", "thermal", "insulation", "circuit"] + GLUE
        body = [_sentence(rng, vocabulary, rng.randint(7, 10)) for _ in range(4)]
        docs.append(Document(id=f"bg{i:02d}", text=" ".join(body)))
    # Targets: panel coverage only, never solar or efficiency.
    target_ids = []
    for i in range(n_targets):
        rng = rng_for("missing-term", "target", i)
        vocabulary = ["panel", "meter", "voltage", "capacity"] + GLUE
        body = [_sentence(rng, vocabulary, rng.randint(7, 10)) for _ in range(3)]
        doc = Document(id=f"target{i:02d}", text=" ".join(body))
        target_ids.append(doc.id)
        docs.append(doc)
    return query, docs, target_ids
