"""Built-in oracle suite: cross-checks fast paths against brute force.

Runs entirely on bundled fixtures and seeded random cases; prints one
pass/fail line per check so a fresh install can be validated without any
external service or dataset.
"""

from __future__ import annotations

from typing import Callable

from . import oracles
from .datasets import pick_preference
from .fixtures import GLUE, TOPICS, fixture_corpus, fixture_queries
from .metrics import lcs_length, token_edit_distance
from .ranking import LexicalRanker, rank_of
from .seeding import rng_for

_CHECK_SEED = "selfcheck"


def _check_rank_sort() -> None:
    corpus = fixture_corpus(seed=_CHECK_SEED, n_docs=80)
    queries = fixture_queries()
    ranker = LexicalRanker(corpus)
    rng = rng_for(_CHECK_SEED, "rank")
    for trial in range(50):
        query = rng.choice(queries)
        view = rng.sample(corpus, rng.randint(5, len(corpus)))
        target = rng.choice(view)
        scored = [(doc.id, ranker.score(query, doc)) for doc in view]
        expected = oracles.brute_force_rank(scored, target.id)
        actual = rank_of(ranker, query, view, target.id)
        assert actual == expected, (
            f"trial {trial}: rank_of={actual}, brute force={expected}"
        )


def _check_lcs() -> None:
    vocabulary = ["a", "b", "c", "d", "e"]
    rng = rng_for(_CHECK_SEED, "lcs")
    for trial in range(200):
        a = [rng.choice(vocabulary) for _ in range(rng.randint(0, 10))]
        b = [rng.choice(vocabulary) for _ in range(rng.randint(0, 10))]
        expected = oracles.brute_force_lcs(a, b)
        actual = lcs_length(a, b)
        assert actual == expected, f"trial {trial}: lcs={actual}, brute force={expected}"


def _check_levenshtein() -> None:
    assert token_edit_distance(list("kitten"), list("sitting")) == 3
    vocabulary = list(TOPICS["tax"][:6]) + GLUE[:4]
    rng = rng_for(_CHECK_SEED, "lev")
    for trial in range(200):
        a = [rng.choice(vocabulary) for _ in range(rng.randint(0, 14))]
        b = [rng.choice(vocabulary) for _ in range(rng.randint(0, 14))]
        expected = oracles.levenshtein_full_matrix(a, b)
        actual = token_edit_distance(a, b)
        assert actual == expected, (
            f"trial {trial}: distance={actual}, full matrix={expected}"
        )


def _check_preference() -> None:
    rng = rng_for(_CHECK_SEED, "pref")
    for trial in range(300):
        k = rng.randint(1, 20)
        candidates = [
            (f"s{rng.randint(0, 9)}", rng.randint(1, 40))
            for _ in range(rng.randint(1, 12))
        ]
        expected = oracles.preference_scan(candidates, k)
        actual = pick_preference(candidates, k)
        assert actual == expected, (
            f"trial {trial}: pick={actual}, scan={expected} (k={k}, {candidates})"
        )
        if actual is not None:
            (_, chosen_rank), (_, rejected_rank) = actual
            assert chosen_rank <= k < rejected_rank


CHECKS: tuple[tuple[str, Callable[[], None]], ...] = (
    ("rank-sort-oracle", _check_rank_sort),
    ("lcs-brute-force", _check_lcs),
    ("levenshtein-dp", _check_levenshtein),
    ("preference-pair-scan", _check_preference),
)


def run_selfcheck(emit: Callable[[str], None] = print) -> bool:
    ok = True
    for name, check in CHECKS:
        try:
            check()
        except AssertionError as exc:
            ok = False
            emit(f"selfcheck {name}: FAIL ({exc})")
        else:
            emit(f"selfcheck {name}: PASS")
    return ok
