"""Independent brute-force oracles for self-checks.

These deliberately reimplement — by slower, more obvious means — operations
the pipeline computes efficiently, so the two routes can be compared on
random inputs. Keep them naive; their value is being boring.
"""

from __future__ import annotations

from itertools import combinations
from typing import Sequence


def brute_force_rank(scored: Sequence[tuple[str, float]], target_id: str) -> int:
    """Rank of ``target_id`` via a full sort by (score desc, doc id asc)."""
    ordered = sorted(scored, key=lambda pair: (-pair[1], pair[0]))
    for index, (doc_id, _score) in enumerate(ordered, start=1):
        if doc_id == target_id:
            return index
    raise ValueError(f"target {target_id!r} not present")


def brute_force_lcs(a: Sequence[str], b: Sequence[str]) -> int:
    """Longest common subsequence length by enumerating subsequences.

    Exponential in the shorter sequence; callers keep lengths <= ~14.
    """
    if len(a) > len(b):
        a, b = b, a

    def is_subsequence(candidate: tuple[str, ...], sequence: Sequence[str]) -> bool:
        position = 0
        for token in sequence:
            if position < len(candidate) and candidate[position] == token:
                position += 1
        return position == len(candidate)

    for length in range(len(a), 0, -1):
        for indices in combinations(range(len(a)), length):
            candidate = tuple(a[i] for i in indices)
            if is_subsequence(candidate, b):
                return length
    return 0


def levenshtein_full_matrix(a: Sequence[str], b: Sequence[str]) -> int:
    """Unit-cost edit distance with the full O(n*m) table."""
    rows = len(a) + 1
    cols = len(b) + 1
    table = [[0] * cols for _ in range(rows)]
    for i in range(rows):
        table[i][0] = i
    for j in range(cols):
        table[0][j] = j
    for i in range(1, rows):
        for j in range(1, cols):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            table[i][j] = min(
                table[i - 1][j] + 1,
                table[i][j - 1] + 1,
                table[i - 1][j - 1] + cost,
            )
    return table[rows - 1][cols - 1]


def preference_scan(
    candidates: Sequence[tuple[str, int]], k: int
) -> tuple[tuple[str, int], tuple[str, int]] | None:
    """Exhaustive double argmin: each sentence judged at its best rank."""
    best: dict[str, int] = {}
    for sentence, rank in candidates:
        if sentence not in best or rank < best[sentence]:
            best[sentence] = rank
    positives = [(rank, sentence) for sentence, rank in best.items() if rank <= k]
    negatives = [(rank, sentence) for sentence, rank in best.items() if rank > k]
    if not positives or not negatives:
        return None
    chosen_rank, chosen = min(positives)
    rejected_rank, rejected = min(negatives)
    return (chosen, chosen_rank), (rejected, rejected_rank)
