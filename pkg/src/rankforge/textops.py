"""Tokenization, sentence segmentation, and the sentence-injection primitive.

Everything downstream (ranking, constraint gates, fidelity metrics) is defined
on top of these three pure operations, so they are deliberately simple and
fully deterministic. The sentence splitter is naive by design: it splits after
``. ! ?`` followed by whitespace, so abbreviations like "Dr." produce an extra
boundary. That trade-off buys exact, testable invariants.
"""

from __future__ import annotations

import re

# A token is a maximal run of alphanumeric characters (underscore excluded).
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

# Sentence boundary: terminal punctuation followed by whitespace.
_SENTENCE_BREAK_RE = re.compile(r"(?<=[.!?])\s+")


def tokenize(text: str) -> list[str]:
    """Lowercase ``text`` and split it on runs of non-alphanumeric characters."""
    return _TOKEN_RE.findall(text.lower())


def normalize(text: str) -> str:
    """Lowercased, punctuation-stripped, whitespace-collapsed form of ``text``."""
    return " ".join(tokenize(text))


def split_sentences(text: str) -> list[str]:
    """Split ``text`` into sentences after ``.``, ``!`` or ``?`` + whitespace.

    Sentences are trimmed and never empty. Joining the result with single
    spaces yields the canonical form of the document.
    """
    stripped = text.strip()
    if not stripped:
        return []
    return [part.strip() for part in _SENTENCE_BREAK_RE.split(stripped) if part.strip()]


def sentence_count(text: str) -> int:
    return len(split_sentences(text))


def insertion_positions(text: str) -> int:
    """Number of sentence-boundary slots: one more than the sentence count.

    Slot 0 precedes the first sentence; slot S follows the last.
    """
    return sentence_count(text) + 1


def insert_sentence(text: str, sentence: str, position: int) -> str:
    """Splice ``sentence`` as one whole sentence at slot ``position``.

    The result is the single-space join of the sentence sequence, so the token
    sequence of the output equals the document's token sequence with the
    sentence's tokens spliced in contiguously.
    """
    sentence = sentence.strip()
    if not sentence:
        raise ValueError("injected sentence must be non-empty")
    parts = split_sentences(text)
    if not 0 <= position <= len(parts):
        raise ValueError(
            f"position {position} out of range for a document with {len(parts)} sentences"
        )
    return " ".join(parts[:position] + [sentence] + parts[position:])
