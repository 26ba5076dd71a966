"""Domain types shared by the whole pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .errors import DataError
from .textops import insert_sentence, sentence_count


class TargetGroup(str, Enum):
    """Which sampling band a targeted (query, doc) pair came from.

    ``MIXTURE`` is a selection mode (an equal-sized sample across the two
    bands); selected pairs always carry their source band so downstream
    thresholds and per-group reporting stay well defined.
    """

    EASY5 = "easy5"
    HARD5 = "hard5"
    MIXTURE = "mixture"


@dataclass(frozen=True)
class Query:
    id: str
    text: str

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise DataError(f"query {self.id!r} has empty text")


@dataclass(frozen=True)
class Document:
    id: str
    text: str

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise DataError(f"document {self.id!r} has empty text")


@dataclass(frozen=True)
class AdversarialVariant:
    """A target document with one sentence injected at one slot."""

    base_doc_id: str
    sentence: str
    position: int
    text: str
    rank_after: int | None = None

    @classmethod
    def build(
        cls, base: Document, sentence: str, position: int, rank_after: int | None = None
    ) -> "AdversarialVariant":
        if not 0 <= position <= sentence_count(base.text):
            raise ValueError(f"position {position} out of range for document {base.id!r}")
        if rank_after is not None and rank_after < 1:
            raise ValueError("rank_after must be >= 1 when present")
        return cls(
            base_doc_id=base.id,
            sentence=sentence.strip(),
            position=position,
            text=insert_sentence(base.text, sentence, position),
            rank_after=rank_after,
        )


@dataclass(frozen=True)
class TraceRecord:
    """One evaluated candidate from the dataset-generation stage.

    Failed candidates are kept on purpose: the preference-pair builder needs
    strong negatives, so every evaluated (sentence, position) lands here with
    its gate verdicts.
    """

    query_id: str
    context_ids: tuple[str, ...]
    target_doc_id: str
    sentence: str
    position: int
    iteration: int
    rank_before: int
    rank_after: int
    passed_rank_gate: bool
    passed_indirect: bool
    passed_coherence: bool
    buffer_a: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        if self.rank_before < 1 or self.rank_after < 1:
            raise DataError("ranks are 1-indexed and must be >= 1")
        if self.iteration < 0:
            raise DataError("iteration must be >= 0")

    @property
    def retained(self) -> bool:
        """Kept for training: improved-or-equal rank and both text gates passed."""
        return self.passed_rank_gate and self.passed_indirect and self.passed_coherence

    def to_json_dict(self) -> dict:
        return {
            "query_id": self.query_id,
            "context_ids": list(self.context_ids),
            "target_doc_id": self.target_doc_id,
            "sentence": self.sentence,
            "position": self.position,
            "iteration": self.iteration,
            "rank_before": self.rank_before,
            "rank_after": self.rank_after,
            "passed_rank_gate": self.passed_rank_gate,
            "passed_indirect": self.passed_indirect,
            "passed_coherence": self.passed_coherence,
            "buffer_a": list(self.buffer_a),
        }

    @classmethod
    def from_json_dict(cls, row: dict) -> "TraceRecord":
        try:
            return cls(
                query_id=row["query_id"],
                context_ids=tuple(row["context_ids"]),
                target_doc_id=row["target_doc_id"],
                sentence=row["sentence"],
                position=int(row["position"]),
                iteration=int(row["iteration"]),
                rank_before=int(row["rank_before"]),
                rank_after=int(row["rank_after"]),
                passed_rank_gate=bool(row["passed_rank_gate"]),
                passed_indirect=bool(row["passed_indirect"]),
                passed_coherence=bool(row["passed_coherence"]),
                buffer_a=tuple(row.get("buffer_a", ())),
            )
        except KeyError as exc:
            raise DataError(f"trace record missing field {exc}") from exc


@dataclass(frozen=True)
class TargetPair:
    """A (query, doc) pair chosen for attack, labeled with its source band."""

    query_id: str
    doc_id: str
    group: TargetGroup

    def to_json_dict(self) -> dict:
        return {"query_id": self.query_id, "doc_id": self.doc_id, "group": self.group.value}

    @classmethod
    def from_json_dict(cls, row: dict) -> "TargetPair":
        try:
            return cls(row["query_id"], row["doc_id"], TargetGroup(row["group"]))
        except (KeyError, ValueError) as exc:
            raise DataError(f"bad target pair row: {exc}") from exc
