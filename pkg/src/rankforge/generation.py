"""Adversarial-sentence generator port: prompts, parsing, mock and HTTP clients.

Prompt templates live under ``prompts/`` as versioned resources and are
instantiated by literal slot substitution, so text in any input field can
never be re-interpreted as a template directive. Parsing is lenient about the
envelope (real model output often carries a prose preamble) but strict about
the extracted object.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from typing import Protocol, Sequence

import requests

from .errors import (
    ConfigError,
    GenerationParseError,
    GenerationValidationError,
    ServiceError,
)
from .service import service_session
from .seeding import rng_for
from .textops import normalize, tokenize

TEMPLATE_VERSION = "v1"

DEFAULT_N_SENT = 5
DEFAULT_MAX_TOKENS = 40


class GenerationMode(str, Enum):
    INITIAL = "initial"
    FEEDBACK = "feedback"


@dataclass(frozen=True)
class GenerationRequest:
    mode: GenerationMode
    query: str
    target_document: str
    context_docs: tuple[str, ...]
    n_sent: int = DEFAULT_N_SENT
    max_tokens: int = DEFAULT_MAX_TOKENS
    previous_sentences: tuple[str, ...] = ()
    previous_buffer_a: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.n_sent < 1:
            raise ConfigError("n_sent must be >= 1")
        if self.max_tokens < 1:
            raise ConfigError("max_tokens must be >= 1")
        if self.mode is GenerationMode.FEEDBACK and not self.previous_sentences:
            raise ConfigError("feedback requests need previous_sentences")
        if self.mode is GenerationMode.INITIAL and self.previous_sentences:
            raise ConfigError("initial requests must not carry previous_sentences")

    def to_json_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "query": self.query,
            "target_document": self.target_document,
            "context_docs": list(self.context_docs),
            "previous_sentences": list(self.previous_sentences),
            "previous_buffer_a": list(self.previous_buffer_a),
            "n_sent": self.n_sent,
            "max_tokens": self.max_tokens,
        }


@dataclass(frozen=True)
class GenerationResponse:
    buffer_a: tuple[str, ...]
    sentences: tuple[str, ...]


class GeneratorPort(Protocol):
    def generate(self, request: GenerationRequest) -> GenerationResponse: ...


# ---------------------------------------------------------------------------
# Prompt rendering
# ---------------------------------------------------------------------------

_SLOT_RE = re.compile(
    r"\{(n_sent|num_max_token|query|validator|context|key_phrases_buffer_A|previous_sentences)\}"
)


def _load_template(name: str) -> str:
    return resources.files("rankforge.prompts").joinpath(name).read_text(encoding="utf-8")


def _render(template: str, values: dict[str, str]) -> str:
    missing: list[str] = []

    def fill(match: re.Match) -> str:
        key = match.group(1)
        if key not in values:
            missing.append(key)
            return match.group(0)
        return values[key]

    rendered = _SLOT_RE.sub(fill, template)
    if missing:
        raise ConfigError(f"template slots missing values: {sorted(set(missing))}")
    return rendered


def _format_context(context_docs: Sequence[str]) -> str:
    return "\n".join(f"{i}. {doc}" for i, doc in enumerate(context_docs, start=1))


def render_initial_prompt(request: GenerationRequest) -> str:
    if request.mode is not GenerationMode.INITIAL:
        raise ConfigError("render_initial_prompt needs an initial-mode request")
    if not request.context_docs:
        raise ConfigError("initial prompt needs at least one context document")
    return _render(
        _load_template(f"initial_{TEMPLATE_VERSION}.txt"),
        {
            "query": request.query,
            "validator": request.target_document,
            "context": _format_context(request.context_docs),
            "n_sent": str(request.n_sent),
            "num_max_token": str(request.max_tokens),
        },
    )


def render_feedback_prompt(request: GenerationRequest) -> str:
    if request.mode is not GenerationMode.FEEDBACK:
        raise ConfigError("render_feedback_prompt needs a feedback-mode request")
    if not request.context_docs:
        raise ConfigError("feedback prompt needs at least one context document")
    return _render(
        _load_template(f"feedback_{TEMPLATE_VERSION}.txt"),
        {
            "query": request.query,
            "validator": request.target_document,
            "context": _format_context(request.context_docs),
            "n_sent": str(request.n_sent),
            "num_max_token": str(request.max_tokens),
            "key_phrases_buffer_A": ", ".join(request.previous_buffer_a),
            "previous_sentences": "\n".join(
                f"{i}. {s}" for i, s in enumerate(request.previous_sentences, start=1)
            ),
        },
    )


def render_prompt(request: GenerationRequest) -> str:
    if request.mode is GenerationMode.INITIAL:
        return render_initial_prompt(request)
    return render_feedback_prompt(request)


# ---------------------------------------------------------------------------
# Output parsing
# ---------------------------------------------------------------------------


def extract_first_json_object(raw: str) -> dict:
    """Return the first balanced, parseable top-level JSON object in ``raw``."""
    start = raw.find("{")
    while start != -1:
        depth = 0
        in_string = False
        escaped = False
        for i in range(start, len(raw)):
            ch = raw[i]
            if in_string:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == '"':
                    in_string = False
                continue
            if ch == '"':
                in_string = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    candidate = raw[start : i + 1]
                    try:
                        parsed = json.loads(candidate)
                    except json.JSONDecodeError:
                        break
                    if isinstance(parsed, dict):
                        return parsed
                    break
        start = raw.find("{", start + 1)
    raise GenerationParseError("no balanced JSON object found in generator output")


def _string_list(value: object, name: str, violations: list[str]) -> list[str]:
    if not isinstance(value, list) or any(not isinstance(v, str) for v in value):
        violations.append(f"'{name}' must be a list of strings")
        return []
    return [v.strip() for v in value]


def parse_generation(raw: str, request: GenerationRequest) -> GenerationResponse:
    """Extract and validate a generator reply against the request's contract.

    All contract violations are collected and reported together.
    """
    obj = extract_first_json_object(raw)
    violations: list[str] = []

    if "buffer_a" not in obj:
        violations.append("missing key 'buffer_a'")
        buffer_a: list[str] = []
    else:
        buffer_a = [t for t in _string_list(obj["buffer_a"], "buffer_a", violations) if t]

    if "sentences" not in obj:
        violations.append("missing key 'sentences'")
        sentences: list[str] = []
    else:
        sentences = _string_list(obj["sentences"], "sentences", violations)
        if len(sentences) != request.n_sent:
            violations.append(f"expected {request.n_sent} sentences, got {len(sentences)}")
        for i, sentence in enumerate(sentences):
            if not sentence:
                violations.append(f"sentence {i + 1} is empty")
                continue
            n_tokens = len(tokenize(sentence))
            if n_tokens > request.max_tokens:
                violations.append(
                    f"sentence {i + 1} has {n_tokens} tokens, budget is {request.max_tokens}"
                )
        if len(set(sentences)) != len(sentences):
            violations.append("sentences must be pairwise distinct")

    if violations:
        raise GenerationValidationError(violations)
    return GenerationResponse(buffer_a=tuple(buffer_a), sentences=tuple(sentences))


# ---------------------------------------------------------------------------
# Deterministic mock generator
# ---------------------------------------------------------------------------

_LEAD_INS = (
    ("reference", "listings", "mention"),
    ("related", "overviews", "describe"),
    ("background", "materials", "cover"),
    ("industry", "summaries", "note"),
    ("archived", "digests", "compare"),
)

_FILLERS = (
    "alongside",
    "regarding",
    "with",
    "plus",
    "near",
    "amid",
    "through",
    "around",
    "beside",
    "versus",
)

BUFFER_SIZE = 10


def score_buffer_terms(context_docs: Sequence[str], query: str) -> list[str]:
    """Top context terms ranked by frequency, doubled when the query uses them."""
    counts: dict[str, int] = {}
    for doc in context_docs:
        for token in tokenize(doc):
            counts[token] = counts.get(token, 0) + 1
    query_terms = set(tokenize(query))
    scored = sorted(
        counts.items(),
        key=lambda item: (-(item[1] * (2 if item[0] in query_terms else 1)), item[0]),
    )
    return [term for term, _ in scored[:BUFFER_SIZE]]


class MockGenerator:
    """Deterministic generator stand-in for desk-scale pipeline runs.

    By construction every emitted sentence contains at least ``tau`` distinct
    buffer terms and never contains the normalized query as a substring, so
    mock candidates always clear the coherence and indirect-relevance gates.
    """

    def __init__(self, seed: int = 0, tau: int = 5):
        if tau < 1:
            raise ConfigError("tau must be >= 1")
        self.seed = seed
        self.tau = tau

    def generate(self, request: GenerationRequest) -> GenerationResponse:
        if not request.context_docs:
            raise ServiceError("mock generator needs context documents", role="generator")
        buffer_a = score_buffer_terms(request.context_docs, request.query)
        query_norm = normalize(request.query)
        pool = [t for t in buffer_a if query_norm not in t]
        if len(pool) < self.tau:
            raise ServiceError(
                f"context vocabulary too small: {len(pool)} usable buffer terms, "
                f"need {self.tau}",
                role="generator",
            )
        if request.max_tokens < self.tau:
            raise ServiceError(
                f"max_tokens={request.max_tokens} cannot fit {self.tau} buffer terms",
                role="generator",
            )
        rng = rng_for(
            self.seed,
            request.mode.value,
            request.query,
            request.target_document,
            *request.previous_sentences,
        )
        fillers = [f for f in _FILLERS if query_norm not in f]
        sentences: list[str] = []
        seen: set[str] = set(request.previous_sentences)
        for j in range(request.n_sent):
            n_terms = min(self.tau + rng.choice((0, 1)), len(pool), request.max_tokens)
            sentence = None
            for shift in range(len(pool)):
                terms = [pool[(j + shift + i) % len(pool)] for i in range(n_terms)]
                if request.mode is GenerationMode.FEEDBACK:
                    # Refinement rounds lean harder on the strongest buffer
                    # term: extra copies raise its in-document frequency.
                    copies = min(
                        2 + rng.choice((0, 1)), max(0, request.max_tokens - n_terms)
                    )
                    terms = terms + [pool[0]] * copies
                candidate = self._compose(terms, j, rng, fillers, query_norm, request.max_tokens)
                if candidate is not None and candidate not in seen:
                    sentence = candidate
                    break
            if sentence is None:
                raise ServiceError(
                    "mock generator could not build distinct query-safe sentences; "
                    "query and context vocabulary are degenerate",
                    role="generator",
                )
            seen.add(sentence)
            sentences.append(sentence)
        return GenerationResponse(buffer_a=tuple(buffer_a), sentences=tuple(sentences))

    def _compose(
        self,
        terms: list[str],
        index: int,
        rng,
        fillers: list[str],
        query_norm: str,
        max_tokens: int,
    ) -> str | None:
        lead = _LEAD_INS[index % len(_LEAD_INS)]
        offset = rng.randrange(len(fillers)) if fillers else 0
        # Interleave fillers between buffer terms so no two terms are adjacent
        # (a multi-word query can then only appear across a term+filler seam),
        # and rotate the filler choice until the query-substring check passes.
        # Degrade to lead-free, then filler-free forms under tight budgets.
        for attempt in range(len(fillers) + 2):
            words: list[str] = []
            for i, term in enumerate(terms):
                if i > 0 and fillers and attempt <= len(fillers):
                    words.append(fillers[(offset + attempt + i) % len(fillers)])
                words.append(term)
            if len(lead) + len(words) <= max_tokens and attempt < len(fillers):
                words = list(lead) + words
            if len(words) > max_tokens:
                continue
            sentence = " ".join(words).capitalize() + "."
            if query_norm not in normalize(sentence):
                return sentence
        return None


# ---------------------------------------------------------------------------
# HTTP client
# ---------------------------------------------------------------------------


class RemoteGenerator:
    """Client for the generator wire protocol (POST {base}/generate).

    In structured mode the request mirrors :class:`GenerationRequest` field by
    field. In raw mode the rendered prompt is posted as
    ``{"prompt": ..., "max_new_tokens": ...}`` and the reply's ``text`` field
    is run through :func:`parse_generation`.
    """

    def __init__(self, base_url: str, timeout: float = 60.0, retries: int = 2, raw: bool = False):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.retries = retries
        self.raw = raw
        self._session = service_session()

    def generate(self, request: GenerationRequest) -> GenerationResponse:
        if self.raw:
            payload: dict = {
                "prompt": render_prompt(request),
                "max_new_tokens": 4 * request.n_sent * request.max_tokens,
            }
        else:
            payload = request.to_json_dict()
        last_error: Exception | None = None
        for _ in range(self.retries + 1):
            try:
                resp = self._session.post(
                    f"{self.base_url}/generate", json=payload, timeout=self.timeout
                )
                resp.raise_for_status()
                body = resp.json()
                if self.raw:
                    return parse_generation(str(body["text"]), request)
                return parse_generation(json.dumps(body), request)
            except (GenerationParseError, GenerationValidationError):
                raise
            except (requests.RequestException, KeyError, TypeError, ValueError) as exc:
                last_error = exc
        raise ServiceError(
            f"generator call failed after {self.retries + 1} attempts: {last_error}",
            role="generator",
        )
