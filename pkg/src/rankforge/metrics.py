"""Attack-performance, content-fidelity, stealth, and significance metrics.

Rank metrics consume attack results; fidelity metrics are token-level and
pure. Semantic similarity, perplexity, and acceptability require neural
models, so they are only ever fetched from a metric service; when no service
is configured those report fields stay absent rather than defaulting to zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Sequence

import requests

from .attack import AttackResult
from .errors import MetricError, ServiceError, StatsError
from .service import service_session
from .models import Document, TargetGroup
from .textops import tokenize

DEFAULT_SPAM_THRESHOLDS = (0.40, 0.45, 0.50, 0.55, 0.60, 0.65, 0.70)

# Minimal English stopword list for the term-concentration spam detector.
STOPWORDS = frozenset(
    """a an the and or but if then else of to in on at by for with from as is are was
    were be been being it its this that these those there here not no nor so such too
    very can will just do does did done have has had having you your we our they their
    he she his her them us i me my what which who whom when where why how all any both
    each few more most other some own same than s t d ll m re ve""".split()
)


def asr(results: Sequence[AttackResult]) -> float:
    """Percentage of pairs with a strict rank improvement."""
    if not results:
        raise MetricError("asr needs at least one result")
    return 100.0 * sum(1 for r in results if r.best_rank < r.original_rank) / len(results)


def top_k_rate(results: Sequence[AttackResult], k: int) -> float:
    """Percentage of pairs whose best rank is inside the top ``k`` (inclusive)."""
    if not results:
        raise MetricError("top_k_rate needs at least one result")
    return 100.0 * sum(1 for r in results if r.best_rank <= k) / len(results)


def avg_boost(results: Sequence[AttackResult]) -> float:
    """Mean rank improvement; unimproved pairs contribute zero."""
    if not results:
        raise MetricError("avg_boost needs at least one result")
    return sum(r.original_rank - r.best_rank for r in results) / len(results)


def ati(original: str, adversarial: str) -> int:
    """Token count delta between the adversarial and original documents."""
    return len(tokenize(adversarial)) - len(tokenize(original))


def token_edit_distance(a: Sequence[str], b: Sequence[str]) -> int:
    """Unit-cost Levenshtein distance between two token sequences (two-row DP)."""
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, token_a in enumerate(a, start=1):
        current = [i] + [0] * len(b)
        for j, token_b in enumerate(b, start=1):
            cost = 0 if token_a == token_b else 1
            current[j] = min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + cost)
        previous = current
    return previous[len(b)]


def adt(original: str, adversarial: str) -> int:
    """Token-level Levenshtein distance between the two documents."""
    return token_edit_distance(tokenize(original), tokenize(adversarial))


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    previous = [0] * (len(b) + 1)
    for token_a in a:
        current = [0] * (len(b) + 1)
        for j, token_b in enumerate(b, start=1):
            if token_a == token_b:
                current[j] = previous[j - 1] + 1
            else:
                current[j] = max(previous[j], current[j - 1])
        previous = current
    return previous[len(b)]


def lor(original: str, adversarial: str) -> float:
    """Longest-common-subsequence recall against the original token sequence."""
    original_tokens = tokenize(original)
    if not original_tokens:
        raise MetricError("lor needs a non-empty original document")
    return lcs_length(original_tokens, tokenize(adversarial)) / len(original_tokens)


def spam_score(text: str) -> float:
    """Term-concentration spam score in [0, 1].

    With N non-stopword tokens and maxTF the highest single-term count, the
    score is ``min(1, (maxTF / N) * (1 + ln(1 + N)))``: concentration scaled
    up for longer documents, where sustained repetition is more anomalous.
    Empty documents score 0.
    """
    counts: dict[str, int] = {}
    total = 0
    for token in tokenize(text):
        if token in STOPWORDS:
            continue
        counts[token] = counts.get(token, 0) + 1
        total += 1
    if total == 0:
        return 0.0
    max_tf = max(counts.values())
    return min(1.0, (max_tf / total) * (1.0 + math.log(1.0 + total)))


def spam_flag_curve(
    texts: Sequence[str], thresholds: Sequence[float] = DEFAULT_SPAM_THRESHOLDS
) -> dict[float, int]:
    """Count of documents scoring above each threshold."""
    for t in thresholds:
        if not 0.0 < t < 1.0:
            raise MetricError(f"spam threshold {t} outside (0, 1)")
    scores = [spam_score(text) for text in texts]
    return {t: sum(1 for s in scores if s > t) for t in thresholds}


# ---------------------------------------------------------------------------
# Paired significance test
# ---------------------------------------------------------------------------


def _beta_continued_fraction(a: float, b: float, x: float) -> float:
    max_iter = 300
    eps = 3e-14
    tiny = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise StatsError("incomplete beta continued fraction did not converge")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log(1.0 - x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_continued_fraction(a, b, x) / a
    return 1.0 - front * _beta_continued_fraction(b, a, 1.0 - x) / b


def paired_t_test(a: Sequence[float], b: Sequence[float]) -> tuple[float, float]:
    """Paired two-tailed t-test; p from the regularized incomplete beta."""
    if len(a) != len(b):
        raise StatsError(f"paired samples must match in length: {len(a)} vs {len(b)}")
    n = len(a)
    if n < 2:
        raise StatsError("paired t-test needs at least two pairs")
    diffs = [x - y for x, y in zip(a, b)]
    mean = sum(diffs) / n
    var = sum((d - mean) ** 2 for d in diffs) / (n - 1)
    if var == 0.0:
        raise StatsError("zero variance in paired differences")
    t = mean / math.sqrt(var / n)
    dof = n - 1
    p = regularized_incomplete_beta(dof / 2.0, 0.5, dof / (dof + t * t))
    return t, p


# ---------------------------------------------------------------------------
# Remote metric client
# ---------------------------------------------------------------------------

METRIC_KINDS = ("ss", "ppl", "acs")


class MetricClient:
    """HTTP client for the metric wire protocol (POST {base}/metric)."""

    def __init__(self, base_url: str, timeout: float = 60.0, retries: int = 2):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.retries = retries
        self._session = service_session()

    def values(self, kind: str, items: Sequence[tuple[str, str | None]]) -> list[float]:
        if kind not in METRIC_KINDS:
            raise MetricError(f"unknown metric kind {kind!r}")
        payload = {
            "kind": kind,
            "items": [
                {"a": a} if b is None else {"a": a, "b": b} for a, b in items
            ],
        }
        last_error: Exception | None = None
        for _ in range(self.retries + 1):
            try:
                resp = self._session.post(
                    f"{self.base_url}/metric", json=payload, timeout=self.timeout
                )
                resp.raise_for_status()
                values = resp.json()["values"]
                if not isinstance(values, list) or len(values) != len(items):
                    raise ServiceError(
                        "metric response arity does not match request", role="metric"
                    )
                return [float(v) for v in values]
            except ServiceError:
                raise
            except (requests.RequestException, KeyError, TypeError, ValueError) as exc:
                last_error = exc
        raise ServiceError(
            f"metric call failed after {self.retries + 1} attempts: {last_error}",
            role="metric",
        )


# ---------------------------------------------------------------------------
# Report assembly
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EvalReport:
    group: TargetGroup
    n: int
    asr_pct: float
    top10_pct: float
    top50_pct: float
    boost: float
    ati: float
    adt: float
    lor: float
    ss: float | None
    ppl: float | None
    acs: float | None
    spam_flags: dict[float, int]

    def to_json_dict(self) -> dict:
        return {
            "group": self.group.value,
            "n": self.n,
            "asr": round_half_up(self.asr_pct, 1),
            "top10": round_half_up(self.top10_pct, 1),
            "top50": round_half_up(self.top50_pct, 1),
            "boost": round_half_up(self.boost, 4),
            "ss": None if self.ss is None else round_half_up(self.ss, 4),
            "ati": round_half_up(self.ati, 4),
            "adt": round_half_up(self.adt, 4),
            "lor": round_half_up(self.lor, 4),
            "ppl": None if self.ppl is None else round_half_up(self.ppl, 4),
            "acs": None if self.acs is None else round_half_up(self.acs, 4),
            "spam_flags": {f"{t:.2f}": c for t, c in sorted(self.spam_flags.items())},
        }


def round_half_up(value: float, digits: int) -> float:
    quantum = Decimal(1).scaleb(-digits)
    return float(Decimal(repr(value)).quantize(quantum, rounding=ROUND_HALF_UP))


def evaluate_attack(
    results: Sequence[AttackResult],
    docs_by_id: dict[str, Document],
    groups: dict[tuple[str, str], TargetGroup],
    metric_clients: dict[str, MetricClient] | None = None,
    spam_thresholds: Sequence[float] = DEFAULT_SPAM_THRESHOLDS,
) -> list[EvalReport]:
    """One report per target group present in the results.

    ``metric_clients`` maps metric kinds (ss/ppl/acs) to clients; a kind with
    no client stays absent in the report.
    """
    clients = metric_clients or {}
    by_group: dict[TargetGroup, list[AttackResult]] = {}
    for result in results:
        group = groups.get((result.query_id, result.doc_id))
        if group is None:
            raise MetricError(
                f"pair ({result.query_id}, {result.doc_id}) has no group label"
            )
        by_group.setdefault(group, []).append(result)

    reports = []
    for group in sorted(by_group, key=lambda g: g.value):
        members = by_group[group]
        originals = []
        for result in members:
            doc = docs_by_id.get(result.doc_id)
            if doc is None:
                raise MetricError(f"unknown doc id {result.doc_id!r} in results")
            originals.append(doc.text)
        adversarials = [r.adversarial_text for r in members]
        ss = ppl = acs = None
        if "ss" in clients:
            ss = _mean(clients["ss"].values("ss", list(zip(originals, adversarials))))
        if "ppl" in clients:
            ppl = _mean(clients["ppl"].values("ppl", [(t, None) for t in adversarials]))
        if "acs" in clients:
            acs = _mean(clients["acs"].values("acs", [(t, None) for t in adversarials]))
        reports.append(
            EvalReport(
                group=group,
                n=len(members),
                asr_pct=asr(members),
                top10_pct=top_k_rate(members, 10),
                top50_pct=top_k_rate(members, 50),
                boost=avg_boost(members),
                ati=_mean([ati(o, v) for o, v in zip(originals, adversarials)]),
                adt=_mean([adt(o, v) for o, v in zip(originals, adversarials)]),
                lor=_mean([lor(o, v) for o, v in zip(originals, adversarials)]),
                ss=ss,
                ppl=ppl,
                acs=acs,
                spam_flags=spam_flag_curve(adversarials, spam_thresholds),
            )
        )
    return reports


def _mean(values: Sequence[float]) -> float:
    if not values:
        raise MetricError("mean of empty sequence")
    return sum(values) / len(values)


def compare_attacks(
    main: Sequence[AttackResult],
    baseline: Sequence[AttackResult],
    groups: dict[tuple[str, str], TargetGroup],
) -> dict[str, dict]:
    """Per-group paired t-test on boost between two attack runs.

    Only pairs present in both runs are compared; degenerate groups report
    their error instead of a statistic.
    """
    main_by_key = {(r.query_id, r.doc_id): r for r in main}
    base_by_key = {(r.query_id, r.doc_id): r for r in baseline}
    shared = sorted(set(main_by_key) & set(base_by_key))
    by_group: dict[TargetGroup, list[tuple[float, float]]] = {}
    for key in shared:
        group = groups.get(key)
        if group is None:
            continue
        a = main_by_key[key]
        b = base_by_key[key]
        by_group.setdefault(group, []).append(
            (a.original_rank - a.best_rank, b.original_rank - b.best_rank)
        )
    out: dict[str, dict] = {}
    for group in sorted(by_group, key=lambda g: g.value):
        boosts = by_group[group]
        try:
            t, p = paired_t_test([x for x, _ in boosts], [y for _, y in boosts])
            out[group.value] = {
                "n": len(boosts),
                "metric": "boost",
                "t": round_half_up(t, 6),
                "p": round_half_up(p, 6),
                "significant_at_0.05": p < 0.05,
            }
        except StatsError as exc:
            out[group.value] = {"n": len(boosts), "metric": "boost", "error": str(exc)}
    return out


REPORT_CSV_COLUMNS = (
    "group",
    "n",
    "asr",
    "top10",
    "top50",
    "boost",
    "ss",
    "ati",
    "adt",
    "lor",
    "ppl",
    "acs",
)


def report_csv(reports: Sequence[EvalReport]) -> str:
    """CSV table with the fixed column order used by the report files."""
    thresholds = sorted({t for report in reports for t in report.spam_flags})
    header = list(REPORT_CSV_COLUMNS) + [f"spam_gt_{t:.2f}" for t in thresholds]
    lines = [",".join(header)]
    for report in reports:
        row = report.to_json_dict()
        cells = []
        for column in REPORT_CSV_COLUMNS:
            value = row[column]
            cells.append("" if value is None else str(value))
        for t in thresholds:
            cells.append(str(report.spam_flags.get(t, "")))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
