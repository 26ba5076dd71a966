"""Pipeline configuration: a single JSON file plus a few flag overrides.

Endpoint-style settings take either a builtin spec (``builtin:<k1>,<b>`` for
the ranker, ``mock:<seed>`` for the generator) or an absolute http(s) URL.
Credentials never live in the config file; HTTP clients read
``RANKFORGE_API_TOKEN`` from the environment when present.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Sequence
from urllib.parse import urlparse

from .errors import ConfigError
from .generation import GeneratorPort, MockGenerator, RemoteGenerator
from .metrics import DEFAULT_SPAM_THRESHOLDS, MetricClient
from .models import Document, TargetGroup
from .ranking import LexicalRanker, RankerPort, RemoteRanker
from .stage1 import Stage1Config

METRIC_KEYS = ("ss", "ppl", "acs")


def _is_http_url(value: str) -> bool:
    parsed = urlparse(value)
    return parsed.scheme in ("http", "https") and bool(parsed.netloc)


@dataclass
class PipelineConfig:
    corpus_path: str
    queries_path: str
    output_dir: str
    seed: int = 42
    workers: int = 1
    black_box: bool = True
    run_path: str | None = None
    targets_path: str | None = None
    traces_path: str | None = None
    results_path: str | None = None
    ranker_spec: str = "builtin:0.9,0.4"
    generator_spec: str = "mock:42"
    generator_raw: bool = False
    metric_urls: dict[str, str] = field(default_factory=dict)
    stage1: Stage1Config = field(default_factory=Stage1Config)
    candidates_per_position: int | None = None
    select_group: TargetGroup = TargetGroup.EASY5
    mixture_per_group: int = 50
    train_count: int | None = None
    easy_threshold: int = 10
    hard_threshold: int = 50
    spam_thresholds: tuple[float, ...] = DEFAULT_SPAM_THRESHOLDS
    baseline_results: str | None = None
    timeout: float = 30.0
    retries: int = 2

    # -- factories ---------------------------------------------------------

    def make_ranker(self, corpus: Sequence[Document]) -> RankerPort:
        spec = self.ranker_spec
        if spec.startswith("builtin:"):
            try:
                k1_s, b_s = spec[len("builtin:") :].split(",")
                return LexicalRanker(corpus, k1=float(k1_s), b=float(b_s))
            except ValueError as exc:
                raise ConfigError(f"bad builtin ranker spec {spec!r}: {exc}") from exc
        if _is_http_url(spec):
            return RemoteRanker(spec, timeout=self.timeout, retries=self.retries)
        raise ConfigError(f"ranker spec {spec!r} is neither builtin:<k1>,<b> nor an http URL")

    def make_generator(self) -> GeneratorPort:
        spec = self.generator_spec
        if spec.startswith("mock:"):
            try:
                seed = int(spec[len("mock:") :])
            except ValueError as exc:
                raise ConfigError(f"bad mock generator spec {spec!r}") from exc
            return MockGenerator(seed=seed, tau=self.stage1.tau)
        if _is_http_url(spec):
            return RemoteGenerator(
                spec, timeout=self.timeout, retries=self.retries, raw=self.generator_raw
            )
        raise ConfigError(f"generator spec {spec!r} is neither mock:<seed> nor an http URL")

    def make_metric_clients(self) -> dict[str, MetricClient]:
        clients: dict[str, MetricClient] = {}
        for kind, url in self.metric_urls.items():
            clients[kind] = MetricClient(url, timeout=self.timeout, retries=self.retries)
        return clients

    # -- default artifact locations ----------------------------------------

    def out(self, name: str) -> str:
        return os.path.join(self.output_dir, name)

    def resolved_run_path(self) -> str:
        return self.run_path or self.out("run.txt")

    def resolved_targets_path(self) -> str:
        return self.targets_path or self.out("targets.jsonl")

    def resolved_traces_path(self) -> str:
        return self.traces_path or self.out("traces.jsonl")

    def resolved_results_path(self) -> str:
        return self.results_path or self.out("attack_results.jsonl")


def _require(raw: dict, key: str, config_path: str) -> object:
    if key not in raw:
        raise ConfigError(f"{config_path}: missing required key {key!r}")
    return raw[key]


def load_config(
    config_path: str,
    seed: int | None = None,
    workers: int | None = None,
    output_dir: str | None = None,
) -> PipelineConfig:
    """Load and validate a config file, applying CLI overrides."""
    try:
        with open(config_path, "r", encoding="utf-8") as handle:
            raw = json.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read config {config_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{config_path}: invalid JSON: {exc}") from exc

    base_dir = os.path.dirname(os.path.abspath(config_path))

    def resolve(path: str | None) -> str | None:
        if path is None:
            return None
        return path if os.path.isabs(path) else os.path.join(base_dir, path)

    stage1_raw = raw.get("stage1", {})
    try:
        stage1 = Stage1Config(
            k=int(stage1_raw.get("k", 10)),
            n=int(stage1_raw.get("n", 5)),
            c=int(stage1_raw.get("c", 5)),
            tau=int(stage1_raw.get("tau", 5)),
            n_sent=int(stage1_raw.get("n_sent", 5)),
            max_tokens=int(stage1_raw.get("max_tokens", 40)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{config_path}: bad stage1 section: {exc}") from exc

    metrics_raw = raw.get("metrics", {})
    metric_urls: dict[str, str] = {}
    for kind in METRIC_KEYS:
        url = metrics_raw.get(kind)
        if url is None:
            continue
        if not _is_http_url(url):
            raise ConfigError(f"{config_path}: metrics.{kind} must be an absolute http URL")
        metric_urls[kind] = url

    select_raw = raw.get("select", {})
    datasets_raw = raw.get("datasets", {})
    attack_raw = raw.get("attack", {})
    evaluate_raw = raw.get("evaluate", {})
    service_raw = raw.get("service", {})

    try:
        group = TargetGroup(select_raw.get("group", "easy5"))
    except ValueError as exc:
        raise ConfigError(f"{config_path}: bad select.group: {exc}") from exc

    cfg = PipelineConfig(
        corpus_path=resolve(str(_require(raw, "corpus", config_path))),
        queries_path=resolve(str(_require(raw, "queries", config_path))),
        output_dir=output_dir or resolve(str(_require(raw, "output_dir", config_path))),
        seed=seed if seed is not None else int(raw.get("seed", 42)),
        workers=workers if workers is not None else int(raw.get("workers", 1)),
        black_box=bool(raw.get("black_box", True)),
        run_path=resolve(raw.get("run")),
        targets_path=resolve(raw.get("targets")),
        traces_path=resolve(raw.get("traces")),
        results_path=resolve(raw.get("attack_results")),
        ranker_spec=str(raw.get("ranker", "builtin:0.9,0.4")),
        generator_spec=str(raw.get("generator", "mock:42")),
        generator_raw=bool(raw.get("generator_raw", False)),
        metric_urls=metric_urls,
        stage1=stage1,
        candidates_per_position=attack_raw.get("candidates_per_position"),
        select_group=group,
        mixture_per_group=int(select_raw.get("mixture_per_group", 50)),
        train_count=datasets_raw.get("train_count"),
        easy_threshold=int(datasets_raw.get("easy_threshold", 10)),
        hard_threshold=int(datasets_raw.get("hard_threshold", 50)),
        spam_thresholds=tuple(
            float(t) for t in evaluate_raw.get("spam_thresholds", DEFAULT_SPAM_THRESHOLDS)
        ),
        baseline_results=resolve(evaluate_raw.get("baseline_results")),
        timeout=float(service_raw.get("timeout", 30.0)),
        retries=int(service_raw.get("retries", 2)),
    )

    for label, path in (
        ("corpus", cfg.corpus_path),
        ("queries", cfg.queries_path),
        ("run", cfg.run_path),
        ("targets", cfg.targets_path),
        ("traces", cfg.traces_path),
        ("attack_results", cfg.results_path),
        ("evaluate.baseline_results", cfg.baseline_results),
    ):
        if path is not None and not os.path.exists(path):
            raise ConfigError(f"{config_path}: {label} path does not exist: {path}")

    for spec_label, spec in (("ranker", cfg.ranker_spec), ("generator", cfg.generator_spec)):
        if not (
            spec.startswith("builtin:") or spec.startswith("mock:") or _is_http_url(spec)
        ):
            raise ConfigError(
                f"{config_path}: {spec_label} must be a builtin/mock spec or absolute URL"
            )

    if cfg.workers < 1:
        raise ConfigError("workers must be >= 1")
    return cfg
