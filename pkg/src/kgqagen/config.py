"""Pipeline configuration: INI file, environment, and CLI overrides.

Precedence is config file < environment < command-line flags. Environment
variables follow ``KGQAGEN_<SECTION>_<KEY>`` (e.g. KGQAGEN_PROVIDER_MODE);
CLI overrides arrive as dotted ``section.key`` strings.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .seed_linker import LinkerConfig
from .subgraph import SubgraphConfig

ENV_PREFIX = "KGQAGEN"


class ConfigError(ValueError):
    """Invalid or incomplete pipeline configuration."""


@dataclass
class ProviderSettings:
    mode: str = "mock"  # "mock" or "openai-compat"
    base_url: str = ""
    api_key_env: str = "KGQAGEN_API_KEY"
    requests_per_minute: float = 600.0
    burst: float = 1.0
    max_attempts: int = 3
    backoff_seconds: float = 1.0
    timeout_seconds: float = 60.0


@dataclass
class GenerationSettings:
    model: str = "mock-generator"
    temperature: float = 0.8
    reorder_seed: int = 0
    max_pairs_per_subgraph: int = 20
    max_output_tokens: int = 4096


@dataclass
class JudgeSettings:
    models: tuple[str, ...] = ("mock-judge-a", "mock-judge-b", "mock-judge-c")
    temperature: float = 0.0


@dataclass
class PipelineConfig:
    kg_path: Path = Path("kg.nt")
    labels_path: Path | None = None
    corpus_path: Path = Path("corpus.jsonl")
    output_dir: Path = Path("out")
    provider: ProviderSettings = field(default_factory=ProviderSettings)
    generation: GenerationSettings = field(default_factory=GenerationSettings)
    judging: JudgeSettings = field(default_factory=JudgeSettings)
    subgraph: SubgraphConfig = field(default_factory=SubgraphConfig)
    linker: LinkerConfig = field(default_factory=LinkerConfig)
    workers: int = 1
    kg_on_error: str = "skip"

    def validate(self) -> None:
        if not self.kg_path.exists():
            raise ConfigError(f"KG path does not exist: {self.kg_path}")
        if not self.corpus_path.exists():
            raise ConfigError(f"corpus path does not exist: {self.corpus_path}")
        if self.labels_path is not None and not self.labels_path.exists():
            raise ConfigError(f"labels path does not exist: {self.labels_path}")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if not 0.0 <= self.generation.temperature <= 2.0:
            raise ConfigError("generation temperature must be in [0, 2]")
        if self.provider.mode not in ("mock", "openai-compat"):
            raise ConfigError(f"unknown provider mode {self.provider.mode!r}")
        if self.provider.mode == "openai-compat" and not self.provider.base_url:
            raise ConfigError("openai-compat provider needs a base_url")
        if not self.judging.models:
            raise ConfigError("at least one judge model is required")


def _collect(
    parser: configparser.ConfigParser,
    env: Mapping[str, str],
    overrides: Mapping[str, str],
) -> dict[tuple[str, str], str]:
    values: dict[tuple[str, str], str] = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            values[(section.lower(), key)] = value
    for name, value in env.items():
        if not name.startswith(ENV_PREFIX + "_"):
            continue
        rest = name[len(ENV_PREFIX) + 1 :].lower()
        section, _, key = rest.partition("_")
        if key:
            values[(section, key)] = value
    for dotted, value in overrides.items():
        section, _, key = dotted.partition(".")
        if not key:
            raise ConfigError(f"override {dotted!r} must look like section.key")
        values[(section.lower(), key.lower())] = value
    return values


def _get(values: dict, section: str, key: str, default):
    raw = values.get((section, key))
    if raw is None:
        return default
    try:
        if isinstance(default, bool):
            folded = raw.strip().casefold()
            if folded in ("1", "true", "yes", "on"):
                return True
            if folded in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: {exc}") from exc
    return raw.strip()


def load_config(
    path: str | Path | None,
    *,
    overrides: Mapping[str, str] | None = None,
    env: Mapping[str, str] | None = None,
) -> PipelineConfig:
    parser = configparser.ConfigParser()
    if path is not None:
        if not Path(path).exists():
            raise ConfigError(f"config file does not exist: {path}")
        parser.read(path, encoding="utf-8")
    values = _collect(parser, env if env is not None else os.environ, overrides or {})

    cfg = PipelineConfig()
    cfg.kg_path = Path(_get(values, "paths", "kg", str(cfg.kg_path)))
    labels = _get(values, "paths", "labels", "")
    cfg.labels_path = Path(labels) if labels else None
    cfg.corpus_path = Path(_get(values, "paths", "corpus", str(cfg.corpus_path)))
    cfg.output_dir = Path(_get(values, "paths", "output_dir", str(cfg.output_dir)))

    p = cfg.provider
    p.mode = _get(values, "provider", "mode", p.mode)
    p.base_url = _get(values, "provider", "base_url", p.base_url)
    p.api_key_env = _get(values, "provider", "api_key_env", p.api_key_env)
    p.requests_per_minute = _get(values, "provider", "requests_per_minute", p.requests_per_minute)
    p.burst = _get(values, "provider", "burst", p.burst)
    p.max_attempts = _get(values, "provider", "max_attempts", p.max_attempts)
    p.backoff_seconds = _get(values, "provider", "backoff_seconds", p.backoff_seconds)
    p.timeout_seconds = _get(values, "provider", "timeout_seconds", p.timeout_seconds)

    g = cfg.generation
    g.model = _get(values, "generation", "model", g.model)
    g.temperature = _get(values, "generation", "temperature", g.temperature)
    g.reorder_seed = _get(values, "generation", "reorder_seed", g.reorder_seed)
    g.max_pairs_per_subgraph = _get(
        values, "generation", "max_pairs_per_subgraph", g.max_pairs_per_subgraph
    )
    g.max_output_tokens = _get(values, "generation", "max_output_tokens", g.max_output_tokens)

    models_raw = _get(values, "judging", "models", ", ".join(cfg.judging.models))
    cfg.judging = JudgeSettings(
        models=tuple(m.strip() for m in models_raw.split(",") if m.strip()),
        temperature=_get(values, "judging", "temperature", cfg.judging.temperature),
    )

    cfg.subgraph = SubgraphConfig(
        min_component_triples=_get(
            values, "subgraph", "min_component_triples", cfg.subgraph.min_component_triples
        ),
        max_subgraph_triples=_get(
            values, "subgraph", "max_subgraph_triples", cfg.subgraph.max_subgraph_triples
        ),
    )
    max_mentions = _get(values, "linking", "max_mentions", 0)
    cfg.linker = LinkerConfig(
        strip_diacritics=_get(values, "linking", "strip_diacritics", False),
        max_mentions=max_mentions or None,
    )
    cfg.workers = _get(values, "run", "workers", cfg.workers)
    cfg.kg_on_error = _get(values, "run", "kg_on_error", cfg.kg_on_error)
    return cfg
