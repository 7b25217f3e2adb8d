"""Pipeline configuration: one TOML or JSON file, flags override it."""

from __future__ import annotations

import json
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .errors import ConfigError, MissingArtifact

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

PROVIDER_TYPES = ("local", "external")
PROVIDER_KEYS = {"type", "endpoint", "timeout", "batch_size", "max_in_flight", "token"}
GENERATORS = ("SMT_NMT", "SMT_GOLD", "CORRUPTION", "ROUND_TRIP", "BACK_TRANSLATION")


def _default_provider():
    return {"type": "local"}


def _default_mix():
    return {"SMT_GOLD": 0.5, "SMT_NMT": 0.5}


@dataclass(frozen=True)
class PipelineConfig:
    # corpora
    parallel_src: str | None = None
    parallel_tgt: str | None = None
    mono_src: str | None = None      # source-language text for SMT_NMT pairs
    mono_tgt: str | None = None      # clean English for the baseline generators
    dev_src: str | None = None
    dev_tgt: str | None = None
    seed_correct: str | None = None  # seed GEC pairs for back-translation
    seed_erroneous: str | None = None
    out_dir: str = "out"
    # models
    lm_order: int = 3
    lm_scale: float = 0.8
    edit_rate_threshold: float = 0.6
    filter: bool = True
    beam_size: int = 4
    distortion_limit: int = 6
    table_limit: int = 20
    max_phrase_len: int = 7
    em_iterations: int = 5
    # tuning
    seed: int = 0
    dev_size: int = 5000
    mert_iterations: int = 10
    mert_directions: int = 12
    nbest_size: int = 100
    weights_file: str | None = None
    # synthesis
    provider: dict = field(default_factory=_default_provider)
    generator_mix: dict = field(default_factory=_default_mix)
    corruption: dict | None = None
    max_pairs: int | None = None
    threads: int | None = None

    def __post_init__(self):
        _check_int(self, "lm_order", 1)
        _check_int(self, "beam_size", 1)
        _check_int(self, "distortion_limit", 0)
        _check_int(self, "max_phrase_len", 1)
        _check_int(self, "em_iterations", 1)
        _check_int(self, "dev_size", 1)
        _check_int(self, "mert_iterations", 1)
        _check_int(self, "mert_directions", 1)
        _check_int(self, "nbest_size", 1)
        _check_int(self, "seed", None)
        if self.table_limit is not None:
            _check_int(self, "table_limit", 1)
        if self.max_pairs is not None:
            _check_int(self, "max_pairs", 0)
        if self.threads is not None:
            _check_int(self, "threads", 1)
        if not _is_number(self.lm_scale) or self.lm_scale < 0:
            raise ConfigError("lm_scale", "must be a number >= 0")
        if not _is_number(self.edit_rate_threshold) or self.edit_rate_threshold <= 0:
            raise ConfigError("edit_rate_threshold", "must be a number > 0")
        if not isinstance(self.filter, bool):
            raise ConfigError("filter", "must be true or false")
        self._check_provider()
        self._check_mix()
        if self.corruption is not None:
            from .synth import CorruptionRuleSet
            if not isinstance(self.corruption, dict):
                raise ConfigError("corruption", "must map rule actions to probabilities")
            CorruptionRuleSet.from_probabilities(self.corruption)

    def _check_provider(self):
        p = self.provider
        if not isinstance(p, dict):
            raise ConfigError("provider", "must be a table")
        unknown = sorted(set(p) - PROVIDER_KEYS)
        if unknown:
            raise ConfigError(f"provider.{unknown[0]}", "unknown key")
        if p.get("type", "local") not in PROVIDER_TYPES:
            raise ConfigError("provider.type", f"must be one of {', '.join(PROVIDER_TYPES)}")

    def _check_mix(self):
        mix = self.generator_mix
        if not isinstance(mix, dict) or not mix:
            raise ConfigError("generator_mix", "must be a non-empty table")
        for k, v in mix.items():
            if k not in GENERATORS:
                raise ConfigError(f"generator_mix.{k}", "unknown generator")
            if not _is_number(v) or v < 0:
                raise ConfigError(f"generator_mix.{k}", "share must be a number >= 0")
        if not any(v > 0 for v in mix.values()):
            raise ConfigError("generator_mix", "at least one share must be positive")

    # ------------------------------------------------------------------

    @property
    def out(self) -> Path:
        return Path(self.out_dir)

    def artifact(self, name: str) -> Path:
        return self.out / name

    def weights_path(self) -> Path:
        return Path(self.weights_file) if self.weights_file else self.artifact("weights.json")

    def require(self, name: str) -> str:
        """The configured path for ``name``; ConfigError if it is unset."""
        value = getattr(self, name)
        if not value:
            raise ConfigError(name, "required by this command")
        if not Path(value).exists():
            raise MissingArtifact(value, f"configured as {name}")
        return value

    def override(self, **kwargs) -> "PipelineConfig":
        return replace(self, **{k: v for k, v in kwargs.items() if v is not None})

    def to_json(self) -> dict:
        return asdict(self)


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _check_int(cfg, name, minimum):
    v = getattr(cfg, name)
    if not isinstance(v, int) or isinstance(v, bool):
        raise ConfigError(name, "must be an integer")
    if minimum is not None and v < minimum:
        raise ConfigError(name, f"must be >= {minimum}")


def from_dict(data: dict, base: Path | None = None) -> PipelineConfig:
    """Build a config, rejecting unknown keys.  Relative paths resolve against ``base``."""
    known = {f.name for f in fields(PipelineConfig)}
    for key in data:
        if key not in known:
            raise ConfigError(key, "unknown key")
    data = dict(data)
    if base is not None:
        for key in ("parallel_src", "parallel_tgt", "mono_src", "mono_tgt", "dev_src", "dev_tgt",
                    "seed_correct", "seed_erroneous", "out_dir", "weights_file"):
            if isinstance(data.get(key), str) and not Path(data[key]).is_absolute():
                data[key] = str(base / data[key])
    try:
        return PipelineConfig(**data)
    except TypeError as exc:
        raise ConfigError("config", str(exc)) from exc


def load_config(path) -> PipelineConfig:
    path = Path(path)
    if not path.exists():
        raise MissingArtifact(path, "config file")
    raw = path.read_bytes()
    try:
        if path.suffix == ".toml":
            data = tomllib.loads(raw.decode("utf-8"))
        else:
            data = json.loads(raw)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError("config", f"cannot parse {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be a table")
    return from_dict(data, path.parent)
