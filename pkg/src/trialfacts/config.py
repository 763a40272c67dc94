"""Flat key=value pipeline configuration with CLI overrides.

Unset resource paths fall back to the bundled data files. The effective
config is logged into the extraction output's header line so runs are
reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path

from .errors import TrialFactsError

TAGGER_MODES = ("gazetteer", "external", "merged")


def default_data_path(name: str) -> str:
    with resources.as_file(resources.files("trialfacts.data").joinpath(name)) as path:
        return str(path)


@dataclass
class PipelineConfig:
    kb_concepts: str = field(default_factory=lambda: default_data_path("concepts.tsv"))
    kb_attributes: str = field(
        default_factory=lambda: default_data_path("attributes.tsv")
    )
    grammar: str = field(default_factory=lambda: default_data_path("grammar.cfg"))
    negation_rules: str = field(
        default_factory=lambda: default_data_path("negation_rules.tsv")
    )
    intent_rules: str = field(
        default_factory=lambda: default_data_path("intent_rules.tsv")
    )
    embeddings: str = ""  # optional; empty = ground without clustering
    tags: str = ""  # optional external tag JSONL
    tagger_mode: str = "gazetteer"
    eps: float = 0.15
    min_points: int = 2
    theta: float = 0.8

    def validate(self) -> None:
        if self.tagger_mode not in TAGGER_MODES:
            raise TrialFactsError(
                f"tagger_mode must be one of {TAGGER_MODES}, got {self.tagger_mode!r}"
            )
        if self.tagger_mode in ("external", "merged") and not self.tags:
            raise TrialFactsError(
                f"tagger_mode {self.tagger_mode!r} requires a tags file"
            )
        if not 0.0 <= self.theta <= 1.0:
            raise TrialFactsError("theta must be in [0, 1]")
        if self.eps <= 0:
            raise TrialFactsError("eps must be > 0")
        if self.min_points < 1:
            raise TrialFactsError("min_points must be >= 1")

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


_FIELD_TYPES = {"eps": float, "min_points": int, "theta": float}


def _apply(config: PipelineConfig, key: str, value: str) -> None:
    names = {f.name for f in fields(PipelineConfig)}
    if key not in names:
        raise TrialFactsError(f"unknown config key: {key!r}")
    caster = _FIELD_TYPES.get(key, str)
    try:
        setattr(config, key, caster(value))
    except ValueError as exc:
        raise TrialFactsError(f"bad value for {key}: {value!r}") from exc


def load_config(
    path: str | Path | None = None, overrides: list[str] | None = None
) -> PipelineConfig:
    """Build a config from an optional key=value file plus key=value
    override strings (applied in order, after the file)."""
    config = PipelineConfig()
    if path:
        with open(path, encoding="utf-8") as handle:
            for lineno, raw in enumerate(handle, start=1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise TrialFactsError(f"{path}:{lineno}: expected key=value")
                key, value = line.split("=", 1)
                _apply(config, key.strip(), value.strip())
    for override in overrides or []:
        if "=" not in override:
            raise TrialFactsError(f"override must be key=value: {override!r}")
        key, value = override.split("=", 1)
        _apply(config, key.strip(), value.strip())
    config.validate()
    return config
