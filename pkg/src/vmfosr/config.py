"""Experiment configuration: one JSON file holding every tunable knob.

Layout::

    {
      "schema_version": 1,
      "dataset": {...SyntheticSpec fields...},
      "data_dir": null,            # directory with inputs.csv/labels.csv, overrides "dataset"
      "model": {...}, "train": {...}, "augment": {...},
      "scoring": {"rules": [...], "k": 10, "thetas": []},
      "output_dir": "runs",
      "seeds": [0, 1, 2, 3, 4]
    }

Every section is optional; missing fields take the dataclass defaults.
Unknown keys anywhere raise :class:`ConfigError`.
"""
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .augment import AugmentConfig
from .datagen import SyntheticSpec
from .errors import ConfigError
from .model import ModelConfig
from .scoring import DEFAULT_K, RULES
from .training import TrainConfig

SCHEMA_VERSION = 1


@dataclass
class ScoringConfig:
    rules: list = field(default_factory=lambda: list(RULES))
    k: int = DEFAULT_K
    thetas: list = field(default_factory=list)  # optional operating points for decision counts

    def __post_init__(self):
        self.rules = list(self.rules)
        bad = [r for r in self.rules if r not in RULES]
        if bad or not self.rules:
            raise ValueError(f"rules must be a nonempty subset of {RULES}, got {self.rules}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        self.thetas = [float(t) for t in self.thetas]


@dataclass
class ExperimentConfig:
    dataset: SyntheticSpec = field(default_factory=SyntheticSpec)
    data_dir: str = None
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    scoring: ScoringConfig = field(default_factory=ScoringConfig)
    output_dir: str = "runs"
    seeds: list = field(default_factory=lambda: [0])

    def to_dict(self):
        out = {"schema_version": SCHEMA_VERSION}
        out.update(asdict(self))
        out["augment"]["beta_params"] = list(self.augment.beta_params)
        return out

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def save(self, path):
        Path(path).write_text(self.to_json() + "\n")


_SECTIONS = {"dataset": SyntheticSpec, "model": ModelConfig, "train": TrainConfig,
             "augment": AugmentConfig, "scoring": ScoringConfig}


def _build(cls, raw, where):
    if not isinstance(raw, dict):
        raise ConfigError(f"{where} must be an object")
    allowed = {f.name for f in fields(cls)}
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    try:
        return cls(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {where}: {exc}") from exc


def config_from_dict(raw):
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    raw = dict(raw)
    version = raw.pop("schema_version", None)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}, got {version!r}")
    top = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(raw) - top)
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(unknown)}")
    kwargs = {name: _build(cls, raw[name], name) for name, cls in _SECTIONS.items() if name in raw}
    seeds = raw.get("seeds", [0])
    if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) for s in seeds):
        raise ConfigError("seeds must be a nonempty list of integers")
    kwargs["seeds"] = seeds
    for key in ("data_dir", "output_dir"):
        if key in raw:
            if raw[key] is not None and not isinstance(raw[key], str):
                raise ConfigError(f"{key} must be a string path")
            kwargs[key] = raw[key]
    return ExperimentConfig(**kwargs)


def load_config(path):
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return config_from_dict(raw)
