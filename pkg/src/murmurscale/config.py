"""Run configuration, named presets and output manifests."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .classify.models import ModelSpec
from .features import FEATURE_NAMES, FeatureConfig

__all__ = [
    "RunConfig",
    "ConfigError",
    "MODEL_PRESETS",
    "FEATURE_PRESETS",
    "DEFAULT_WEIGHT_GRID",
    "DATA_ENV_VAR",
    "make_manifest",
    "canonical_json",
    "git_blob_hash",
]

DATA_ENV_VAR = "MURMURSCALE_DATA"

MODEL_PRESETS: dict[str, ModelSpec] = {
    "table1-lr": ModelSpec("LogisticRegression", {"C": 1e5, "penalty": "l1"}),
    "table1-knn": ModelSpec("KNN", {"n_neighbors": 35, "p": 2.0}),
    "table1-svm": ModelSpec("SVM", {"kernel": "linear", "gamma": 0.01, "C": 10.0}),
    "table1-nn": ModelSpec("NeuralNet", {"learning_rate": 1e-3, "decay": 1e-6}),
    "table2-lr": ModelSpec("LogisticRegression", {"C": 0.1, "penalty": "l1"},
                           class_weights=(1.0, 4.5)),
    "table2-svm": ModelSpec("SVM", {"kernel": "rbf", "gamma": 0.1, "C": 100.0},
                            class_weights=(1.0, 4.0)),
    "table2-nn": ModelSpec("NeuralNet", {"learning_rate": 1e-3, "decay": 1e-6},
                           class_weights=(0.62, 2.54)),
}

# entropy convention x q grid; "default" is the FeatureConfig default
FEATURE_PRESETS: dict[str, dict] = {
    "default": {},
    "cross-positive": {"q_preset": "positive"},
    "within-two-sided": {"entropy_mode": "within"},
    "within-positive": {"entropy_mode": "within", "q_preset": "positive"},
}

DEFAULT_WEIGHT_GRID = (
    (1.0, 1.0), (1.0, 2.0), (1.0, 3.0), (1.0, 4.0),
    (1.0, 4.5), (1.0, 5.0), (0.62, 2.54), (0.5, 2.0),
)


class ConfigError(ValueError):
    pass


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def git_blob_hash(data: bytes) -> str:
    """Content hash in the format git uses for blobs."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


@dataclass
class RunConfig:
    features: FeatureConfig = field(default_factory=FeatureConfig)
    model: ModelSpec = field(default_factory=lambda: MODEL_PRESETS["table1-lr"])
    grid: dict = field(default_factory=dict)
    weight_grid: tuple = DEFAULT_WEIGHT_GRID
    feature_names: tuple = FEATURE_NAMES
    repetitions: int = 100
    folds: int = 5
    seed: int = 0
    data_dir: str | None = None
    labels: str | None = None
    workers: int = 1

    def validate(self) -> "RunConfig":
        try:
            self.features.validate()
        except ValueError as exc:
            raise ConfigError(f"feature settings: {exc}") from exc
        unknown = [n for n in self.feature_names if n not in FEATURE_NAMES]
        if unknown or not self.feature_names:
            raise ConfigError(f"unknown feature names {unknown}" if unknown
                              else "feature_names is empty")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be at least 1")
        if self.folds < 2:
            raise ConfigError("folds must be at least 2")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        for w in self.weight_grid:
            if len(w) != 2 or min(w) <= 0:
                raise ConfigError(f"weight pair {w} must hold two positive numbers")
        for name, values in self.grid.items():
            if not isinstance(values, (list, tuple)) or not values:
                raise ConfigError(f"grid entry {name!r} must be a non-empty list")
            try:
                self.model.with_params(**{name: values[0]})
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
        return self

    def to_dict(self) -> dict:
        return {
            "features": self.features.to_dict(),
            "model": self.model.to_dict(),
            "grid": {k: list(v) for k, v in self.grid.items()},
            "weight_grid": [list(w) for w in self.weight_grid],
            "feature_names": list(self.feature_names),
            "repetitions": self.repetitions,
            "folds": self.folds,
            "seed": self.seed,
            "data_dir": self.data_dir,
            "labels": self.labels,
            "workers": self.workers,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {"features", "model", "preset", "feature_preset", "grid", "weight_grid",
                 "feature_names", "repetitions", "folds", "seed", "data_dir", "labels", "workers"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown configuration keys {sorted(extra)}")
        try:
            feat = dict(FEATURE_PRESETS[d["feature_preset"]]) if "feature_preset" in d else {}
            feat.update(d.get("features", {}))
            features = FeatureConfig.from_dict(feat) if feat else FeatureConfig()
            if "model" in d:
                model = ModelSpec.from_dict(d["model"])
            else:
                model = MODEL_PRESETS[d.get("preset", "table1-lr")]
        except KeyError as exc:
            raise ConfigError(f"unknown preset {exc}") from exc
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        cfg = cls(
            features=features,
            model=model,
            grid=dict(d.get("grid", {})),
            weight_grid=tuple(tuple(float(v) for v in w)
                              for w in d.get("weight_grid", DEFAULT_WEIGHT_GRID)),
            feature_names=tuple(d.get("feature_names", FEATURE_NAMES)),
            repetitions=int(d.get("repetitions", 100)),
            folds=int(d.get("folds", 5)),
            seed=int(d.get("seed", 0)),
            data_dir=d.get("data_dir"),
            labels=d.get("labels"),
            workers=int(d.get("workers", 1)),
        )
        return cfg.validate()

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            payload = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(payload, dict):
            raise ConfigError(f"{path}: top level must be a JSON object")
        return cls.from_dict(payload)

    def hash(self) -> str:
        """SHA-256 of the canonical JSON, leaving out the worker count."""
        d = self.to_dict()
        d.pop("workers")
        return hashlib.sha256(canonical_json(d).encode()).hexdigest()

    def resolve_data_dir(self) -> Path | None:
        value = self.data_dir or os.environ.get(DATA_ENV_VAR)
        return Path(value) if value else None


def make_manifest(command: str, config: dict, seed: int | None, **extra) -> dict:
    """Reproducibility record; ``timestamp`` is the only run-dependent field.

    The worker count is kept in ``config`` but left out of ``config_hash``
    because results do not depend on it.
    """
    from . import __version__

    hashed = {k: v for k, v in config.items() if k != "workers"}
    return {
        "command": command,
        "package_version": __version__,
        "config": config,
        "config_hash": hashlib.sha256(canonical_json(hashed).encode()).hexdigest(),
        "seed": seed,
        **extra,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
