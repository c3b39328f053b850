"""Service and pipeline configuration.

Reward weights and normalization constants are fixed at boot (config file
plus environment overrides), never per request, so reward semantics stay
stable within a training run. Environment variables use the ROLEREWARD_
prefix, e.g. ROLEREWARD_PORT, ROLEREWARD_WEIGHTS_FOCUS, ROLEREWARD_REF_METRICS="1,2".
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .normalizer import DEFAULT_DECAY, DEFAULT_NORM_EPSILON, DEFAULT_WEIGHTS, WeightVector
from .rewards import RefRewardConfig
from .metrics import ngram_precision_config

__all__ = ["ServiceConfig", "ConfigError", "load_config", "ENV_PREFIX"]

ENV_PREFIX = "ROLEREWARD_"

# Documented defaults used by full-scale LLM fine-tuning runs; the toy
# trainer uses a larger logit-space learning rate instead.
FULL_SCALE_LEARNING_RATE = 1e-6
FULL_SCALE_BATCH_SIZE = 128


class ConfigError(ValueError):
    """Invalid configuration file or environment override."""


@dataclass
class ServiceConfig:
    port: int = 8080
    host: str = "127.0.0.1"
    weights: WeightVector = DEFAULT_WEIGHTS
    decay: float = DEFAULT_DECAY
    epsilon_norm: float = DEFAULT_NORM_EPSILON
    epsilon_adv: float = 1e-4
    clip_epsilon: float = 0.2
    kl_beta: float = 0.02
    ref_metrics: tuple[int, ...] = (1, 2)
    snapshot_path: str | None = None

    def ref_config(self) -> RefRewardConfig:
        return RefRewardConfig(
            metrics=tuple(ngram_precision_config(n) for n in self.ref_metrics)
        )

    def as_dict(self) -> dict[str, Any]:
        return {
            "port": self.port,
            "host": self.host,
            "weights": {
                "focus": self.weights.w_focus,
                "attr": self.weights.w_attr,
                "ref": self.weights.w_ref,
            },
            "decay": self.decay,
            "epsilon_norm": self.epsilon_norm,
            "epsilon_adv": self.epsilon_adv,
            "clip_epsilon": self.clip_epsilon,
            "kl_beta": self.kl_beta,
            "ref_metrics": list(self.ref_metrics),
            "snapshot_path": self.snapshot_path,
        }


_KNOWN_KEYS = {
    "port",
    "host",
    "weights",
    "decay",
    "epsilon_norm",
    "epsilon_adv",
    "clip_epsilon",
    "kl_beta",
    "ref_metrics",
    "snapshot_path",
}
_WEIGHT_KEYS = {"focus", "attr", "ref"}


def _parse_ref_metrics(value: Any) -> tuple[int, ...]:
    if isinstance(value, str):
        value = [part.strip() for part in value.split(",") if part.strip()]
    try:
        metrics = tuple(int(v) for v in value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"ref_metrics must be a list of integers: {value!r}") from exc
    if not metrics or any(n < 1 for n in metrics):
        raise ConfigError("ref_metrics must contain integers >= 1")
    return metrics


def _build(document: Mapping[str, Any]) -> ServiceConfig:
    unknown = set(document) - _KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown config key: {sorted(unknown)[0]!r}")
    weights_doc = document.get("weights", {})
    if not isinstance(weights_doc, Mapping):
        raise ConfigError("weights must be an object with focus/attr/ref")
    unknown_weights = set(weights_doc) - _WEIGHT_KEYS
    if unknown_weights:
        raise ConfigError(f"unknown config key: 'weights.{sorted(unknown_weights)[0]}'")
    try:
        weights = WeightVector(
            w_focus=float(weights_doc.get("focus", DEFAULT_WEIGHTS.w_focus)),
            w_attr=float(weights_doc.get("attr", DEFAULT_WEIGHTS.w_attr)),
            w_ref=float(weights_doc.get("ref", DEFAULT_WEIGHTS.w_ref)),
        )
        config = ServiceConfig(
            port=int(document.get("port", 8080)),
            host=str(document.get("host", "127.0.0.1")),
            weights=weights,
            decay=float(document.get("decay", DEFAULT_DECAY)),
            epsilon_norm=float(document.get("epsilon_norm", DEFAULT_NORM_EPSILON)),
            epsilon_adv=float(document.get("epsilon_adv", 1e-4)),
            clip_epsilon=float(document.get("clip_epsilon", 0.2)),
            kl_beta=float(document.get("kl_beta", 0.02)),
            ref_metrics=_parse_ref_metrics(document.get("ref_metrics", (1, 2))),
            snapshot_path=document.get("snapshot_path"),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid config value: {exc}") from exc
    if not 0.0 < config.decay < 1.0:
        raise ConfigError("decay must be in (0, 1)")
    for name in ("epsilon_norm", "epsilon_adv"):
        if not getattr(config, name) > 0:
            raise ConfigError(f"{name} must be > 0")
    if not 0.0 < config.clip_epsilon < 1.0:
        raise ConfigError("clip_epsilon must be in (0, 1)")
    if config.kl_beta < 0:
        raise ConfigError("kl_beta must be >= 0")
    return config


def _env_overrides(environ: Mapping[str, str]) -> dict[str, Any]:
    overrides: dict[str, Any] = {}
    weights: dict[str, Any] = {}
    for key, raw in environ.items():
        if not key.startswith(ENV_PREFIX):
            continue
        name = key[len(ENV_PREFIX) :].lower()
        if name in ("port",):
            overrides["port"] = raw
        elif name in ("host", "snapshot_path"):
            overrides[name] = raw
        elif name in ("decay", "epsilon_norm", "epsilon_adv", "clip_epsilon", "kl_beta"):
            overrides[name] = raw
        elif name == "ref_metrics":
            overrides["ref_metrics"] = raw
        elif name.startswith("weights_"):
            weight_key = name[len("weights_") :]
            if weight_key not in _WEIGHT_KEYS:
                raise ConfigError(f"unknown config key: 'weights.{weight_key}'")
            weights[weight_key] = raw
        else:
            raise ConfigError(f"unknown config key: {name!r} (from {key})")
    if weights:
        overrides["weights"] = weights
    return overrides


def load_config(
    path: str | Path | None = None, environ: Mapping[str, str] | None = None
) -> ServiceConfig:
    """Load the config file (JSON object) and apply environment overrides.

    Unknown keys raise ConfigError naming the key.
    """
    document: dict[str, Any] = {}
    if path is not None:
        try:
            loaded = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config file must contain a JSON object")
        document = loaded
    overrides = _env_overrides(environ if environ is not None else os.environ)
    for key, value in overrides.items():
        if key == "weights":
            merged = dict(document.get("weights", {}))
            merged.update(value)
            document["weights"] = merged
        else:
            document[key] = value
    return _build(document)
