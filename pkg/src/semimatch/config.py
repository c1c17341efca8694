"""Plain-text ``key = value`` config files for training and data generation.

One assignment per line; blank lines and ``#`` comments are ignored;
unknown keys are errors. Keys match the corresponding dataclass field
names exactly. List-valued generator fields use comma-separated entries.
"""

from __future__ import annotations

from .data import GeneratorConfig
from .errors import ConfigError
from .trainer import TrainConfig

_TRUE = {"true", "1", "yes", "on"}
_FALSE = {"false", "0", "no", "off"}


def _to_bool(value: str) -> bool:
    low = value.lower()
    if low in _TRUE:
        return True
    if low in _FALSE:
        return False
    raise ConfigError(f"expected a boolean, got '{value}'")


def _to_int(value: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"expected an integer, got '{value}'") from None


def _to_float(value: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"expected a number, got '{value}'") from None


def _to_int_list(value: str) -> tuple[int, ...]:
    return tuple(_to_int(part.strip()) for part in value.split(",") if part.strip())


def _to_str_list(value: str) -> tuple[str, ...]:
    return tuple(part.strip() for part in value.split(",") if part.strip())


def parse_key_values(text: str) -> dict[str, str]:
    """Raw key -> value mapping; duplicate keys are errors."""
    mapping: dict[str, str] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected 'key = value'")
        key, value = line.split("=", 1)
        key, value = key.strip(), value.strip()
        if not key:
            raise ConfigError(f"line {line_no}: empty key")
        if key in mapping:
            raise ConfigError(f"line {line_no}: duplicate key '{key}'")
        mapping[key] = value
    return mapping


_TRAIN_PARSERS = {
    "method": str,
    "modality": str,
    "weak_aug_kind": str,
    "strong_aug_kind": str,
    "weak_aug_on_unlabelled": _to_bool,
    "epochs": _to_int,
    "batch_size": _to_int,
    "unlabelled_ratio": _to_float,
    "learning_rate": _to_float,
    "lr_decay": _to_float,
    "tau": _to_float,
    "sigma": _to_float,
    "unsup_weight": _to_float,
    "negative_weight": _to_float,
    "entropy_weight": _to_float,
    "intent_weight": _to_float,
    "hidden_size": _to_int,
    "seed": _to_int,
    "train_frac": _to_float,
    "valid_frac": _to_float,
    "test_frac": _to_float,
    "signal_bins": _to_int,
    "token_max_len": _to_int,
    "flip_max_seconds": _to_float,
    "time_mask_max_frames": _to_int,
    "pitch_max_steps": _to_int,
    "noise_scale": _to_float,
    "swap_count": _to_int,
    "delete_prob": _to_float,
    "synonym_prob": _to_float,
    "contextual_prob": _to_float,
    "contextual_neighbors": _to_int,
}

_GENERATOR_PARSERS = {
    "emotion_counts": _to_int_list,
    "intent_counts": _to_int_list,
    "unlabelled_count": _to_int,
    "min_len": _to_int,
    "max_len": _to_int,
    "separation": _to_float,
    "correlation": _to_float,
    "modality_mix": _to_float,
    "sample_rate": _to_int,
    "vocab_size": _to_int,
    "embedding_dim": _to_int,
    "seed": _to_int,
    "emotion_names": _to_str_list,
    "intent_names": _to_str_list,
}


TRAIN_CONFIG_KEYS = tuple(_TRAIN_PARSERS)
GENERATOR_CONFIG_KEYS = tuple(_GENERATOR_PARSERS)


def _build(mapping: dict[str, str], parsers: dict, what: str) -> dict:
    built = {}
    for key, raw in mapping.items():
        if key not in parsers:
            raise ConfigError(f"unknown {what} config key '{key}'")
        try:
            built[key] = parsers[key](raw)
        except ConfigError as exc:
            raise ConfigError(f"key '{key}': {exc}") from None
    return built


def train_config_from_text(text: str, **overrides) -> TrainConfig:
    built = _build(parse_key_values(text), _TRAIN_PARSERS, "train")
    built.update(overrides)
    return TrainConfig(**built)


def generator_config_from_text(text: str, **overrides) -> GeneratorConfig:
    built = _build(parse_key_values(text), _GENERATOR_PARSERS, "generator")
    built.update(overrides)
    for required in ("emotion_counts", "intent_counts"):
        if required not in built:
            raise ConfigError(f"generator config needs '{required}'")
    return GeneratorConfig(**built)


def load_train_config(path: str, **overrides) -> TrainConfig:
    with open(path) as handle:
        return train_config_from_text(handle.read(), **overrides)


def load_generator_config(path: str, **overrides) -> GeneratorConfig:
    with open(path) as handle:
        return generator_config_from_text(handle.read(), **overrides)


__all__ = [
    "GENERATOR_CONFIG_KEYS", "TRAIN_CONFIG_KEYS", "generator_config_from_text",
    "load_generator_config", "load_train_config", "parse_key_values",
    "train_config_from_text",
]
