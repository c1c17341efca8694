"""Checkpoint and prediction-dump serialization.

Checkpoints are single JSON documents carrying the full train config, the
label names, and every parameter array; JSON float round-tripping is exact,
so a reloaded model is bit-identical. Prediction dumps are line-delimited
JSON, one sample per line with its true labels and both tasks' probability
vectors; they are the input format of the fusion command.
"""

from __future__ import annotations

import json
from dataclasses import asdict

import numpy as np

from .errors import SchemaError
from .fileio import atomic_write_text
from .model import PARAM_FIELDS, TwoHeadModel
from .trainer import TrainConfig

CHECKPOINT_FORMAT = "semimatch-checkpoint"
PREDICTIONS_FORMAT = "semimatch-predictions"


def checkpoint_to_text(model: TwoHeadModel, config: TrainConfig,
                       emotion_names, intent_names, extras: dict | None = None) -> str:
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": 1,
        "config": asdict(config),
        "emotion_names": list(emotion_names),
        "intent_names": list(intent_names),
        "params": {f: getattr(model, f).tolist() for f in PARAM_FIELDS},
    }
    if extras:
        doc.update(extras)
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def save_checkpoint(path: str, model: TwoHeadModel, config: TrainConfig,
                    emotion_names, intent_names, extras: dict | None = None):
    atomic_write_text(path, checkpoint_to_text(model, config, emotion_names,
                                               intent_names, extras))


def load_checkpoint(path: str) -> tuple[TwoHeadModel, TrainConfig, list[str], list[str]]:
    with open(path) as handle:
        try:
            doc = json.load(handle)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: invalid checkpoint JSON ({exc})") from exc
    if not isinstance(doc, dict) or doc.get("format") != CHECKPOINT_FORMAT:
        raise SchemaError(f"{path}: not a checkpoint file")
    try:
        params = {f: np.asarray(doc["params"][f], dtype=float) for f in PARAM_FIELDS}
        model = TwoHeadModel(**params)
        config = TrainConfig(**doc["config"])
        return model, config, list(doc["emotion_names"]), list(doc["intent_names"])
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: malformed checkpoint ({exc})") from exc


def predictions_to_text(sample_ids, emo_labels, int_labels,
                        emo_probs: np.ndarray, int_probs: np.ndarray) -> str:
    header = {"format": PREDICTIONS_FORMAT, "version": 1,
              "n_emotion": int(emo_probs.shape[1]), "n_intent": int(int_probs.shape[1])}
    lines = [json.dumps(header)]
    for i, sid in enumerate(sample_ids):
        lines.append(json.dumps({
            "id": str(sid),
            "emotion": int(emo_labels[i]),
            "intent": int(int_labels[i]),
            "emo_probs": list(emo_probs[i]),
            "int_probs": list(int_probs[i]),
        }))
    return "\n".join(lines) + "\n"


def save_predictions(path: str, sample_ids, emo_labels, int_labels,
                     emo_probs, int_probs):
    atomic_write_text(path, predictions_to_text(sample_ids, emo_labels, int_labels,
                                                emo_probs, int_probs))


def load_predictions(path: str):
    """Returns (ids, emo_labels, int_labels, emo_probs, int_probs)."""
    with open(path) as handle:
        lines = handle.read().splitlines()
    if not lines:
        raise SchemaError(f"{path}: empty predictions file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path} line 1: invalid JSON ({exc})") from exc
    if not isinstance(header, dict) or header.get("format") != PREDICTIONS_FORMAT:
        raise SchemaError(f"{path}: not a predictions file")
    ids, emo_labels, int_labels, emo_probs, int_probs = [], [], [], [], []
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
            ids.append(str(row["id"]))
            emo_labels.append(int(row["emotion"]))
            int_labels.append(int(row["intent"]))
            emo_probs.append([float(v) for v in row["emo_probs"]])
            int_probs.append([float(v) for v in row["int_probs"]])
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"{path} line {line_no}: malformed row ({exc})") from exc
    if not ids:
        raise SchemaError(f"{path}: no prediction rows")
    return (ids, np.asarray(emo_labels), np.asarray(int_labels),
            np.asarray(emo_probs), np.asarray(int_probs))


__all__ = [
    "load_checkpoint", "load_predictions", "save_checkpoint", "save_predictions",
    "checkpoint_to_text", "predictions_to_text",
]
