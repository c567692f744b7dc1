"""Self-describing JSON model checkpoints, format "dcrbm-v1".

Stores dimensions, visible unit type, normalization statistics, and
every parameter tensor as a flat row-major list with explicit shape
metadata, so checkpoints are portable and diffable.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .data import DataError, NormalizationStats
from .models import (
    CrbmParams,
    DcrbmParams,
    DrbmParams,
    GAUSSIAN,
    ModelDims,
    RbmParams,
)

CHECKPOINT_VERSION = "dcrbm-v1"

_PARAM_CLASSES = {
    "rbm": RbmParams,
    "drbm": DrbmParams,
    "crbm": CrbmParams,
    "dcrbm": DcrbmParams,
}


def model_kind(p) -> str:
    for kind, cls in _PARAM_CLASSES.items():
        if type(p) is cls:
            return kind
    raise ValueError(f"unknown parameter type {type(p).__name__}")


def save_checkpoint(path, p, unit: str = GAUSSIAN,
                    stats: NormalizationStats = None, meta=None):
    doc = {
        "version": CHECKPOINT_VERSION,
        "model": model_kind(p),
        "visible_unit": unit,
        "dims": {
            "visible_dim": p.visible_dim,
            "hidden_dim": p.hidden_dim,
            "label_count": getattr(p, "label_count", 0),
            "history_order": getattr(p, "history_order", 0),
        },
        "params": {
            name: {
                "shape": list(getattr(p, name).shape),
                "data": getattr(p, name).reshape(-1).tolist(),
            }
            for name in p.field_names()
        },
        "normalization": stats.to_dict() if stats is not None else None,
    }
    if meta:
        doc["meta"] = meta
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n")


def load_checkpoint(path):
    """Returns (params, visible_unit, stats or None, meta or None)."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from exc
    if doc.get("version") != CHECKPOINT_VERSION:
        raise DataError(
            f"{path}: expected checkpoint version {CHECKPOINT_VERSION!r}, "
            f"got {doc.get('version')!r}")
    kind = doc.get("model")
    if kind not in _PARAM_CLASSES:
        raise DataError(f"{path}: unknown model kind {kind!r}")
    cls = _PARAM_CLASSES[kind]
    kwargs = {}
    for name, entry in doc["params"].items():
        arr = np.asarray(entry["data"], dtype=float).reshape(entry["shape"])
        kwargs[name] = arr
    try:
        p = cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise DataError(f"{path}: malformed parameters: {exc}") from exc
    dims = doc.get("dims", {})
    for key, attr in (("visible_dim", "visible_dim"),
                      ("hidden_dim", "hidden_dim")):
        if dims.get(key) != getattr(p, attr):
            raise DataError(f"{path}: dims.{key} disagrees with arrays")
    stats = doc.get("normalization")
    stats = NormalizationStats.from_dict(stats) if stats else None
    return p, doc.get("visible_unit", GAUSSIAN), stats, doc.get("meta")


def checkpoint_dims(p, unit: str) -> ModelDims:
    return ModelDims(
        visible_dim=p.visible_dim,
        hidden_dim=p.hidden_dim,
        label_count=getattr(p, "label_count", 0),
        history_order=getattr(p, "history_order", 0),
        visible_unit=unit,
    )
