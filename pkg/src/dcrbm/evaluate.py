"""Metrics: classification accuracy/confusion, the normalized
generation-error metric, error-vs-length curves, and naive baselines."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .data import DyadSequence, window
from .generation import generate_full, generate_partial
from .models import posterior_batch


@dataclass
class Metrics:
    accuracy: float
    confusion: np.ndarray            # (K, K) counts, rows = true class
    precision: np.ndarray            # (K,)
    recall: np.ndarray               # (K,)
    window_accuracy: float = 0.0
    fold: Optional[int] = None

    def to_dict(self):
        return {
            "accuracy": self.accuracy,
            "window_accuracy": self.window_accuracy,
            "confusion": self.confusion.tolist(),
            "precision": self.precision.tolist(),
            "recall": self.recall.tolist(),
            "fold": self.fold,
        }


@dataclass
class GenErrorCurve:
    lengths: list
    mean: list
    std: list
    setting: str                     # "partial" | "full" | baseline name
    class_level: Optional[int] = None
    per_item: list = field(default_factory=list)  # one list per length

    def to_dict(self):
        return {
            "lengths": self.lengths,
            "mean": self.mean,
            "std": self.std,
            "setting": self.setting,
            "class_level": self.class_level,
        }


def generation_error(generated, groundtruth, mask=None) -> float:
    """Squared ratio of deviation norm to ground-truth norm (Frobenius,
    over all frames). With a mask, only free (False) dims count."""
    gen = np.asarray(generated, dtype=float)
    gt = np.asarray(groundtruth, dtype=float)
    if gen.shape != gt.shape:
        raise ValueError(f"shape mismatch {gen.shape} vs {gt.shape}")
    if mask is not None:
        free = ~np.asarray(mask, dtype=bool)
        gen = gen[..., free]
        gt = gt[..., free]
    denom = np.linalg.norm(gt)
    if denom == 0:
        raise ValueError("ground truth has zero norm")
    return float((np.linalg.norm(gen - gt) / denom) ** 2)


def _confusion_metrics(confusion, fold=None, window_accuracy=0.0):
    total = confusion.sum()
    accuracy = float(np.trace(confusion) / total) if total else 0.0
    row = confusion.sum(axis=1)
    col = confusion.sum(axis=0)
    diag = np.diag(confusion).astype(float)
    with np.errstate(invalid="ignore", divide="ignore"):
        recall = np.where(row > 0, diag / row, 0.0)
        precision = np.where(col > 0, diag / col, 0.0)
    return Metrics(accuracy=accuracy, confusion=confusion,
                   precision=precision, recall=recall,
                   window_accuracy=window_accuracy, fold=fold)


def classify_dataset(p, dataset, aggregate: str = "majority",
                     fold: Optional[int] = None) -> Metrics:
    """Per-window arg-max posteriors aggregated to one prediction per
    sequence (majority vote by default, mean posterior behind the
    flag); metrics are computed at the sequence level."""
    if dataset.labels is None:
        raise ValueError("labeled test set required")
    K = p.label_count
    if dataset.labels.max() >= K:
        raise ValueError("dataset labels exceed the model's class count")
    probs = posterior_batch(dataset.v, dataset.hist, p)
    win_pred = np.argmax(probs, axis=1)
    window_accuracy = float(np.mean(win_pred == dataset.labels))

    by_seq = {}
    for i, sid in enumerate(dataset.seq_ids):
        by_seq.setdefault(sid, []).append(i)
    confusion = np.zeros((K, K), dtype=int)
    for sid, idx in by_seq.items():
        idx = np.asarray(idx)
        true = int(dataset.labels[idx[0]])
        if aggregate == "majority":
            pred = int(np.bincount(win_pred[idx], minlength=K).argmax())
        elif aggregate == "mean":
            pred = int(probs[idx].mean(axis=0).argmax())
        else:
            raise ValueError(f"unknown aggregation {aggregate!r}")
        confusion[true, pred] += 1
    return _confusion_metrics(confusion, fold=fold,
                              window_accuracy=window_accuracy)


def gen_error_curve(p, sequences: Sequence[DyadSequence], lengths,
                    setting: str = "partial", mask=None,
                    iters: int = 30, seed: int = 0,
                    max_instances: int = 50,
                    class_level: Optional[int] = None) -> GenErrorCurve:
    """Average generation error per rollout length over test sequences.

    Sequences must already be in the model's normalized space. Each
    rollout is seeded with the first n ground-truth frames; the error is
    measured against the following `length` frames (free dims only in
    the partial setting)."""
    n = p.history_order
    lengths = list(lengths)
    if setting == "partial" and mask is None:
        raise ValueError("partial setting requires a mask")
    items = [s for s in sequences
             if class_level is None or s.label == class_level]
    items = items[:max_instances]
    if not items:
        raise ValueError("no sequences to evaluate")
    max_len = max(lengths)
    for s in items:
        if s.length < n + max_len:
            raise ValueError(
                f"sequence {s.id!r} too short for length {max_len}")
    means, stds, per_item = [], [], []
    for li, L in enumerate(lengths):
        errs = []
        for si, s in enumerate(items):
            rng = np.random.default_rng([seed, li, si])
            seed_frames = s.frames[:n]
            gt = s.frames[n:n + L]
            if setting == "partial":
                gen = generate_partial(p, s.label, gt, seed_frames, mask,
                                       iters=iters, rng=rng)
                errs.append(generation_error(gen.frames, gt, mask=mask))
            elif setting == "full":
                gen = generate_full(p, s.label, seed_frames, L,
                                    iters=iters, rng=rng)
                errs.append(generation_error(gen.frames, gt))
            else:
                raise ValueError(f"unknown setting {setting!r}")
        errs = np.asarray(errs)
        means.append(float(errs.mean()))
        stds.append(float(errs.std()))
        per_item.append(errs.tolist())
    return GenErrorCurve(lengths=lengths, mean=means, std=stds,
                         setting=setting, class_level=class_level,
                         per_item=per_item)


def baseline_error(sequences: Sequence[DyadSequence], lengths,
                   mode: str = "mean-pose", n: int = 15,
                   mean_frame=None, mask=None,
                   max_instances: int = 50,
                   class_level: Optional[int] = None) -> GenErrorCurve:
    """Deterministic reference floors: mean-pose predicts a constant
    frame; persistence repeats the last seed frame."""
    lengths = list(lengths)
    items = [s for s in sequences
             if class_level is None or s.label == class_level]
    items = items[:max_instances]
    if not items:
        raise ValueError("no sequences to evaluate")
    if mode == "mean-pose":
        if mean_frame is None:
            mean_frame = np.mean(
                np.concatenate([s.frames for s in items]), axis=0)
    elif mode != "persistence":
        raise ValueError(f"unknown baseline mode {mode!r}")
    means, stds, per_item = [], [], []
    for L in lengths:
        errs = []
        for s in items:
            gt = s.frames[n:n + L]
            if mode == "mean-pose":
                pred = np.broadcast_to(mean_frame, gt.shape)
            else:
                pred = np.broadcast_to(s.frames[n - 1], gt.shape)
            errs.append(generation_error(pred, gt, mask=mask))
        errs = np.asarray(errs)
        means.append(float(errs.mean()))
        stds.append(float(errs.std()))
        per_item.append(errs.tolist())
    return GenErrorCurve(lengths=lengths, mean=means, std=stds,
                         setting=f"baseline-{mode}", class_level=class_level,
                         per_item=per_item)


def aggregate_metrics(per_fold: Sequence[Metrics]):
    """Mean/std accuracy across folds plus the pooled confusion matrix."""
    accs = np.array([m.accuracy for m in per_fold])
    win = np.array([m.window_accuracy for m in per_fold])
    pooled = sum(m.confusion for m in per_fold)
    return {
        "mean_accuracy": float(accs.mean()),
        "std_accuracy": float(accs.std()),
        "mean_window_accuracy": float(win.mean()),
        "per_fold_accuracy": accs.tolist(),
        "pooled_confusion": pooled.tolist(),
    }
