"""Contrastive-divergence learning and exact-gradient oracles.

Updates ascend the log-likelihood. The negative phase samples the hidden
layer, mean-field reconstructs gaussian visibles (samples binary ones),
and by default re-samples labels from the classifier head each step.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Optional

import numpy as np

from .models import (
    BINARY,
    GAUSSIAN,
    RbmParams,
    all_binary_vectors,
    has_history,
    has_labels,
    one_hot,
    sigmoid,
    softmax,
)


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    momentum: float = 0.9
    momentum_start_epoch: int = 5  # plain SGD before this epoch
    weight_decay: float = 2e-4     # on W, U, A, B only
    cd_steps: int = 1
    epochs: int = 30
    batch_size: int = 64
    seed: int = 0
    history_order: int = 15
    resample_labels: bool = True   # negative-phase label handling
    sample_visible: bool = False   # gaussian negative phase: sample vs mean

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must be in [0, 1)")
        if self.cd_steps < 1 or self.batch_size < 1:
            raise ValueError("cd_steps and batch_size must be >= 1")
        if self.epochs < 0 or self.history_order < 0:
            raise ValueError("epochs and history_order must be >= 0")

    @classmethod
    def from_file(cls, path, **overrides):
        """Read key=value lines or a JSON document; overrides win."""
        text = Path(path).read_text()
        values = {}
        stripped = text.lstrip()
        if stripped.startswith("{"):
            values = json.loads(text)
        else:
            for lineno, line in enumerate(text.splitlines(), 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}:{lineno}: expected key=value")
                key, raw = (part.strip() for part in line.split("=", 1))
                values[key] = raw
        known = cls.__dataclass_fields__
        kwargs = {}
        for key, raw in values.items():
            if key not in known:
                raise ValueError(f"unknown TrainConfig key {key!r}")
            typ = known[key].type
            if isinstance(raw, str):
                if typ == "bool":
                    raw = raw.lower() in ("1", "true", "yes", "on")
                elif typ == "int":
                    raw = int(raw)
                elif typ == "float":
                    raw = float(raw)
            kwargs[key] = raw
        kwargs.update(overrides)
        return cls(**kwargs)


@dataclass
class GradientEstimate:
    da: np.ndarray
    db: np.ndarray
    dW: np.ndarray
    ds: Optional[np.ndarray] = None
    dU: Optional[np.ndarray] = None
    dA: Optional[np.ndarray] = None
    dB: Optional[np.ndarray] = None

    def arrays(self):
        out = {"a": self.da, "b": self.db, "W": self.dW}
        for name, val in (("s", self.ds), ("U", self.dU),
                          ("A", self.dA), ("B", self.dB)):
            if val is not None:
                out[name] = val
        return out


@dataclass
class EpochRecord:
    epoch: int
    reconstruction_error: float
    heldout_accuracy: Optional[float] = None


@dataclass
class TrainReport:
    epochs: list
    wall_time: float = 0.0

    def to_dict(self, include_wall_time: bool = False):
        # Wall time is excluded by default so serialized reports are
        # byte-identical across reruns with the same seed.
        out = {"epochs": [asdict(e) for e in self.epochs]}
        if include_wall_time:
            out["wall_time"] = self.wall_time
        return out


@dataclass
class Batch:
    """One minibatch of windowed samples."""
    v: np.ndarray                      # (B, Dv)
    hist: Optional[np.ndarray] = None  # (B, n*Dv) flattened, oldest first
    labels: Optional[np.ndarray] = None  # (B,) int class indices


def _phase_stats(p, v, h, hist, y_onehot):
    """Batch-averaged sufficient statistics for one phase of CD."""
    n = v.shape[0]
    stats = {
        "a": v.mean(axis=0),
        "b": h.mean(axis=0),
        "W": v.T @ h / n,
    }
    if y_onehot is not None:
        stats["s"] = y_onehot.mean(axis=0)
        stats["U"] = h.T @ y_onehot / n
    if hist is not None and hist.shape[1]:
        stats["A"] = hist.T @ v / n
        stats["B"] = hist.T @ h / n
    return stats


def _stats_difference(pos, neg):
    diff = {name: pos[name] - neg[name] for name in pos}
    return GradientEstimate(
        da=diff["a"], db=diff["b"], dW=diff["W"],
        ds=diff.get("s"), dU=diff.get("U"),
        dA=diff.get("A"), dB=diff.get("B"),
    )


def _hidden_logits(p, v, hist, y_idx):
    logits = p.b + v @ p.W
    if hist is not None and has_history(p) and hist.shape[1]:
        logits = logits + hist @ p.B
    if y_idx is not None:
        logits = logits + p.U[:, y_idx].T
    return logits


def _visible_c(p, hist, n_rows):
    c = np.broadcast_to(p.a, (n_rows, p.visible_dim))
    if hist is not None and has_history(p) and hist.shape[1]:
        c = c + hist @ p.A
    return c


def cd_step(p, batch: Batch, k: int = 1, rng: np.random.Generator = None,
            unit: str = GAUSSIAN, resample_labels: bool = True,
            sample_visible: bool = False) -> GradientEstimate:
    """One CD-k gradient estimate, batch-averaged, unscaled by the
    learning rate.

    Positive phase clamps the data; the negative phase alternates
    hidden sampling and visible reconstruction k times with the history
    held fixed.
    """
    if rng is None:
        rng = np.random.default_rng()
    v = np.asarray(batch.v, dtype=float)
    if v.ndim != 2 or v.shape[0] == 0:
        raise ValueError("batch must be a non-empty (B, Dv) array")
    hist = batch.hist
    if has_history(p):
        if hist is None:
            raise ValueError("model expects history windows")
        hist = np.asarray(hist, dtype=float)
    else:
        hist = None
    labeled = has_labels(p)
    if labeled and batch.labels is None:
        raise ValueError("discriminative model requires labels")
    y_idx = None
    y_onehot = None
    if labeled:
        y_idx = np.asarray(batch.labels, dtype=int)
        y_onehot = np.eye(p.label_count)[y_idx]

    # Positive phase: data-clamped hidden probabilities.
    pos_h = sigmoid(_hidden_logits(p, v, hist, y_idx))
    pos = _phase_stats(p, v, pos_h, hist, y_onehot)

    # Negative phase.
    c = _visible_c(p, hist, v.shape[0])
    h_sample = (rng.random(pos_h.shape) < pos_h).astype(float)
    neg_y_idx = y_idx
    neg_y_onehot = y_onehot
    for _ in range(k):
        act = c + h_sample @ p.W.T if unit == GAUSSIAN else p.a + h_sample @ p.W.T
        if unit == GAUSSIAN:
            v_neg = act
            if sample_visible:
                v_neg = v_neg + rng.standard_normal(v_neg.shape)
        else:
            v_prob = sigmoid(act)
            v_neg = (rng.random(v_prob.shape) < v_prob).astype(float)
        if labeled and resample_labels:
            label_p = softmax(p.s + h_sample @ p.U, axis=1)
            cdf = np.cumsum(label_p, axis=1)
            u = rng.random((v.shape[0], 1))
            neg_y_idx = (u > cdf[:, :-1]).sum(axis=1)
            neg_y_onehot = np.eye(p.label_count)[neg_y_idx]
        neg_h_prob = sigmoid(_hidden_logits(p, v_neg, hist, neg_y_idx))
        h_sample = (rng.random(neg_h_prob.shape) < neg_h_prob).astype(float)

    neg = _phase_stats(p, v_neg, neg_h_prob, hist, neg_y_onehot)
    return _stats_difference(pos, neg)


def reconstruction_error(p, batch: Batch, unit: str = GAUSSIAN) -> float:
    """Mean squared one-step mean-field reconstruction error."""
    v = np.asarray(batch.v, dtype=float)
    hist = np.asarray(batch.hist, dtype=float) if batch.hist is not None else None
    y_idx = np.asarray(batch.labels, dtype=int) if (
        has_labels(p) and batch.labels is not None) else None
    h_prob = sigmoid(_hidden_logits(p, v, hist, y_idx))
    act = _visible_c(p, hist, v.shape[0]) + h_prob @ p.W.T
    recon = sigmoid(act) if unit == BINARY else act
    return float(np.mean((v - recon) ** 2))


def make_velocity(p):
    return {name: np.zeros_like(getattr(p, name)) for name in p.field_names()}


_DECAYED = ("W", "U", "A", "B")


def apply_update(p, g: GradientEstimate, cfg: TrainConfig, velocity,
                 momentum_active: bool = True):
    """In-place momentum SGD ascent step; biases exempt from decay."""
    grads = g.arrays()
    mom = cfg.momentum if momentum_active else 0.0
    for name in p.field_names():
        step = grads[name].copy()
        if name in _DECAYED:
            step -= cfg.weight_decay * getattr(p, name)
        velocity[name] = mom * velocity[name] + cfg.learning_rate * step
        getattr(p, name)[...] += velocity[name]
    return p


def train(p, dataset, cfg: TrainConfig, unit: str = GAUSSIAN,
          heldout=None, rng: np.random.Generator = None):
    """Fit params in place over the windowed dataset; returns (p, report).

    `dataset` is any object with arrays v (N, Dv), hist (N, n*Dv) or
    None, and labels (N,) or None. `heldout`, when given, is scored for
    per-window classification accuracy each epoch (labeled models only).
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    N = dataset.v.shape[0]
    if N == 0:
        raise ValueError("empty dataset")
    velocity = make_velocity(p)
    records = []
    start = time.perf_counter()
    for epoch in range(cfg.epochs):
        order = rng.permutation(N)
        recon_sum = 0.0
        recon_batches = 0
        momentum_active = epoch >= cfg.momentum_start_epoch
        for lo in range(0, N, cfg.batch_size):
            idx = order[lo:lo + cfg.batch_size]
            batch = Batch(
                v=dataset.v[idx],
                hist=dataset.hist[idx] if dataset.hist is not None else None,
                labels=dataset.labels[idx] if (
                    has_labels(p) and dataset.labels is not None) else None,
            )
            g = cd_step(p, batch, k=cfg.cd_steps, rng=rng, unit=unit,
                        resample_labels=cfg.resample_labels,
                        sample_visible=cfg.sample_visible)
            apply_update(p, g, cfg, velocity, momentum_active=momentum_active)
            recon_sum += reconstruction_error(p, batch, unit=unit)
            recon_batches += 1
        rec = EpochRecord(epoch=epoch,
                          reconstruction_error=recon_sum / recon_batches)
        if heldout is not None and has_labels(p):
            rec.heldout_accuracy = _window_accuracy(p, heldout)
        records.append(rec)
    report = TrainReport(epochs=records,
                         wall_time=time.perf_counter() - start)
    return p, report


def _window_accuracy(p, dataset) -> float:
    from .models import posterior_batch
    probs = posterior_batch(dataset.v, dataset.hist, p)
    return float(np.mean(np.argmax(probs, axis=1) == dataset.labels))


# ---------------------------------------------------------------------------
# Exact oracles for tiny binary RBMs
# ---------------------------------------------------------------------------

def _check_tiny_binary(p):
    if p.visible_dim + p.hidden_dim > 20:
        raise ValueError("model too large for exact enumeration")


def _log_unnormalized(p, V, H):
    # (|V|, |H|) matrix of -E(v, h) for binary units
    return (V @ p.a)[:, None] + (H @ p.b)[None, :] + V @ p.W @ H.T


def exact_log_partition(p: RbmParams) -> float:
    _check_tiny_binary(p)
    V = all_binary_vectors(p.visible_dim)
    H = all_binary_vectors(p.hidden_dim)
    negE = _log_unnormalized(p, V, H)
    m = negE.max()
    return float(m + np.log(np.sum(np.exp(negE - m))))


def exact_loglik(p: RbmParams, data) -> float:
    """Average log p(v) over the dataset, Z by full enumeration."""
    _check_tiny_binary(p)
    data = np.asarray(data, dtype=float)
    if not np.all(np.isin(data, (0.0, 1.0))):
        raise ValueError("exact_loglik requires binary data")
    logZ = exact_log_partition(p)
    H = all_binary_vectors(p.hidden_dim)
    negE = _log_unnormalized(p, data, H)
    m = negE.max(axis=1, keepdims=True)
    log_unnorm = m[:, 0] + np.log(np.sum(np.exp(negE - m), axis=1))
    return float(np.mean(log_unnorm) - logZ)


def exact_gradient(p: RbmParams, data) -> GradientEstimate:
    """Exact log-likelihood gradient: data expectations minus model
    expectations computed by full enumeration."""
    _check_tiny_binary(p)
    data = np.asarray(data, dtype=float)
    h_data = sigmoid(p.b + data @ p.W)
    n = data.shape[0]
    pos = {"a": data.mean(axis=0), "b": h_data.mean(axis=0),
           "W": data.T @ h_data / n}

    V = all_binary_vectors(p.visible_dim)
    H = all_binary_vectors(p.hidden_dim)
    negE = _log_unnormalized(p, V, H)
    m = negE.max()
    w = np.exp(negE - m)
    w /= w.sum()
    pv = w.sum(axis=1)
    neg = {"a": pv @ V,
           "b": w.sum(axis=0) @ H,
           "W": V.T @ w @ H}
    return GradientEstimate(da=pos["a"] - neg["a"],
                            db=pos["b"] - neg["b"],
                            dW=pos["W"] - neg["W"])


def grad_check(p: RbmParams, data, eps: float = 1e-5) -> float:
    """Max relative error between the exact analytic gradient and
    central finite differences of exact_loglik."""
    analytic = exact_gradient(p, data).arrays()
    worst = 0.0
    for name in ("a", "b", "W"):
        arr = getattr(p, name)
        flat = arr.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = exact_loglik(p, data)
            flat[i] = orig - eps
            lo = exact_loglik(p, data)
            flat[i] = orig
            numeric = (hi - lo) / (2 * eps)
            err = abs(analytic[name].reshape(-1)[i] - numeric)
            worst = max(worst, err / max(1.0, abs(numeric)))
    return worst
