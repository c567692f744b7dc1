"""Sequence rollout from a trained conditional model.

Two settings: full synthesis given only the class label and a seed
history, and partial infill where one actor's dimensions are observed
and pinned at every Gibbs alternation.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .models import dynamic_biases, has_labels, sigmoid

DEFAULT_GIBBS_ITERS = 30


@dataclass
class GenerationRequest:
    label: int
    seed_frames: np.ndarray               # (n, Dv)
    length: int
    mask: Optional[np.ndarray] = None     # (Dv,) bool, True = observed
    observed_stream: Optional[np.ndarray] = None  # (length, Dv)
    gibbs_iters: int = DEFAULT_GIBBS_ITERS
    seed: int = 0

    def __post_init__(self):
        self.seed_frames = np.asarray(self.seed_frames, dtype=float)
        if self.length < 1:
            raise ValueError("generation length must be >= 1")
        if self.mask is not None:
            self.mask = np.asarray(self.mask, dtype=bool)
        has_obs = self.observed_stream is not None
        wants_obs = self.mask is not None and bool(self.mask.any())
        if has_obs != wants_obs:
            raise ValueError(
                "observed_stream must be given exactly when the mask "
                "marks observed dimensions")


@dataclass
class GeneratedSequence:
    frames: np.ndarray                    # (length, Dv)
    hidden_activations: Optional[np.ndarray] = None  # (length, Dh)


def actor_mask(visible_dim: int, actor: int = 0) -> np.ndarray:
    """Mask marking one actor's dimensions as observed."""
    half = visible_dim // 2
    mask = np.zeros(visible_dim, dtype=bool)
    if actor == 0:
        mask[:half] = True
    else:
        mask[half:] = True
    return mask


def gibbs_frame(p, hist, label, rng, mask=None, observed=None,
                iters: int = DEFAULT_GIBBS_ITERS):
    """Generate one frame by alternating hidden sampling and mean-field
    visible updates, starting from the most recent history frame.
    Clamped dimensions are reset to the observed values after every
    visible update; returns (visible mean, final hidden probs)."""
    if iters < 1:
        raise ValueError("iters must be >= 1")
    clamped = mask is not None and bool(np.any(mask))
    if clamped and observed is None:
        raise ValueError("mask marks observed dims but no observed frame given")
    hist = np.asarray(hist, dtype=float)
    label_k = label if has_labels(p) else None
    c, d = dynamic_biases(p, hist, label=label_k)
    v = hist[-1].copy() if hist.shape[0] else p.a.copy()
    if clamped:
        v[mask] = observed[mask]
    h_prob = None
    for _ in range(iters):
        h_prob = sigmoid(d + v @ p.W)
        h = (rng.random(h_prob.shape) < h_prob).astype(float)
        v = c + p.W @ h
        if clamped:
            v[mask] = observed[mask]
    return v, h_prob


def _rollout(p, label, seed_frames, length, mask, observed_stream,
             iters, rng, keep_hidden=False):
    seed_frames = np.asarray(seed_frames, dtype=float)
    n = p.history_order if hasattr(p, "history_order") else 0
    if seed_frames.shape[0] != n:
        raise ValueError(
            f"seed history has {seed_frames.shape[0]} frames, model "
            f"expects {n}")
    hist = seed_frames.copy()
    frames = np.empty((length, p.visible_dim))
    hiddens = np.empty((length, p.hidden_dim)) if keep_hidden else None
    for t in range(length):
        observed = observed_stream[t] if observed_stream is not None else None
        v, h_prob = gibbs_frame(p, hist, label, rng, mask=mask,
                                observed=observed, iters=iters)
        frames[t] = v
        if keep_hidden:
            hiddens[t] = h_prob
        if n:
            hist = np.concatenate([hist[1:], v[None, :]], axis=0)
    return GeneratedSequence(frames=frames, hidden_activations=hiddens)


def generate_full(p, label, seed_frames, length,
                  iters: int = DEFAULT_GIBBS_ITERS,
                  rng: np.random.Generator = None,
                  keep_hidden: bool = False) -> GeneratedSequence:
    """Synthesize both actors' streams given only the label and seed
    history; each generated frame is fed back into the history."""
    if length < 1:
        raise ValueError("generation length must be >= 1")
    if rng is None:
        rng = np.random.default_rng()
    return _rollout(p, label, seed_frames, length, None, None, iters, rng,
                    keep_hidden=keep_hidden)


def generate_partial(p, label, observed_stream, seed_frames, mask,
                     iters: int = DEFAULT_GIBBS_ITERS,
                     rng: np.random.Generator = None,
                     keep_hidden: bool = False) -> GeneratedSequence:
    """Infill the free dimensions while pinning the observed ones to
    `observed_stream` at every Gibbs iteration. An all-false mask
    reduces exactly to generate_full."""
    if rng is None:
        rng = np.random.default_rng()
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        length = len(observed_stream) if observed_stream is not None else 0
        if length < 1:
            raise ValueError("empty mask requires a length via observed_stream")
        return _rollout(p, label, seed_frames, length, None, None, iters,
                        rng, keep_hidden=keep_hidden)
    observed_stream = np.asarray(observed_stream, dtype=float)
    if observed_stream.ndim != 2 or observed_stream.shape[1] != mask.size:
        raise ValueError("observed_stream shape does not match the mask")
    return _rollout(p, label, seed_frames, observed_stream.shape[0], mask,
                    observed_stream, iters, rng, keep_hidden=keep_hidden)


def run_request(p, request: GenerationRequest) -> GeneratedSequence:
    rng = np.random.default_rng(request.seed)
    if request.mask is not None and request.mask.any():
        return generate_partial(p, request.label, request.observed_stream,
                                request.seed_frames, request.mask,
                                iters=request.gibbs_iters, rng=rng)
    return generate_full(p, request.label, request.seed_frames,
                         request.length, iters=request.gibbs_iters, rng=rng)
