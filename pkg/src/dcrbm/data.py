"""Dyadic sequence data: representation, normalization, windowing,
stratified k-fold splitting, file I/O, and a synthetic benchmark
generator.

A frame stacks both actors' joint coordinates:
[actor0 joint0 xyz, ..., actor0 jointJ-1 xyz, actor1 joint0 xyz, ...],
so Dv = 2 * J * 3 and joint 0 of each actor is the root.

File format "dyadseq-v1" (text, line oriented): one JSON header line for
the file, then per sequence a JSON record line followed by one
whitespace-separated line of floats per frame.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

STD_FLOOR = 1e-6
FORMAT_VERSION = "dyadseq-v1"


class DataError(Exception):
    """Malformed dataset file or inconsistent dataset contents."""


@dataclass
class DyadSequence:
    frames: np.ndarray            # (T, Dv)
    label: Optional[int] = None
    frame_rate: float = 30.0
    id: str = ""
    origin: Optional[np.ndarray] = None  # set by normalize()

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=float)
        if self.frames.ndim != 2:
            raise DataError(f"sequence {self.id!r}: frames must be (T, Dv)")
        if not np.all(np.isfinite(self.frames)):
            raise DataError(f"sequence {self.id!r}: non-finite frame values")

    @property
    def length(self):
        return self.frames.shape[0]

    @property
    def visible_dim(self):
        return self.frames.shape[1]


@dataclass
class NormalizationStats:
    mean: np.ndarray  # (Dv,)
    std: np.ndarray   # (Dv,), floored at STD_FLOOR

    def to_dict(self):
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(mean=np.asarray(d["mean"], dtype=float),
                   std=np.asarray(d["std"], dtype=float))


def _sequence_origin(seq: DyadSequence) -> np.ndarray:
    """Midpoint of the two actors' root joints at the first frame,
    tiled across every joint coordinate."""
    Dv = seq.visible_dim
    if Dv % 6 != 0:
        raise DataError("visible dim must be 2 actors x J joints x 3 coords")
    half = Dv // 2
    root_a = seq.frames[0, 0:3]
    root_b = seq.frames[0, half:half + 3]
    mid = 0.5 * (root_a + root_b)
    return np.tile(mid, Dv // 3)


def normalize(sequences: Sequence[DyadSequence],
              stats: Optional[NormalizationStats] = None):
    """Subtract each sequence's origin point, then z-score per dimension.

    Statistics are computed from `sequences` when `stats` is None
    (training folds) and reused otherwise (test folds). Returns
    (normalized sequences, stats).
    """
    if not sequences:
        raise DataError("cannot normalize an empty sequence set")
    centered = []
    for seq in sequences:
        origin = _sequence_origin(seq)
        centered.append(replace(seq, frames=seq.frames - origin,
                                origin=origin))
    if stats is None:
        stacked = np.concatenate([s.frames for s in centered], axis=0)
        mean = stacked.mean(axis=0)
        std = stacked.std(axis=0)
        low = std < STD_FLOOR
        if np.any(low):
            import warnings
            warnings.warn(
                f"{int(low.sum())} near-constant dimensions floored at "
                f"{STD_FLOOR}", stacklevel=2)
        std = np.maximum(std, STD_FLOOR)
        stats = NormalizationStats(mean=mean, std=std)
    out = [replace(s, frames=(s.frames - stats.mean) / stats.std)
           for s in centered]
    return out, stats


def denormalize(seq: DyadSequence, stats: NormalizationStats) -> DyadSequence:
    frames = seq.frames * stats.std + stats.mean
    if seq.origin is not None:
        frames = frames + seq.origin
    return replace(seq, frames=frames, origin=None)


@dataclass
class WindowedDataset:
    """Flat arrays of (current frame, history, label) training items."""
    v: np.ndarray                       # (N, Dv)
    hist: Optional[np.ndarray]          # (N, n*Dv) oldest frame first
    labels: Optional[np.ndarray]        # (N,) ints, or None if unlabeled
    seq_ids: list                       # per-item source sequence id
    t: np.ndarray                       # per-item frame index
    history_order: int

    def __len__(self):
        return self.v.shape[0]


def window(sequences: Sequence[DyadSequence], n: int) -> WindowedDataset:
    """One item per frame t >= n; the history is the n preceding frames."""
    if n < 0:
        raise ValueError("history order must be >= 0")
    vs, hists, labels, ids, ts = [], [], [], [], []
    labeled = all(s.label is not None for s in sequences)
    for seq in sequences:
        T = seq.length
        if T < n + 1:
            raise DataError(
                f"sequence {seq.id!r} has {T} frames, needs at least {n + 1}")
        for t in range(n, T):
            vs.append(seq.frames[t])
            hists.append(seq.frames[t - n:t].reshape(-1))
            ids.append(seq.id)
            ts.append(t)
            if labeled:
                labels.append(seq.label)
    return WindowedDataset(
        v=np.asarray(vs),
        hist=np.asarray(hists) if n > 0 else np.zeros((len(vs), 0)),
        labels=np.asarray(labels, dtype=int) if labeled else None,
        seq_ids=ids,
        t=np.asarray(ts, dtype=int),
        history_order=n,
    )


# ---------------------------------------------------------------------------
# Synthetic dyadic-motion benchmark
# ---------------------------------------------------------------------------

@dataclass
class SynthConfig:
    """Coupled two-actor motion: actor B tracks a lagged copy of actor A
    with per-class coupling strength rho."""
    classes: tuple = (0.0, 0.5, 0.9)   # coupling rho per class
    samples_per_class: int = 100
    frames: int = 300
    joints: int = 2                    # per actor
    lag: int = 3
    noise_std: float = 0.05
    tempo: float = 0.15                # rad/frame
    indep_scale: float = 0.15          # amplitude of B's own motion
    offset_range: float = 0.2          # per-sequence placement jitter
    seed: int = 0

    def __post_init__(self):
        if any(not 0.0 <= r <= 1.0 for r in self.classes):
            raise ValueError("coupling levels must lie in [0, 1]")
        if self.frames <= self.lag:
            raise ValueError("frames must exceed lag")
        if self.joints < 1 or self.samples_per_class < 1:
            raise ValueError("joints and samples_per_class must be >= 1")

    @property
    def visible_dim(self):
        return 2 * self.joints * 3

    def to_dict(self):
        d = self.__dict__.copy()
        d["classes"] = list(self.classes)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["classes"] = tuple(d.get("classes", (0.0, 0.5, 0.9)))
        return cls(**d)


def _smooth_channels(rng, n_channels, T, tempo):
    """Unit sinusoid at the configured tempo with a random phase, plus a
    low-pass random walk."""
    t = np.arange(T)
    phase = rng.uniform(0, 2 * np.pi, size=(n_channels, 1))
    wave = np.sin(tempo * t[None, :] + phase)
    steps = rng.normal(0.0, 0.1, size=(n_channels, T))
    walk = np.empty_like(steps)
    acc = np.zeros(n_channels)
    for i in range(T):
        acc = 0.95 * acc + steps[:, i]
        walk[:, i] = acc
    return wave + walk


def synthesize(cfg: SynthConfig):
    """Deterministic synthetic dataset; one label per coupling level."""
    rng = np.random.default_rng(cfg.seed)
    ch = cfg.joints * 3
    sequences = []
    for label, rho in enumerate(cfg.classes):
        for i in range(cfg.samples_per_class):
            total = cfg.frames + cfg.lag
            a_full = _smooth_channels(rng, ch, total, cfg.tempo)
            indep = cfg.indep_scale * _smooth_channels(
                rng, ch, total, cfg.tempo)
            noise = rng.normal(0.0, cfg.noise_std, size=(ch, cfg.frames))
            a = a_full[:, cfg.lag:]
            b = (rho * a_full[:, :cfg.frames]
                 + (1.0 - rho) * indep[:, cfg.lag:]
                 + noise)
            r = cfg.offset_range
            offsets_a = rng.uniform(-r, r, size=(ch, 1))
            offsets_b = rng.uniform(-r, r, size=(ch, 1))
            frames = np.concatenate([a + offsets_a, b + offsets_b],
                                    axis=0).T
            sequences.append(DyadSequence(
                frames=frames, label=label,
                id=f"synth-c{label}-{i:03d}"))
    return sequences


def lag_correlation_score(seq: DyadSequence, lag: int) -> float:
    """Mean per-channel Pearson correlation between actor A and actor B
    shifted back by the lag; a trivial coupling detector."""
    half = seq.visible_dim // 2
    # Actor B at time t tracks A at t - lag.
    a_past = seq.frames[:seq.length - lag, :half]
    b_now = seq.frames[lag:, half:]
    corrs = []
    for ch in range(half):
        x = a_past[:, ch] - a_past[:, ch].mean()
        y = b_now[:, ch] - b_now[:, ch].mean()
        denom = np.sqrt((x * x).sum() * (y * y).sum())
        corrs.append((x * y).sum() / denom if denom > 0 else 0.0)
    return float(np.mean(corrs))


def kfold_split(sequences: Sequence[DyadSequence], k: int, seed: int = 0):
    """Stratified sequence-level folds; returns k (train, test) lists."""
    if k < 2:
        raise ValueError("k must be >= 2")
    if len(sequences) < k:
        raise DataError(f"need at least {k} sequences for {k} folds")
    rng = np.random.default_rng(seed)
    by_label = {}
    for i, seq in enumerate(sequences):
        by_label.setdefault(seq.label, []).append(i)
    fold_of = np.empty(len(sequences), dtype=int)
    cursor = 0
    for label in sorted(by_label, key=lambda x: (x is None, x)):
        idx = np.array(by_label[label])
        rng.shuffle(idx)
        for j, i in enumerate(idx):
            fold_of[i] = (cursor + j) % k
        cursor += len(idx)
    folds = []
    for f in range(k):
        train = [s for i, s in enumerate(sequences) if fold_of[i] != f]
        test = [s for i, s in enumerate(sequences) if fold_of[i] == f]
        folds.append((train, test))
    return folds


# ---------------------------------------------------------------------------
# File I/O
# ---------------------------------------------------------------------------

def save_sequences(path, sequences: Sequence[DyadSequence], meta=None):
    """Write the dyadseq-v1 text format; `meta` is embedded verbatim."""
    if not sequences:
        raise DataError("refusing to write an empty dataset")
    Dv = sequences[0].visible_dim
    header = {
        "format": FORMAT_VERSION,
        "visible_dim": Dv,
        "joints_per_actor": Dv // 6,
        "num_sequences": len(sequences),
    }
    if meta:
        header["meta"] = meta
    lines = [json.dumps(header, sort_keys=True)]
    for seq in sequences:
        if seq.visible_dim != Dv:
            raise DataError(
                f"sequence {seq.id!r} has Dv={seq.visible_dim}, header {Dv}")
        rec = {"id": seq.id, "label": seq.label,
               "frame_rate": seq.frame_rate, "frames": seq.length}
        lines.append(json.dumps(rec, sort_keys=True))
        for row in seq.frames:
            lines.append(" ".join(repr(float(x)) for x in row))
    Path(path).write_text("\n".join(lines) + "\n")


def load_sequences(path):
    """Read a dyadseq-v1 file; returns (sequences, header meta)."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not lines:
        raise DataError(f"{path}: empty file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}:1: bad header: {exc}") from exc
    if header.get("format") != FORMAT_VERSION:
        raise DataError(f"{path}:1: expected format {FORMAT_VERSION!r}, "
                        f"got {header.get('format')!r}")
    Dv = int(header["visible_dim"])
    sequences = []
    lineno = 1
    for _ in range(int(header["num_sequences"])):
        if lineno >= len(lines):
            raise DataError(f"{path}: truncated after line {lineno}")
        lineno += 1
        try:
            rec = json.loads(lines[lineno - 1])
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}:{lineno}: bad sequence record: {exc}")
        T = int(rec["frames"])
        if lineno + T > len(lines):
            raise DataError(
                f"{path}: sequence {rec.get('id')!r} truncated "
                f"(expected {T} frame lines after line {lineno})")
        frames = np.empty((T, Dv))
        for r in range(T):
            lineno += 1
            parts = lines[lineno - 1].split()
            if len(parts) != Dv:
                raise DataError(
                    f"{path}:{lineno}: frame has {len(parts)} values, "
                    f"header declares {Dv} (sequence {rec.get('id')!r})")
            try:
                frames[r] = [float(x) for x in parts]
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: bad float: {exc}")
        label = rec.get("label")
        sequences.append(DyadSequence(
            frames=frames,
            label=int(label) if label is not None else None,
            frame_rate=float(rec.get("frame_rate", 30.0)),
            id=str(rec.get("id", ""))))
    return sequences, header.get("meta")
