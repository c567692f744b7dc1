"""Model parameterizations, energies, and exact conditionals.

Four nested parameterizations are supported:

  RbmParams    {a, b, W}            plain RBM (binary or gaussian visibles)
  DrbmParams   + {s, U}             label layer added
  CrbmParams   + {A, B}             autoregressive history added
  DcrbmParams  + {s, U, A, B}       both

The label-hidden coupling U enters the energy exactly once, folded into
the per-class dynamic hidden bias d_{j,k}; the class posterior below is
an exact consequence of that energy and is cross-checked against full
enumeration in the test suite.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

BINARY = "binary"
GAUSSIAN = "gaussian"
VISIBLE_UNITS = (BINARY, GAUSSIAN)


def sigmoid(x):
    """Numerically stable logistic function, elementwise."""
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    out = np.empty_like(arr)
    pos = arr >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-arr[pos]))
    ex = np.exp(arr[~pos])
    out[~pos] = ex / (1.0 + ex)
    return float(out[0]) if scalar else out


def softplus(x):
    """log(1 + exp(x)) without overflow."""
    return np.logaddexp(0.0, x)


def softmax(logits, axis=-1):
    z = logits - np.max(logits, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=axis, keepdims=True)


@dataclass(frozen=True)
class ModelDims:
    visible_dim: int
    hidden_dim: int
    label_count: int = 0
    history_order: int = 0
    visible_unit: str = GAUSSIAN

    def __post_init__(self):
        if self.visible_dim < 1 or self.hidden_dim < 1:
            raise ValueError("visible_dim and hidden_dim must be >= 1")
        if self.history_order < 0:
            raise ValueError("history_order must be >= 0")
        if self.label_count != 0 and self.label_count < 2:
            raise ValueError("label_count must be 0 (unlabeled) or >= 2")
        if self.visible_unit not in VISIBLE_UNITS:
            raise ValueError(f"unknown visible_unit {self.visible_unit!r}")


def _check_finite(name, arr):
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"parameter {name} contains non-finite entries")


@dataclass
class RbmParams:
    a: np.ndarray  # visible bias, (Dv,)
    b: np.ndarray  # hidden bias, (Dh,)
    W: np.ndarray  # weights, (Dv, Dh)

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        self.W = np.asarray(self.W, dtype=float)
        if self.W.shape != (self.a.size, self.b.size):
            raise ValueError(
                f"W shape {self.W.shape} does not match biases "
                f"({self.a.size}, {self.b.size})"
            )
        for name in self.field_names():
            _check_finite(name, getattr(self, name))

    @property
    def visible_dim(self):
        return self.a.size

    @property
    def hidden_dim(self):
        return self.b.size

    def field_names(self):
        return ("a", "b", "W")

    def copy(self):
        kw = {n: getattr(self, n).copy() for n in self.field_names()}
        return type(self)(**kw)


@dataclass
class DrbmParams(RbmParams):
    s: np.ndarray  # label bias, (K,)
    U: np.ndarray  # label-hidden weights, (Dh, K)

    def __post_init__(self):
        self.s = np.asarray(self.s, dtype=float)
        self.U = np.asarray(self.U, dtype=float)
        super().__post_init__()
        if self.U.shape != (self.b.size, self.s.size):
            raise ValueError(
                f"U shape {self.U.shape} does not match (Dh, K) = "
                f"({self.b.size}, {self.s.size})"
            )

    @property
    def label_count(self):
        return self.s.size

    def field_names(self):
        return ("a", "b", "W", "s", "U")


@dataclass
class CrbmParams(RbmParams):
    A: np.ndarray  # history -> visible, (n*Dv, Dv)
    B: np.ndarray  # history -> hidden, (n*Dv, Dh)

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float).reshape(-1, np.asarray(self.a).size)
        self.B = np.asarray(self.B, dtype=float).reshape(-1, np.asarray(self.b).size)
        super().__post_init__()
        if self.A.shape[0] != self.B.shape[0]:
            raise ValueError("A and B disagree on history length")
        if self.A.shape[0] % self.visible_dim != 0:
            raise ValueError("history rows of A must be a multiple of Dv")

    @property
    def history_order(self):
        return self.A.shape[0] // self.visible_dim

    def field_names(self):
        return ("a", "b", "W", "A", "B")


@dataclass
class DcrbmParams(DrbmParams):
    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float).reshape(-1, np.asarray(self.a).size)
        self.B = np.asarray(self.B, dtype=float).reshape(-1, np.asarray(self.b).size)
        super().__post_init__()
        if self.A.shape[0] != self.B.shape[0]:
            raise ValueError("A and B disagree on history length")

    @property
    def history_order(self):
        return self.A.shape[0] // self.visible_dim

    def field_names(self):
        return ("a", "b", "W", "s", "U", "A", "B")


def init_params(dims: ModelDims, rng: np.random.Generator,
                weight_scale: float = 0.01):
    """Small-weight initialization: weights ~ N(0, scale^2), biases zero."""
    Dv, Dh, K, n = (dims.visible_dim, dims.hidden_dim,
                    dims.label_count, dims.history_order)
    a = np.zeros(Dv)
    b = np.zeros(Dh)
    W = rng.normal(0.0, weight_scale, size=(Dv, Dh))
    if K and n:
        return DcrbmParams(a=a, b=b, W=W,
                           s=np.zeros(K),
                           U=rng.normal(0.0, weight_scale, size=(Dh, K)),
                           A=rng.normal(0.0, weight_scale, size=(n * Dv, Dv)),
                           B=rng.normal(0.0, weight_scale, size=(n * Dv, Dh)))
    if K:
        return DrbmParams(a=a, b=b, W=W, s=np.zeros(K),
                          U=rng.normal(0.0, weight_scale, size=(Dh, K)))
    if n:
        return CrbmParams(a=a, b=b, W=W,
                          A=rng.normal(0.0, weight_scale, size=(n * Dv, Dv)),
                          B=rng.normal(0.0, weight_scale, size=(n * Dv, Dh)))
    return RbmParams(a=a, b=b, W=W)


def has_labels(p) -> bool:
    return hasattr(p, "s")


def has_history(p) -> bool:
    return hasattr(p, "A")


@dataclass(frozen=True)
class HistoryWindow:
    """The n most recent visible frames, oldest first, shape (n, Dv)."""
    frames: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "frames",
                           np.asarray(self.frames, dtype=float))
        if self.frames.ndim != 2:
            raise ValueError("history frames must be a (n, Dv) array")

    @property
    def order(self):
        return self.frames.shape[0]

    @property
    def flat(self):
        """Concatenated history vector, frame-major, oldest first."""
        return self.frames.reshape(-1)


def _history_flat(hist, p):
    if hist is None:
        flat = np.zeros(0)
    elif isinstance(hist, HistoryWindow):
        flat = hist.flat
    else:
        flat = np.asarray(hist, dtype=float).reshape(-1)
    expected = p.A.shape[0] if has_history(p) else 0
    if flat.size != expected:
        raise ValueError(
            f"history has {flat.size} values, model expects {expected}")
    return flat


@dataclass(frozen=True)
class LabelDist:
    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "probs", np.asarray(self.probs, dtype=float))
        if np.any(self.probs < 0) or abs(self.probs.sum() - 1.0) > 1e-12:
            raise ValueError("label distribution must be nonnegative and sum to 1")

    def argmax(self):
        return int(np.argmax(self.probs))


def _check_label(y, K):
    y = np.asarray(y, dtype=float)
    if y.shape != (K,) or not np.all(np.isin(y, (0.0, 1.0))) or y.sum() != 1:
        raise ValueError(f"label must be one-hot of length {K}")
    return int(np.argmax(y))


def one_hot(k: int, K: int) -> np.ndarray:
    y = np.zeros(K)
    y[k] = 1.0
    return y


# ---------------------------------------------------------------------------
# Energies
# ---------------------------------------------------------------------------

def rbm_energy(v, h, p: RbmParams, unit: str = BINARY) -> float:
    v = np.asarray(v, dtype=float)
    h = np.asarray(h, dtype=float)
    if v.shape != (p.visible_dim,) or h.shape != (p.hidden_dim,):
        raise ValueError("v/h shapes do not match the model")
    if not np.all(np.isin(h, (0.0, 1.0))):
        raise ValueError("hidden configuration must be binary")
    if unit == BINARY:
        if not np.all(np.isin(v, (0.0, 1.0))):
            raise ValueError("binary visible units require v in {0,1}")
        vis_term = -np.dot(p.a, v)
    elif unit == GAUSSIAN:
        vis_term = 0.5 * np.sum((p.a - v) ** 2)
    else:
        raise ValueError(f"unknown visible unit {unit!r}")
    return float(vis_term - np.dot(p.b, h) - v @ p.W @ h)


def drbm_energy(y, v, h, p: DrbmParams) -> float:
    """Gaussian-visible energy with the label layer; U counted once."""
    k = _check_label(y, p.label_count)
    v = np.asarray(v, dtype=float)
    h = np.asarray(h, dtype=float)
    return float(
        0.5 * np.sum((p.a - v) ** 2)
        - np.dot(p.b, h)
        - p.s[k]
        - v @ p.W @ h
        - np.dot(p.U[:, k], h)
    )


def dynamic_biases(p, hist=None, label: Optional[int] = None):
    """Effective biases (c, d) after folding in history and label terms.

    c_i = a_i + sum_m A[m, i] * hist_flat[m]
    d_j = b_j + sum_m B[m, j] * hist_flat[m]  (+ U[j, label] when given)
    """
    flat = _history_flat(hist, p)
    c = p.a.copy()
    d = p.b.copy()
    if has_history(p) and flat.size:
        c = c + flat @ p.A
        d = d + flat @ p.B
    if label is not None:
        if not has_labels(p):
            raise ValueError("model has no label parameters")
        d = d + p.U[:, label]
    return c, d


def dcrbm_energy(y, v, h, hist, p: DcrbmParams) -> float:
    k = _check_label(y, p.label_count)
    v = np.asarray(v, dtype=float)
    h = np.asarray(h, dtype=float)
    c, d = dynamic_biases(p, hist, label=k)
    return float(
        0.5 * np.sum((c - v) ** 2)
        - np.dot(d, h)
        - p.s[k]
        - v @ p.W @ h
    )


# ---------------------------------------------------------------------------
# Conditionals
# ---------------------------------------------------------------------------

def rbm_h_given_v(v, p: RbmParams):
    v = np.asarray(v, dtype=float)
    if v.shape != (p.visible_dim,):
        raise ValueError("v shape does not match the model")
    return sigmoid(p.b + v @ p.W)


def rbm_v_given_h(h, p: RbmParams, unit: str = BINARY):
    """Bernoulli probabilities (binary) or unit-variance means (gaussian)."""
    h = np.asarray(h, dtype=float)
    if h.shape != (p.hidden_dim,):
        raise ValueError("h shape does not match the model")
    act = p.a + p.W @ h
    if unit == BINARY:
        return sigmoid(act)
    if unit == GAUSSIAN:
        return act
    raise ValueError(f"unknown visible unit {unit!r}")


def y_given_h(h, p):
    """Exact class distribution given the hidden layer: softmax(s + U'h)."""
    if not has_labels(p):
        raise ValueError("model has no label parameters")
    h = np.asarray(h, dtype=float)
    if h.shape != (p.hidden_dim,):
        raise ValueError("h shape does not match the model")
    return LabelDist(softmax(p.s + h @ p.U))


def crbm_conditionals(v, h, hist, p: CrbmParams):
    """(hidden activation probs, visible conditional means) given history."""
    v = np.asarray(v, dtype=float)
    h = np.asarray(h, dtype=float)
    if v.shape != (p.visible_dim,) or h.shape != (p.hidden_dim,):
        raise ValueError("v/h shapes do not match the model")
    c, d = dynamic_biases(p, hist)
    h_probs = sigmoid(d + v @ p.W)
    v_means = c + p.W @ h
    return h_probs, v_means


def dcrbm_h_given_vy(v, y, hist, p: DcrbmParams):
    k = _check_label(y, p.label_count)
    v = np.asarray(v, dtype=float)
    if v.shape != (p.visible_dim,):
        raise ValueError("v shape does not match the model")
    _, d = dynamic_biases(p, hist, label=k)
    return sigmoid(d + v @ p.W)


def dcrbm_v_given_h(h, hist, p):
    """Visible conditional means given hidden layer and history."""
    h = np.asarray(h, dtype=float)
    c, _ = dynamic_biases(p, hist)
    return c + p.W @ h


# ---------------------------------------------------------------------------
# Exact class posterior and enumeration oracles
# ---------------------------------------------------------------------------

def dcrbm_posterior(v, hist, p) -> LabelDist:
    """Closed-form posterior over labels given the frame and its history.

    p(y_k | v, hist) ∝ exp(s_k) * prod_j (1 + exp(d_{j,k} + (W'v)_j)),
    accumulated in log space via softplus.
    """
    v = np.asarray(v, dtype=float)
    if v.shape != (p.visible_dim,):
        raise ValueError("v shape does not match the model")
    K = p.label_count
    vw = v @ p.W
    logw = np.empty(K)
    for k in range(K):
        _, d = dynamic_biases(p, hist, label=k)
        logw[k] = p.s[k] + softplus(d + vw).sum()
    return LabelDist(softmax(logw))


def posterior_batch(V, Hflat, p) -> np.ndarray:
    """Vectorized posterior for many frames; returns (N, K) probabilities.

    V is (N, Dv); Hflat is (N, n*Dv) flattened histories (ignored for
    history-free models).
    """
    V = np.asarray(V, dtype=float)
    K = p.label_count
    base = p.b + V @ p.W
    if has_history(p) and p.A.shape[0]:
        base = base + np.asarray(Hflat, dtype=float) @ p.B
    logw = np.empty((V.shape[0], K))
    for k in range(K):
        logw[:, k] = p.s[k] + softplus(base + p.U[:, k]).sum(axis=1)
    return softmax(logw, axis=1)


def all_binary_vectors(m: int) -> np.ndarray:
    """All 2^m binary configurations as a (2^m, m) array."""
    if m > 20:
        raise ValueError("too many units to enumerate")
    idx = np.arange(2 ** m)
    return ((idx[:, None] >> np.arange(m)) & 1).astype(float)


def enumerate_joint(p, v, hist=None, max_hidden: int = 12):
    """Exact unnormalized weights exp(-E(y_k, v, h)) over all (k, h).

    Returns (weights, hidden_configs) with weights of shape (K, 2^Dh).
    Test oracle only; requires Dh <= max_hidden.
    """
    Dh = p.hidden_dim
    if Dh > max_hidden:
        raise ValueError(f"hidden_dim {Dh} too large to enumerate")
    v = np.asarray(v, dtype=float)
    H = all_binary_vectors(Dh)
    K = p.label_count
    weights = np.empty((K, H.shape[0]))
    for k in range(K):
        c, d = dynamic_biases(p, hist, label=k)
        quad = 0.5 * np.sum((c - v) ** 2)
        energies = quad - p.s[k] - H @ (d + v @ p.W)
        weights[k] = np.exp(-energies)
    return weights, H


def posterior_from_enumeration(p, v, hist=None) -> np.ndarray:
    weights, _ = enumerate_joint(p, v, hist)
    marg = weights.sum(axis=1)
    return marg / marg.sum()


def dcrbm_log_partition(p, hist=None) -> float:
    """log Z over (y, h, v) with the Gaussian visibles integrated exactly.

    For fixed (k, h): integral over v of exp(-E) equals
    (2*pi)^{Dv/2} * exp(s_k + d_k·h + c·(Wh) + |Wh|^2/2).
    """
    Dh = p.hidden_dim
    if Dh > 12:
        raise ValueError(f"hidden_dim {Dh} too large to enumerate")
    H = all_binary_vectors(Dh)
    Wh = H @ p.W.T  # (2^Dh, Dv)
    terms = []
    for k in range(p.label_count):
        c, d = dynamic_biases(p, hist, label=k)
        expo = p.s[k] + H @ d + Wh @ c + 0.5 * np.sum(Wh ** 2, axis=1)
        terms.append(expo)
    expo = np.concatenate(terms)
    m = expo.max()
    return float(0.5 * p.visible_dim * np.log(2 * np.pi)
                 + m + np.log(np.sum(np.exp(expo - m))))
