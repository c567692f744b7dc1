"""Oracle suites gating the build: closed-form posterior vs full
enumeration, partition-function normalization, and analytic-vs-numeric
gradient checks on exhaustively enumerable models."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import (
    DcrbmParams,
    ModelDims,
    all_binary_vectors,
    dcrbm_posterior,
    init_params,
    posterior_from_enumeration,
)
from .training import exact_log_partition, grad_check
from .models import RbmParams


@dataclass
class OracleReport:
    name: str
    trials: int
    max_deviation: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_deviation < self.tolerance

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status} {self.name}: max deviation "
                f"{self.max_deviation:.3e} (tolerance {self.tolerance:.0e}, "
                f"{self.trials} trials)")


def _random_tiny_dcrbm(rng):
    Dv = int(rng.integers(1, 5))
    Dh = int(rng.integers(1, 11))
    K = int(rng.choice([2, 3]))
    n = int(rng.choice([0, 2]))
    p = init_params(ModelDims(Dv, Dh, K, max(n, 1)), rng)
    if n == 0:
        p = DcrbmParams(a=p.a, b=p.b, W=p.W, s=p.s, U=p.U,
                        A=np.zeros((0, Dv)), B=np.zeros((0, Dh)))
    # Spread the parameters so the check exercises nontrivial posteriors.
    for name in p.field_names():
        getattr(p, name)[...] = rng.normal(0.0, 1.0,
                                           size=getattr(p, name).shape)
    return p, Dv, n


def posterior_oracle(trials: int = 100, seed: int = 0,
                     tolerance: float = 1e-9) -> OracleReport:
    """Closed-form label posterior against exhaustive (y, h) enumeration
    on random small models."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        p, Dv, n = _random_tiny_dcrbm(rng)
        v = rng.normal(size=Dv)
        hist = rng.normal(size=(n, Dv)) if n else np.zeros((0, Dv))
        closed = dcrbm_posterior(v, hist, p).probs
        exact = posterior_from_enumeration(p, v, hist)
        worst = max(worst, float(np.max(np.abs(closed - exact))))
    return OracleReport("posterior-vs-enumeration", trials, worst, tolerance)


def partition_check(seed: int = 0, tolerance: float = 1e-10) -> OracleReport:
    """Sum of p(v, h) over all configurations of a small binary RBM."""
    rng = np.random.default_rng(seed)
    Dv, Dh = 4, 3
    p = RbmParams(a=rng.normal(size=Dv), b=rng.normal(size=Dh),
                  W=rng.normal(size=(Dv, Dh)))
    logZ = exact_log_partition(p)
    V = all_binary_vectors(Dv)
    H = all_binary_vectors(Dh)
    negE = (V @ p.a)[:, None] + (H @ p.b)[None, :] + V @ p.W @ H.T
    total = np.sum(np.exp(negE - logZ))
    return OracleReport("partition-normalization", 1,
                        abs(total - 1.0), tolerance)


def gradient_oracle(trials: int = 20, seed: int = 0, eps: float = 1e-5,
                    tolerance: float = 1e-4) -> OracleReport:
    """Analytic exact gradient vs central finite differences of the
    enumerated log-likelihood on tiny binary RBMs."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        Dv, Dh = 3, 2
        p = RbmParams(a=rng.normal(0, 0.5, Dv), b=rng.normal(0, 0.5, Dh),
                      W=rng.normal(0, 0.5, (Dv, Dh)))
        data = (rng.random((6, Dv)) < 0.5).astype(float)
        worst = max(worst, grad_check(p, data, eps=eps))
    return OracleReport("gradient-vs-finite-differences", trials, worst,
                        tolerance)


def run_all(seed: int = 0):
    """Full verification suite; returns (reports, all_passed)."""
    reports = [
        posterior_oracle(seed=seed),
        partition_check(seed=seed),
        gradient_oracle(seed=seed),
    ]
    return reports, all(r.passed for r in reports)
