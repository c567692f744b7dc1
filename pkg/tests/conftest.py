"""Shared fixtures: a modest trained model on a reduced benchmark for
tests that need learned structure without full-scale training cost."""
import numpy as np
import pytest

from dcrbm.data import SynthConfig, kfold_split, normalize, synthesize, window
from dcrbm.models import ModelDims, init_params
from dcrbm.training import TrainConfig, train


@pytest.fixture(scope="session")
def small_trained():
    """(params, stats, test sequences, config) on a reduced benchmark."""
    cfg = SynthConfig(classes=(0.0, 0.5, 0.9), samples_per_class=30,
                      frames=150, joints=1, seed=1)
    sequences = synthesize(cfg)
    train_seqs, test_seqs = kfold_split(sequences, 5, seed=0)[0]
    train_norm, stats = normalize(train_seqs)
    test_norm, _ = normalize(test_seqs, stats=stats)
    n = 10
    dataset = window(train_norm, n)
    p = init_params(ModelDims(cfg.visible_dim, 40, 3, n),
                    np.random.default_rng(1))
    tcfg = TrainConfig(epochs=30, learning_rate=1e-2, weight_decay=1e-4,
                       history_order=n, seed=0)
    p, _ = train(p, dataset, tcfg, rng=np.random.default_rng(0))
    return p, stats, test_norm, cfg
