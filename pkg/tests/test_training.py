"""Unit tests for contrastive divergence, the update rule, the training
loop, and the exact-likelihood oracles."""
import dataclasses

import numpy as np
import pytest

from dcrbm.data import SynthConfig, normalize, synthesize, window
from dcrbm.models import BINARY, GAUSSIAN, ModelDims, RbmParams, init_params
from dcrbm.training import (
    Batch,
    GradientEstimate,
    TrainConfig,
    _phase_stats,
    _stats_difference,
    apply_update,
    cd_step,
    exact_gradient,
    exact_log_partition,
    exact_loglik,
    grad_check,
    make_velocity,
    train,
)


class TestTrainConfig:
    def test_defaults_validate(self):
        cfg = TrainConfig()
        assert cfg.cd_steps == 1
        assert cfg.momentum == 0.9

    def test_invalid_values_rejected(self):
        with pytest.raises(ValueError):
            TrainConfig(learning_rate=0.0)
        with pytest.raises(ValueError):
            TrainConfig(momentum=1.0)
        with pytest.raises(ValueError):
            TrainConfig(batch_size=0)

    def test_from_key_value_file(self, tmp_path):
        path = tmp_path / "train.cfg"
        path.write_text(
            "learning_rate = 0.05  # step size\n"
            "epochs=7\n"
            "resample_labels = false\n"
            "\n")
        cfg = TrainConfig.from_file(path)
        assert cfg.learning_rate == 0.05
        assert cfg.epochs == 7
        assert cfg.resample_labels is False

    def test_from_json_file_with_overrides(self, tmp_path):
        path = tmp_path / "train.json"
        path.write_text('{"epochs": 3, "batch_size": 16}\n')
        cfg = TrainConfig.from_file(path, epochs=9)
        assert cfg.epochs == 9
        assert cfg.batch_size == 16

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "train.cfg"
        path.write_text("step_size=1\n")
        with pytest.raises(ValueError):
            TrainConfig.from_file(path)


class TestCdStep:
    def test_identical_phases_give_zero_gradient(self):
        rng = np.random.default_rng(0)
        v = rng.normal(size=(4, 3))
        h = rng.random((4, 2))
        hist = rng.normal(size=(4, 6))
        y = np.eye(2)[[0, 1, 0, 1]]
        stats = _phase_stats(None, v, h, hist, y)
        g = _stats_difference(stats, stats)
        for arr in g.arrays().values():
            assert np.allclose(arr, 0.0)

    def test_cd_difference_sign(self):
        # One sample, data correlation 1, reconstruction correlation 0.
        pos = _phase_stats(None, np.array([[1.0]]), np.array([[1.0]]),
                           None, None)
        neg = _phase_stats(None, np.array([[0.0]]), np.array([[0.0]]),
                           None, None)
        g = _stats_difference(pos, neg)
        assert g.dW[0, 0] == pytest.approx(1.0)

    def test_zero_model_zero_data_is_stationary(self):
        p = RbmParams(a=np.zeros(3), b=np.zeros(2), W=np.zeros((3, 2)))
        batch = Batch(v=np.zeros((5, 3)))
        g = cd_step(p, batch, rng=np.random.default_rng(0), unit=GAUSSIAN)
        for arr in g.arrays().values():
            assert np.allclose(arr, 0.0)

    def test_fixed_seed_is_deterministic(self):
        p = init_params(ModelDims(3, 4, 2, 2), np.random.default_rng(1))
        rng = np.random.default_rng(7)
        batch = Batch(v=rng.normal(size=(6, 3)),
                      hist=rng.normal(size=(6, 6)),
                      labels=np.array([0, 1, 0, 1, 0, 1]))
        g1 = cd_step(p, batch, rng=np.random.default_rng(42))
        g2 = cd_step(p, batch, rng=np.random.default_rng(42))
        for a1, a2 in zip(g1.arrays().values(), g2.arrays().values()):
            assert np.array_equal(a1, a2)

    def test_labeled_model_requires_labels(self):
        p = init_params(ModelDims(2, 2, 2), np.random.default_rng(0))
        with pytest.raises(ValueError):
            cd_step(p, Batch(v=np.zeros((2, 2))),
                    rng=np.random.default_rng(0))

    def test_history_model_requires_history(self):
        p = init_params(ModelDims(2, 2, 0, 2), np.random.default_rng(0))
        with pytest.raises(ValueError):
            cd_step(p, Batch(v=np.zeros((2, 2))),
                    rng=np.random.default_rng(0))

    def test_gradient_covers_all_fields(self):
        p = init_params(ModelDims(2, 3, 2, 2), np.random.default_rng(2))
        rng = np.random.default_rng(3)
        batch = Batch(v=rng.normal(size=(4, 2)),
                      hist=rng.normal(size=(4, 4)),
                      labels=np.array([0, 1, 1, 0]))
        g = cd_step(p, batch, rng=rng)
        assert set(g.arrays()) == set(p.field_names())
        for name in p.field_names():
            assert g.arrays()[name].shape == getattr(p, name).shape


class TestApplyUpdate:
    def _zero_gradient(self, p):
        return GradientEstimate(
            da=np.zeros_like(p.a), db=np.zeros_like(p.b),
            dW=np.zeros_like(p.W))

    def test_zero_gradient_zero_velocity_no_change(self):
        p = RbmParams(a=np.array([1.0]), b=np.array([2.0]), W=np.array([[3.0]]))
        cfg = TrainConfig(learning_rate=0.1, momentum=0.5, weight_decay=0.0)
        apply_update(p, self._zero_gradient(p), cfg, make_velocity(p))
        assert p.a[0] == 1.0 and p.b[0] == 2.0 and p.W[0, 0] == 3.0

    def test_plain_ascent_step(self):
        p = RbmParams(a=np.zeros(1), b=np.zeros(1), W=np.zeros((1, 1)))
        g = GradientEstimate(da=np.array([2.0]), db=np.array([-1.0]),
                             dW=np.array([[0.5]]))
        cfg = TrainConfig(learning_rate=0.1, momentum=0.0, weight_decay=0.0)
        apply_update(p, g, cfg, make_velocity(p))
        assert p.a[0] == pytest.approx(0.2)
        assert p.b[0] == pytest.approx(-0.1)
        assert p.W[0, 0] == pytest.approx(0.05)

    def test_velocity_decays_geometrically(self):
        p = RbmParams(a=np.zeros(1), b=np.zeros(1), W=np.zeros((1, 1)))
        cfg = TrainConfig(learning_rate=1.0, momentum=0.5, weight_decay=0.0)
        velocity = make_velocity(p)
        velocity["W"][...] = 1.0
        g = self._zero_gradient(p)
        apply_update(p, g, cfg, velocity)
        assert velocity["W"][0, 0] == pytest.approx(0.5)
        apply_update(p, g, cfg, velocity)
        assert velocity["W"][0, 0] == pytest.approx(0.25)

    def test_biases_exempt_from_decay(self):
        p = RbmParams(a=np.array([4.0]), b=np.array([4.0]),
                      W=np.array([[4.0]]))
        cfg = TrainConfig(learning_rate=1.0, momentum=0.0, weight_decay=0.1)
        apply_update(p, self._zero_gradient(p), cfg, make_velocity(p))
        assert p.a[0] == 4.0 and p.b[0] == 4.0
        assert p.W[0, 0] == pytest.approx(3.6)

    def test_momentum_inactive_flag(self):
        p = RbmParams(a=np.zeros(1), b=np.zeros(1), W=np.zeros((1, 1)))
        cfg = TrainConfig(learning_rate=1.0, momentum=0.9, weight_decay=0.0)
        velocity = make_velocity(p)
        velocity["a"][...] = 5.0
        apply_update(p, self._zero_gradient(p), cfg, velocity,
                     momentum_active=False)
        assert velocity["a"][0] == 0.0


def small_benchmark():
    cfg = SynthConfig(classes=(0.0, 0.5, 0.9), samples_per_class=12,
                      frames=80, joints=1, seed=5)
    train_seqs = synthesize(cfg)
    heldout_cfg = dataclasses.replace(cfg, samples_per_class=6, seed=6)
    heldout_seqs = synthesize(heldout_cfg)
    train_seqs, stats = normalize(train_seqs)
    heldout_seqs, _ = normalize(heldout_seqs, stats=stats)
    return window(train_seqs, 10), window(heldout_seqs, 10)


class TestTrainLoop:
    def test_zero_epochs_no_change(self):
        ds, _ = small_benchmark()
        p = init_params(ModelDims(6, 8, 3, 10), np.random.default_rng(0))
        before = {n: getattr(p, n).copy() for n in p.field_names()}
        p, report = train(p, ds, TrainConfig(epochs=0, history_order=10))
        assert report.epochs == []
        for name, arr in before.items():
            assert np.array_equal(arr, getattr(p, name))

    def test_report_has_one_record_per_epoch(self):
        ds, held = small_benchmark()
        p = init_params(ModelDims(6, 8, 3, 10), np.random.default_rng(0))
        cfg = TrainConfig(epochs=3, history_order=10)
        p, report = train(p, ds, cfg, heldout=held,
                          rng=np.random.default_rng(0))
        assert [r.epoch for r in report.epochs] == [0, 1, 2]
        assert all(r.heldout_accuracy is not None for r in report.epochs)

    def test_same_seed_identical_reports(self):
        ds, _ = small_benchmark()
        cfg = TrainConfig(epochs=3, history_order=10, seed=4)
        runs = []
        for _ in range(2):
            p = init_params(ModelDims(6, 8, 3, 10), np.random.default_rng(9))
            _, report = train(p, ds, cfg, rng=np.random.default_rng(cfg.seed))
            runs.append(report.to_dict())
        assert runs[0] == runs[1]

    def test_wall_time_excluded_from_serialization(self):
        ds, _ = small_benchmark()
        p = init_params(ModelDims(6, 8, 3, 10), np.random.default_rng(0))
        _, report = train(p, ds, TrainConfig(epochs=1, history_order=10))
        assert report.wall_time > 0.0
        assert "wall_time" not in report.to_dict()
        assert "wall_time" in report.to_dict(include_wall_time=True)

    def test_heldout_accuracy_beats_chance(self):
        ds, held = small_benchmark()
        p = init_params(ModelDims(6, 20, 3, 10), np.random.default_rng(1))
        cfg = TrainConfig(epochs=15, learning_rate=1e-2, weight_decay=1e-4,
                          history_order=10, seed=0)
        p, report = train(p, ds, cfg, heldout=held,
                          rng=np.random.default_rng(0))
        assert report.epochs[-1].heldout_accuracy > 0.33

    def test_reconstruction_error_mostly_non_increasing(self):
        ds, _ = small_benchmark()
        p = init_params(ModelDims(6, 20, 3, 10), np.random.default_rng(1))
        cfg = TrainConfig(epochs=15, learning_rate=1e-2, weight_decay=1e-4,
                          history_order=10, seed=0)
        p, report = train(p, ds, cfg, rng=np.random.default_rng(0))
        errs = [r.reconstruction_error for r in report.epochs]
        drops = sum(b <= a + 1e-9 for a, b in zip(errs, errs[1:]))
        assert drops / (len(errs) - 1) >= 0.9


class TestExactLikelihood:
    def test_uniform_model(self):
        p = RbmParams(a=np.zeros(2), b=np.zeros(2), W=np.zeros((2, 2)))
        data = np.array([[0.0, 1.0], [1.0, 1.0]])
        assert exact_loglik(p, data) == pytest.approx(np.log(0.25))

    def test_probabilities_sum_to_one(self):
        rng = np.random.default_rng(0)
        p = RbmParams(a=rng.normal(size=3), b=rng.normal(size=2),
                      W=rng.normal(size=(3, 2)))
        from dcrbm.models import all_binary_vectors
        V = all_binary_vectors(3)
        total = sum(np.exp(exact_loglik(p, v[None, :])) for v in V)
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_visible_bias_monotonicity(self):
        rng = np.random.default_rng(1)
        p = RbmParams(a=rng.normal(size=2), b=rng.normal(size=2),
                      W=rng.normal(size=(2, 2)))
        v = np.array([[1.0, 0.0]])
        before = exact_loglik(p, v)
        p.a[0] += 0.1
        assert exact_loglik(p, v) > before

    def test_log_partition_positive_weights(self):
        p = RbmParams(a=np.zeros(1), b=np.zeros(1), W=np.zeros((1, 1)))
        assert exact_log_partition(p) == pytest.approx(np.log(4.0))


class TestGradCheck:
    def test_random_model_close(self):
        rng = np.random.default_rng(0)
        p = RbmParams(a=rng.normal(0, 0.5, 3), b=rng.normal(0, 0.5, 2),
                      W=rng.normal(0, 0.5, (3, 2)))
        data = (rng.random((6, 3)) < 0.5).astype(float)
        assert grad_check(p, data, eps=1e-5) < 1e-4

    def test_symmetric_data_zero_visible_gradient(self):
        p = RbmParams(a=np.zeros(3), b=np.zeros(2), W=np.zeros((3, 2)))
        v = np.array([1.0, 0.0, 1.0])
        data = np.stack([v, 1.0 - v])
        g = exact_gradient(p, data)
        assert np.allclose(g.da, 0.0, atol=1e-12)

    def test_finite_difference_error_shrinks_with_eps(self):
        rng = np.random.default_rng(2)
        p = RbmParams(a=rng.normal(0, 0.5, 3), b=rng.normal(0, 0.5, 2),
                      W=rng.normal(0, 0.5, (3, 2)))
        data = (rng.random((6, 3)) < 0.5).astype(float)
        coarse = grad_check(p.copy(), data, eps=1e-3)
        fine = grad_check(p.copy(), data, eps=1e-5)
        # Central differences are second order; expect a large drop.
        assert fine < coarse

    def test_refuses_oversized_models(self):
        p = RbmParams(a=np.zeros(12), b=np.zeros(12), W=np.zeros((12, 12)))
        with pytest.raises(ValueError):
            exact_loglik(p, np.zeros((1, 12)))


class TestBinaryTraining:
    def test_cd_raises_exact_loglik(self):
        patterns = np.array([
            [1.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 1.0],
            [1.0, 0.0, 1.0, 0.0],
            [0.0, 1.0, 0.0, 1.0],
        ])

        class _Flat:
            v = patterns
            hist = None
            labels = None

        p = init_params(ModelDims(4, 3), np.random.default_rng(123))
        before = exact_loglik(p, patterns)
        cfg = TrainConfig(epochs=500, learning_rate=0.05, weight_decay=0.0,
                          batch_size=4, momentum=0.9, momentum_start_epoch=5)
        p, _ = train(p, _Flat(), cfg, unit=BINARY,
                     rng=np.random.default_rng(123))
        assert exact_loglik(p, patterns) > before
