"""Command-line pipeline: synthesize data, train, classify, generate,
evaluate generation error, run cross-validation, and verify oracles.

Exit codes: 0 success, 2 usage error, 3 data error, 4 verification
failure. Every artifact embeds the fully-resolved config and seed that
produced it.
"""
from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .checkpoint import load_checkpoint, save_checkpoint
from .data import (
    DataError,
    SynthConfig,
    kfold_split,
    load_sequences,
    normalize,
    save_sequences,
    synthesize,
    window,
)
from .evaluate import (
    aggregate_metrics,
    baseline_error,
    classify_dataset,
    gen_error_curve,
)
from .generation import actor_mask, generate_full, generate_partial
from .models import GAUSSIAN, ModelDims, init_params
from .training import TrainConfig, train
from .verification import run_all

EXIT_DATA_ERROR = 3
EXIT_VERIFY_FAILED = 4

# Named substreams expanded from the one user-visible seed.
_STREAMS = {"data": 0, "init": 1, "cd": 2, "generation": 3}


def substream(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence([int(seed), _STREAMS[name]]))


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=1) + "\n")


def handle_data_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except DataError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_DATA_ERROR)
    return wrapper


@click.group()
@click.version_option(__version__)
def main():
    """Temporal energy-based models for dyadic motion sequences."""


@main.command()
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--classes", default="0.0,0.5,0.9", show_default=True,
              help="comma-separated coupling levels, one class each")
@click.option("--samples-per-class", default=100, show_default=True, type=int)
@click.option("--frames", default=300, show_default=True, type=int)
@click.option("--joints", default=2, show_default=True, type=int)
@click.option("--lag", default=3, show_default=True, type=int)
@click.option("--noise-std", default=0.05, show_default=True, type=float)
@click.option("--tempo", default=0.15, show_default=True, type=float)
@click.option("--indep-scale", default=0.15, show_default=True, type=float)
@click.option("--offset-range", default=0.2, show_default=True, type=float)
@handle_data_errors
def synth(out, seed, classes, samples_per_class, frames, joints, lag,
          noise_std, tempo, indep_scale, offset_range):
    """Write a synthetic dyadic-motion dataset."""
    try:
        levels = tuple(float(x) for x in classes.split(","))
        cfg = SynthConfig(classes=levels, samples_per_class=samples_per_class,
                          frames=frames, joints=joints, lag=lag,
                          noise_std=noise_std, tempo=tempo,
                          indep_scale=indep_scale,
                          offset_range=offset_range, seed=seed)
    except ValueError as exc:
        raise click.UsageError(str(exc))
    sequences = synthesize(cfg)
    save_sequences(out, sequences, meta={"synth_config": cfg.to_dict()})
    click.echo(f"wrote {len(sequences)} sequences to {out}")


_MODEL_CHOICES = click.Choice(["rbm", "drbm", "crbm", "dcrbm"])


def _train_options(fn):
    opts = [
        click.option("--model", default="dcrbm", type=_MODEL_CHOICES,
                     show_default=True),
        click.option("--hidden-dim", default=50, show_default=True, type=int),
        click.option("--config", "config_path", default=None,
                     type=click.Path(exists=True, dir_okay=False),
                     help="TrainConfig file (key=value lines or JSON)"),
        click.option("--lr", default=None, type=float),
        click.option("--epochs", default=None, type=int),
        click.option("--batch-size", default=None, type=int),
        click.option("--cd-steps", default=None, type=int),
        click.option("--history-order", default=None, type=int),
        click.option("--seed", default=0, show_default=True, type=int),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _resolve_train_config(config_path, lr, epochs, batch_size, cd_steps,
                          history_order, seed):
    overrides = {"seed": seed}
    for key, val in (("learning_rate", lr), ("epochs", epochs),
                     ("batch_size", batch_size), ("cd_steps", cd_steps),
                     ("history_order", history_order)):
        if val is not None:
            overrides[key] = val
    try:
        if config_path:
            return TrainConfig.from_file(config_path, **overrides)
        return TrainConfig(**overrides)
    except ValueError as exc:
        raise click.UsageError(str(exc))


def _fit_model(sequences, model, hidden_dim, cfg):
    sequences, stats = normalize(sequences)
    n = cfg.history_order if model in ("crbm", "dcrbm") else 0
    dataset = window(sequences, n)
    labels = sorted({s.label for s in sequences if s.label is not None})
    K = len(labels) if model in ("drbm", "dcrbm") else 0
    if model in ("drbm", "dcrbm") and dataset.labels is None:
        raise DataError("discriminative training requires labeled sequences")
    Dv = sequences[0].visible_dim
    dims = ModelDims(Dv, hidden_dim, K, n, GAUSSIAN)
    p = init_params(dims, substream(cfg.seed, "init"))
    p, report = train(p, dataset, cfg, unit=GAUSSIAN,
                      rng=substream(cfg.seed, "cd"))
    return p, stats, report


@main.command("train")
@click.option("--data", "data_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--report", "report_path", default=None,
              type=click.Path(dir_okay=False))
@_train_options
@handle_data_errors
def train_cmd(data_path, out, report_path, model, hidden_dim, config_path,
              lr, epochs, batch_size, cd_steps, history_order, seed):
    """Fit a model on a dataset and write a checkpoint."""
    cfg = _resolve_train_config(config_path, lr, epochs, batch_size,
                                cd_steps, history_order, seed)
    sequences, _ = load_sequences(data_path)
    p, stats, report = _fit_model(sequences, model, hidden_dim, cfg)
    meta = {"train_config": cfg.__dict__, "model": model,
            "data": str(data_path), "seed": cfg.seed}
    save_checkpoint(out, p, unit=GAUSSIAN, stats=stats, meta=meta)
    if report_path:
        doc = report.to_dict()
        doc["config"] = meta
        write_json(report_path, doc)
    click.echo(f"trained {model} for {cfg.epochs} epochs; "
               f"checkpoint at {out} ({report.wall_time:.1f}s)")


def _load_model_and_data(checkpoint_path, data_path):
    p, unit, stats, meta = load_checkpoint(checkpoint_path)
    sequences, _ = load_sequences(data_path)
    if sequences[0].visible_dim != p.visible_dim:
        raise DataError(
            f"dataset Dv={sequences[0].visible_dim} does not match "
            f"checkpoint Dv={p.visible_dim}")
    if stats is None:
        raise DataError("checkpoint carries no normalization statistics")
    sequences, _ = normalize(sequences, stats=stats)
    return p, unit, stats, meta, sequences


@main.command()
@click.option("--data", "data_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--checkpoint", "checkpoint_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--aggregate", default="majority", show_default=True,
              type=click.Choice(["majority", "mean"]))
@handle_data_errors
def classify(data_path, checkpoint_path, out, aggregate):
    """Classify sequences with a trained discriminative model."""
    p, _, _, meta, sequences = _load_model_and_data(checkpoint_path,
                                                    data_path)
    if not hasattr(p, "s"):
        raise DataError("checkpoint model has no label layer")
    labels = {s.label for s in sequences}
    if None in labels:
        raise DataError("dataset is missing labels")
    if max(labels) >= p.label_count:
        raise DataError(
            f"dataset has label {max(labels)}, checkpoint K={p.label_count}")
    dataset = window(sequences, getattr(p, "history_order", 0))
    metrics = classify_dataset(p, dataset, aggregate=aggregate)
    doc = metrics.to_dict()
    doc["config"] = {"data": str(data_path),
                     "checkpoint": str(checkpoint_path),
                     "aggregate": aggregate}
    write_json(out, doc)
    click.echo(f"sequence accuracy {metrics.accuracy:.3f} "
               f"(window {metrics.window_accuracy:.3f})")


@main.command()
@click.option("--data", "data_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--checkpoint", "checkpoint_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--setting", default="partial", show_default=True,
              type=click.Choice(["partial", "full"]))
@click.option("--length", default=100, show_default=True, type=int)
@click.option("--iters", default=30, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--max-instances", default=50, show_default=True, type=int)
@handle_data_errors
def generate(data_path, checkpoint_path, out, setting, length, iters, seed,
             max_instances):
    """Roll out generated sequences seeded from dataset sequences."""
    p, _, stats, _, sequences = _load_model_and_data(checkpoint_path,
                                                     data_path)
    n = getattr(p, "history_order", 0)
    mask = actor_mask(p.visible_dim, actor=0)
    generated = []
    rng_root = substream(seed, "generation")
    for i, s in enumerate(sequences[:max_instances]):
        if s.length < n + length:
            raise DataError(
                f"sequence {s.id!r} too short for length {length}")
        rng = np.random.default_rng(rng_root.integers(2 ** 63))
        seed_frames = s.frames[:n]
        gt = s.frames[n:n + length]
        if setting == "partial":
            gen = generate_partial(p, s.label, gt, seed_frames, mask,
                                   iters=iters, rng=rng)
        else:
            gen = generate_full(p, s.label, seed_frames, length,
                                iters=iters, rng=rng)
        out_seq = type(s)(frames=gen.frames, label=s.label,
                          frame_rate=s.frame_rate,
                          id=f"{s.id}-gen", origin=s.origin)
        from .data import denormalize
        generated.append(denormalize(out_seq, stats))
    meta = {"setting": setting, "length": length, "iters": iters,
            "seed": seed, "checkpoint": str(checkpoint_path),
            "data": str(data_path)}
    save_sequences(out, generated, meta=meta)
    click.echo(f"wrote {len(generated)} generated sequences to {out}")


@main.command("eval-gen")
@click.option("--data", "data_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--checkpoint", "checkpoint_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False),
              help="JSON output; a .csv sibling is written next to it")
@click.option("--lengths", default="16,50,100,200,300", show_default=True)
@click.option("--setting", default="partial", show_default=True,
              type=click.Choice(["partial", "full"]))
@click.option("--iters", default=30, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--max-instances", default=50, show_default=True, type=int)
@handle_data_errors
def eval_gen(data_path, checkpoint_path, out, lengths, setting, iters, seed,
             max_instances):
    """Generation-error-vs-length curves plus baseline floors."""
    p, _, _, _, sequences = _load_model_and_data(checkpoint_path, data_path)
    try:
        length_list = [int(x) for x in lengths.split(",")]
    except ValueError as exc:
        raise click.UsageError(f"bad --lengths: {exc}")
    n = getattr(p, "history_order", 0)
    mask = actor_mask(p.visible_dim, actor=0) if setting == "partial" else None
    levels = sorted({s.label for s in sequences})
    curves = []
    for level in levels:
        curves.append(gen_error_curve(
            p, sequences, length_list, setting=setting, mask=mask,
            iters=iters, seed=seed, max_instances=max_instances,
            class_level=level))
        for mode in ("mean-pose", "persistence"):
            curves.append(baseline_error(
                sequences, length_list, mode=mode, n=n, mask=mask,
                max_instances=max_instances, class_level=level))
    doc = {"curves": [c.to_dict() for c in curves],
           "config": {"data": str(data_path),
                      "checkpoint": str(checkpoint_path),
                      "lengths": length_list, "setting": setting,
                      "iters": iters, "seed": seed}}
    write_json(out, doc)
    csv_path = Path(out).with_suffix(".csv")
    rows = ["setting,class_level,length,mean,std"]
    for c in curves:
        for L, m, sd in zip(c.lengths, c.mean, c.std):
            rows.append(f"{c.setting},{c.class_level},{L},{m!r},{sd!r}")
    csv_path.write_text("\n".join(rows) + "\n")
    click.echo(f"wrote curves to {out} and {csv_path}")


@main.command()
@click.option("--data", "data_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--folds", default=5, show_default=True, type=int)
@click.option("--aggregate", default="majority", show_default=True,
              type=click.Choice(["majority", "mean"]))
@_train_options
@handle_data_errors
def cv(data_path, out, folds, aggregate, model, hidden_dim, config_path, lr,
       epochs, batch_size, cd_steps, history_order, seed):
    """Stratified k-fold cross-validation of the full protocol."""
    if model not in ("drbm", "dcrbm"):
        raise click.UsageError("cv requires a discriminative model")
    cfg = _resolve_train_config(config_path, lr, epochs, batch_size,
                                cd_steps, history_order, seed)
    sequences, _ = load_sequences(data_path)
    per_fold = []
    for fold, (train_seqs, test_seqs) in enumerate(
            kfold_split(sequences, folds, seed=cfg.seed)):
        p, stats, _ = _fit_model(train_seqs, model, hidden_dim, cfg)
        test_norm, _ = normalize(test_seqs, stats=stats)
        dataset = window(test_norm, getattr(p, "history_order", 0))
        metrics = classify_dataset(p, dataset, aggregate=aggregate,
                                   fold=fold)
        per_fold.append(metrics)
        click.echo(f"fold {fold}: accuracy {metrics.accuracy:.3f}")
    summary = aggregate_metrics(per_fold)
    summary["per_fold"] = [m.to_dict() for m in per_fold]
    summary["config"] = {"train_config": cfg.__dict__, "model": model,
                         "folds": folds, "aggregate": aggregate,
                         "data": str(data_path), "seed": cfg.seed}
    write_json(out, summary)
    click.echo(f"mean accuracy {summary['mean_accuracy']:.3f} "
               f"over {folds} folds")


@main.command()
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", default=None, type=click.Path(dir_okay=False))
def verify(seed, out):
    """Run the enumeration and gradient oracle suites."""
    reports, ok = run_all(seed=seed)
    for r in reports:
        click.echo(r.line())
    if out:
        write_json(out, {"oracles": [r.__dict__ for r in reports],
                         "passed": ok, "seed": seed})
    if not ok:
        sys.exit(EXIT_VERIFY_FAILED)


if __name__ == "__main__":
    main()
