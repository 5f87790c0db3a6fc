"""From a validated config to a finished run directory."""

import json
import os
import numpy as np
from .config import ExperimentConfig, DatasetConfig
from .records import EvalRecord
from .run import Run
from ..constants import CHECKPOINT_DIR, FEATURES_DIR, SUMMARY_FILE
from ..data.datasets import (
    LabeledDataset,
    load_cifar10_binary,
    load_cifar100_binary,
    load_exported,
    train_test_split,
)
from ..data.synthetic import generate_synthetic
from ..diagnostics.report import diagnose, write_diagnostics
from ..errors import ConfigError
from ..evaluation.components import component_eval
from ..evaluation.knn import knn_eval
from ..autodiff.io import write_tensor
from ..models.checkpoint import load_checkpoint, save_checkpoint
from ..models.encoder import Encoder, init_encoder
from ..models.forward import extract_features
from ..models.heads import Head, HeadKind, init_head, parameter_checksum
from ..training.schedule import run_schedule
from ..utils.logger import RunLogger
from ..utils.paths import atomic_write_text


def _load_files(config: DatasetConfig, paths: list[str]) -> LabeledDataset:
    if config.kind == "cifar10":
        return load_cifar10_binary(paths)
    if config.kind == "cifar100":
        return load_cifar100_binary(paths, label=config.cifar100_label)
    if len(paths) != 1:
        raise ConfigError("an exported dataset is a single PHT1 file")
    return load_exported(paths[0])


def load_datasets(config: DatasetConfig) -> tuple[LabeledDataset, LabeledDataset]:
    """(train, test) for the configured source; without test files the train set is split."""
    if config.kind == "synthetic":
        full = generate_synthetic(config.synthetic)
    else:
        full = _load_files(config, config.train_paths)
    if config.limit is not None:
        full = full.subset(np.arange(min(config.limit, len(full))))

    if config.kind != "synthetic" and config.test_paths:
        test = _load_files(config, config.test_paths)
        if config.limit is not None:
            test = test.subset(np.arange(min(config.limit, len(test))))
        return full, test
    return train_test_split(full, config.test_fraction, config.split_seed)


def build_models(config: ExperimentConfig, seed: int, input_dim: int) -> tuple[Encoder, Head]:
    encoder = init_encoder(config.encoder_sizes(input_dim), seed)
    model = config.model
    pretrained = None
    if model.head == HeadKind.FIXED_PRETRAINED:
        _, pretrained = load_checkpoint(model.pretrained_checkpoint)
    head = init_head(
        model.head,
        encoder.output_dim,
        d=model.d,
        hidden=model.head_hidden,
        seed=seed,
        pretrained=pretrained,
    )
    return encoder, head


def check_dims(encoder: Encoder, dataset: LabeledDataset):
    if encoder.input_dim != dataset.dim:
        raise ConfigError(
            f"checkpoint encoder takes {encoder.input_dim} inputs but the dataset has {dataset.dim} columns"
        )


def _snapshot(config: ExperimentConfig, run: Run, train: LabeledDataset, test: LabeledDataset):
    every = config.eval.every
    feature_epochs = set(config.output.feature_epochs)
    checkpoint_every = config.output.checkpoint_every

    def snapshot(epoch: int, encoder: Encoder, head: Head) -> list[EvalRecord]:
        done = epoch + 1
        if checkpoint_every and done % checkpoint_every == 0:
            path = os.path.join(run.run_dir, CHECKPOINT_DIR, f"epoch-{done:04d}")
            run.add_artifacts(save_checkpoint(path, encoder, head))
        if done in feature_epochs:
            h, z = extract_features(encoder, head, test.examples)
            folder = os.path.join(run.run_dir, FEATURES_DIR, f"epoch-{done:04d}")
            os.makedirs(folder, exist_ok=True)
            for name, value in (("h", h), ("z", z)):
                write_tensor(os.path.join(folder, f"{name}.pht"), value)
                run.add_artifact(os.path.join(folder, f"{name}.pht"))
        if not every or done % every:
            return []
        h_train, _ = extract_features(encoder, head, train.examples)
        h_test, _ = extract_features(encoder, head, test.examples)
        report = knn_eval(
            h_train, train.labels, h_test, test.labels,
            k=config.eval.knn_k, feature="h",
            num_classes=max(train.num_classes, test.num_classes),
        )
        run.log(f"epoch {epoch}: KNN on h {report.accuracy:.4f}")
        return [EvalRecord(epoch, str(config.schedule.regime), report.to_json())]

    return snapshot


def execute_run(
    config: ExperimentConfig,
    seed: int,
    run_dir: str,
    force: bool = False,
    logger: RunLogger | None = None,
) -> dict:
    """Train one seed of `config` into `run_dir`; returns the run summary."""
    train, test = load_datasets(config.dataset)
    schedule = config.schedule.model_copy(update={"seed": seed})
    encoder, head = build_models(config, seed, train.dim)
    check_dims(encoder, train)

    run = Run(config=config, run_dir=run_dir, seed=seed, force=force, logger=logger)
    run.start()
    try:
        run.add_artifacts(
            save_checkpoint(os.path.join(run.run_dir, CHECKPOINT_DIR, "initial"), encoder, head)
        )
        summary = {"run_id": run.run_id, "regime": str(schedule.regime), "seed": seed}
        if schedule.epochs == 0:
            run.finish()
            return summary

        start_checksum = parameter_checksum(head.params)
        metrics, encoder, head = run_schedule(
            schedule, train, encoder, head, config.augment,
            sinks=[run.emit], snapshot=_snapshot(config, run, train, test), run=run,
        )
        run.add_artifacts(
            save_checkpoint(os.path.join(run.run_dir, CHECKPOINT_DIR, "final"), encoder, head)
        )

        reports = component_eval(encoder, head, train, test, config.eval)
        for report in reports:
            run.emit(EvalRecord(schedule.epochs - 1, str(schedule.regime), report.to_json()))
        diagnostics, components = diagnose(encoder, head, test.examples, checkpoint="final")
        run.add_artifacts(write_diagnostics(diagnostics, components, os.path.join(run.run_dir, "diagnostics")))

        summary.update(
            {
                "head_kind": str(head.kind),
                "final_loss": metrics.final_loss,
                "accuracy": {f"{r.method}:{r.feature}": r.accuracy for r in reports},
                "rank_h": diagnostics.h.rank,
                "rank_z": diagnostics.z.rank,
                "rank_deficit": diagnostics.rank_deficit,
                "head_checksum_start": start_checksum,
                "head_checksum_end": parameter_checksum(head.params),
            }
        )
        summary_path = os.path.join(run.run_dir, SUMMARY_FILE)
        atomic_write_text(summary_path, json.dumps(summary, indent=2))
        run.add_artifact(summary_path)
    except Exception as e:
        run.finish(error=e)
        raise
    run.finish()
    return summary
