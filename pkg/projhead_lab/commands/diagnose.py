import argparse
import os
import numpy as np
from .base import CommandDefine, CommandReturn
from ..core.config import load_config
from ..core.experiment import check_dims, load_datasets
from ..data.datasets import LabeledDataset
from ..diagnostics.report import diagnose, write_diagnostics
from ..env import Env
from ..models.checkpoint import load_checkpoint


def select_split(train: LabeledDataset, test: LabeledDataset, split: str) -> LabeledDataset:
    if split == "train":
        return train
    if split == "test":
        return test
    return LabeledDataset(
        np.concatenate([train.examples, test.examples]),
        np.concatenate([train.labels, test.labels]),
        max(train.num_classes, test.num_classes),
        train.provenance,
    )


class DiagnoseCommand(CommandDefine):
    @classmethod
    def init(cls) -> "DiagnoseCommand":
        return cls(
            name="diagnose",
            description="Eigenspectra, ranks, rank deficit and null-space split of a checkpoint's features.",
        )

    def add_arguments(self, parser: argparse.ArgumentParser):
        parser.add_argument("checkpoint", help="checkpoint directory")
        parser.add_argument("config", help="experiment config naming the dataset")
        parser.add_argument("--out", required=True, help="output directory for diagnostics.json and dumps")
        parser.add_argument("--split", choices=["train", "test", "all"], default="test")

    async def _execute(self, env: Env, arguments: dict) -> CommandReturn:
        encoder, head = load_checkpoint(arguments["checkpoint"])
        config = load_config(arguments["config"])
        train, test = load_datasets(config.dataset)
        data = select_split(train, test, arguments.get("split") or "test")
        check_dims(encoder, data)
        report, components = diagnose(
            encoder, head, data.examples, checkpoint=os.path.abspath(arguments["checkpoint"])
        )
        written = write_diagnostics(report, components, arguments["out"])
        message = (
            f"rank(H) = {report.h.rank}, rank(Z) = {report.z.rank}, "
            f"rank deficit = {report.rank_deficit}; wrote `{written[0]}`"
        )
        return CommandReturn(message=message, outputs=written)
