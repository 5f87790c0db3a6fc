import argparse
import os
from .base import CommandDefine, CommandReturn
from ..core.config import load_config
from ..core.experiment import check_dims, load_datasets
from ..data.datasets import LabeledDataset, export_dataset
from ..env import Env
from ..models.checkpoint import load_checkpoint
from ..models.forward import extract_features
from ..utils.paths import ensure_dir


def export_features(encoder, head, dataset: LabeledDataset, out_dir: str, prefix: str) -> list[str]:
    """`<prefix>.h.pht` and `<prefix>.z.pht`, each with a `.labels` sidecar."""
    h, z = extract_features(encoder, head, dataset.examples)
    written = []
    for name, features in (("h", h), ("z", z)):
        path = os.path.join(out_dir, f"{prefix}.{name}.pht")
        export_dataset(
            LabeledDataset(features, dataset.labels, dataset.num_classes, "exported"), path
        )
        written += [path, path + ".labels"]
    return written


class ExportFeaturesCommand(CommandDefine):
    @classmethod
    def init(cls) -> "ExportFeaturesCommand":
        return cls(
            name="export-features",
            description="Dump eval-mode h and z features with labels for external plotting.",
        )

    def add_arguments(self, parser: argparse.ArgumentParser):
        parser.add_argument("checkpoint", help="checkpoint directory")
        parser.add_argument("config", help="experiment config naming the dataset")
        parser.add_argument("--out", required=True, help="output directory")

    async def _execute(self, env: Env, arguments: dict) -> CommandReturn:
        encoder, head = load_checkpoint(arguments["checkpoint"])
        config = load_config(arguments["config"])
        train, test = load_datasets(config.dataset)
        check_dims(encoder, train)
        out_dir = ensure_dir(arguments["out"])
        written = export_features(encoder, head, train, out_dir, "train")
        written += export_features(encoder, head, test, out_dir, "test")
        return CommandReturn(message=f"Wrote {len(written)} files to `{out_dir}`", outputs=written)
