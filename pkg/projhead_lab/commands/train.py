import argparse
import os
from .base import CommandDefine, CommandReturn
from ..core.config import ExperimentConfig, load_config
from ..core.experiment import execute_run
from ..env import Env, LOG
from ..utils.logger import RunLogger


def run_root(env: Env, config: ExperimentConfig, out: str | None = None) -> str:
    return os.path.abspath(out or config.output.dir or os.path.join(env.output_root, config.name))


def seed_dir(root: str, seed: int) -> str:
    return os.path.join(root, f"seed-{seed}")


class TrainCommand(CommandDefine):
    @classmethod
    def init(cls) -> "TrainCommand":
        return cls(
            name="train",
            description="Train an encoder and head under one regime, one run directory per seed.",
        )

    def add_arguments(self, parser: argparse.ArgumentParser):
        parser.add_argument("config", help="experiment config (JSON, dotted or nested keys)")
        parser.add_argument("--seed", type=int, action="append", help="train only these seeds")
        parser.add_argument("--out", help="output directory (default: <output_root>/<name>)")
        parser.add_argument("--force", action="store_true", help="overwrite an existing run")

    async def _execute(self, env: Env, arguments: dict) -> CommandReturn:
        config = load_config(arguments["config"])
        seeds = arguments.get("seed") or config.seeds
        root = run_root(env, config, arguments.get("out"))
        logger = RunLogger(LOG)
        outputs, lines = [], []
        for seed in seeds:
            directory = seed_dir(root, seed)
            summary = execute_run(config, seed, directory, force=arguments.get("force", False), logger=logger)
            outputs.append(directory)
            knn = summary.get("accuracy", {}).get("knn:h")
            detail = f", KNN on h {knn:.4f}" if knn is not None else ""
            lines.append(f"- seed {seed}: `{directory}`{detail}")
        return CommandReturn(message="Trained runs:\n" + "\n".join(lines), outputs=outputs)
