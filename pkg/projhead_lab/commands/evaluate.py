import argparse
import csv
import json
import os
from .base import CommandDefine, CommandReturn
from ..constants import MANIFEST_FILE
from ..core.config import load_config
from ..core.experiment import check_dims, load_datasets
from ..env import Env
from ..errors import ConfigError
from ..evaluation.components import COMPONENTS, METHODS, EvalConfig, component_eval
from ..models.checkpoint import load_checkpoint

CSV_COLUMNS = ["regime", "feature", "method", "accuracy"]


def _parse_list(raw: str | None, allowed: tuple[str, ...], what: str) -> list[str]:
    if not raw or raw == "all":
        return list(allowed)
    values = [v.strip() for v in raw.split(",") if v.strip()]
    unknown = [v for v in values if v not in allowed]
    if unknown:
        raise ConfigError(f"unknown {what} {unknown}; choose from {', '.join(allowed)}")
    return values


def regime_of(checkpoint: str) -> str:
    """Regime recorded in the manifest of the run that wrote the checkpoint, if any."""
    run_dir = os.path.dirname(os.path.dirname(os.path.abspath(checkpoint)))
    path = os.path.join(run_dir, MANIFEST_FILE)
    if not os.path.exists(path):
        return "unknown"
    with open(path) as f:
        return json.load(f)["config"]["schedule"]["regime"]


def write_csv(path: str, regime: str, reports) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(CSV_COLUMNS)
        for r in reports:
            writer.writerow([regime, r.feature, r.method, f"{r.accuracy:.6f}"])
    return path


class EvaluateCommand(CommandDefine):
    @classmethod
    def init(cls) -> "EvaluateCommand":
        return cls(
            name="eval",
            description="KNN and linear-probe accuracy of h, z, h_r and h_n for a checkpoint.",
        )

    def add_arguments(self, parser: argparse.ArgumentParser):
        parser.add_argument("checkpoint", help="checkpoint directory")
        parser.add_argument("config", help="experiment config naming the dataset and eval settings")
        parser.add_argument("--components", default="all", help="comma list of h,z,h_r,h_n")
        parser.add_argument("--method", default="all", help="knn, linear or all")
        parser.add_argument("--k", type=int, help="KNN neighbours (default min(200, train/10))")
        parser.add_argument("--regime", help="regime label for the CSV (default: from the run manifest)")
        parser.add_argument("--out", required=True, help="CSV output path")

    async def _execute(self, env: Env, arguments: dict) -> CommandReturn:
        encoder, head = load_checkpoint(arguments["checkpoint"])
        config = load_config(arguments["config"])
        components = _parse_list(arguments.get("components"), COMPONENTS, "components")
        methods = _parse_list(arguments.get("method"), METHODS, "methods")
        if {"h_r", "h_n"} & set(components) and head.linear_map() is None:
            raise ConfigError(f"a {head.kind} head has no linear map on h, so h_r/h_n are undefined")

        update = {"components": components, "methods": methods}
        if arguments.get("k") is not None:
            update["knn_k"] = arguments["k"]
        eval_config = EvalConfig.model_validate({**config.eval.model_dump(), **update})

        train, test = load_datasets(config.dataset)
        check_dims(encoder, train)
        reports = component_eval(encoder, head, train, test, eval_config)
        regime = arguments.get("regime") or regime_of(arguments["checkpoint"])
        path = write_csv(arguments["out"], regime, reports)
        rows = "\n".join(f"- {r.method} on {r.feature}: {r.accuracy:.4f}" for r in reports)
        return CommandReturn(message=f"Wrote `{path}`\n{rows}", outputs=[path])
