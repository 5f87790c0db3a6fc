"""Regime × seed sweeps.

Runs go to `<root>/<label>/seed-<s>`. The label is the preset name, or
`<preset>-<head>` when the sweep lists a head axis; the axis splits every
preset whose head is trained into one variant per head structure. The
`fixed_pretrained` preset freezes the final head of the matching `joint` run
with the same seed, so it runs in a second wave once those have finished.
"""

import argparse
import asyncio
import csv
import json
import os
from concurrent.futures import Executor, ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal
import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.stats import spearmanr
from .base import CommandDefine, CommandReturn
from .train import seed_dir
from ..constants import CHECKPOINT_DIR, EXIT_PARTIAL_SWEEP
from ..core.config import ExperimentConfig, load_config, parse_config, with_overrides
from ..core.experiment import execute_run
from ..core.records import RunFailed
from ..env import Env, LOG
from ..errors import ConfigError
from ..utils.logger import RunLogger
from ..utils.paths import atomic_write_text

PRESETS: dict[str, dict] = {
    "no_head": {"schedule.regime": "no_head", "model.head": "none"},
    "fixed_random": {"schedule.regime": "fixed_head", "model.head": "fixed_random"},
    "directclr": {"schedule.regime": "fixed_head", "model.head": "diagonal_low_rank"},
    "fixed_pretrained": {"schedule.regime": "fixed_head", "model.head": "fixed_pretrained"},
    "pca_top": {"schedule.regime": "pca_refresh", "model.head": "pca_linear", "schedule.pca_which": "top"},
    "pca_bottom": {"schedule.regime": "pca_refresh", "model.head": "pca_linear", "schedule.pca_which": "bottom"},
    "slow_single": {"schedule.regime": "slow_single"},
    "slow_optimal": {"schedule.regime": "slow_optimal"},
    "joint": {"schedule.regime": "joint"},
    "bilevel": {"schedule.regime": "bilevel"},
}
SECOND_WAVE = {"fixed_pretrained"}
HEAD_AXIS = {"joint", "bilevel", "slow_single", "slow_optimal", "fixed_pretrained"}


class SweepConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = "sweep"
    base: str | dict  # path (relative to the sweep file) or an inline experiment config
    presets: list[str] = Field(min_length=1)
    seeds: list[int] | None = None  # None: the base config's seeds
    heads: list[Literal["linear", "nonlinear"]] = Field(default_factory=list)
    overrides: dict[str, dict] = Field(default_factory=dict)  # per preset or label, dotted
    workers: int | None = Field(None, ge=1)
    out: str | None = None


@dataclass
class SweepJob:
    label: str
    seed: int
    config: ExperimentConfig
    run_dir: str
    depends_on: str | None = None  # label of the run whose final head is frozen


@dataclass
class SweepResult:
    summaries: dict[tuple[str, int], dict] = field(default_factory=dict)
    failures: dict[tuple[str, int], RunFailed] = field(default_factory=dict)


def variant_label(preset: str, head: str | None = None) -> str:
    return preset if head is None else f"{preset}-{head}"


def split_label(label: str) -> tuple[str, str | None]:
    preset, _, head = label.partition("-")
    return preset, head or None


def sweep_labels(sweep: SweepConfig) -> list[str]:
    labels = []
    for preset in sweep.presets:
        if sweep.heads and preset in HEAD_AXIS:
            labels.extend(variant_label(preset, head) for head in sweep.heads)
        else:
            labels.append(preset)
    return labels


def load_sweep(path: str) -> tuple[SweepConfig, ExperimentConfig]:
    with open(path) as f:
        sweep = SweepConfig.model_validate(json.load(f))
    if isinstance(sweep.base, str):
        base = load_config(os.path.join(os.path.dirname(os.path.abspath(path)), sweep.base))
    else:
        base = parse_config(sweep.base)
    return sweep, base


def plan_jobs(sweep: SweepConfig, base: ExperimentConfig, root: str) -> list[SweepJob]:
    unknown = [p for p in sweep.presets if p not in PRESETS]
    if unknown:
        raise ConfigError(f"unknown sweep presets {unknown}; choose from {', '.join(PRESETS)}")
    if SECOND_WAVE & set(sweep.presets) and "joint" not in sweep.presets:
        raise ConfigError("the fixed_pretrained preset needs the joint preset in the same sweep")
    seeds = sweep.seeds or base.seeds
    jobs = []
    for label in sweep_labels(sweep):
        preset, head = split_label(label)
        for seed in seeds:
            overrides = dict(PRESETS[preset])
            depends_on = None
            if preset in SECOND_WAVE:
                depends_on = variant_label("joint", head)
                joint_dir = seed_dir(os.path.join(root, depends_on), seed)
                overrides["model.pretrained_checkpoint"] = os.path.join(joint_dir, CHECKPOINT_DIR, "final")
            elif head is not None:
                overrides["model.head"] = head
            overrides.update(sweep.overrides.get(preset, {}))
            overrides.update(sweep.overrides.get(label, {}))
            overrides["seeds"] = [seed]
            config = with_overrides(base, overrides)
            run_dir = seed_dir(os.path.join(root, label), seed)
            jobs.append(SweepJob(label, seed, config, run_dir, depends_on))
    return jobs


def _sweep_child(config_json: dict, seed: int, run_dir: str, force: bool) -> dict:
    config = ExperimentConfig.model_validate(config_json)
    return execute_run(config, seed, run_dir, force=force, logger=RunLogger(LOG))


def _executor(workers: int) -> Executor:
    if workers == 1:
        return ThreadPoolExecutor(max_workers=1)
    return ProcessPoolExecutor(max_workers=workers)


async def run_sweep(jobs: list[SweepJob], workers: int, force: bool = False) -> SweepResult:
    """Run every job, first wave then second; failures are recorded, never raised."""
    result = SweepResult()
    loop = asyncio.get_running_loop()
    first = [j for j in jobs if j.depends_on is None]
    second = [j for j in jobs if j.depends_on is not None]

    with _executor(workers) as pool:
        for wave in (first, second):
            runnable = []
            for job in wave:
                if job.depends_on is not None and (job.depends_on, job.seed) not in result.summaries:
                    error = RuntimeError(f"{job.depends_on} run for seed {job.seed} did not finish")
                    result.failures[(job.label, job.seed)] = RunFailed("sweep", error)
                    continue
                runnable.append(job)
            outcomes = await asyncio.gather(
                *[
                    loop.run_in_executor(
                        pool, _sweep_child, j.config.model_dump(mode="json"), j.seed, j.run_dir, force
                    )
                    for j in runnable
                ],
                return_exceptions=True,
            )
            for job, outcome in zip(runnable, outcomes):
                key = (job.label, job.seed)
                if isinstance(outcome, BaseException):
                    LOG.error(f"sweep run {job.label}/seed-{job.seed} failed: {outcome}")
                    result.failures[key] = RunFailed("train", outcome)
                else:
                    result.summaries[key] = outcome
    return result


def _mean_std(values: list[float]) -> tuple[float | None, float | None]:
    if not values:
        return None, None
    std = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
    return float(np.mean(values)), std


def summarize(labels: list[str], result: SweepResult) -> dict:
    """Per-label mean ± std over seeds, plus the rank-deficit/KNN rank correlation."""
    rows = []
    for label in labels:
        preset, head = split_label(label)
        runs = [s for (p, _), s in sorted(result.summaries.items()) if p == label]
        knn = [s["accuracy"]["knn:h"] for s in runs if "knn:h" in s.get("accuracy", {})]
        linear = [s["accuracy"]["linear:h"] for s in runs if "linear:h" in s.get("accuracy", {})]
        deficits = [s["rank_deficit"] for s in runs if "rank_deficit" in s]
        knn_mean, knn_std = _mean_std(knn)
        linear_mean, linear_std = _mean_std(linear)
        rows.append(
            {
                "preset": label,
                "regime": PRESETS[preset]["schedule.regime"],
                "head": head or "",
                "runs": len(runs),
                "failures": sum(1 for (p, _) in result.failures if p == label),
                "knn_mean": knn_mean,
                "knn_std": knn_std,
                "linear_mean": linear_mean,
                "linear_std": linear_std,
                "rank_deficit_mean": float(np.mean(deficits)) if deficits else None,
            }
        )

    paired = [(r["rank_deficit_mean"], r["knn_mean"]) for r in rows
              if r["rank_deficit_mean"] is not None and r["knn_mean"] is not None]
    correlation = None
    if len(paired) >= 3:
        rho = spearmanr([p[0] for p in paired], [p[1] for p in paired]).statistic
        correlation = None if np.isnan(rho) else float(rho)
    return {
        "rows": rows,
        "rank_deficit_knn_spearman": correlation,
        "failures": [
            {"preset": p, "seed": s, **f.to_json()} for (p, s), f in sorted(result.failures.items())
        ],
    }


def _fmt(mean: float | None, std: float | None) -> str:
    if mean is None:
        return "-"
    return f"{100 * mean:.2f} ± {100 * std:.2f}"


def write_summary(root: str, summary: dict) -> list[str]:
    json_path = os.path.join(root, "sweep_summary.json")
    atomic_write_text(json_path, json.dumps(summary, indent=2))
    csv_path = os.path.join(root, "summary.csv")
    with open(csv_path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(summary["rows"][0].keys()))
        writer.writeheader()
        writer.writerows(summary["rows"])
    return [json_path, csv_path]


def render_table(summary: dict) -> str:
    lines = [
        "| preset | runs | KNN on h (%) | linear on h (%) | rank deficit |",
        "|---|---|---|---|---|",
    ]
    for r in summary["rows"]:
        deficit = "-" if r["rank_deficit_mean"] is None else f"{r['rank_deficit_mean']:.1f}"
        lines.append(
            f"| {r['preset']} | {r['runs']} | {_fmt(r['knn_mean'], r['knn_std'])} "
            f"| {_fmt(r['linear_mean'], r['linear_std'])} | {deficit} |"
        )
    rho = summary["rank_deficit_knn_spearman"]
    if rho is not None:
        lines.append(f"\nSpearman(rank deficit, KNN) = {rho:.3f}")
    return "\n".join(lines)


class SweepCommand(CommandDefine):
    @classmethod
    def init(cls) -> "SweepCommand":
        return cls(
            name="sweep",
            description="Run presets × seeds and summarize them as mean ± std over seeds.",
        )

    def add_arguments(self, parser: argparse.ArgumentParser):
        parser.add_argument("sweep", help="sweep config (JSON)")
        parser.add_argument("--out", help="sweep root directory")
        parser.add_argument("--workers", type=int, help="parallel runs (capped by PHL_THREADS)")
        parser.add_argument("--force", action="store_true", help="overwrite existing runs")

    async def _execute(self, env: Env, arguments: dict) -> CommandReturn:
        sweep, base = load_sweep(arguments["sweep"])
        root = os.path.abspath(
            arguments.get("out") or sweep.out or os.path.join(env.output_root, sweep.name)
        )
        jobs = plan_jobs(sweep, base, root)
        workers = min(arguments.get("workers") or sweep.workers or env.threads, env.threads)
        LOG.info(f"Sweep {sweep.name}: {len(jobs)} runs on {workers} workers into {root}")

        result = await run_sweep(jobs, max(1, workers), force=arguments.get("force", False))
        os.makedirs(root, exist_ok=True)
        summary = summarize(sweep_labels(sweep), result)
        written = write_summary(root, summary)
        message = render_table(summary)
        if result.failures:
            failed = ", ".join(f"{p}/seed-{s}" for p, s in sorted(result.failures))
            return CommandReturn(
                exit_code=EXIT_PARTIAL_SWEEP,
                message=f"{message}\n\n{len(result.failures)} runs failed: {failed}",
                outputs=written,
            )
        return CommandReturn(message=message, outputs=written)
