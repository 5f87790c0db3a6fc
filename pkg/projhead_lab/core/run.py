import json
import os
import time
import uuid
from dataclasses import dataclass, field
from typing import Literal
from .config import ExperimentConfig, config_hash
from .records import EpochRecord, EvalRecord, RunFailed
from .. import __version__
from ..constants import MANIFEST_FILE, METRICS_FILE
from ..errors import RunExistsError
from ..utils.logger import RunLogger
from ..utils.paths import atomic_write_text, ensure_dir, relative_to


def _timestamp() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%S%z")


@dataclass
class Run:
    """One training run: its directory, manifest, metrics stream and log."""

    config: ExperimentConfig
    run_dir: str
    seed: int = 0
    force: bool = False
    run_id: str = field(default_factory=lambda: str(uuid.uuid4()))
    logger: RunLogger | None = None

    artifacts: list[str] = field(default_factory=list)
    status: Literal["created", "running", "completed", "failed"] = "created"
    started_at: str | None = None
    finished_at: str | None = None
    failure: RunFailed | None = None

    def __post_init__(self):
        self.run_dir = os.path.abspath(self.run_dir)
        self.config_hash = config_hash(self.config)

    @property
    def manifest_path(self) -> str:
        return os.path.join(self.run_dir, MANIFEST_FILE)

    @property
    def metrics_path(self) -> str:
        return os.path.join(self.run_dir, METRICS_FILE)

    def log(self, message: str, level: Literal["info", "debug", "warning", "error"] = "info"):
        if self.logger is None:
            return
        getattr(self.logger, level)(self.run_id, message)

    def _check_existing(self):
        if not os.path.exists(self.manifest_path):
            return
        with open(self.manifest_path) as f:
            previous = json.load(f)
        if self.force:
            self.log(f"Overwriting run {previous.get('run_id')} in {self.run_dir}", level="warning")
            return
        if previous.get("config_hash") == self.config_hash:
            raise RunExistsError(
                f"{self.run_dir} already holds a run of this config (hash {self.config_hash[:12]}); pass --force to re-run"
            )
        raise RunExistsError(
            f"{self.run_dir} already holds a run of a different config; choose another directory or pass --force"
        )

    def start(self):
        self._check_existing()
        ensure_dir(self.run_dir)
        # a forced re-run starts a fresh metrics stream
        with open(self.metrics_path, "w"):
            pass
        self.status = "running"
        self.started_at = _timestamp()
        self.add_artifact(self.metrics_path)
        self.write_manifest()
        self.log(f"Run {self.config.name} seed {self.seed} in {self.run_dir} (config {self.config_hash[:12]})")

    def emit(self, record: EpochRecord | EvalRecord):
        with open(self.metrics_path, "a") as f:
            f.write(json.dumps(record.to_json()) + "\n")

    def add_artifact(self, path: str):
        rel = relative_to(path, self.run_dir)
        if rel not in self.artifacts:
            self.artifacts.append(rel)

    def add_artifacts(self, paths: list[str]):
        for path in paths:
            self.add_artifact(path)

    def finish(self, error: Exception | None = None, stage: str = "train"):
        self.finished_at = _timestamp()
        if error is None:
            self.status = "completed"
        else:
            self.status = "failed"
            self.failure = RunFailed(stage=stage, error=error)
            self.log(f"Run failed during {stage}: {error}", level="error")
        self.write_manifest()

    def manifest(self) -> dict:
        return {
            "run_id": self.run_id,
            "config_hash": self.config_hash,
            "config": self.config.model_dump(mode="json"),
            "seed": self.seed,
            "code_version": __version__,
            "status": self.status,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "artifacts": sorted(self.artifacts),
            "failure": self.failure.to_json() if self.failure else None,
        }

    def write_manifest(self):
        atomic_write_text(self.manifest_path, json.dumps(self.manifest(), indent=2))
