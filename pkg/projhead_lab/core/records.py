from dataclasses import dataclass, field


@dataclass
class EpochRecord:
    epoch: int
    regime: str
    loss: float
    inner_losses: list[float] = field(default_factory=list)
    g_delta_norm: float = 0.0
    wall_ms: float = 0.0

    def to_json(self):
        return {
            "epoch": self.epoch,
            "regime": self.regime,
            "loss": self.loss,
            "inner_losses": self.inner_losses,
            "g_delta_norm": self.g_delta_norm,
            "wall_ms": self.wall_ms,
        }


@dataclass
class EvalRecord:
    epoch: int
    regime: str
    report: dict

    def to_json(self):
        return {"epoch": self.epoch, "regime": self.regime, "eval": self.report}


@dataclass
class RunFailed:
    stage: str
    error: Exception

    def to_json(self):
        return {
            "stage": self.stage,
            "error": f"{type(self.error).__name__}: {self.error}",
        }


@dataclass
class RunMetrics:
    records: list[EpochRecord] = field(default_factory=list)
    evals: list[EvalRecord] = field(default_factory=list)

    def add(self, record: EpochRecord | EvalRecord):
        if isinstance(record, EvalRecord):
            self.evals.append(record)
            return
        if self.records and record.epoch <= self.records[-1].epoch:
            raise ValueError(
                f"epoch {record.epoch} recorded after epoch {self.records[-1].epoch}"
            )
        self.records.append(record)

    @property
    def final_loss(self) -> float | None:
        return self.records[-1].loss if self.records else None

    def to_json(self):
        return {
            "records": [r.to_json() for r in self.records],
            "evals": [e.to_json() for e in self.evals],
        }
