from dataclasses import dataclass, field
from typing import Literal


@dataclass
class EvalReport:
    feature: str
    method: Literal["knn", "linear"]
    correct: int
    test_size: int
    train_size: int
    params: dict = field(default_factory=dict)

    @property
    def accuracy(self) -> float:
        return self.correct / self.test_size

    def to_json(self):
        return {
            "feature": self.feature,
            "method": self.method,
            "accuracy": self.accuracy,
            "correct": self.correct,
            "test_size": self.test_size,
            "train_size": self.train_size,
            "params": self.params,
        }
