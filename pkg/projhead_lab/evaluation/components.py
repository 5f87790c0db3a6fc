from typing import Iterable, Literal
import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from .knn import knn_eval
from .probe import ProbeConfig, linear_probe
from .report import EvalReport
from ..data.datasets import LabeledDataset
from ..diagnostics.nullspace import null_space_decompose
from ..env import LOG
from ..errors import NumericalError
from ..models.encoder import Encoder
from ..models.forward import extract_features
from ..models.heads import Head

COMPONENTS = ("h", "z", "h_r", "h_n")
METHODS = ("knn", "linear")


class EvalConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    knn_k: int | None = Field(None, ge=1)  # None: min(200, train/10)
    probe: ProbeConfig = Field(default_factory=ProbeConfig)
    every: int = Field(0, ge=0)  # KNN snapshot cadence in epochs, 0 disables
    components: list[Literal["h", "z", "h_r", "h_n"]] = list(COMPONENTS)
    methods: list[Literal["knn", "linear"]] = list(METHODS)


def feature_components(
    encoder: Encoder,
    head: Head,
    examples: np.ndarray,
    components: Iterable[str] = COMPONENTS,
) -> dict[str, np.ndarray]:
    """Eval-mode h and z plus, when the head has a full-row-rank linear map, h_r and h_n."""
    h, z = extract_features(encoder, head, examples)
    out = {"h": h, "z": z}
    wanted = set(components)
    if wanted & {"h_r", "h_n"}:
        linear = head.linear_map()
        if linear is not None:
            try:
                out["h_r"], out["h_n"] = null_space_decompose(linear[0], h)
            except NumericalError as e:
                LOG.warning(f"{head.kind} head map has no range/null split: {e}")
    return {k: v for k, v in out.items() if k in wanted}


def component_eval(
    encoder: Encoder,
    head: Head,
    train: LabeledDataset,
    test: LabeledDataset,
    config: EvalConfig | None = None,
) -> list[EvalReport]:
    """Every requested evaluator on every requested component, all on the same split.

    h_r and h_n are omitted with a warning for heads with no linear map on h
    and for maps that are not full row rank.
    """
    config = config or EvalConfig()
    train_parts = feature_components(encoder, head, train.examples, config.components)
    test_parts = feature_components(encoder, head, test.examples, config.components)
    missing = [c for c in config.components if c not in train_parts]
    if missing:
        LOG.warning(f"skipping {', '.join(missing)} for the {head.kind} head")

    num_classes = max(train.num_classes, test.num_classes)
    reports = []
    for name in config.components:
        if name not in train_parts:
            continue
        for method in config.methods:
            if method == "knn":
                report = knn_eval(
                    train_parts[name], train.labels, test_parts[name], test.labels,
                    k=config.knn_k, feature=name, num_classes=num_classes,
                )
            else:
                report = linear_probe(
                    train_parts[name], train.labels, test_parts[name], test.labels,
                    config=config.probe, feature=name, num_classes=num_classes,
                )
            reports.append(report)
    return reports
