"""Cosine k-nearest-neighbour classification of frozen features.

Neighbours are ranked by cosine similarity with ties going to the lower
train index. The vote picks the most frequent class, then the larger summed
similarity, then the smaller class index. Train rows of zero norm never act
as neighbours; a zero-norm test row has similarity 0 to every train row.
"""

import numpy as np
from .report import EvalReport
from ..constants import KNN_MAX_K
from ..errors import ConfigError, ShapeError


def default_k(train_size: int) -> int:
    return min(KNN_MAX_K, max(1, train_size // 10))


def _unit_rows(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    nonzero = norms[:, 0] > 0
    unit = np.zeros_like(x)
    unit[nonzero] = x[nonzero] / norms[nonzero]
    return unit, nonzero


def knn_predict(
    train_feats: np.ndarray,
    train_labels: np.ndarray,
    test_feats: np.ndarray,
    k: int,
    num_classes: int,
    chunk: int = 512,
) -> np.ndarray:
    train_unit, usable = _unit_rows(np.asarray(train_feats, dtype=np.float64))
    test_unit, _ = _unit_rows(np.asarray(test_feats, dtype=np.float64))
    if int(usable.sum()) < k:
        raise ConfigError(f"k={k} exceeds the {int(usable.sum())} usable (non-zero) train rows")
    train_labels = np.asarray(train_labels, dtype=np.int64)

    predictions = []
    for start in range(0, test_unit.shape[0], chunk):
        sims = test_unit[start : start + chunk] @ train_unit.T
        sims[:, ~usable] = -np.inf
        neighbours = np.argsort(-sims, axis=1, kind="stable")[:, :k]
        nbr_sims = np.take_along_axis(sims, neighbours, axis=1)
        nbr_labels = train_labels[neighbours]

        rows = np.repeat(np.arange(neighbours.shape[0]), k)
        votes = np.zeros((neighbours.shape[0], num_classes))
        weight = np.zeros((neighbours.shape[0], num_classes))
        np.add.at(votes, (rows, nbr_labels.ravel()), 1.0)
        np.add.at(weight, (rows, nbr_labels.ravel()), nbr_sims.ravel())

        leading = votes == votes.max(axis=1, keepdims=True)
        weight[~leading] = -np.inf
        # argmax keeps the first maximum, i.e. the smallest class index
        predictions.append(np.argmax(weight, axis=1))
    return np.concatenate(predictions) if predictions else np.zeros(0, dtype=np.int64)


def knn_eval(
    train_feats,
    train_labels,
    test_feats,
    test_labels,
    k: int | None = None,
    feature: str = "h",
    num_classes: int | None = None,
) -> EvalReport:
    train_feats = np.asarray(train_feats, dtype=np.float64)
    test_feats = np.asarray(test_feats, dtype=np.float64)
    train_labels = np.asarray(train_labels, dtype=np.int64)
    test_labels = np.asarray(test_labels, dtype=np.int64)
    if train_feats.ndim != 2 or test_feats.ndim != 2 or train_feats.shape[1] != test_feats.shape[1]:
        raise ShapeError(f"feature shapes {train_feats.shape} and {test_feats.shape} are incompatible")
    if train_feats.shape[0] != train_labels.shape[0] or test_feats.shape[0] != test_labels.shape[0]:
        raise ShapeError("feature and label counts differ")
    if test_labels.shape[0] == 0:
        raise ShapeError("empty test set")

    n_train = train_feats.shape[0]
    k = default_k(n_train) if k is None else int(k)
    if k < 1:
        raise ConfigError(f"k must be at least 1, got {k}")
    if k > n_train:
        raise ConfigError(f"k={k} exceeds the train set size {n_train}")
    if num_classes is None:
        num_classes = int(max(train_labels.max(), test_labels.max())) + 1

    predicted = knn_predict(train_feats, train_labels, test_feats, k, num_classes)
    return EvalReport(
        feature=feature,
        method="knn",
        correct=int(np.sum(predicted == test_labels)),
        test_size=int(test_labels.shape[0]),
        train_size=n_train,
        params={"k": k, "similarity": "cosine"},
    )
