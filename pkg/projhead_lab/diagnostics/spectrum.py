"""Covariance eigenspectra and numerical ranks of feature matrices.

Ranks follow the matrix_rank convention: singular values above
σ_max · max(rows, cols) · machine epsilon. Spectra and rank deficits are
taken on mean-centered features, so constant offsets such as head biases
never add rank.
"""

from dataclasses import dataclass
import numpy as np
import scipy.linalg
from ..errors import ShapeError

EPS = np.finfo(np.float64).eps


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray
    rank: int
    tolerance: float
    space: str = "H"

    def to_json(self):
        return {
            "space": self.space,
            "eigenvalues": self.eigenvalues.tolist(),
            "rank": self.rank,
            "tolerance": self.tolerance,
        }


def _as_matrix(values, what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ShapeError(f"{what} must be a matrix, got shape {arr.shape}")
    return arr


def center(features) -> np.ndarray:
    features = _as_matrix(features, "features")
    return features - features.mean(axis=0, keepdims=True)


def default_tolerance(singular_values: np.ndarray, shape: tuple[int, int]) -> float:
    if singular_values.size == 0:
        return 0.0
    return float(singular_values.max() * max(shape) * EPS)


def numerical_rank(matrix, tol: float | None = None) -> int:
    matrix = _as_matrix(matrix, "matrix")
    if matrix.size == 0:
        raise ShapeError("numerical rank of an empty matrix")
    singular = scipy.linalg.svd(matrix, compute_uv=False)
    if tol is None:
        tol = default_tolerance(singular, matrix.shape)
    return int(np.sum(singular > tol))


def covariance_spectrum(features, space: str = "H") -> SpectrumReport:
    """Descending eigenvalues of FᵀF/(N−1) for mean-centered F, one per column."""
    features = _as_matrix(features, "features")
    n, q = features.shape
    if n < 2:
        raise ShapeError(f"covariance spectrum needs at least 2 rows, got {n}")
    centered = center(features)
    singular = scipy.linalg.svd(centered, compute_uv=False)
    tolerance = default_tolerance(singular, centered.shape)
    eigenvalues = np.zeros(q)
    eigenvalues[: singular.size] = singular**2 / (n - 1)
    eigenvalues = np.sort(np.clip(eigenvalues, 0.0, None))[::-1]
    return SpectrumReport(
        eigenvalues=eigenvalues,
        rank=int(np.sum(singular > tolerance)),
        tolerance=tolerance,
        space=space,
    )


def rank_deficit(h_features, z_features) -> int:
    """rank(H) − rank(Z) on centered features; negative values are reported as they are."""
    h_features = _as_matrix(h_features, "H")
    z_features = _as_matrix(z_features, "Z")
    if h_features.shape[0] != z_features.shape[0]:
        raise ShapeError(
            f"H has {h_features.shape[0]} rows but Z has {z_features.shape[0]}"
        )
    return numerical_rank(center(h_features)) - numerical_rank(center(z_features))
