import numpy as np
import scipy.linalg
from .spectrum import default_tolerance
from ..errors import NumericalError, ShapeError


def _row_basis(a: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.size == 0:
        raise ShapeError(f"head map must be a non-empty d×m matrix, got shape {a.shape}")
    d, m = a.shape
    if d > m:
        raise NumericalError(f"a {d}×{m} map cannot have full row rank {d}")
    u, s, vt = scipy.linalg.svd(a, full_matrices=False)
    tol = default_tolerance(s, a.shape)
    if s.min() <= tol:
        raise NumericalError(
            f"map is not full row rank: σ_min = {s.min():.3e} <= tolerance {tol:.3e}"
        )
    return u, s, vt


def right_pseudo_inverse(a) -> np.ndarray:
    """A⁺ = Aᵀ(AAᵀ)⁻¹ for a full-row-rank A, via its SVD."""
    u, s, vt = _row_basis(a)
    return (vt.T / s) @ u.T


def null_space_decompose(a, h) -> tuple[np.ndarray, np.ndarray]:
    """Split h (a vector or a batch of rows) into h_r = A⁺A h and h_n = h − h_r."""
    _, _, vt = _row_basis(a)
    h = np.asarray(h, dtype=np.float64)
    vector = h.ndim == 1
    rows = h.reshape(1, -1) if vector else h
    if rows.ndim != 2 or rows.shape[1] != vt.shape[1]:
        raise ShapeError(f"features must have {vt.shape[1]} columns, got shape {h.shape}")
    h_r = (rows @ vt.T) @ vt
    h_n = rows - h_r
    if vector:
        return h_r[0], h_n[0]
    return h_r, h_n
