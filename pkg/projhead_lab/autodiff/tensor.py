import numpy as np
import numpy.typing as npt
from ..errors import ShapeError, NumericalError

Tensor = npt.NDArray[np.float64]


def as_tensor(value, name: str = "tensor") -> Tensor:
    """Coerce to a 2-D float64 matrix; vectors become a single row."""
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    elif arr.ndim != 2:
        raise ShapeError(f"{name} must be a matrix, got {arr.ndim} dimensions")
    if not np.all(np.isfinite(arr)):
        raise NumericalError(f"{name} contains non-finite values")
    return arr
