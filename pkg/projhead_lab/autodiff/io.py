"""PHT1 tensor files: b"PHT1", u32 rows, u32 cols (little-endian), then
rows×cols little-endian float64 values in row-major order."""

import numpy as np
from .tensor import Tensor, as_tensor
from ..constants import PHT_MAGIC
from ..errors import FormatError

_HEADER = 4 + 8


def tensor_to_bytes(tensor) -> bytes:
    arr = as_tensor(tensor)
    rows, cols = arr.shape
    header = PHT_MAGIC + np.array([rows, cols], dtype="<u4").tobytes()
    return header + np.ascontiguousarray(arr, dtype="<f8").tobytes()


def tensor_from_bytes(raw: bytes) -> Tensor:
    if len(raw) < _HEADER or raw[:4] != PHT_MAGIC:
        raise FormatError("not a PHT1 tensor: bad magic")
    rows, cols = (int(v) for v in np.frombuffer(raw[4:_HEADER], dtype="<u4"))
    expected = _HEADER + rows * cols * 8
    if len(raw) != expected:
        raise FormatError(
            f"PHT1 payload for {rows}x{cols} needs {expected} bytes, got {len(raw)}"
        )
    data = np.frombuffer(raw[_HEADER:], dtype="<f8").astype(np.float64)
    return data.reshape(rows, cols)


def write_tensor(path: str, tensor):
    with open(path, "wb") as f:
        f.write(tensor_to_bytes(tensor))


def read_tensor(path: str) -> Tensor:
    with open(path, "rb") as f:
        return tensor_from_bytes(f.read())
