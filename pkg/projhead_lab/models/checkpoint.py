"""Checkpoint directories: one PHT1 file per tensor plus a text manifest.

manifest.txt lines are `key value` pairs; tensors are listed as
`tensor <name> <rows> <cols>` and stored in `<name>.pht`.
"""

import os
from .encoder import Encoder
from .heads import Head, HeadKind, HeadStructure
from ..autodiff.io import read_tensor, write_tensor
from ..constants import CHECKPOINT_MANIFEST
from ..errors import FormatError
from ..utils.paths import atomic_write_text, ensure_dir


def save_checkpoint(directory: str, encoder: Encoder, head: Head) -> list[str]:
    """Write the checkpoint; returns the paths of every file written."""
    ensure_dir(directory)
    tensors = {f"f.{k}": encoder.params[k] for k in encoder.param_names()}
    tensors.update({f"g.{k}": head.params[k] for k in head.param_names()})
    tensors.update({f"g.buffer.{k}": v for k, v in sorted(head.buffers.items())})

    lines = [
        "# projhead-lab checkpoint",
        f"encoder.sizes {','.join(str(s) for s in encoder.sizes)}",
        f"head.kind {head.kind.value}",
        f"head.structure {head.structure.value}",
        f"head.m {head.m}",
        f"head.d {head.d}",
        f"head.hidden {head.hidden if head.hidden is not None else '-'}",
        f"head.trainable {'true' if head.trainable else 'false'}",
    ]
    written = []
    for name, value in tensors.items():
        path = os.path.join(directory, f"{name}.pht")
        write_tensor(path, value)
        written.append(path)
        lines.append(f"tensor {name} {value.shape[0]} {value.shape[1]}")
    manifest_path = os.path.join(directory, CHECKPOINT_MANIFEST)
    atomic_write_text(manifest_path, "\n".join(lines) + "\n")
    written.append(manifest_path)
    return written


def read_manifest(directory: str) -> tuple[dict[str, str], list[tuple[str, int, int]]]:
    path = os.path.join(directory, CHECKPOINT_MANIFEST)
    if not os.path.exists(path):
        raise FormatError(f"no checkpoint manifest at {path}")
    meta, tensors = {}, []
    with open(path) as f:
        for raw in f:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if parts[0] == "tensor":
                if len(parts) != 4:
                    raise FormatError(f"bad tensor line in {path}: {line!r}")
                tensors.append((parts[1], int(parts[2]), int(parts[3])))
            elif len(parts) == 2:
                meta[parts[0]] = parts[1]
            else:
                raise FormatError(f"bad manifest line in {path}: {line!r}")
    return meta, tensors


def load_checkpoint(directory: str) -> tuple[Encoder, Head]:
    meta, listed = read_manifest(directory)
    try:
        sizes = [int(s) for s in meta["encoder.sizes"].split(",")]
        kind = HeadKind(meta["head.kind"])
        structure = HeadStructure(meta["head.structure"])
        m, d = int(meta["head.m"]), int(meta["head.d"])
        hidden = None if meta["head.hidden"] == "-" else int(meta["head.hidden"])
        trainable = meta["head.trainable"] == "true"
    except (KeyError, ValueError) as e:
        raise FormatError(f"incomplete checkpoint manifest in {directory}: {e}") from e

    tensors = {}
    for name, rows, cols in listed:
        value = read_tensor(os.path.join(directory, f"{name}.pht"))
        if value.shape != (rows, cols):
            raise FormatError(f"tensor {name} is {value.shape}, manifest says {(rows, cols)}")
        tensors[name] = value

    encoder = Encoder(sizes)
    for k in encoder.param_names():
        if f"f.{k}" not in tensors:
            raise FormatError(f"checkpoint {directory} lacks encoder tensor {k}")
        encoder.params[k] = tensors[f"f.{k}"]
    head = Head(kind, m, d, structure, hidden=hidden, trainable=trainable)
    for k in head.param_names():
        if f"g.{k}" not in tensors:
            raise FormatError(f"checkpoint {directory} lacks head tensor {k}")
        head.params[k] = tensors[f"g.{k}"]
    prefix = "g.buffer."
    head.buffers = {n[len(prefix):]: v for n, v in tensors.items() if n.startswith(prefix)}
    return encoder, head
