import json
import os
from dataclasses import dataclass, field
import numpy as np
from .nullspace import null_space_decompose
from .spectrum import SpectrumReport, covariance_spectrum, rank_deficit
from ..autodiff.io import write_tensor
from ..env import LOG
from ..errors import NumericalError
from ..models.encoder import Encoder
from ..models.forward import extract_features
from ..models.heads import Head, HeadStructure
from ..utils.paths import atomic_write_text, ensure_dir


@dataclass
class DiagnosticsReport:
    checkpoint: str
    head_kind: str
    num_examples: int
    h: SpectrumReport
    z: SpectrumReport
    rank_deficit: int
    nullspace: dict | None = None
    linear_rank_check: str | None = None
    artifacts: list[str] = field(default_factory=list)

    def to_json(self):
        return {
            "checkpoint": self.checkpoint,
            "head_kind": self.head_kind,
            "num_examples": self.num_examples,
            "m": int(self.h.eigenvalues.shape[0]),
            "d": int(self.z.eigenvalues.shape[0]),
            "h": self.h.to_json(),
            "z": self.z.to_json(),
            "rank_h": self.h.rank,
            "rank_z": self.z.rank,
            "rank_deficit": self.rank_deficit,
            "nullspace": self.nullspace,
            "linear_rank_check": self.linear_rank_check,
            "artifacts": self.artifacts,
        }


def _split_features(a: np.ndarray, approximate: bool, h: np.ndarray, components: dict) -> dict:
    summary = {"map_shape": list(a.shape), "approximate": approximate}
    try:
        h_r, h_n = null_space_decompose(a, h)
    except NumericalError as e:
        summary["error"] = str(e)
        return summary
    components["h_r"], components["h_n"] = h_r, h_n
    total = float(np.sum(h * h)) or 1.0
    summary["range_energy"] = float(np.sum(h_r * h_r)) / total
    summary["null_energy"] = float(np.sum(h_n * h_n)) / total
    summary["max_residual"] = float(np.abs(h_n @ a.T).max())
    return summary


def diagnose(
    encoder: Encoder,
    head: Head,
    examples: np.ndarray,
    checkpoint: str = "",
) -> tuple[DiagnosticsReport, dict[str, np.ndarray]]:
    """Spectra, ranks and (for heads with a linear map on h) the range/null split of H.

    Returns the report and the feature components: h and z always, h_r and
    h_n when the head has a linear map.
    """
    h, z = extract_features(encoder, head, examples)
    h_spec = covariance_spectrum(h, space="H")
    z_spec = covariance_spectrum(z, space="Z")
    deficit = rank_deficit(h, z)
    rank_check = None
    if head.structure in (HeadStructure.PROJECTION, HeadStructure.AFFINE):
        # a linear map cannot raise the rank; a violation means the tolerances disagree
        rank_check = "ok" if deficit >= 0 else "violated"
        if deficit < 0:
            LOG.error(
                f"linear {head.kind} head raised the rank: rank(Z)={z_spec.rank} > rank(H)={h_spec.rank}"
            )

    components = {"h": h, "z": z}
    nullspace = None
    linear = head.linear_map()
    if linear is not None:
        nullspace = _split_features(linear[0], linear[1], h, components)
    report = DiagnosticsReport(
        checkpoint=checkpoint,
        head_kind=str(head.kind),
        num_examples=int(h.shape[0]),
        h=h_spec,
        z=z_spec,
        rank_deficit=deficit,
        nullspace=nullspace,
        linear_rank_check=rank_check,
    )
    return report, components


def write_diagnostics(
    report: DiagnosticsReport,
    components: dict[str, np.ndarray],
    out_dir: str,
) -> list[str]:
    """diagnostics.json plus h_r.pht / h_n.pht when present; returns written paths."""
    ensure_dir(out_dir)
    written = []
    for name in ("h_r", "h_n"):
        if name in components:
            path = os.path.join(out_dir, f"{name}.pht")
            write_tensor(path, components[name])
            written.append(path)
    report.artifacts = [os.path.basename(p) for p in written]
    report_path = os.path.join(out_dir, "diagnostics.json")
    atomic_write_text(report_path, json.dumps(report.to_json(), indent=2))
    return [report_path] + written
