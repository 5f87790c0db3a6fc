from .spectrum import SpectrumReport, covariance_spectrum, numerical_rank, rank_deficit
from .nullspace import right_pseudo_inverse, null_space_decompose
from .report import DiagnosticsReport, diagnose, write_diagnostics
