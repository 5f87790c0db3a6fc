from .report import EvalReport
from .knn import knn_eval, default_k
from .probe import ProbeConfig, linear_probe
from .components import EvalConfig, component_eval, feature_components
