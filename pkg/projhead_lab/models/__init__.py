from .encoder import Encoder, init_encoder
from .heads import (
    Head,
    HeadKind,
    HeadStructure,
    init_head,
    head_parameters,
    head_load,
    freeze_head,
    pca_head,
    parameter_checksum,
)
from .forward import ForwardPass, forward, encode, extract_features
from .checkpoint import save_checkpoint, load_checkpoint
