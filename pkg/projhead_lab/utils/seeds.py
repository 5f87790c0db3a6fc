from enum import IntEnum
import numpy as np


class Stream(IntEnum):
    SYNTH_CENTERS = 1
    SYNTH_MIXING = 2
    SYNTH_SAMPLES = 3
    SPLIT = 4
    ENCODER_INIT = 5
    HEAD_INIT = 6
    EPOCH_ORDER = 7
    VIEWS = 8
    PCA_SUBSET = 9
    SLOW_SUBSET = 10
    PROBE = 11


def stream_rng(seed: int, stream: Stream, *keys: int) -> np.random.Generator:
    """Generator for one purpose; the stream tag always sits right after the seed."""
    entropy = [int(seed), int(stream), *(int(k) for k in keys)]
    return np.random.default_rng(np.random.SeedSequence(entropy))
