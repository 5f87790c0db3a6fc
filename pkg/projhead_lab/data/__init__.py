from .datasets import (
    LabeledDataset,
    SynthMixing,
    load_cifar10_binary,
    load_cifar100_binary,
    train_test_split,
    export_dataset,
    load_exported,
)
from .synthetic import SynthConfig, generate_synthetic
from .augment import AugConfig, make_view_pair
from .batches import ViewBatch, minibatches, make_views
