import os

USER_HOME = os.path.expanduser("~")
PROJHEAD_LAB_DIR = os.path.join(os.path.expanduser("~"), ".projhead_lab")

PHT_MAGIC = b"PHT1"

CIFAR_IMAGE_SIDE = 32
CIFAR_PIXELS = 3 * CIFAR_IMAGE_SIDE * CIFAR_IMAGE_SIDE
CIFAR10_RECORD_BYTES = 1 + CIFAR_PIXELS
CIFAR100_RECORD_BYTES = 2 + CIFAR_PIXELS
CIFAR10_CLASSES = 10

DEFAULT_TEMPERATURE = 0.5
DEFAULT_LR = 1e-3
DEFAULT_WEIGHT_DECAY = 1e-6
DEFAULT_INNER_STEPS = 5
DEFAULT_PROXIMAL = 1.0

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

BATCHNORM_MOMENTUM = 0.9
BATCHNORM_EPS = 1e-5

# nonlinear heads start with this output bias so no z row is exactly zero
HEAD_OUTPUT_BIAS = 0.1

PCA_SUBSET_SIZE = 2048
KNN_MAX_K = 200

MANIFEST_FILE = "manifest.json"
METRICS_FILE = "metrics.jsonl"
SUMMARY_FILE = "summary.json"
CHECKPOINT_MANIFEST = "manifest.txt"
CHECKPOINT_DIR = "checkpoints"
FEATURES_DIR = "features"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_PARTIAL_SWEEP = 4
