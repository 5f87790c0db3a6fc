import os
import logging
import dataclasses
import json
from dataclasses import dataclass, field
from .constants import PROJHEAD_LAB_DIR


class TerminalDisplay:
    BLUE = "\033[94m"
    BOLD = "\033[1m"
    GREEN = "\033[92m"
    END = "\033[0m"


LOG = logging.getLogger("projhead-lab")
LOG.setLevel(os.getenv("PHL_LOG_LEVEL", "INFO").upper())
formatter = logging.Formatter(
    f"{TerminalDisplay.BOLD}{TerminalDisplay.BLUE}%(name)s |{TerminalDisplay.END}  %(levelname)s - %(asctime)s  -  %(message)s"
)
handler = logging.StreamHandler()
handler.setFormatter(formatter)
LOG.addHandler(handler)


def _env_threads() -> int:
    raw = os.getenv("PHL_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    return max(1, int(raw))


@dataclass
class Env:
    threads: int = field(default_factory=_env_threads)
    log_level: str = field(default_factory=lambda: os.getenv("PHL_LOG_LEVEL", "INFO"))
    output_root: str = field(
        default_factory=lambda: os.getenv("PHL_OUTPUT_ROOT", os.path.abspath("runs"))
    )

    def __post_init__(self):
        if self.threads < 1:
            raise ValueError("threads must be at least 1")

    @classmethod
    def from_home(cls):
        path = os.path.join(PROJHEAD_LAB_DIR, "config.json")
        if not os.path.exists(path):
            return cls()
        with open(path, "r") as f:
            overwrite_config = json.load(f)
        fields = {field.name for field in dataclasses.fields(cls)}
        filtered_config = {k: v for k, v in overwrite_config.items() if k in fields}
        # environment variables win over the home config
        if "PHL_THREADS" in os.environ:
            filtered_config.pop("threads", None)
        if "PHL_LOG_LEVEL" in os.environ:
            filtered_config.pop("log_level", None)
        LOG.info(f"Loaded config from {path}: {filtered_config}")
        return cls(**filtered_config)
