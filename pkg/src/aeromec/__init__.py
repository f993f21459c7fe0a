"""Energy-minimal secure task offloading planner for a multi-antenna
aerial MEC relay serving ground users under bounded channel uncertainty."""

__version__ = "0.1.0"

from .config import NetworkConfig, RotorParams, ci_config, load_config, save_config, table1_config

__all__ = [
    "NetworkConfig",
    "RotorParams",
    "ci_config",
    "table1_config",
    "load_config",
    "save_config",
    "__version__",
]
