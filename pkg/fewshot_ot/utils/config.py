"""Configuration utilities for fewshot-ot."""

import copy
import os
import logging
from pathlib import Path
from typing import Dict, Any, Optional

import yaml

logger = logging.getLogger(__name__)

CONFIG_ENV_VAR = "FEWSHOT_OT_CONFIG"

# Default configuration
DEFAULT_CONFIG = {
    "episode": {
        "n_way": 5,
        "shots": 1,
        "queries": 15,
        "episodes": 10000,
        "seed": 0,
    },
    "preprocess": {
        "method": "peme",
        "beta": 0.5,
        "epsilon": 1e-6,
        "power": True,
        "apply_qr": True,
        "base_center_space": "pe",
    },
    "bms": {
        "lambda": 8.5,
        "outer_iters": 20,
        "sinkhorn_iters": 50,
        "lr": 0.1,
        "momentum": 0.8,
        "kappa": 10.0,
        "clamp_support": False,
        "persist_kappa": True,
    },
    "runtime": {
        "threads": 1,
        "show_progress": True,
    },
    "logging": {
        "level": "INFO",
        "file": None,  # None disables the log file
        "run_log": None,  # None disables the CSV run log
    },
}

EXAMPLE_CONFIG = """# fewshot-ot configuration

# Episode sampling
episode:
  n_way: 5
  shots: 1
  queries: 15
  # Number of random draws per evaluation
  episodes: 10000
  seed: 0

# Episode preprocessing
preprocess:
  # Normalization chain: peme, l2n, cl2n or bn
  method: peme
  # Power transform exponent
  beta: 0.5
  epsilon: 1.0e-6
  # Set to false for the E-M-E ablation
  power: true
  # QR reduction of each episode before classification
  apply_qr: true
  # Space in which the base-dataset center is averaged: pe or raw
  base_center_space: pe

# Boosted Min-size Sinkhorn
bms:
  lambda: 8.5
  outer_iters: 20
  sinkhorn_iters: 50
  lr: 0.1
  momentum: 0.8
  kappa: 10.0
  clamp_support: false
  persist_kappa: true

runtime:
  # Episode-parallel worker count (FEWSHOT_OT_THREADS overrides)
  threads: 1
  show_progress: true

logging:
  level: INFO
  # file: /path/to/fewshot_ot.log
  # run_log: /path/to/runs.csv
"""


class Config:
    """Configuration manager for fewshot-ot.

    Loads an optional YAML file and overlays it on ``DEFAULT_CONFIG``.

    Attributes:
        config_path: Path to configuration file
        config: Dictionary with configuration values
    """

    def __init__(self, config_path: Optional[Path] = None):
        """
        Initialize the configuration manager.

        Args:
            config_path: Optional path to configuration file
        """
        self.config_path = Path(config_path) if config_path else self._get_default_config_path()
        self.config = self._load_config()

    def _get_default_config_path(self) -> Path:
        """
        Get the default path for the configuration file.

        Returns:
            Path to default configuration file
        """
        env_path = os.environ.get(CONFIG_ENV_VAR)
        if env_path:
            return Path(env_path)

        if os.name == 'nt':  # Windows
            base_dir = Path(os.environ.get("APPDATA", ""))
        else:
            base_dir = Path(os.environ.get("XDG_CONFIG_HOME", ""))
            if not base_dir.is_absolute():
                base_dir = Path.home() / ".config"

        return base_dir / "fewshot_ot" / "config.yaml"

    def _load_config(self) -> Dict[str, Any]:
        """
        Load configuration from file or use defaults.

        Returns:
            Dictionary with configuration values
        """
        config = copy.deepcopy(DEFAULT_CONFIG)

        if not self.config_path.exists():
            logger.debug(f"No configuration file found at {self.config_path}, using defaults")
            return config

        try:
            with open(self.config_path, 'r') as f:
                file_config = yaml.safe_load(f)

            if file_config:
                self._merge_configs(config, file_config)
                logger.debug(f"Loaded configuration from {self.config_path}")
        except (OSError, yaml.YAMLError) as e:
            logger.warning(f"Error loading configuration from {self.config_path}: {e}")
            logger.warning("Using default configuration")

        return config

    def _merge_configs(self, target: Dict[str, Any], source: Dict[str, Any]) -> None:
        """
        Recursively merge two configuration dictionaries.

        Args:
            target: Target dictionary to merge into
            source: Source dictionary to merge from
        """
        for key, value in source.items():
            if key in target and isinstance(target[key], dict) and isinstance(value, dict):
                self._merge_configs(target[key], value)
            else:
                target[key] = value

    def get(self, section: str, key: str, default: Any = None) -> Any:
        """
        Get a configuration value.

        Args:
            section: Configuration section
            key: Configuration key
            default: Default value if not found

        Returns:
            Configuration value or default
        """
        try:
            return self.config.get(section, {}).get(key, default)
        except (KeyError, TypeError, AttributeError):
            return default

    def set(self, section: str, key: str, value: Any) -> None:
        """
        Set a configuration value in memory; call save() to persist it.

        Args:
            section: Configuration section
            key: Configuration key
            value: New value

        Raises:
            KeyError: If the section or key is not a known setting
        """
        if section not in DEFAULT_CONFIG or key not in DEFAULT_CONFIG[section]:
            raise KeyError(f"unknown setting {section}.{key}")
        self.config.setdefault(section, {})[key] = value

    def get_episode_config(self) -> Dict[str, Any]:
        """Get episode sampling section."""
        return self.config.get("episode", {})

    def get_preprocess_config(self) -> Dict[str, Any]:
        """Get preprocessing section."""
        return self.config.get("preprocess", {})

    def get_bms_config(self) -> Dict[str, Any]:
        """Get BMS solver section."""
        return self.config.get("bms", {})

    def get_runtime_config(self) -> Dict[str, Any]:
        """Get runtime section."""
        return self.config.get("runtime", {})

    def get_logging_config(self) -> Dict[str, Any]:
        """Get logging section."""
        return self.config.get("logging", {})

    def save(self) -> bool:
        """
        Save current configuration to file.

        Returns:
            True if successful, False otherwise
        """
        try:
            self.config_path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.config_path, 'w') as f:
                yaml.safe_dump(self.config, f, default_flow_style=False)
            logger.debug(f"Saved configuration to {self.config_path}")
            return True
        except OSError as e:
            logger.error(f"Error saving configuration to {self.config_path}: {e}")
            return False


def write_example(path: Path) -> None:
    """
    Write a commented example configuration file.

    Args:
        path: Destination path

    Raises:
        FileExistsError: If the destination already exists
    """
    path = Path(path)
    if path.exists():
        raise FileExistsError(f"Refusing to overwrite existing file: {path}")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(EXAMPLE_CONFIG)
    logger.debug(f"Created example configuration at {path}")


# Global configuration instance
_config_instance = None


def get_config(config_path: Optional[Path] = None) -> Config:
    """
    Get the global configuration instance.

    Args:
        config_path: Optional path; when given, (re)loads from that file

    Returns:
        Config instance
    """
    global _config_instance
    if _config_instance is None or config_path is not None:
        _config_instance = Config(config_path)
    return _config_instance


def reset_config() -> None:
    """Drop the global configuration instance."""
    global _config_instance
    _config_instance = None
