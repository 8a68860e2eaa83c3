"""Polarized pulse-pair search over dual-polarization radio spectrograms."""

__version__ = "0.1.0"

from .config import PipelineConfig, load_config, parse_config
from .errors import ConfigError, DataError, DomainError, PulsePairError, StageError
from .pipeline import STAGES, RunManifest, run_pipeline, verify_manifest

__all__ = [
    "STAGES",
    "ConfigError",
    "DataError",
    "DomainError",
    "PipelineConfig",
    "PulsePairError",
    "RunManifest",
    "StageError",
    "__version__",
    "load_config",
    "parse_config",
    "run_pipeline",
    "verify_manifest",
]
