"""
Utilidades reutilizables: logging y configuración de experimentos
"""
from .logger import get_logger, configure_logging, RunLogger
from .config_loader import (
    ConfigLoader,
    ExperimentConfig,
    EstimationOptions,
    MixtureConfig,
    StabilityConfig,
)

__all__ = [
    'get_logger',
    'configure_logging',
    'RunLogger',
    'ConfigLoader',
    'ExperimentConfig',
    'EstimationOptions',
    'MixtureConfig',
    'StabilityConfig'
]
