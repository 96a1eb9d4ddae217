"""
Banco de pruebas: barridos de simulación, chequeo de tasas y estabilidad
"""
from .experiment import (
    ResultRow,
    ResultSet,
    RateCheck,
    StabilityResult,
    run_experiment,
    run_job,
    rate_check,
    stability_sweep,
)

__all__ = [
    'ResultRow',
    'ResultSet',
    'RateCheck',
    'StabilityResult',
    'run_experiment',
    'run_job',
    'rate_check',
    'stability_sweep',
]
