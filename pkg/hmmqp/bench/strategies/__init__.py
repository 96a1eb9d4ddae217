"""
Métodos del estudio de simulación - __init__

| id | método | theta inicial | A inicial |
|----|--------|---------------|-----------|
| 1  | BW     | aleatorio     | aleatoria |
| 2  | -      | exacto        | QP        |
| 3  | -      | EM            | QP        |
| 4  | BW     | exacto        | QP        |
| 5  | BW     | EM            | QP        |
| 6  | BW     | exacto        | aleatoria |
| 7  | BW     | EM            | aleatoria |
"""
from functools import partial

from .base import MethodOutcome, RunContext
from .qp_methods import KnownOutputsQP, MixtureQP
from .baum_welch_methods import QPInitBaumWelch, RandomABaumWelch, RandomBaumWelch

METHODS = {
    1: RandomBaumWelch,
    2: KnownOutputsQP,
    3: MixtureQP,
    4: partial(QPInitBaumWelch, known_outputs=True),
    5: partial(QPInitBaumWelch, known_outputs=False),
    6: partial(RandomABaumWelch, known_outputs=True),
    7: partial(RandomABaumWelch, known_outputs=False),
}

BW_METHODS = (1, 4, 5, 6, 7)


def get_method(method_id: int):
    """Instancia la estrategia del método pedido"""
    if method_id not in METHODS:
        raise ValueError(
            f"Método '{method_id}' no soportado. "
            f"Opciones: {list(METHODS.keys())}"
        )
    return METHODS[method_id]()


def method_label(method_id: int) -> str:
    """Descripción corta del método para reportes"""
    return get_method(method_id).label


__all__ = [
    'METHODS',
    'BW_METHODS',
    'get_method',
    'method_label',
    'MethodOutcome',
    'RunContext',
    'KnownOutputsQP',
    'MixtureQP',
    'QPInitBaumWelch',
    'RandomABaumWelch',
    'RandomBaumWelch',
]
