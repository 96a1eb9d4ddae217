"""
Errores de hmmqp
Los errores de validación heredan de ValueError y los numéricos de
ArithmeticError/RuntimeError, así el código que ya captura builtins sigue funcionando
"""
from typing import Optional

import numpy as np


class HMMQPError(Exception):
    """Base de todos los errores del paquete"""


# Validación de entradas

class InvalidModel(HMMQPError, ValueError):
    """Modelo HMM mal formado (dimensiones, estocasticidad, parámetros)"""


class InvalidConfig(HMMQPError, ValueError):
    """Configuración de experimento inválida"""


class SymbolOutOfRange(HMMQPError, ValueError):
    """Símbolo discreto fuera de [0, m)"""


class SequenceTooShort(HMMQPError, ValueError):
    """La secuencia no tiene suficientes observaciones"""


class InsufficientData(HMMQPError, ValueError):
    """No hay suficientes filas/puntos para un ajuste"""


class RankDeficientB(HMMQPError, ValueError):
    """La matriz de emisión B no tiene rango completo"""


class RankDeficientK(HMMQPError, ValueError):
    """La matriz K no tiene rango completo"""


class RankDeficientF(HMMQPError, ValueError):
    """La matriz efectiva F no tiene rango completo"""


class BoundInapplicable(HMMQPError, ValueError):
    """La cota de perturbación requiere eps < lambda_min(M)"""


# Fallos numéricos

class NonUniqueStationary(HMMQPError, ArithmeticError):
    """El autovalor 1 de A tiene multiplicidad > 1"""


class QuadratureNotConverged(HMMQPError, ArithmeticError):
    """La cuadratura adaptativa superó la profundidad máxima"""


class Infeasible(HMMQPError, ArithmeticError):
    """El conjunto factible del QP es vacío (falla la fase 1)"""


class MaxIterations(HMMQPError, RuntimeError):
    """El active-set no convergió; revisar diagnósticos sigma1"""


class SingularW(HMMQPError, ArithmeticError):
    """W de las ecuaciones normales es singular o mal condicionada"""


class DegenerateComponent(HMMQPError, ArithmeticError):
    """Todos los reinicios de EM colapsaron una componente"""


class NumericalUnderflow(HMMQPError, ArithmeticError):
    """El forward-backward escalado produjo una constante nula"""


class NeedsQP(HMMQPError):
    """
    Señal de solve_normal_equations: x* = W^{-1} 1 tiene entradas no positivas
    y hay que resolver el QP con restricciones
    """

    def __init__(self, x_star: Optional[np.ndarray] = None):
        super().__init__("x* tiene entradas no positivas, se requiere el QP")
        self.x_star = x_star


NUMERICAL_ERRORS = (
    NonUniqueStationary,
    QuadratureNotConverged,
    Infeasible,
    MaxIterations,
    SingularW,
    DegenerateComponent,
    NumericalUnderflow,
    RankDeficientB,
    RankDeficientK,
    RankDeficientF,
)
