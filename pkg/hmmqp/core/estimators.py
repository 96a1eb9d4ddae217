"""
Estimadores de pi y A por programas cuadráticos sobre momentos empíricos

pi:  min ||rho_hat - B x||^2_{1/rho_hat}    (continuo: xi_hat, K)
A:   min ||sigma_hat - C A||^2_{1/sigma_hat} (continuo: eta_hat, F)
     con A >= 0, columnas que suman 1 y opcionalmente A pi_hat = pi_hat
"""
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Union

import numpy as np

from ..exceptions import NeedsQP, RankDeficientB, RankDeficientF, RankDeficientK, SingularW
from .model import (
    DiscreteOutputModel,
    GaussianOutputModel,
    TransitionMatrix,
    has_full_column_rank,
    make_rng,
    smallest_singular_value,
)
from .moments import PI_FLOOR, ContinuousMoments, DiscreteMoments
from .qp import SimplexQP, solve, solve_normal_equations
from ..utils.logger import get_logger

logger = get_logger(__name__)

OBJECTIVES = ("weighted", "unweighted")


@dataclass(frozen=True)
class PiEstimate:
    """pi_hat con el método usado y diagnósticos del solver"""
    pi_hat: np.ndarray
    method: str
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {"pi_hat": self.pi_hat.tolist(), "method": self.method, "diagnostics": self.diagnostics}


@dataclass(frozen=True)
class AEstimate:
    """A_hat estocástica por columnas"""
    A_hat: TransitionMatrix
    objective: str
    stationarity_constraint: bool
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "A_hat": self.A_hat.entries.tolist(),
            "objective": self.objective,
            "stationarity_constraint": self.stationarity_constraint,
            "diagnostics": self.diagnostics,
        }


def _check_objective(objective: str):
    if objective not in OBJECTIVES:
        raise ValueError(f"Objetivo '{objective}' no soportado. Opciones: {list(OBJECTIVES)}")


def cell_weights(values: np.ndarray, weighted: bool) -> np.ndarray:
    """
    Pesos 1/v de la norma ponderada; las celdas con v = 0 reciben peso 0
    (el término desaparece). Sin ponderar: todos 1.
    """
    values = np.asarray(values, dtype=float)
    if not weighted:
        return np.ones_like(values)
    w = np.zeros_like(values)
    positive = values > 0
    w[positive] = 1.0 / values[positive]
    return w


def _as_matrix(outputs: Union[DiscreteOutputModel, np.ndarray]) -> np.ndarray:
    return outputs.B if isinstance(outputs, DiscreteOutputModel) else np.asarray(outputs, dtype=float)


def _normalized(x: np.ndarray) -> np.ndarray:
    x = np.clip(np.asarray(x, dtype=float), 0.0, None)
    return x / x.sum()


def _positive_pi(pi_hat: np.ndarray) -> np.ndarray:
    pi_hat = np.asarray(pi_hat, dtype=float)
    if np.any(pi_hat < PI_FLOOR):
        logger.warning(f"pi_hat tiene entradas < {PI_FLOOR:.0e}; se acotan y se renormaliza")
        pi_hat = np.clip(pi_hat, PI_FLOOR, None)
    return pi_hat / pi_hat.sum()


def _solve_weighted_simplex(design: np.ndarray, target: np.ndarray, weights: np.ndarray):
    """min ||target - design x||^2_w sobre el símplex"""
    Dw = weights[:, None] * design
    qp = SimplexQP.on_simplex(design.T @ Dw, Dw.T @ target)
    return solve(qp)


def estimate_pi_discrete(
    moments: DiscreteMoments,
    B: Union[DiscreteOutputModel, np.ndarray],
    objective: str = "weighted",
) -> PiEstimate:
    """
    Estima pi desde rho_hat

    Con objetivo ponderado y todos los rho_hat > 0 prueba primero
    x* = W^{-1} 1 con W = B^T diag(1/rho_hat) B; si alguna entrada no es
    positiva, o W está mal condicionada, cae al QP con restricciones del símplex.

    Raises:
        RankDeficientB
    """
    _check_objective(objective)
    B = _as_matrix(B)
    if not has_full_column_rank(B):
        raise RankDeficientB(f"B ({B.shape[0]}x{B.shape[1]}) no tiene rango n")
    rho = moments.rho_hat
    weights = cell_weights(rho, objective == "weighted")
    diagnostics = {"sigma1_B_tilde": smallest_singular_value(np.sqrt(weights)[:, None] * B)}

    if objective == "weighted" and np.all(rho > 0):
        W = B.T @ (weights[:, None] * B)
        try:
            pi_hat = solve_normal_equations(W)
            return PiEstimate(_normalized(pi_hat), "normal_equations", diagnostics)
        except NeedsQP as signal:
            logger.info(f"x* con entradas no positivas {np.round(signal.x_star, 6)}, se resuelve el QP")
        except SingularW as error:
            logger.info(f"{error}; se resuelve el QP")

    solution = _solve_weighted_simplex(B, rho, weights)
    diagnostics.update(solution.to_dict())
    method = "weighted_qp" if objective == "weighted" else "unweighted_qp"
    return PiEstimate(_normalized(solution.x), method, diagnostics)


def estimate_pi_continuous(
    moments: ContinuousMoments,
    K: np.ndarray,
    objective: str = "weighted",
) -> PiEstimate:
    """
    pi_hat = argmin_{x en el símplex} ||xi_hat - K x||^2 (ponderado por 1/xi_hat o no)

    Raises:
        RankDeficientK
    """
    _check_objective(objective)
    K = np.asarray(K, dtype=float)
    if not has_full_column_rank(K):
        raise RankDeficientK("K no tiene rango completo")
    xi = moments.xi_hat
    weights = cell_weights(xi, objective == "weighted")
    diagnostics = {"sigma1_K_tilde": smallest_singular_value(np.sqrt(weights)[:, None] * K)}
    if K.shape[0] == 1:
        return PiEstimate(np.ones(1), f"{objective}_qp", diagnostics)
    solution = _solve_weighted_simplex(K, xi, weights)
    diagnostics.update(solution.to_dict())
    return PiEstimate(_normalized(solution.x), f"{objective}_qp", diagnostics)


def build_C(pi_hat: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    """
    Operador C_hat materializado como matriz (m^2) x (n^2)

    Fila k*m + k', columna i*n + j, entrada pi_j M_kj M_k'i, de modo que
    C @ A.reshape(-1) = vec(sum_ij C_ij^{kk'} A_ij).
    """
    matrix = np.asarray(matrix, dtype=float)
    pi_hat = np.asarray(pi_hat, dtype=float)
    m, n = matrix.shape
    C = np.einsum("j,kj,li->klij", pi_hat, matrix, matrix)
    return C.reshape(m * m, n * n)


def transition_constraints(pi_hat: np.ndarray, stationarity: bool):
    """Filas de igualdad sobre vec(A): columnas suman 1 y (opcional) A pi_hat = pi_hat"""
    n = pi_hat.shape[0]
    rows = []
    rhs = []
    for j in range(n):
        row = np.zeros((n, n))
        row[:, j] = 1.0
        rows.append(row.reshape(-1))
        rhs.append(1.0)
    if stationarity:
        for i in range(n):
            row = np.zeros((n, n))
            row[i, :] = pi_hat
            rows.append(row.reshape(-1))
            rhs.append(pi_hat[i])
    return np.array(rows), np.array(rhs)


def transition_qp(
    target: np.ndarray,
    matrix: np.ndarray,
    pi_hat: np.ndarray,
    objective: str,
    stationarity: bool,
) -> SimplexQP:
    """QP sobre vec(A): min ||vec(target) - C vec(A)||^2_w con las igualdades de transition_constraints"""
    C = build_C(pi_hat, matrix)
    vec_target = np.asarray(target, dtype=float).reshape(-1)
    WC = cell_weights(vec_target, objective == "weighted")[:, None] * C
    E, e = transition_constraints(pi_hat, stationarity)
    return SimplexQP(C.T @ WC, WC.T @ vec_target, E, e)


def _estimate_transition(
    target: np.ndarray,
    matrix: np.ndarray,
    pi_hat: np.ndarray,
    objective: str,
    stationarity_constraint: Optional[bool],
) -> AEstimate:
    _check_objective(objective)
    if stationarity_constraint is None:
        stationarity_constraint = objective == "weighted"
    pi_hat = _positive_pi(pi_hat)
    n = pi_hat.shape[0]
    if n == 1:
        return AEstimate(TransitionMatrix(np.ones((1, 1))), objective, stationarity_constraint, {})

    solution = solve(transition_qp(target, matrix, pi_hat, objective, stationarity_constraint))

    A_hat = TransitionMatrix.from_estimate(solution.x.reshape(n, n))
    diagnostics = solution.to_dict()
    weights = cell_weights(np.asarray(target, dtype=float).reshape(-1), objective == "weighted")
    diagnostics["sigma1_C"] = smallest_singular_value(np.sqrt(weights)[:, None] * build_C(pi_hat, matrix))
    diagnostics["stationarity_residual"] = float(np.max(np.abs(A_hat.entries @ pi_hat - pi_hat)))
    return AEstimate(A_hat, objective, stationarity_constraint, diagnostics)


def estimate_A_discrete(
    moments: DiscreteMoments,
    B: Union[DiscreteOutputModel, np.ndarray],
    pi_hat: np.ndarray,
    objective: str = "weighted",
    stationarity_constraint: Optional[bool] = None,
) -> AEstimate:
    """
    Estima A desde sigma_hat con C_ij^{kk'} = pi_hat_j B_kj B_k'i

    Args:
        moments: rho_hat / sigma_hat
        B: Matriz de emisión (m x n)
        pi_hat: Estimación de pi (estrictamente positiva)
        objective: 'weighted' (pesos 1/sigma_hat) o 'unweighted'
        stationarity_constraint: A pi_hat = pi_hat; por defecto solo con 'weighted'
    """
    B = _as_matrix(B)
    if not has_full_column_rank(B):
        raise RankDeficientB(f"B ({B.shape[0]}x{B.shape[1]}) no tiene rango n")
    return _estimate_transition(moments.sigma_hat, B, pi_hat, objective, stationarity_constraint)


def estimate_A_continuous(
    moments: ContinuousMoments,
    F: Optional[np.ndarray],
    pi_hat: np.ndarray,
    objective: str = "weighted",
    stationarity_constraint: Optional[bool] = None,
    use_eta_prime: bool = False,
    K: Optional[np.ndarray] = None,
) -> AEstimate:
    """
    Estima A desde eta_hat con C_ij^{kk'} = pi_hat_j F_kj F_k'i

    Con use_eta_prime se usa eta'_hat y K en lugar de eta_hat y F.
    """
    if use_eta_prime:
        if K is None or moments.eta_prime_hat is None:
            raise ValueError("La variante eta' requiere K y eta_prime_hat")
        K = np.asarray(K, dtype=float)
        if not has_full_column_rank(K):
            raise RankDeficientK("K no tiene rango completo")
        estimate = _estimate_transition(moments.eta_prime_hat, K, pi_hat, objective, stationarity_constraint)
        estimate.diagnostics["path"] = "eta_prime"
        return estimate

    if F is None or moments.eta_hat is None:
        raise ValueError("Se requieren F y eta_hat")
    F = np.asarray(F, dtype=float)
    if not has_full_column_rank(F):
        raise RankDeficientF("F no tiene rango completo")
    estimate = _estimate_transition(moments.eta_hat, F, pi_hat, objective, stationarity_constraint)
    estimate.diagnostics["path"] = "eta"
    return estimate


def perturb_outputs(outputs: GaussianOutputModel, epsilon: float, seed: int) -> GaussianOutputModel:
    """
    theta_hat = theta + epsilon * u, con u dirección aleatoria de norma 1 en (mu, sigma2)

    epsilon = 0 devuelve el mismo modelo.
    """
    if epsilon < 0:
        raise ValueError(f"epsilon debe ser >= 0, recibido {epsilon}")
    if epsilon == 0:
        return outputs
    rng = make_rng(seed)
    direction = rng.standard_normal(2 * outputs.n)
    direction /= np.linalg.norm(direction)
    mu = outputs.mu + epsilon * direction[:outputs.n]
    sigma2 = np.maximum(outputs.sigma2 + epsilon * direction[outputs.n:], 1e-6 * outputs.sigma2)
    return GaussianOutputModel(tuple(zip(mu.tolist(), sigma2.tolist())))
