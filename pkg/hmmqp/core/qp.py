"""
Solver de QPs densos y pequeños:  min 1/2 x^T M x - h^T x  s.a.  x >= 0, E x = e
Es el único motor de optimización detrás de todos los estimadores
"""
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import null_space, qr
from scipy.optimize import linprog

from ..exceptions import BoundInapplicable, Infeasible, MaxIterations, NeedsQP, SingularW
from ..utils.logger import get_logger

logger = get_logger(__name__)

KKT_TOL = 1e-9
FEASIBILITY_TOL = 1e-8
PIVOT_TOL = 1e-10
MAX_CONDITION = 1e12


@dataclass(frozen=True)
class SimplexQP:
    """Objetivo (M, h) con x >= 0 y restricciones de igualdad E x = e"""
    M: np.ndarray
    h: np.ndarray
    E: np.ndarray
    e: np.ndarray

    def __post_init__(self):
        M = np.array(self.M, dtype=float)
        h = np.array(self.h, dtype=float).reshape(-1)
        E = np.atleast_2d(np.array(self.E, dtype=float))
        e = np.array(self.e, dtype=float).reshape(-1)
        d = h.shape[0]
        if M.shape != (d, d) or E.shape[1] != d or E.shape[0] != e.shape[0]:
            raise ValueError(f"Dimensiones incoherentes: M {M.shape}, h {h.shape}, E {E.shape}, e {e.shape}")
        if not np.allclose(M, M.T, rtol=0, atol=1e-10 * max(1.0, np.abs(M).max())):
            raise ValueError("M debe ser simétrica")
        for name, arr in (("M", 0.5 * (M + M.T)), ("h", h), ("E", E), ("e", e)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def d(self) -> int:
        return self.h.shape[0]

    @property
    def scale(self) -> float:
        return 1.0 + float(np.abs(self.M).max()) + float(np.abs(self.h).max())

    def objective(self, x: np.ndarray) -> float:
        return float(0.5 * x @ self.M @ x - self.h @ x)

    @classmethod
    def on_simplex(cls, M: np.ndarray, h: np.ndarray) -> "SimplexQP":
        """QP con la única igualdad sum(x) = 1"""
        d = np.asarray(h).shape[0]
        return cls(M, h, np.ones((1, d)), np.ones(1))


@dataclass(frozen=True)
class QPSolution:
    x: np.ndarray
    kkt_residual: float
    iterations: int
    active_set: Tuple[int, ...]
    objective: float = 0.0

    def to_dict(self):
        return {
            "kkt_residual": self.kkt_residual,
            "iterations": self.iterations,
            "active_set": list(self.active_set),
            "objective": self.objective,
        }


def independent_rows(E: np.ndarray, e: np.ndarray, tol: float = PIVOT_TOL) -> Tuple[np.ndarray, np.ndarray]:
    """
    Filas linealmente independientes de E por QR con pivoteo de columnas sobre E^T

    Las filas cuyo pivote residual es < tol (relativo al primero) se descartan.
    """
    if E.shape[0] <= 1:
        return E, e
    _, R, piv = qr(E.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > tol * max(diag[0], 1.0)))
    keep = np.sort(piv[:rank])
    if rank < E.shape[0]:
        logger.debug(f"Descartadas {E.shape[0] - rank} filas de igualdad dependientes")
    return E[keep], e[keep]


def _phase_one(E: np.ndarray, e: np.ndarray) -> np.ndarray:
    """Punto factible (vértice) de {x >= 0, E x = e} vía LP"""
    d = E.shape[1]
    res = linprog(np.zeros(d), A_eq=E, b_eq=e, bounds=[(0, None)] * d, method="highs")
    if res.status != 0 or res.x is None:
        raise Infeasible(f"Fase 1 sin solución factible: {res.message}")
    x = np.clip(res.x, 0.0, None)
    residual = float(np.max(np.abs(E @ x - e))) if E.size else 0.0
    if residual >= FEASIBILITY_TOL:
        raise Infeasible(f"Residuo de factibilidad {residual:.2e} en fase 1")
    return x


def _prune_working_set(E: np.ndarray, working: set) -> set:
    """Saca cotas del conjunto de trabajo hasta que E restringida a las libres tenga rango pleno"""
    p = E.shape[0]
    d = E.shape[1]
    working = set(working)

    def free_rank(w):
        free = [i for i in range(d) if i not in w]
        return np.linalg.matrix_rank(E[:, free]) if free else 0

    for i in sorted(working):
        if free_rank(working) == p:
            break
        trial = working - {i}
        if free_rank(trial) > free_rank(working):
            working = trial
    return working


def _eqp_step(M_FF: np.ndarray, g_F: np.ndarray, E_F: np.ndarray) -> Tuple[np.ndarray, bool]:
    """
    Paso del subproblema con igualdades: min 1/2 p^T M p + g^T p s.a. E_F p = 0

    Returns:
        (p, unbounded); si la curvatura reducida es nula en una dirección de
        descenso se devuelve esa dirección con unbounded=True
    """
    k = g_F.shape[0]
    Z = null_space(E_F) if E_F.shape[0] else np.eye(k)
    if Z.shape[1] == 0:
        return np.zeros(k), False
    H = Z.T @ M_FF @ Z
    r = Z.T @ g_F
    z, *_ = np.linalg.lstsq(H, -r, rcond=None)
    leftover = H @ z + r
    if np.linalg.norm(leftover) <= 1e-10 * (1.0 + np.linalg.norm(r)):
        return Z @ z, False
    return -(Z @ leftover), True


def _multipliers(g: np.ndarray, E: np.ndarray, free: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """nu de las igualdades y mu de las cotas: g = E^T nu + mu, mu_F = 0"""
    if E.shape[0] and free.size:
        nu, *_ = np.linalg.lstsq(E[:, free].T, g[free], rcond=None)
    else:
        nu = np.zeros(E.shape[0])
    mu = g - E.T @ nu
    mu[free] = 0.0
    return nu, mu


def kkt_residual(qp: SimplexQP, x: np.ndarray, nu: np.ndarray, mu: np.ndarray, E: np.ndarray) -> float:
    """max(estacionariedad, factibilidad primal, factibilidad dual, complementariedad) / escala"""
    g = qp.M @ x - qp.h
    stationarity = np.max(np.abs(g - E.T @ nu - mu)) if x.size else 0.0
    primal = max(float(np.max(np.abs(qp.E @ x - qp.e))), float(np.max(np.clip(-x, 0, None))))
    dual = float(np.max(np.clip(-mu, 0, None)))
    complementarity = float(np.max(np.abs(mu * x)))
    return max(float(stationarity), primal, dual, complementarity) / qp.scale


def solve(qp: SimplexQP, max_iterations: Optional[int] = None) -> QPSolution:
    """
    Método de conjunto activo primal-dual

    Parte de un vértice factible (fase 1), resuelve el subproblema de igualdad
    en el espacio nulo de las restricciones activas y agrega/quita cotas según
    pasos bloqueantes y multiplicadores. Empates: gana el índice menor.

    Args:
        qp: Instancia SimplexQP
        max_iterations: Tope de iteraciones (default 50 * d)

    Returns:
        QPSolution con residuo KKT <= 1e-9 (relativo a la escala del problema)

    Raises:
        Infeasible: si la fase 1 falla
        MaxIterations: si se supera el tope
    """
    d = qp.d
    cap = max_iterations or 50 * d
    E, e = independent_rows(qp.E, qp.e)
    x = _phase_one(E, e)
    working = _prune_working_set(E, {i for i in range(d) if x[i] <= 0.0})
    scale = qp.scale
    step_tol = 1e-12 * max(1.0, float(np.abs(x).max()))
    dual_tol = 1e-12 * scale

    objective = qp.objective(x)
    for iteration in range(1, cap + 1):
        g = qp.M @ x - qp.h
        free = np.array([i for i in range(d) if i not in working], dtype=int)
        p = np.zeros(d)
        unbounded = False
        if free.size:
            p_F, unbounded = _eqp_step(qp.M[np.ix_(free, free)], g[free], E[:, free])
            p[free] = p_F

        if not unbounded and np.max(np.abs(p)) <= step_tol:
            nu, mu = _multipliers(g, E, free)
            candidates = sorted(working)
            leaving = None
            for i in candidates:
                if mu[i] < -dual_tol and (leaving is None or mu[i] < mu[leaving]):
                    leaving = i
            if leaving is None:
                x = np.clip(x, 0.0, None)
                residual = kkt_residual(qp, x, nu, mu, E)
                if residual > KKT_TOL:
                    logger.warning(f"Residuo KKT {residual:.2e} sobre la tolerancia {KKT_TOL:.0e}")
                logger.debug(f"QP d={d} resuelto en {iteration} iteraciones, KKT={residual:.2e}")
                return QPSolution(
                    x=x,
                    kkt_residual=residual,
                    iterations=iteration,
                    active_set=tuple(candidates),
                    objective=qp.objective(x),
                )
            working.discard(leaving)
            continue

        # Paso más largo que respeta x >= 0
        alpha = np.inf if unbounded else 1.0
        curvature = float(p @ qp.M @ p)
        if unbounded and curvature > 0:
            alpha = -float(g @ p) / curvature
        blocking = None
        for i in free:
            if p[i] < 0:
                ratio = -x[i] / p[i]
                if ratio < alpha:
                    alpha, blocking = ratio, int(i)
        if not np.isfinite(alpha):
            raise Infeasible("El objetivo no está acotado inferiormente en el conjunto factible")

        x = x + alpha * p
        if blocking is not None:
            x[blocking] = 0.0
            working.add(blocking)

        if __debug__:
            new_objective = qp.objective(x)
            assert new_objective <= objective + 1e-10 * scale * (1.0 + abs(objective)), (
                f"El objetivo aumentó: {objective} -> {new_objective}"
            )
            objective = new_objective

    raise MaxIterations(f"El active-set no convergió en {cap} iteraciones (d={d})")


def solve_normal_equations(W: np.ndarray) -> np.ndarray:
    """
    x* = W^{-1} 1 normalizado a suma 1

    Raises:
        SingularW: si W es singular o su número de condición supera 1e12
        NeedsQP: si alguna entrada de x* es <= 0 (lleva x_star)
    """
    W = np.asarray(W, dtype=float)
    cond = np.linalg.cond(W)
    if not np.isfinite(cond) or cond >= MAX_CONDITION:
        raise SingularW(f"W mal condicionada (cond={cond:.2e})")
    x_star = np.linalg.solve(W, np.ones(W.shape[0]))
    if np.any(x_star <= 0):
        raise NeedsQP(x_star)
    return x_star / x_star.sum()


def perturbation_bound(
    M: np.ndarray,
    h: np.ndarray,
    M_hat: np.ndarray,
    h_hat: np.ndarray,
    x: np.ndarray,
) -> float:
    """
    Cota eps / (lambda - eps) * (1 + ||x||) del desvío de la solución del QP
    perturbado, con eps = max(||M_hat - M||_2, ||h_hat - h||_2) y lambda = lambda_min(M)

    Raises:
        BoundInapplicable: si eps >= lambda
    """
    eps = max(
        float(np.linalg.norm(np.asarray(M_hat) - np.asarray(M), 2)),
        float(np.linalg.norm(np.asarray(h_hat) - np.asarray(h))),
    )
    lam = float(np.linalg.eigvalsh(np.asarray(M, dtype=float)).min())
    if eps >= lam:
        raise BoundInapplicable(f"eps={eps:.3e} >= lambda_min={lam:.3e}")
    return eps / (lam - eps) * (1.0 + float(np.linalg.norm(x)))
