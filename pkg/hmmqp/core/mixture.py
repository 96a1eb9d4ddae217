"""
EM para mezclas gaussianas univariadas: primer paso del aprendizaje desacoplado

Los pesos de la mezcla NO se usan como pi_hat; los estimadores calculan su propio pi_hat.
"""
from dataclasses import dataclass, field
from itertools import permutations
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import logsumexp

from ..exceptions import DegenerateComponent, SequenceTooShort
from .model import GaussianOutputModel
from ..preprocessing.chunker import as_sequence_list
from ..utils.config_loader import MixtureConfig
from ..utils.logger import get_logger

logger = get_logger(__name__)

VAR_FLOOR_FACTOR = 1e-6
MAX_ALIGN_STATES = 10
KMEANS_SUBSAMPLE = 20000


@dataclass(frozen=True)
class MixtureFit:
    """Mejor ajuste de EM entre todos los reinicios"""
    weights: np.ndarray
    components: Tuple[Tuple[float, float], ...]
    loglik: float
    iterations: int
    restarts_used: int
    loglik_trace: List[float] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.components)

    def to_outputs(self) -> GaussianOutputModel:
        return GaussianOutputModel(self.components)

    def permuted(self, perm: Sequence[int]) -> "MixtureFit":
        perm = list(perm)
        return MixtureFit(
            weights=self.weights[perm],
            components=tuple(self.components[p] for p in perm),
            loglik=self.loglik,
            iterations=self.iterations,
            restarts_used=self.restarts_used,
            loglik_trace=list(self.loglik_trace),
        )

    def to_dict(self) -> Dict[str, Any]:
        """Esquema gaussiano del archivo de modelo, más los datos del ajuste"""
        data = self.to_outputs().to_dict()
        data.update({
            "weights": self.weights.tolist(),
            "loglik": self.loglik,
            "iterations": self.iterations,
            "restarts_used": self.restarts_used,
        })
        return data


@dataclass
class _Restart:
    weights: np.ndarray
    mu: np.ndarray
    sigma2: np.ndarray
    mean_loglik: float
    iterations: int
    trace: List[float]


def _quantile_init(y: np.ndarray, n: int):
    """Medias en cuantiles equiespaciados, varianza común"""
    mu = np.quantile(y, (np.arange(n) + 0.5) / n)
    sigma2 = np.full(n, np.var(y) / n)
    return np.full(n, 1.0 / n), mu, sigma2


def _kmeanspp_init(y: np.ndarray, n: int, rng: np.random.Generator):
    """
    Semillas k-means++ sobre una submuestra; pesos y varianzas de la
    asignación al centro más cercano
    """
    sub = y if y.shape[0] <= KMEANS_SUBSAMPLE else rng.choice(y, KMEANS_SUBSAMPLE, replace=False)
    centers = [float(sub[rng.integers(sub.shape[0])])]
    for _ in range(1, n):
        d2 = np.min((sub[:, None] - np.array(centers)[None, :]) ** 2, axis=1)
        total = d2.sum()
        if total <= 0:
            centers.append(float(sub[rng.integers(sub.shape[0])]))
        else:
            centers.append(float(sub[rng.choice(sub.shape[0], p=d2 / total)]))
    mu = np.array(centers)

    labels = np.argmin((sub[:, None] - mu[None, :]) ** 2, axis=1)
    weights = np.empty(n)
    sigma2 = np.empty(n)
    overall = np.var(sub)
    for k in range(n):
        members = sub[labels == k]
        weights[k] = max(members.shape[0], 1)
        sigma2[k] = np.var(members) if members.shape[0] > 1 else overall
    sigma2 = np.where(sigma2 > 0, sigma2, overall)
    return weights / weights.sum(), mu, sigma2


def _log_joint(y: np.ndarray, weights: np.ndarray, mu: np.ndarray, sigma2: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        log_w = np.log(weights)
    return log_w - 0.5 * (y[:, None] - mu) ** 2 / sigma2 - 0.5 * np.log(2.0 * np.pi * sigma2)


def _run_em(y, weights, mu, sigma2, var_floor, config: MixtureConfig) -> Optional[_Restart]:
    """Un reinicio de EM; None si alguna componente colapsa"""
    T = y.shape[0]
    trace: List[float] = []
    previous = -np.inf
    for iteration in range(1, config.max_iters + 1):
        log_joint = _log_joint(y, weights, mu, sigma2)
        log_norm = logsumexp(log_joint, axis=1)
        mean_loglik = float(log_norm.mean())
        if __debug__ and trace:
            assert mean_loglik >= previous - 1e-10 * (1.0 + abs(previous)), (
                f"La log-verosimilitud del EM bajó: {previous} -> {mean_loglik}"
            )
        trace.append(mean_loglik * T)
        if mean_loglik - previous < config.tol:
            return _Restart(weights, mu, sigma2, mean_loglik, iteration - 1, trace)
        previous = mean_loglik

        resp = np.exp(log_joint - log_norm[:, None])
        Nk = resp.sum(axis=0)
        if np.any(Nk <= 0):
            return None
        weights = Nk / T
        mu = resp.T @ y / Nk
        sigma2 = np.einsum("tk,tk->k", resp, (y[:, None] - mu) ** 2) / Nk
        if np.any(sigma2 <= var_floor):
            return None

    log_norm = logsumexp(_log_joint(y, weights, mu, sigma2), axis=1)
    mean_loglik = float(log_norm.mean())
    trace.append(mean_loglik * T)
    return _Restart(weights, mu, sigma2, mean_loglik, config.max_iters, trace)


def em_fit(y, n: int, config: Optional[MixtureConfig] = None) -> MixtureFit:
    """
    Ajusta una mezcla de n gaussianas a la distribución estacionaria de salida

    Los datos son dependientes; el EM se aplica igual que con datos iid.

    Args:
        y: Secuencia real (o lista de secuencias)
        n: Número de componentes
        config: max_iters, tol (ganancia de log-verosimilitud media), restarts, seed

    Returns:
        MixtureFit del reinicio con mayor log-verosimilitud (empate: el de menor índice)

    Raises:
        SequenceTooShort: si T < 10 n
        DegenerateComponent: si todos los reinicios colapsan
    """
    config = config or MixtureConfig()
    y = np.concatenate([np.asarray(s, dtype=float).reshape(-1) for s in as_sequence_list(y)])
    T = y.shape[0]
    if n < 1:
        raise ValueError(f"n debe ser >= 1, recibido {n}")
    if T < 10 * n:
        raise SequenceTooShort(f"Se requieren al menos {10 * n} observaciones, hay {T}")
    data_var = float(np.var(y))
    var_floor = VAR_FLOOR_FACTOR * data_var
    if data_var <= 0:
        raise DegenerateComponent("Los datos son constantes: varianza nula")

    if n == 1:
        mu = float(y.mean())
        loglik = float(np.sum(-0.5 * (y - mu) ** 2 / data_var - 0.5 * np.log(2.0 * np.pi * data_var)))
        return MixtureFit(np.ones(1), ((mu, data_var),), loglik, 1, 1, [loglik])

    children = np.random.SeedSequence(config.seed).spawn(config.restarts)
    best: Optional[_Restart] = None
    successful = 0
    for index, child in enumerate(children):
        rng = np.random.Generator(np.random.PCG64(child))
        if index == 0:
            init = _quantile_init(y, n)
        else:
            init = _kmeanspp_init(y, n, rng)
        result = _run_em(y, *init, var_floor, config)
        if result is None:
            logger.debug(f"Reinicio {index} descartado: componente degenerada")
            continue
        successful += 1
        logger.debug(f"Reinicio {index}: loglik medio {result.mean_loglik:.6f} en {result.iterations} iteraciones")
        if best is None or result.mean_loglik > best.mean_loglik:
            best = result

    if best is None:
        raise DegenerateComponent(f"Los {config.restarts} reinicios del EM colapsaron en varianza ~0")

    order = np.argsort(best.mu, kind="stable")
    components = tuple((float(best.mu[k]), float(best.sigma2[k])) for k in order)
    logger.info(f"EM: {successful}/{config.restarts} reinicios válidos, loglik {best.trace[-1]:.4f}")
    return MixtureFit(
        weights=best.weights[order],
        components=components,
        loglik=float(best.trace[-1]),
        iterations=best.iterations,
        restarts_used=successful,
        loglik_trace=best.trace,
    )


def _components_of(model: Union[GaussianOutputModel, MixtureFit]) -> np.ndarray:
    return np.array(model.components, dtype=float)


def align_components(
    estimated: Union[GaussianOutputModel, MixtureFit],
    truth: Union[GaussianOutputModel, MixtureFit],
) -> Tuple[int, ...]:
    """
    Permutación p que minimiza sum_i |mu_hat_{p(i)} - mu_i| + |s2_hat_{p(i)} - s2_i|

    estimated.permuted(p) queda con las etiquetas de truth. Fuerza bruta en
    orden lexicográfico; ante empate se queda la primera.
    """
    est = _components_of(estimated)
    ref = _components_of(truth)
    if est.shape != ref.shape:
        raise ValueError(f"Número de componentes distinto: {est.shape[0]} vs {ref.shape[0]}")
    n = ref.shape[0]
    if n > MAX_ALIGN_STATES:
        raise ValueError(f"align_components admite n <= {MAX_ALIGN_STATES}, recibido {n}")

    cost = np.abs(est[:, None, 0] - ref[None, :, 0]) + np.abs(est[:, None, 1] - ref[None, :, 1])
    columns = np.arange(n)
    best_perm = tuple(range(n))
    best_cost = np.inf
    for perm in permutations(range(n)):
        total = cost[list(perm), columns].sum()
        if total < best_cost:
            best_cost, best_perm = total, perm
    return best_perm
