"""
Baum-Welch de referencia con forward-backward escalado
Salidas gaussianas o discretas; las emisiones pueden quedar fijas
"""
from dataclasses import dataclass, field
from typing import List, Optional, Union

import numpy as np

from ..exceptions import NonUniqueStationary, NumericalUnderflow
from .model import (
    DiscreteOutputModel,
    GaussianOutputModel,
    OutputModel,
    TransitionMatrix,
    make_rng,
    random_transition_matrix,
    stationary_distribution,
)
from ..preprocessing.chunker import as_sequence_list
from ..utils.logger import get_logger

logger = get_logger(__name__)

MIN_STATE_MASS = 1e-12


@dataclass(frozen=True)
class BaumWelchInit:
    """Punto de partida: A0, salidas iniciales y si las salidas se mantienen fijas"""
    A0: TransitionMatrix
    outputs0: OutputModel
    fix_outputs: bool = False
    initial: Optional[np.ndarray] = None


@dataclass
class BaumWelchResult:
    A_hat: TransitionMatrix
    outputs_hat: OutputModel
    loglik_trace: List[float]
    iterations: int
    A_trace: List[np.ndarray] = field(default_factory=list)
    initial: Optional[np.ndarray] = None


@dataclass
class ForwardBackward:
    """Marginales gamma (T, n), conteos esperados de transición N[i, j] (j -> i) y log-verosimilitud"""
    gamma: np.ndarray
    transition_counts: np.ndarray
    loglik: float


def emission_matrix(y: np.ndarray, outputs: OutputModel):
    """
    b[t, k] = P(y_t | X_t = k) escalado por fila para evitar underflow

    Returns:
        (b, log_offset) con sum(log_offset) a sumar a la log-verosimilitud
    """
    if isinstance(outputs, DiscreteOutputModel):
        symbols = np.asarray(y, dtype=int)
        return outputs.B[symbols, :], np.zeros(symbols.shape[0])
    log_b = outputs.log_densities(y)
    offset = log_b.max(axis=1)
    return np.exp(log_b - offset[:, None]), offset


def forward_backward(
    emission_probs: np.ndarray,
    A: Union[TransitionMatrix, np.ndarray],
    initial: np.ndarray,
    log_offset: Optional[np.ndarray] = None,
) -> ForwardBackward:
    """
    Recursiones forward-backward normalizadas en cada paso

    alpha_t = (A alpha_{t-1}) * b_t / c_t, beta_t = A^T (b_{t+1} beta_{t+1}) / c_{t+1};
    log P(y) = sum_t log c_t (+ offsets de emission_matrix)

    Raises:
        NumericalUnderflow: si algún factor de escala es 0 o no finito
    """
    A = A.entries if isinstance(A, TransitionMatrix) else np.asarray(A, dtype=float)
    b = np.asarray(emission_probs, dtype=float)
    T, n = b.shape
    alpha = np.empty((T, n))
    c = np.empty(T)

    a = np.asarray(initial, dtype=float) * b[0]
    for t in range(T):
        if t > 0:
            a = (A @ alpha[t - 1]) * b[t]
        scale = a.sum()
        if not np.isfinite(scale) or scale <= 0:
            raise NumericalUnderflow(f"Factor de escala {scale} en t={t}: inicialización inválida")
        c[t] = scale
        alpha[t] = a / scale

    beta = np.empty((T, n))
    beta[-1] = 1.0
    for t in range(T - 2, -1, -1):
        beta[t] = A.T @ (b[t + 1] * beta[t + 1]) / c[t + 1]

    gamma = alpha * beta
    weighted = b[1:] * beta[1:] / c[1:, None]
    counts = A * (weighted.T @ alpha[:-1])
    loglik = float(np.log(c).sum())
    if log_offset is not None:
        loglik += float(np.sum(log_offset))
    return ForwardBackward(gamma=gamma, transition_counts=counts, loglik=loglik)


def _initial_distribution(A: TransitionMatrix) -> np.ndarray:
    try:
        return stationary_distribution(A)
    except NonUniqueStationary:
        return np.full(A.n, 1.0 / A.n)


def _update_outputs(outputs: OutputModel, sequences, gammas, var_floor: float) -> OutputModel:
    """Paso M de las emisiones acumulando sobre todas las secuencias"""
    if isinstance(outputs, DiscreteOutputModel):
        m, n = outputs.B.shape
        mass = np.zeros((m, n))
        for y, gamma in zip(sequences, gammas):
            np.add.at(mass, np.asarray(y, dtype=int), gamma)
        totals = mass.sum(axis=0)
        B = np.where(totals > MIN_STATE_MASS, mass / np.maximum(totals, MIN_STATE_MASS), outputs.B)
        return DiscreteOutputModel(B / B.sum(axis=0))

    n = outputs.n
    weight = np.zeros(n)
    first = np.zeros(n)
    for y, gamma in zip(sequences, gammas):
        weight += gamma.sum(axis=0)
        first += gamma.T @ y
    mu = np.where(weight > MIN_STATE_MASS, first / np.maximum(weight, MIN_STATE_MASS), outputs.mu)
    second = np.zeros(n)
    for y, gamma in zip(sequences, gammas):
        second += np.einsum("tk,tk->k", gamma, (y[:, None] - mu) ** 2)
    sigma2 = np.where(weight > MIN_STATE_MASS, second / np.maximum(weight, MIN_STATE_MASS), outputs.sigma2)
    sigma2 = np.maximum(sigma2, var_floor)
    return GaussianOutputModel(tuple(zip(mu.tolist(), sigma2.tolist())))


def baum_welch(y, n: int, init: BaumWelchInit, max_iters: int = 20) -> BaumWelchResult:
    """
    Iteraciones de Baum-Welch desde init

    Args:
        y: Secuencia (o lista de secuencias independientes)
        n: Número de estados
        init: A0, salidas iniciales, fix_outputs
        max_iters: Número de iteraciones (20 en el estudio de simulación)

    Returns:
        BaumWelchResult con la traza de log-verosimilitud y de A por iteración
    """
    if init.A0.n != n or init.outputs0.n != n:
        raise ValueError(f"La inicialización no tiene {n} estados")
    discrete = isinstance(init.outputs0, DiscreteOutputModel)
    dtype = int if discrete else float
    sequences = [np.asarray(s, dtype=dtype).reshape(-1) for s in as_sequence_list(y)]
    var_floor = 0.0 if discrete else 1e-6 * float(np.var(np.concatenate(sequences)))

    A = init.A0.entries.copy()
    outputs = init.outputs0
    initial = (
        np.asarray(init.initial, dtype=float)
        if init.initial is not None
        else _initial_distribution(init.A0)
    )
    loglik_trace: List[float] = []
    A_trace: List[np.ndarray] = []

    for iteration in range(1, max_iters + 1):
        counts = np.zeros((n, n))
        gammas = []
        first_gammas = []
        loglik = 0.0
        for seq in sequences:
            b, offset = emission_matrix(seq, outputs)
            fb = forward_backward(b, A, initial, offset)
            counts += fb.transition_counts
            gammas.append(fb.gamma)
            first_gammas.append(fb.gamma[0])
            loglik += fb.loglik

        if __debug__ and loglik_trace:
            assert loglik >= loglik_trace[-1] - 1e-8 * (1.0 + abs(loglik_trace[-1])), (
                f"La log-verosimilitud de Baum-Welch bajó: {loglik_trace[-1]} -> {loglik}"
            )
        loglik_trace.append(loglik)
        logger.debug(f"Baum-Welch iteración {iteration}: loglik {loglik:.6f}")

        col_mass = counts.sum(axis=0)
        A = np.where(col_mass > MIN_STATE_MASS, counts / np.maximum(col_mass, MIN_STATE_MASS), A)
        A = A / A.sum(axis=0)
        A_trace.append(A.copy())
        if not init.fix_outputs:
            outputs = _update_outputs(outputs, sequences, gammas, var_floor)
        initial = np.mean(first_gammas, axis=0)
        initial = initial / initial.sum()

    return BaumWelchResult(
        A_hat=TransitionMatrix.from_estimate(A),
        outputs_hat=outputs,
        loglik_trace=loglik_trace,
        iterations=max_iters,
        A_trace=A_trace,
        initial=initial,
    )


def random_gaussian_outputs(y, n: int, rng: np.random.Generator) -> GaussianOutputModel:
    """Medias uniformes entre los cuantiles 5% y 95% de y, varianza de los datos"""
    y = np.concatenate([np.asarray(s, dtype=float).reshape(-1) for s in as_sequence_list(y)])
    low, high = np.quantile(y, [0.05, 0.95])
    mu = np.sort(rng.uniform(low, high, size=n))
    sigma2 = float(np.var(y))
    return GaussianOutputModel(tuple((float(m), sigma2) for m in mu))


def random_init(
    n: int,
    seed: Union[int, np.random.SeedSequence],
    outputs0: Optional[OutputModel] = None,
    y=None,
    fix_outputs: bool = False,
    m: Optional[int] = None,
) -> BaumWelchInit:
    """
    A0 con columnas Dirichlet(1, ..., 1)

    Sin salidas iniciales: con m se sortea una B discreta (columnas Dirichlet),
    si no, gaussianas a partir de los datos.
    """
    rng = make_rng(seed)
    A0 = TransitionMatrix.from_estimate(random_transition_matrix(n, rng))
    if outputs0 is None:
        if m is not None:
            B = rng.dirichlet(np.ones(m), size=n).T
            outputs0 = DiscreteOutputModel(B / B.sum(axis=0))
        elif y is not None:
            outputs0 = random_gaussian_outputs(y, n, rng)
        else:
            raise ValueError("Sin salidas iniciales se requieren los datos (o m) para sortearlas")
    return BaumWelchInit(A0=A0, outputs0=outputs0, fix_outputs=fix_outputs)
