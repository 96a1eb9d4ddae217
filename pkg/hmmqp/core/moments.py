"""
Momentos empíricos de una pasada, oráculo analítico y matrices efectivas K y F

Discreto:  rho = B pi,  sigma_{kk'} = sum_{l l'} pi_l A_{l'l} B_{kl} B_{k'l'}
Continuo:  xi = K pi,   eta = F diag(pi) A^T F^T,  eta' = K diag(pi) A^T K^T
"""
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np
from scipy.special import logsumexp

from ..exceptions import InvalidModel, SequenceTooShort, SymbolOutOfRange
from .model import (
    GaussianOutputModel,
    HMMSpec,
    smallest_singular_value,
    stationary_distribution,
)
from .quadrature import QUAD_TOL, gaussian_support, integrate
from ..preprocessing.chunker import SequenceChunker, as_sequence_list

PI_FLOOR = 1e-12
DEFAULT_CHUNK_SIZE = 65536


def _readonly(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class DiscreteMoments:
    """rho_hat (m,), sigma_hat (m, m) y T; T=None indica momentos exactos"""
    rho_hat: np.ndarray
    sigma_hat: np.ndarray
    T: Optional[int] = None

    def __post_init__(self):
        rho = _readonly(self.rho_hat)
        sigma = _readonly(self.sigma_hat)
        if sigma.shape != (rho.shape[0], rho.shape[0]):
            raise InvalidModel(f"sigma_hat debe ser {rho.shape[0]}x{rho.shape[0]}")
        if np.any(rho < 0) or abs(rho.sum() - 1.0) > 1e-12:
            raise InvalidModel("rho_hat debe ser un vector de probabilidad")
        if np.any(sigma < 0) or abs(sigma.sum() - 1.0) > 1e-12:
            raise InvalidModel("sigma_hat debe sumar 1")
        object.__setattr__(self, "rho_hat", rho)
        object.__setattr__(self, "sigma_hat", sigma)

    @property
    def m(self) -> int:
        return self.rho_hat.shape[0]

    def to_dict(self) -> Dict[str, Any]:
        return {"rho": self.rho_hat.tolist(), "sigma": self.sigma_hat.tolist(), "T": self.T}


@dataclass(frozen=True)
class ContinuousMoments:
    """xi_hat (n,), eta_hat (n, n), eta_prime_hat opcional y T"""
    xi_hat: np.ndarray
    eta_hat: Optional[np.ndarray] = None
    eta_prime_hat: Optional[np.ndarray] = None
    T: Optional[int] = None

    def __post_init__(self):
        xi = _readonly(self.xi_hat)
        if np.any(xi < 0):
            raise InvalidModel("xi_hat debe ser no negativo")
        object.__setattr__(self, "xi_hat", xi)
        if self.eta_hat is not None:
            eta = _readonly(self.eta_hat)
            if np.any(eta < 0) or abs(eta.sum() - 1.0) > 1e-10:
                raise InvalidModel("eta_hat debe ser no negativa y sumar 1")
            object.__setattr__(self, "eta_hat", eta)
        if self.eta_prime_hat is not None:
            object.__setattr__(self, "eta_prime_hat", _readonly(self.eta_prime_hat))

    @property
    def n(self) -> int:
        return self.xi_hat.shape[0]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "xi": self.xi_hat.tolist(),
            "eta": None if self.eta_hat is None else self.eta_hat.tolist(),
            "eta_prime": None if self.eta_prime_hat is None else self.eta_prime_hat.tolist(),
            "T": self.T,
        }


Moments = Union[DiscreteMoments, ContinuousMoments]


def moments_from_dict(data: Dict[str, Any]) -> Moments:
    if "rho" in data:
        return DiscreteMoments(np.array(data["rho"]), np.array(data["sigma"]), data.get("T"))
    if "xi" in data:
        return ContinuousMoments(
            np.array(data["xi"]),
            None if data.get("eta") is None else np.array(data["eta"]),
            None if data.get("eta_prime") is None else np.array(data["eta_prime"]),
            data.get("T"),
        )
    raise InvalidModel("El JSON de momentos debe tener 'rho' o 'xi'")


def save_moments(moments: Moments, path: Union[str, Path]) -> Path:
    """Cachea momentos en JSON para reutilizar pasadas costosas"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(moments.to_dict(), f)
    return path


def load_moments(path: Union[str, Path]) -> Moments:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Archivo de momentos no encontrado: {path}")
    with open(path, "r", encoding="utf-8") as f:
        return moments_from_dict(json.load(f))


@dataclass(frozen=True)
class EffectiveMatrices:
    """K, F opcional y sus valores singulares mínimos"""
    K: np.ndarray
    F: Optional[np.ndarray] = None
    sigma1_K: float = 0.0
    sigma1_F: Optional[float] = None

    def __post_init__(self):
        K = _readonly(self.K)
        if not np.allclose(K, K.T, atol=1e-10, rtol=0):
            raise InvalidModel("K debe ser simétrica")
        object.__setattr__(self, "K", K)
        if self.F is not None:
            F = _readonly(self.F)
            if np.max(np.abs(F.sum(axis=0) - 1.0)) > 10 * QUAD_TOL:
                raise InvalidModel("Las columnas de F deben sumar 1")
            object.__setattr__(self, "F", F)


# Acumuladores en streaming

class DiscretePairAccumulator:
    """Conteos n_k y n_{kk'} fusionables entre chunks"""

    def __init__(self, m: int):
        self.m = int(m)
        self.counts = np.zeros(self.m, dtype=np.int64)
        self.pair_counts = np.zeros((self.m, self.m), dtype=np.int64)
        self.n_obs = 0
        self.n_pairs = 0
        self.first: Optional[int] = None
        self.last: Optional[int] = None

    def update(self, chunk: np.ndarray) -> "DiscretePairAccumulator":
        chunk = np.asarray(chunk)
        if chunk.size == 0:
            return self
        if not np.issubdtype(chunk.dtype, np.integer):
            if np.any(chunk != np.round(chunk)):
                raise SymbolOutOfRange("Los símbolos discretos deben ser enteros")
            chunk = chunk.astype(np.int64)
        if chunk.min() < 0 or chunk.max() >= self.m:
            bad = int(chunk[(chunk < 0) | (chunk >= self.m)][0])
            raise SymbolOutOfRange(f"Símbolo {bad} fuera de [0, {self.m})")

        self.counts += np.bincount(chunk, minlength=self.m)
        prev = chunk[:-1]
        nxt = chunk[1:]
        if self.last is not None:
            prev = np.concatenate([[self.last], prev])
            nxt = chunk
        if prev.size:
            codes = prev * self.m + nxt
            self.pair_counts += np.bincount(codes, minlength=self.m * self.m).reshape(self.m, self.m)
            self.n_pairs += int(prev.size)
        if self.first is None:
            self.first = int(chunk[0])
        self.last = int(chunk[-1])
        self.n_obs += int(chunk.size)
        return self

    def merge(self, other: "DiscretePairAccumulator", contiguous: bool = True) -> "DiscretePairAccumulator":
        """
        Fusiona con el acumulador del bloque siguiente; con contiguous=False
        se tratan como secuencias independientes (sin par en el borde)
        """
        merged = DiscretePairAccumulator(self.m)
        merged.counts = self.counts + other.counts
        merged.pair_counts = self.pair_counts + other.pair_counts
        merged.n_obs = self.n_obs + other.n_obs
        merged.n_pairs = self.n_pairs + other.n_pairs
        if contiguous and self.last is not None and other.first is not None:
            merged.pair_counts[self.last, other.first] += 1
            merged.n_pairs += 1
        merged.first = self.first if self.first is not None else other.first
        merged.last = other.last if other.last is not None else self.last
        return merged

    def finalize(self) -> DiscreteMoments:
        if self.n_obs < 2 or self.n_pairs < 1:
            raise SequenceTooShort(f"Se requieren T >= 2 observaciones, hay {self.n_obs}")
        return DiscreteMoments(
            self.counts / self.n_obs,
            self.pair_counts / self.n_pairs,
            self.n_obs,
        )


def state_posteriors(y: np.ndarray, outputs: GaussianOutputModel, pi: np.ndarray) -> np.ndarray:
    """
    P(k | y_t) = pi_k f_k(y_t) / sum_l pi_l f_l(y_t), calculado en escala log

    pi se acota por debajo en PI_FLOOR para que ninguna observación quede con 0/0
    """
    pi = np.clip(np.asarray(pi, dtype=float), PI_FLOOR, None)
    log_joint = outputs.log_densities(y) + np.log(pi / pi.sum())
    return np.exp(log_joint - logsumexp(log_joint, axis=1, keepdims=True))


class ContinuousMomentAccumulator:
    """
    Sumas de f_k(y_t), P(k|y_{t-1}) P(k'|y_t) y f_k(y_{t-1}) f_{k'}(y_t)

    eta requiere pi_hat; si no se pasa, solo se acumulan xi y eta'.
    """

    def __init__(
        self,
        outputs: GaussianOutputModel,
        pi_hat: Optional[np.ndarray] = None,
        with_eta_prime: bool = False,
    ):
        self.outputs = outputs
        self.pi_hat = None if pi_hat is None else np.asarray(pi_hat, dtype=float)
        self.with_eta_prime = with_eta_prime
        n = outputs.n
        self.xi_sum = np.zeros(n)
        self.eta_sum = np.zeros((n, n)) if pi_hat is not None else None
        self.eta_prime_sum = np.zeros((n, n)) if with_eta_prime else None
        self.n_obs = 0
        self.n_pairs = 0
        self.first_phi = self.last_phi = None
        self.first_post = self.last_post = None

    def update(self, chunk: np.ndarray) -> "ContinuousMomentAccumulator":
        chunk = np.asarray(chunk, dtype=float).reshape(-1)
        if chunk.size == 0:
            return self
        phi = self.outputs.densities(chunk)
        self.xi_sum += phi.sum(axis=0)

        post = None
        if self.eta_sum is not None:
            post = state_posteriors(chunk, self.outputs, self.pi_hat)
            left = post[:-1] if self.last_post is None else np.vstack([self.last_post, post[:-1]])
            right = post[1:] if self.last_post is None else post
            self.eta_sum += left.T @ right
        if self.eta_prime_sum is not None:
            left = phi[:-1] if self.last_phi is None else np.vstack([self.last_phi, phi[:-1]])
            right = phi[1:] if self.last_phi is None else phi
            self.eta_prime_sum += left.T @ right

        self.n_pairs += chunk.size - 1 + (0 if self.last_phi is None else 1)
        if self.first_phi is None:
            self.first_phi = phi[0]
            self.first_post = None if post is None else post[0]
        self.last_phi = phi[-1]
        self.last_post = None if post is None else post[-1]
        self.n_obs += chunk.size
        return self

    def merge(self, other: "ContinuousMomentAccumulator", contiguous: bool = True) -> "ContinuousMomentAccumulator":
        merged = ContinuousMomentAccumulator(self.outputs, self.pi_hat, self.with_eta_prime)
        merged.xi_sum = self.xi_sum + other.xi_sum
        merged.n_obs = self.n_obs + other.n_obs
        merged.n_pairs = self.n_pairs + other.n_pairs
        bridge = contiguous and self.last_phi is not None and other.first_phi is not None
        if merged.eta_sum is not None:
            merged.eta_sum = self.eta_sum + other.eta_sum
            if bridge:
                merged.eta_sum += np.outer(self.last_post, other.first_post)
        if merged.eta_prime_sum is not None:
            merged.eta_prime_sum = self.eta_prime_sum + other.eta_prime_sum
            if bridge:
                merged.eta_prime_sum += np.outer(self.last_phi, other.first_phi)
        if bridge:
            merged.n_pairs += 1
        src_first = self if self.first_phi is not None else other
        src_last = other if other.last_phi is not None else self
        merged.first_phi, merged.first_post = src_first.first_phi, src_first.first_post
        merged.last_phi, merged.last_post = src_last.last_phi, src_last.last_post
        return merged

    def xi(self) -> np.ndarray:
        if self.n_obs < 1:
            raise SequenceTooShort("La secuencia está vacía")
        return self.xi_sum / self.n_obs

    def eta(self) -> np.ndarray:
        if self.eta_sum is None:
            raise ValueError("eta requiere pi_hat")
        if self.n_pairs < 1:
            raise SequenceTooShort(f"Se requieren T >= 2 observaciones, hay {self.n_obs}")
        eta = self.eta_sum / self.n_pairs
        # La suma es 1 salvo redondeo; se corrige el último ulp
        return eta / eta.sum()

    def eta_prime(self) -> np.ndarray:
        if self.eta_prime_sum is None:
            raise ValueError("El acumulador no registra eta'")
        if self.n_pairs < 1:
            raise SequenceTooShort(f"Se requieren T >= 2 observaciones, hay {self.n_obs}")
        return self.eta_prime_sum / self.n_pairs

    def finalize(self) -> ContinuousMoments:
        return ContinuousMoments(
            self.xi(),
            self.eta() if self.eta_sum is not None else None,
            self.eta_prime() if self.eta_prime_sum is not None else None,
            self.n_obs,
        )


def _accumulate(y, make_acc, dtype, chunk_size: int):
    """Recorre una o varias secuencias por chunks y fusiona como independientes"""
    chunker = SequenceChunker(chunk_size, dtype=dtype)
    total = None
    for seq in as_sequence_list(y):
        acc = make_acc()
        for chunk in chunker.iter_chunks(seq):
            acc.update(chunk)
        total = acc if total is None else total.merge(acc, contiguous=False)
    return total


# Estimadores empíricos

def empirical_rho_sigma(y, m: int, chunk_size: int = DEFAULT_CHUNK_SIZE) -> DiscreteMoments:
    """
    rho_hat_k = n_k / T y sigma_hat_{kk'} = n_{kk'} / (T - 1) en una sola pasada

    Args:
        y: Secuencia de símbolos en [0, m) (o lista de secuencias independientes)
        m: Tamaño del alfabeto

    Raises:
        SymbolOutOfRange, SequenceTooShort
    """
    acc = _accumulate(y, lambda: DiscretePairAccumulator(m), None, chunk_size)
    return acc.finalize()


def empirical_xi(y, outputs: GaussianOutputModel, chunk_size: int = DEFAULT_CHUNK_SIZE) -> np.ndarray:
    """xi_hat_k = (1/T) sum_t f_k(y_t)"""
    acc = _accumulate(y, lambda: ContinuousMomentAccumulator(outputs), float, chunk_size)
    return acc.xi()


def empirical_eta(
    y,
    outputs: GaussianOutputModel,
    pi_hat: np.ndarray,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> np.ndarray:
    """eta_hat_{kk'} = (1/(T-1)) sum_t P_hat(k|y_{t-1}) P_hat(k'|y_t)"""
    acc = _accumulate(y, lambda: ContinuousMomentAccumulator(outputs, pi_hat), float, chunk_size)
    return acc.eta()


def empirical_eta_prime(y, outputs: GaussianOutputModel, chunk_size: int = DEFAULT_CHUNK_SIZE) -> np.ndarray:
    """
    eta'_hat_{kk'} = (1/(T-1)) sum_t f_k(y_{t-1}) f_{k'}(y_t)

    Promedio de pares de la definición E[f_k(Y) f_k'(Y')].
    """
    acc = _accumulate(
        y, lambda: ContinuousMomentAccumulator(outputs, with_eta_prime=True), float, chunk_size
    )
    return acc.eta_prime()


def empirical_continuous_moments(
    y,
    outputs: GaussianOutputModel,
    pi_hat: Optional[np.ndarray] = None,
    with_eta_prime: bool = False,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> ContinuousMoments:
    """xi_hat, eta_hat (si hay pi_hat) y eta'_hat en una misma pasada"""
    acc = _accumulate(
        y,
        lambda: ContinuousMomentAccumulator(outputs, pi_hat, with_eta_prime),
        float,
        chunk_size,
    )
    return acc.finalize()


# Matrices efectivas

def gaussian_K(outputs: GaussianOutputModel) -> np.ndarray:
    """Forma cerrada K_ij = N(mu_i - mu_j; 0, s_i^2 + s_j^2)"""
    mu, s2 = outputs.mu, outputs.sigma2
    var = s2[:, None] + s2[None, :]
    diff2 = (mu[:, None] - mu[None, :]) ** 2
    return np.exp(-0.5 * diff2 / var) / (np.sqrt(2.0 * np.pi) * np.sqrt(var))


def quadrature_K(outputs: GaussianOutputModel, rel_tol: float = QUAD_TOL) -> np.ndarray:
    """K_ij = int f_i f_j dy por Simpson adaptativo (valida gaussian_K)"""
    a, b = gaussian_support(outputs.mu, outputs.sigma2)

    def integrand(x):
        f = outputs.densities(x)
        return f[:, :, None] * f[:, None, :]

    K = integrate(integrand, a, b, rel_tol=rel_tol, breakpoints=outputs.mu)
    return 0.5 * (K + K.T)


def compute_F(outputs: GaussianOutputModel, pi: np.ndarray, rel_tol: float = QUAD_TOL) -> np.ndarray:
    """
    F_kj = int P(k|y) f_j(y) dy, matriz de observación efectiva

    Args:
        outputs: Componentes gaussianas
        pi: Distribución de estados usada en el posterior (se acota en PI_FLOOR)

    Returns:
        Matriz n x n estocástica por columnas
    """
    pi = np.asarray(pi, dtype=float)
    if pi.shape != (outputs.n,):
        raise InvalidModel(f"pi debe tener {outputs.n} entradas")
    if outputs.n == 1:
        return np.ones((1, 1))
    a, b = gaussian_support(outputs.mu, outputs.sigma2)

    def integrand(x):
        post = state_posteriors(x, outputs, pi)
        f = outputs.densities(x)
        return post[:, :, None] * f[:, None, :]

    return integrate(integrand, a, b, rel_tol=rel_tol, breakpoints=outputs.mu)


def effective_matrices(outputs: GaussianOutputModel, pi: Optional[np.ndarray] = None) -> EffectiveMatrices:
    """K (forma cerrada) y, si se da pi, F con sus sigma_1"""
    K = gaussian_K(outputs)
    F = None if pi is None else compute_F(outputs, pi)
    return EffectiveMatrices(
        K=K,
        F=F,
        sigma1_K=smallest_singular_value(K),
        sigma1_F=None if F is None else smallest_singular_value(F),
    )


def analytic_moments(spec: HMMSpec) -> Moments:
    """
    Momentos poblacionales exactos (oráculo para los tests)

    Discreto: DiscreteMoments(rho, sigma, T=None)
    Continuo: ContinuousMoments(xi, eta, eta', T=None)
    """
    pi = stationary_distribution(spec.A)
    A = spec.A.entries
    if spec.is_discrete:
        B = spec.outputs.B
        rho = B @ pi
        sigma = B @ np.diag(pi) @ A.T @ B.T
        # Normalización exacta hasta el redondeo
        return DiscreteMoments(rho / rho.sum(), sigma / sigma.sum(), None)

    K = gaussian_K(spec.outputs)
    F = compute_F(spec.outputs, pi)
    xi = K @ pi
    eta = F @ np.diag(pi) @ A.T @ F.T
    eta_prime = K @ np.diag(pi) @ A.T @ K.T
    return ContinuousMoments(xi, eta / eta.sum(), eta_prime, None)
